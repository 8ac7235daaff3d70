#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kbandit/environments.hpp"
#include "kbandit/errors.hpp"
#include "kbandit/estimator.hpp"
#include "kbandit/kernels.hpp"
#include "kbandit/policy.hpp"

namespace kbandit {

enum class PolicyKind { KernelEpsGreedy, KernelUcb, WlsEpsGreedy };

struct PolicySpec {
    PolicyKind kind = PolicyKind::KernelEpsGreedy;
    SolverPath solver = SolverPath::Dual;  // kernel epsilon-greedy only
    bool ridge = true;                     // weighted linear epsilon-greedy only
    double tau = 0.1;                      // kernel UCB exploration multiplier
    double ucb_lambda = 1.0;               // kernel UCB time-constant ridge
    bool augment_bias = false;             // append a constant-1 coordinate to learner contexts

    bool operator==(const PolicySpec&) const = default;
};

[[nodiscard]] inline std::string policy_name(const PolicySpec& p) {
    switch (p.kind) {
        case PolicyKind::KernelEpsGreedy: return "kernel_eps_greedy";
        case PolicyKind::KernelUcb: return "kernel_ucb";
        case PolicyKind::WlsEpsGreedy: return p.ridge ? "wls_ridge_eps_greedy" : "wls_eps_greedy";
    }
    return "unknown";
}

/// One lambda candidate in a cross-validation grid.
struct LambdaChoice {
    LambdaRegime regime = LambdaRegime::Fixed;
    double value = 1.0;  // Fixed: lambda; PowerLog: exponent p; FiniteDim/InfiniteDim: scale

    bool operator==(const LambdaChoice&) const = default;
};

struct CvSpec {
    int folds = 10;
    std::vector<LambdaChoice> lambdas;  // epsilon-greedy lambda_t grid
    std::vector<double> gammas;         // kernel length-scales
    std::vector<double> taus;           // UCB only
    std::vector<double> ucb_lambdas;    // UCB only

    bool operator==(const CvSpec&) const = default;
};

/// Arithmetic grid first, first+step, ... up to `last`; `last` itself is
/// appended when it is not on the lattice.
[[nodiscard]] inline std::vector<double> arithmetic_grid(double first, double step, double last) {
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double v = first + i * step;
        if (v > last + 1e-9 * step) break;
        out.push_back(std::round(v * 1e9) / 1e9);
    }
    if (out.empty() || std::abs(out.back() - last) > 1e-9 * step) out.push_back(last);
    return out;
}

/// Default grids of the cross-validation protocol.
[[nodiscard]] inline CvSpec default_eps_greedy_grid() {
    CvSpec cv;
    for (double p : {1.0 / 2, 1.0 / 4, 1.0 / 6, 1.0 / 8, 1.0 / 16}) cv.lambdas.push_back({LambdaRegime::PowerLog, p});
    for (double v : {5e-5, 0.005, 0.5}) cv.lambdas.push_back({LambdaRegime::Fixed, v});
    cv.gammas = arithmetic_grid(0.1, 0.2, 5.0);
    return cv;
}

[[nodiscard]] inline CvSpec default_ucb_grid() {
    CvSpec cv;
    cv.ucb_lambdas = arithmetic_grid(0.05, 0.1, 5.0);
    cv.gammas = arithmetic_grid(0.5, 1.0, 15.0);
    cv.taus = arithmetic_grid(0.05, 0.05, 0.9);
    return cv;
}

struct ExperimentConfig {
    EnvironmentSpec env;
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    PolicySpec policy;
    ScheduleSpec schedule;
    Step horizon = 1000;  // T
    Step t0 = 50;
    int n_runs = 25;
    std::uint64_t master_seed = 0;
    CvSpec cv;

    bool operator==(const ExperimentConfig&) const = default;

    /// Throws ConfigError naming the offending key.
    void validate() const {
        const int arms = env.num_arms;
        if (arms < 2) throw ConfigError("environment.arms", "need at least two arms");
        if (env.dim < 1) throw ConfigError("environment.dim", "must be >= 1");
        if (!(env.noise_sigma >= 0.0)) throw ConfigError("environment.noise_sigma", "must be >= 0");
        if (t0 < arms) throw ConfigError("run.t0", "must be >= number of arms (" + std::to_string(arms) + ")");
        if (horizon <= t0) throw ConfigError("run.T", "must be > t0");
        if (n_runs < 1) throw ConfigError("run.n_runs", "must be >= 1");
        if (kernel.kind == KernelKind::Gaussian && !(kernel.gamma > 0.0)) throw ConfigError("kernel.gamma", "must be > 0");
        if (policy.kind == PolicyKind::KernelUcb) {
            if (!(policy.ucb_lambda > 0.0)) throw ConfigError("policy.ucb_lambda", "must be > 0");
            if (!(policy.tau >= 0.0)) throw ConfigError("policy.tau", "must be >= 0");
        }
        try {
            schedule.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError("schedule", e.what());
        }
        if (env.setting == SettingKind::InRkhs) {
            if (static_cast<int>(env.expansions.size()) != arms) throw ConfigError("environment.arm", "need one expansion per arm");
            for (std::size_t i = 0; i < env.expansions.size(); ++i) {
                const auto& e = env.expansions[i];
                const std::string key = "environment.arm." + std::to_string(i);
                if (e.points.empty()) throw ConfigError(key, "expansion is empty");
                for (const auto& z : e.points) {
                    if (z.size() != env.dim) throw ConfigError(key, "point dimension does not match environment.dim");
                }
            }
        }
        if (cv.folds < 2) throw ConfigError("cv.folds", "must be >= 2");
    }
};

}  // namespace kbandit
