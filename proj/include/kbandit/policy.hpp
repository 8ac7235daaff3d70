#pragma once

// epsilon-greedy arm selection and the exploration / regularization schedules.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kbandit/errors.hpp"

namespace kbandit {

struct PolicyDecision {
    int chosen_arm = 0;
    int greedy_arm = 0;
    std::vector<double> propensities;
    bool explored = false;

    [[nodiscard]] double chosen_propensity() const { return propensities.at(static_cast<std::size_t>(chosen_arm)); }

    /// Non-greedy arms summed in index order, then the greedy arm added last.
    /// With the greedy mass set to 1 - (that partial sum) this is exactly 1.
    [[nodiscard]] double propensity_total() const {
        double others = 0.0;
        for (std::size_t a = 0; a < propensities.size(); ++a) {
            if (static_cast<int>(a) != greedy_arm) others += propensities[a];
        }
        return propensities[static_cast<std::size_t>(greedy_arm)] + others;
    }
};

/// Index of the largest value; ties go to the lowest index.
[[nodiscard]] inline int argmax_lowest(std::span<const double> values) {
    if (values.empty()) throw InvalidInput("argmax over an empty set");
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

/// Propensity vector of the epsilon-greedy rule for a given greedy arm.
[[nodiscard]] inline std::vector<double> eps_greedy_propensities(int num_arms, int greedy_arm, double eps) {
    std::vector<double> p(static_cast<std::size_t>(num_arms), eps / static_cast<double>(num_arms - 1));
    double others = 0.0;
    for (int a = 0; a < num_arms; ++a) {
        if (a != greedy_arm) others += p[static_cast<std::size_t>(a)];
    }
    p[static_cast<std::size_t>(greedy_arm)] = 1.0 - others;
    return p;
}

/// Greedy arm with probability 1 - eps, otherwise one of the other L - 1 arms
/// uniformly. The explore branch uses a single integer draw over L - 1 slots
/// and skips the greedy index.
template <class Rng>
[[nodiscard]] PolicyDecision select_arm(std::span<const double> estimates, double eps, Rng& rng) {
    const auto num_arms = static_cast<int>(estimates.size());
    if (num_arms < 2) throw InvalidInput("select_arm: need at least two arms");
    const double max_eps = static_cast<double>(num_arms - 1) / num_arms;
    if (!(eps >= 0.0) || eps > max_eps) {
        throw InvalidInput("select_arm: eps must lie in [0, (L-1)/L], got " + std::to_string(eps));
    }
    PolicyDecision d;
    d.greedy_arm = argmax_lowest(estimates);
    d.propensities = eps_greedy_propensities(num_arms, d.greedy_arm, eps);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < eps) {
        std::uniform_int_distribution<int> pick(0, num_arms - 2);
        const int j = pick(rng);
        d.chosen_arm = j < d.greedy_arm ? j : j + 1;
        d.explored = true;
    } else {
        d.chosen_arm = d.greedy_arm;
    }
    return d;
}

enum class EpsilonKind { PaperSim, PowerLaw, Constant };

enum class LambdaRegime {
    FiniteDim,    // scale * [(1/t^2) sum 1/eps_s]^{1/2}
    InfiniteDim,  // scale * [(1/(delta t^2)) sum 1/eps_s]^{alpha / (2 gamma alpha + alpha + 1)}
    Fixed,        // constant
    PowerLog,     // scale * t^{-p} / sqrt(ln t), the cross-validation grid family
};

struct ScheduleSpec {
    EpsilonKind eps_kind = EpsilonKind::PaperSim;
    double beta = 1.0 / 3.0;   // PowerLaw exponent
    double eps_scale = 1.0;    // PowerLaw multiplier
    double eps_value = 0.1;    // Constant

    LambdaRegime lambda_regime = LambdaRegime::FiniteDim;
    double alpha = 2.0;         // eigen-decay exponent, > 1
    double gamma_source = 0.5;  // source condition, (0, 1/2]
    double delta = 0.1;         // confidence, (0, 1)
    double lambda_value = 1.0;  // Fixed
    double lambda_power = 0.5;  // PowerLog exponent p
    double lambda_scale = 1.0;

    bool operator==(const ScheduleSpec&) const = default;

    /// Throws InvalidInput naming the offending field.
    void validate() const {
        auto fail = [](const std::string& what) { throw InvalidInput("schedule: " + what); };
        if (eps_kind == EpsilonKind::PowerLaw) {
            if (!(beta > 0.0 && beta < 1.0)) fail("beta must lie in (0, 1)");
            if (!(eps_scale > 0.0)) fail("epsilon scale must be > 0");
        }
        if (eps_kind == EpsilonKind::Constant && !(eps_value >= 0.0 && eps_value <= 1.0)) fail("constant epsilon must lie in [0, 1]");
        switch (lambda_regime) {
            case LambdaRegime::InfiniteDim:
                if (!(alpha > 1.0)) fail("alpha must be > 1");
                if (!(gamma_source > 0.0 && gamma_source <= 0.5)) fail("gamma_source must lie in (0, 1/2]");
                if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
                break;
            case LambdaRegime::Fixed:
                if (!(lambda_value > 0.0)) fail("fixed lambda must be > 0");
                break;
            case LambdaRegime::PowerLog:
                if (!(lambda_power >= 0.0)) fail("lambda power must be >= 0");
                break;
            case LambdaRegime::FiniteDim:
                break;
        }
        if (!(lambda_scale > 0.0)) fail("lambda scale must be > 0");
        if (eps_kind == EpsilonKind::Constant && eps_value == 0.0 && lambda_regime != LambdaRegime::Fixed &&
            lambda_regime != LambdaRegime::PowerLog) {
            fail("a zero exploration rate requires a lambda regime that does not sum 1/eps");
        }
    }
};

/// Exploration probability at step t >= 1, clamped above at (L-1)/L.
[[nodiscard]] inline double epsilon_at(const ScheduleSpec& spec, std::int64_t t, int num_arms) {
    if (t < 1) throw InvalidInput("epsilon_at: t must be >= 1");
    if (num_arms < 2) throw InvalidInput("epsilon_at: need at least two arms");
    const auto td = static_cast<double>(t);
    double eps = 0.0;
    switch (spec.eps_kind) {
        case EpsilonKind::PaperSim:
            eps = std::max(std::log(td) / std::sqrt(td) / 10.0, 0.02);
            break;
        case EpsilonKind::PowerLaw:
            eps = spec.eps_scale * std::pow(td, -spec.beta);
            break;
        case EpsilonKind::Constant:
            eps = spec.eps_value;
            break;
    }
    const double cap = static_cast<double>(num_arms - 1) / num_arms;
    return std::min(eps, cap);
}

/// (1/t^2) sum_{s<=t} 1/eps_s. Consistency of the estimator needs this to be o(1).
[[nodiscard]] inline double lambda_inner(std::int64_t t, double inverse_eps_sum) {
    const auto td = static_cast<double>(t);
    return inverse_eps_sum / (td * td);
}

/// lambda_t given the running sum of 1/eps_s over s = 1..t.
[[nodiscard]] inline double lambda_from_inverse_sum(const ScheduleSpec& spec, std::int64_t t, double inverse_eps_sum) {
    if (t < 1) throw InvalidInput("lambda_at: t must be >= 1");
    const auto td = static_cast<double>(t);
    switch (spec.lambda_regime) {
        case LambdaRegime::FiniteDim:
            return spec.lambda_scale * std::sqrt(lambda_inner(t, inverse_eps_sum));
        case LambdaRegime::InfiniteDim: {
            const double exponent = spec.alpha / (2.0 * spec.gamma_source * spec.alpha + spec.alpha + 1.0);
            return spec.lambda_scale * std::pow(lambda_inner(t, inverse_eps_sum) / spec.delta, exponent);
        }
        case LambdaRegime::Fixed:
            return spec.lambda_value;
        case LambdaRegime::PowerLog:
            if (t < 2) throw InvalidInput("lambda_at: the t^{-p}/sqrt(log t) family needs t >= 2");
            return spec.lambda_scale * std::pow(td, -spec.lambda_power) / std::sqrt(std::log(td));
    }
    return spec.lambda_value;
}

[[nodiscard]] inline bool lambda_needs_eps_history(const ScheduleSpec& spec) {
    return spec.lambda_regime == LambdaRegime::FiniteDim || spec.lambda_regime == LambdaRegime::InfiniteDim;
}

/// lambda_t from the full exploration history eps_1..eps_t (only the first t entries are used).
[[nodiscard]] inline double lambda_at(const ScheduleSpec& spec, std::int64_t t, std::span<const double> eps_history) {
    if (t < 1) throw InvalidInput("lambda_at: t must be >= 1");
    if (!lambda_needs_eps_history(spec)) return lambda_from_inverse_sum(spec, t, 0.0);
    if (static_cast<std::int64_t>(eps_history.size()) < t) throw InvalidInput("lambda_at: eps history shorter than t");
    double sum = 0.0;
    for (std::int64_t s = 0; s < t; ++s) {
        const double e = eps_history[static_cast<std::size_t>(s)];
        if (!(e > 0.0)) throw InvalidInput("lambda_at: exploration probabilities must be > 0");
        sum += 1.0 / e;
    }
    return lambda_from_inverse_sum(spec, t, sum);
}

}  // namespace kbandit
