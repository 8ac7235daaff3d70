#pragma once

// Synthetic bandit-with-covariates environments.
//
// Arms are 0-based here; the textbook formulas index arms a = 1, 2, so arm
// index i corresponds to a = i + 1.
//
//   Setting 1 (d=1, Uniform(-1,1)):  f_0 = sin(pi x), f_1 = cos(pi x)
//   Setting 2 (d=2, Uniform(-1,1)^2): chessboard of board_cells x board_cells
//       cells over [-1,1]^2; arm 0 pays 1 on cells with (row + col) even,
//       arm 1 on the others.
//   Setting 3 (d=3, truncated normal on [-10,10]^3):
//       f_a = max(0, 1 - |a - a*| - <w*, x - x*>), a* = 2, x*, w* ~ U[-1,1]^3
//   Setting 4 (d=3, truncated normal on [-10,10]^3):
//       f_a = 1{|x - (a - 0.5)|_1 < 4} + 0.5 * 1{|x - (a - 1)|_1 < 4}
//   InRkhs: f_i = sum_j c_ij k(z_ij, .) for a chosen kernel.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kbandit/errors.hpp"
#include "kbandit/estimator.hpp"
#include "kbandit/kernels.hpp"
#include "kbandit/policy.hpp"
#include "kbandit/rng.hpp"

namespace kbandit {

enum class ContextDist { Uniform, TruncNormal };
enum class SettingKind { Setting1, Setting2, Setting3, Setting4, InRkhs };

inline constexpr double kTruncBound = 10.0;

struct EnvironmentSpec {
    SettingKind setting = SettingKind::Setting1;
    int num_arms = 2;
    int dim = 1;
    ContextDist contexts = ContextDist::Uniform;
    double noise_sigma = 0.5;
    int board_cells = 4;  // Setting 2

    // InRkhs only
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    std::vector<KernelExpansion> expansions;

    bool operator==(const EnvironmentSpec& o) const {
        if (setting != o.setting || num_arms != o.num_arms || dim != o.dim || contexts != o.contexts ||
            noise_sigma != o.noise_sigma || board_cells != o.board_cells || !(kernel == o.kernel) ||
            expansions.size() != o.expansions.size()) {
            return false;
        }
        for (std::size_t i = 0; i < expansions.size(); ++i) {
            const auto& a = expansions[i];
            const auto& b = o.expansions[i];
            if (a.points.size() != b.points.size() || a.coeffs != b.coeffs) return false;
            for (std::size_t j = 0; j < a.points.size(); ++j) {
                if (a.points[j] != b.points[j]) return false;
            }
        }
        return true;
    }
};

/// Canonical spec for one of the four simulation settings.
[[nodiscard]] inline EnvironmentSpec setting_spec(int which, double noise_sigma = 0.5) {
    EnvironmentSpec s;
    s.noise_sigma = noise_sigma;
    s.num_arms = 2;
    switch (which) {
        case 1: s.setting = SettingKind::Setting1; s.dim = 1; s.contexts = ContextDist::Uniform; break;
        case 2: s.setting = SettingKind::Setting2; s.dim = 2; s.contexts = ContextDist::Uniform; break;
        case 3: s.setting = SettingKind::Setting3; s.dim = 3; s.contexts = ContextDist::TruncNormal; break;
        case 4: s.setting = SettingKind::Setting4; s.dim = 3; s.contexts = ContextDist::TruncNormal; break;
        default: throw InvalidInput("setting must be 1..4");
    }
    return s;
}

class Environment {
public:
    /// `seed` drives the random parameters of Setting 3 (x*, w*); other settings ignore it.
    static Environment make(const EnvironmentSpec& spec, std::uint64_t seed) {
        if (spec.num_arms < 2) throw InvalidInput("environment: need at least two arms");
        if (spec.dim < 1) throw InvalidInput("environment: dimension must be positive");
        if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) throw InvalidInput("environment: noise_sigma must be >= 0");
        Environment env;
        env.spec_ = spec;
        switch (spec.setting) {
            case SettingKind::Setting1:
            case SettingKind::Setting2:
            case SettingKind::Setting3:
            case SettingKind::Setting4: {
                const int want_dim = spec.setting == SettingKind::Setting1 ? 1 : spec.setting == SettingKind::Setting2 ? 2 : 3;
                if (spec.num_arms != 2 || spec.dim != want_dim) {
                    throw InvalidInput("environment: setting requires L=2 and d=" + std::to_string(want_dim));
                }
                if (spec.setting == SettingKind::Setting2 && spec.board_cells < 1) throw InvalidInput("environment: board_cells must be >= 1");
                break;
            }
            case SettingKind::InRkhs:
                if (static_cast<int>(spec.expansions.size()) != spec.num_arms) {
                    throw InvalidInput("environment: need one kernel expansion per arm");
                }
                for (const auto& e : spec.expansions) {
                    if (e.points.empty()) throw InvalidInput("environment: kernel expansion is empty");
                    if (static_cast<std::size_t>(e.coeffs.size()) != e.points.size()) {
                        throw InvalidInput("environment: coefficient/point count mismatch");
                    }
                    for (const auto& z : e.points) {
                        if (z.size() != spec.dim) throw InvalidInput("environment: expansion point dimension mismatch");
                    }
                }
                break;
        }
        if (spec.setting == SettingKind::Setting3) {
            Rng rng = make_rng(seed, Stream::Environment);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            env.x_star_ = Vector(3);
            env.w_star_ = Vector(3);
            for (int i = 0; i < 3; ++i) env.x_star_[i] = u(rng);
            for (int i = 0; i < 3; ++i) env.w_star_[i] = u(rng);
        }
        return env;
    }

    [[nodiscard]] const EnvironmentSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] int num_arms() const noexcept { return spec_.num_arms; }
    [[nodiscard]] int dim() const noexcept { return spec_.dim; }
    [[nodiscard]] double noise_sigma() const noexcept { return spec_.noise_sigma; }
    [[nodiscard]] const Vector& x_star() const noexcept { return x_star_; }
    [[nodiscard]] const Vector& w_star() const noexcept { return w_star_; }

    /// Overrides the random Setting 3 parameters.
    void set_setting3_params(Vector x_star, Vector w_star) {
        if (spec_.setting != SettingKind::Setting3 || x_star.size() != 3 || w_star.size() != 3) {
            throw InvalidInput("environment: setting 3 parameters must be 3-vectors");
        }
        x_star_ = std::move(x_star);
        w_star_ = std::move(w_star);
    }

    /// sup ||x|| over the context support.
    [[nodiscard]] double support_radius() const {
        const double side = spec_.contexts == ContextDist::Uniform ? 1.0 : kTruncBound;
        return side * std::sqrt(static_cast<double>(spec_.dim));
    }

    template <class G>
    [[nodiscard]] Vector sample_context(G& rng) const {
        Vector x(spec_.dim);
        if (spec_.contexts == ContextDist::Uniform) {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (int i = 0; i < spec_.dim; ++i) x[i] = u(rng);
        } else {
            std::normal_distribution<double> n(0.0, 1.0);
            for (int i = 0; i < spec_.dim; ++i) {
                double v;
                do { v = n(rng); } while (!(std::abs(v) <= kTruncBound));
                x[i] = v;
            }
        }
        return x;
    }

    [[nodiscard]] double mean_reward(int arm, const Vector& x) const {
        if (arm < 0 || arm >= spec_.num_arms) throw InvalidInput("environment: invalid arm " + std::to_string(arm));
        if (x.size() != spec_.dim) throw InvalidInput("environment: context dimension mismatch");
        const double a = arm + 1.0;
        switch (spec_.setting) {
            case SettingKind::Setting1:
                return arm == 0 ? std::sin(std::numbers::pi * x[0]) : std::cos(std::numbers::pi * x[0]);
            case SettingKind::Setting2: {
                const int cells = spec_.board_cells;
                auto cell = [cells](double v) {
                    const int c = static_cast<int>(std::floor((v + 1.0) * cells / 2.0));
                    return std::clamp(c, 0, cells - 1);
                };
                const bool even = (cell(x[0]) + cell(x[1])) % 2 == 0;
                return (even == (arm == 0)) ? 1.0 : 0.0;
            }
            case SettingKind::Setting3: {
                constexpr double a_star = 2.0;
                return std::max(0.0, 1.0 - std::abs(a - a_star) - w_star_.dot(x - x_star_));
            }
            case SettingKind::Setting4: {
                const double near = (x.array() - (a - 0.5)).abs().sum() < 4.0 ? 1.0 : 0.0;
                const double far = (x.array() - (a - 1.0)).abs().sum() < 4.0 ? 0.5 : 0.0;
                return near + far;
            }
            case SettingKind::InRkhs:
                return spec_.expansions[static_cast<std::size_t>(arm)](spec_.kernel, x);
        }
        return 0.0;
    }

    /// mean_reward + noise_sigma * z for a standard normal draw z.
    [[nodiscard]] double reward_from_noise(int arm, const Vector& x, double z) const {
        return mean_reward(arm, x) + spec_.noise_sigma * z;
    }

    template <class G>
    [[nodiscard]] double sample_reward(int arm, const Vector& x, G& rng) const {
        std::normal_distribution<double> n(0.0, 1.0);
        return reward_from_noise(arm, x, n(rng));
    }

    struct Optimum {
        int arm;
        double value;
    };

    /// Best arm under the true means. Values within 1e-12 * max(1, |v|) of the
    /// maximum are ties and go to the lowest index; `value` is the true maximum.
    [[nodiscard]] Optimum optimal_arm(const Vector& x) const {
        std::vector<double> v(static_cast<std::size_t>(spec_.num_arms));
        for (int a = 0; a < spec_.num_arms; ++a) v[static_cast<std::size_t>(a)] = mean_reward(a, x);
        const double best = *std::max_element(v.begin(), v.end());
        const double tol = 1e-12 * std::max(1.0, std::abs(best));
        for (int a = 0; a < spec_.num_arms; ++a) {
            if (v[static_cast<std::size_t>(a)] >= best - tol) return {a, best};
        }
        return {argmax_lowest(v), best};
    }

    /// E[x x^T] of the context distribution (coordinates are independent, mean zero).
    [[nodiscard]] Matrix second_moment() const {
        double var = 1.0 / 3.0;
        if (spec_.contexts == ContextDist::TruncNormal) {
            const double a = kTruncBound;
            const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
            const double mass = std::erf(a / std::sqrt(2.0));
            var = 1.0 - 2.0 * a * phi / mass;
        }
        return var * Matrix::Identity(spec_.dim, spec_.dim);
    }

    /// Exact RKHS representation of an InRkhs arm's mean function.
    [[nodiscard]] const KernelExpansion& expansion(int arm) const {
        if (spec_.setting != SettingKind::InRkhs) throw StateError("environment: not an in-RKHS environment");
        if (arm < 0 || arm >= spec_.num_arms) throw InvalidInput("environment: invalid arm");
        return spec_.expansions[static_cast<std::size_t>(arm)];
    }

private:
    EnvironmentSpec spec_;
    Vector x_star_;
    Vector w_star_;
};

/// Environment whose arm means are finite kernel expansions, so RKHS norms are exact.
[[nodiscard]] inline Environment make_inrkhs_environment(const KernelSpec& kernel, std::vector<KernelExpansion> expansions,
                                                         ContextDist contexts, double noise_sigma) {
    if (expansions.empty() || expansions.front().points.empty()) throw InvalidInput("make_inrkhs_environment: expansions must be nonempty");
    EnvironmentSpec spec;
    spec.setting = SettingKind::InRkhs;
    spec.num_arms = static_cast<int>(expansions.size());
    spec.dim = static_cast<int>(expansions.front().points.front().size());
    spec.contexts = contexts;
    spec.noise_sigma = noise_sigma;
    spec.kernel = kernel;
    spec.expansions = std::move(expansions);
    return Environment::make(spec, 0);
}

}  // namespace kbandit
