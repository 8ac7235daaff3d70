#pragma once

// Online inverse-probability-weighted kernel ridge (IPWKR) estimator.
//
// For arm i after t global steps the fitted function is
//   f_i(x) = kbar(x)^T (Lambda_i K_t + t lambda I)^{-1} Lambda_i Y_t,
// with Lambda_i = diag(w_s) where w_s = 1 / P(arm i pulled at s) on the steps
// that pulled arm i and 0 elsewhere. Rows with w_s = 0 force a zero coefficient,
// so only the arm's own support S enters and the coefficients solve the
// symmetric positive-definite reduced system
//   (K_SS + t lambda W_S^{-1}) z = y_S.
// Note the global step count t multiplies lambda, not the arm's sample count.
//
// For kernels with an exact finite feature map phi the same function is
// f_i(x) = theta^T phi(x) with (Phi^T W Phi + t lambda I) theta = Phi^T W y,
// and the dual coefficients are recovered as z = W (y - Phi theta) / (t lambda).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbandit/errors.hpp"
#include "kbandit/features.hpp"
#include "kbandit/kernels.hpp"

namespace kbandit {

using Step = std::int64_t;

/// Per-arm log of weighted observations.
struct ArmHistory {
    std::vector<Vector> contexts;
    std::vector<double> rewards;
    std::vector<double> weights;       // 1 / propensity, always >= 1
    std::vector<double> propensities;  // as recorded by the policy
    std::vector<Step> global_times;    // strictly increasing

    [[nodiscard]] std::size_t size() const noexcept { return contexts.size(); }
    [[nodiscard]] bool empty() const noexcept { return contexts.empty(); }
};

/// Appends (x, y) with weight 1 / propensity. Leaves every other arm's history untouched.
inline void record_observation(ArmHistory& history, Step t, const Vector& x, double y, double propensity) {
    if (!(propensity > 0.0) || propensity > 1.0) {
        throw InvalidInput("record_observation: propensity must lie in (0, 1], got " + std::to_string(propensity));
    }
    if (!std::isfinite(y)) throw InvalidInput("record_observation: reward is not finite");
    if (!history.empty()) {
        if (x.size() != history.contexts.front().size()) throw InvalidInput("record_observation: context dimension mismatch");
        if (t <= history.global_times.back()) throw InvalidInput("record_observation: global times must be strictly increasing");
    }
    history.contexts.push_back(x);
    history.rewards.push_back(y);
    history.weights.push_back(1.0 / propensity);
    history.propensities.push_back(propensity);
    history.global_times.push_back(t);
}

/// Fitted state of one arm.
struct ArmFit {
    Vector dual_coeffs;  // over the arm's support, same order as ArmHistory
    double lambda = 0.0;
    Step t = 0;
    double jitter = 0.0;  // diagonal jitter that was needed, 0 in the normal case

    [[nodiscard]] bool fitted() const noexcept { return lambda > 0.0; }
};

enum class DualSolve { Cholesky, Svd };

namespace detail {

// Solves the SPD system `a x = b`; on factorization failure adds 1e-10 * trace / n
// to the diagonal, escalating x10 up to three times.
inline Vector solve_spd_with_jitter(Matrix a, const Vector& b, double* jitter_used) {
    const auto n = a.rows();
    const double base = 1e-10 * a.trace() / static_cast<double>(n);
    double jitter = 0.0;
    for (int attempt = 0; attempt <= 4; ++attempt) {
        if (attempt > 0) {
            const double next = base * std::pow(10.0, attempt - 1);
            a.diagonal().array() += next - jitter;
            jitter = next;
        }
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() == Eigen::Success) {
            Vector x = llt.solve(b);
            if (x.allFinite()) {
                if (jitter_used) *jitter_used = jitter;
                return x;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double cond = ev.size() ? std::abs(ev.maxCoeff()) / std::max(std::abs(ev.minCoeff()), 1e-300) : 0.0;
    throw NumericalError("reduced system is not positive definite after jitter escalation (n=" + std::to_string(n) +
                             ", condition estimate " + std::to_string(cond) + ")",
                         cond, jitter);
}

inline Vector solve_svd(const Matrix& a, const Vector& b) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = sv.size() ? 1e-14 * sv(0) : 0.0;
    Vector ut_b = svd.matrixU().transpose() * b;
    for (Eigen::Index i = 0; i < sv.size(); ++i) ut_b[i] = sv[i] > tol ? ut_b[i] / sv[i] : 0.0;
    return svd.matrixV() * ut_b;
}

inline void require_fit_inputs(std::size_t n, Step t, double lambda) {
    if (n == 0) throw InvalidInput("fit: arm history is empty");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidInput("fit: lambda must be > 0");
    if (t < static_cast<Step>(n)) throw InvalidInput("fit: t must be >= number of observations on the arm");
}

}  // namespace detail

/// Solves (gram + t lambda W^{-1}) z = y given the arm's Gram matrix.
[[nodiscard]] inline ArmFit solve_reduced(const Matrix& gram, std::span<const double> weights,
                                          std::span<const double> rewards, Step t, double lambda,
                                          DualSolve method = DualSolve::Cholesky) {
    const auto n = gram.rows();
    detail::require_fit_inputs(static_cast<std::size_t>(n), t, lambda);
    if (gram.cols() != n || static_cast<Eigen::Index>(weights.size()) != n || static_cast<Eigen::Index>(rewards.size()) != n) {
        throw InvalidInput("solve_reduced: size mismatch");
    }
    const double shift = static_cast<double>(t) * lambda;
    Matrix a = gram;
    Vector y(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        a(s, s) += shift / weights[static_cast<std::size_t>(s)];
        y[s] = rewards[static_cast<std::size_t>(s)];
    }
    ArmFit out;
    out.lambda = lambda;
    out.t = t;
    if (method == DualSolve::Svd) {
        out.dual_coeffs = detail::solve_svd(a, y);
    } else {
        out.dual_coeffs = detail::solve_spd_with_jitter(std::move(a), y, &out.jitter);
    }
    return out;
}

/// Refits one arm from scratch.
[[nodiscard]] inline ArmFit fit(const KernelSpec& kernel, const ArmHistory& history, Step t, double lambda,
                                DualSolve method = DualSolve::Cholesky) {
    detail::require_fit_inputs(history.size(), t, lambda);
    return solve_reduced(gram_matrix(kernel, history.contexts), history.weights, history.rewards, t, lambda, method);
}

/// sum over the support of k(x_l, x) z_l.
[[nodiscard]] inline double predict(const KernelSpec& kernel, const ArmFit& state, const ArmHistory& history, const Vector& x) {
    if (!state.fitted()) throw StateError("predict: arm has not been fitted");
    if (static_cast<std::size_t>(state.dual_coeffs.size()) > history.size()) {
        throw StateError("predict: fitted state is longer than the history");
    }
    double acc = 0.0;
    for (Eigen::Index l = 0; l < state.dual_coeffs.size(); ++l) {
        acc += kernel_eval(kernel, history.contexts[static_cast<std::size_t>(l)], x) * state.dual_coeffs[l];
    }
    return acc;
}

/// f = sum_j coeffs[j] k(., points[j]).
struct KernelExpansion {
    std::vector<Vector> points;
    Vector coeffs;

    [[nodiscard]] double operator()(const KernelSpec& kernel, const Vector& x) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < points.size(); ++j) acc += coeffs[static_cast<Eigen::Index>(j)] * kernel_eval(kernel, points[j], x);
        return acc;
    }
};

/// ||sum_m a_m k(., u_m)||_H = sqrt(a^T G a) with G the Gram over the u_m.
[[nodiscard]] inline double rkhs_norm(const KernelSpec& kernel, const KernelExpansion& f) {
    if (static_cast<std::size_t>(f.coeffs.size()) != f.points.size()) throw InvalidInput("rkhs_norm: coefficient/point count mismatch");
    if (f.points.empty()) return 0.0;
    const Matrix g = gram_matrix(kernel, f.points);
    return std::sqrt(std::max(0.0, f.coeffs.dot(g * f.coeffs)));
}

/// ||f_hat - f||_H for a fitted arm against a target kernel expansion, via the union Gram.
[[nodiscard]] inline double rkhs_error_norm(const KernelSpec& kernel, const ArmFit& state, const ArmHistory& history,
                                            const KernelExpansion& target) {
    if (static_cast<std::size_t>(target.coeffs.size()) != target.points.size()) {
        throw InvalidInput("rkhs_error_norm: coefficient/point count mismatch");
    }
    const auto n_fit = static_cast<std::size_t>(state.dual_coeffs.size());
    if (n_fit > history.size()) throw InvalidInput("rkhs_error_norm: fitted state is longer than the history");
    KernelExpansion diff;
    diff.points.reserve(n_fit + target.points.size());
    diff.coeffs.resize(static_cast<Eigen::Index>(n_fit + target.points.size()));
    for (std::size_t l = 0; l < n_fit; ++l) {
        diff.points.push_back(history.contexts[l]);
        diff.coeffs[static_cast<Eigen::Index>(l)] = state.dual_coeffs[static_cast<Eigen::Index>(l)];
    }
    for (std::size_t j = 0; j < target.points.size(); ++j) {
        if (n_fit > 0 && target.points[j].size() != history.contexts.front().size()) {
            throw InvalidInput("rkhs_error_norm: target point dimension mismatch");
        }
        diff.points.push_back(target.points[j]);
        diff.coeffs[static_cast<Eigen::Index>(n_fit + j)] = -target.coeffs[static_cast<Eigen::Index>(j)];
    }
    return rkhs_norm(kernel, diff);
}

/// Which algebraic route the estimator uses to fit. `Auto` takes the primal
/// route whenever an exact feature map with at most `max_features` coordinates exists.
enum class SolverPath { Dual, Primal, Auto };

struct EstimatorOptions {
    SolverPath path = SolverPath::Dual;
    DualSolve dual_method = DualSolve::Cholesky;
    double domain_radius = 1.0;  // sup ||x|| over the context domain, for the Gaussian feature map
    std::size_t max_features = 256;
};

/// IPWKR estimator over L arms. Holds histories, cached Gram matrices and fits.
/// Only `fit(arm, ...)` changes an arm's fitted function; other arms keep
/// whatever (possibly stale) lambda and t they were last fitted with.
class IpwkrEstimator {
public:
    IpwkrEstimator(KernelSpec kernel, int num_arms, int dim, EstimatorOptions options = {})
        : kernel_(kernel), dim_(dim), options_(options), arms_(static_cast<std::size_t>(num_arms)) {
        if (num_arms < 1) throw InvalidInput("estimator: need at least one arm");
        if (dim < 1) throw InvalidInput("estimator: context dimension must be positive");
        if (options_.path != SolverPath::Dual) {
            feature_map_ = FeatureMap::exact(kernel_, dim_, options_.domain_radius, options_.max_features);
            if (!feature_map_ && options_.path == SolverPath::Primal) {
                throw InvalidInput("estimator: no exact finite feature map for this kernel/domain; use the dual path");
            }
        }
        if (feature_map_) {
            for (auto& a : arms_) {
                a.phi_gram = Matrix::Zero(feature_map_->size(), feature_map_->size());
                a.phi_rhs = Vector::Zero(feature_map_->size());
            }
        }
    }

    [[nodiscard]] int num_arms() const noexcept { return static_cast<int>(arms_.size()); }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    [[nodiscard]] bool uses_primal() const noexcept { return feature_map_.has_value(); }
    [[nodiscard]] const std::optional<FeatureMap>& feature_map() const noexcept { return feature_map_; }

    void record(int arm, Step t, const Vector& x, double y, double propensity) {
        auto& a = at(arm);
        if (x.size() != dim_) throw InvalidInput("estimator: context dimension mismatch");
        record_observation(a.history, t, x, y, propensity);
        const double w = a.history.weights.back();
        if (feature_map_) {
            const Vector phi = (*feature_map_)(x);
            a.phi_gram.selfadjointView<Eigen::Lower>().rankUpdate(phi, w);
            a.phi_rhs += (w * y) * phi;
        } else {
            grow_gram(a);
        }
    }

    void fit(int arm, Step t, double lambda) {
        auto& a = at(arm);
        detail::require_fit_inputs(a.history.size(), t, lambda);
        if (feature_map_) {
            const double shift = static_cast<double>(t) * lambda;
            Matrix m = a.phi_gram.selfadjointView<Eigen::Lower>();
            m.diagonal().array() += shift;
            double jitter = 0.0;
            a.theta = detail::solve_spd_with_jitter(std::move(m), a.phi_rhs, &jitter);
            a.fit = ArmFit{};
            a.fit.lambda = lambda;
            a.fit.t = t;
            a.fit.jitter = jitter;
            a.dual_ready = false;
        } else {
            const auto n = static_cast<Eigen::Index>(a.history.size());
            a.fit = solve_reduced(a.gram.topLeftCorner(n, n), a.history.weights, a.history.rewards, t, lambda,
                                  options_.dual_method);
            a.dual_ready = true;
        }
    }

    [[nodiscard]] bool is_fitted(int arm) const { return at(arm).fit.fitted(); }

    [[nodiscard]] double predict(int arm, const Vector& x) const {
        const auto& a = at(arm);
        if (!a.fit.fitted()) throw StateError("predict: arm " + std::to_string(arm) + " has not been fitted");
        if (x.size() != dim_) throw InvalidInput("predict: context dimension mismatch");
        if (feature_map_) return a.theta.dot((*feature_map_)(x));
        return kbandit::predict(kernel_, a.fit, a.history, x);
    }

    [[nodiscard]] const ArmHistory& history(int arm) const { return at(arm).history; }

    /// Fitted state with dual coefficients materialized (recovered from theta on the primal route).
    [[nodiscard]] const ArmFit& state(int arm) const {
        const auto& a = at(arm);
        if (feature_map_ && a.fit.fitted() && !a.dual_ready) {
            const double shift = static_cast<double>(a.fit.t) * a.fit.lambda;
            const auto n = a.history.size();
            a.fit.dual_coeffs.resize(static_cast<Eigen::Index>(n));
            for (std::size_t l = 0; l < n; ++l) {
                const double resid = a.history.rewards[l] - a.theta.dot((*feature_map_)(a.history.contexts[l]));
                a.fit.dual_coeffs[static_cast<Eigen::Index>(l)] = a.history.weights[l] * resid / shift;
            }
            a.dual_ready = true;
        }
        return a.fit;
    }

    /// ||f_hat_arm - target||_H. Uses feature coordinates on the primal route, the union Gram otherwise.
    [[nodiscard]] double rkhs_error_norm(int arm, const KernelExpansion& target) const {
        const auto& a = at(arm);
        if (static_cast<std::size_t>(target.coeffs.size()) != target.points.size()) {
            throw InvalidInput("rkhs_error_norm: coefficient/point count mismatch");
        }
        if (feature_map_) {
            Vector diff = a.fit.fitted() ? a.theta : Vector::Zero(feature_map_->size());
            for (std::size_t j = 0; j < target.points.size(); ++j) {
                diff -= target.coeffs[static_cast<Eigen::Index>(j)] * (*feature_map_)(target.points[j]);
            }
            return diff.norm();
        }
        if (!a.fit.fitted()) return rkhs_norm(kernel_, target);
        return kbandit::rkhs_error_norm(kernel_, a.fit, a.history, target);
    }

private:
    struct ArmSlot {
        ArmHistory history;
        mutable ArmFit fit;
        mutable bool dual_ready = false;
        Matrix gram;  // capacity-doubling buffer, top-left n x n is live
        Matrix phi_gram;
        Vector phi_rhs;
        Vector theta;
    };

    ArmSlot& at(int arm) {
        if (arm < 0 || arm >= num_arms()) throw InvalidInput("estimator: arm index out of range");
        return arms_[static_cast<std::size_t>(arm)];
    }
    const ArmSlot& at(int arm) const {
        if (arm < 0 || arm >= num_arms()) throw InvalidInput("estimator: arm index out of range");
        return arms_[static_cast<std::size_t>(arm)];
    }

    void grow_gram(ArmSlot& a) const {
        const auto n = static_cast<Eigen::Index>(a.history.size());
        if (a.gram.rows() < n) {
            const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * a.gram.rows());
            Matrix bigger(cap, cap);
            const auto old = n - 1;
            if (old > 0) bigger.topLeftCorner(old, old) = a.gram.topLeftCorner(old, old);
            a.gram.swap(bigger);
        }
        const auto& x = a.history.contexts.back();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = detail::eval_unchecked(kernel_, a.history.contexts[static_cast<std::size_t>(i)], x);
            a.gram(i, n - 1) = v;
            a.gram(n - 1, i) = v;
        }
    }

    KernelSpec kernel_;
    int dim_;
    EstimatorOptions options_;
    std::optional<FeatureMap> feature_map_;
    std::vector<ArmSlot> arms_;
};

}  // namespace kbandit
