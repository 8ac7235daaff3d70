#pragma once

// Comparison policies: per-arm kernel UCB and the weighted least-squares
// epsilon-greedy estimator (with or without ridge).

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "kbandit/errors.hpp"
#include "kbandit/estimator.hpp"
#include "kbandit/kernels.hpp"
#include "kbandit/policy.hpp"

namespace kbandit {

/// One independent kernel ridge model per arm on that arm's own unweighted
/// history, with a time-constant lambda. The Cholesky factor of K + lambda I
/// is grown by one row per observation.
class KernelUcb {
public:
    KernelUcb(double gamma, double lambda, double tau, int num_arms)
        : kernel_(KernelSpec::gaussian(gamma)), lambda_(lambda), tau_(tau), arms_(static_cast<std::size_t>(num_arms)) {
        if (!(lambda > 0.0)) throw InvalidInput("kernel ucb: lambda must be > 0");
        if (!(tau >= 0.0)) throw InvalidInput("kernel ucb: tau must be >= 0");
        if (num_arms < 1) throw InvalidInput("kernel ucb: need at least one arm");
    }

    [[nodiscard]] int num_arms() const noexcept { return static_cast<int>(arms_.size()); }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    [[nodiscard]] double tau() const noexcept { return tau_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    [[nodiscard]] std::size_t count(int arm) const { return at(arm).contexts.size(); }

    void observe(int arm, const Vector& x, double y) {
        auto& a = at(arm);
        if (!a.contexts.empty() && x.size() != a.contexts.front().size()) throw InvalidInput("kernel ucb: dimension mismatch");
        const auto n = static_cast<Eigen::Index>(a.contexts.size());
        Vector kbar(n);
        for (Eigen::Index i = 0; i < n; ++i) kbar[i] = detail::eval_unchecked(kernel_, a.contexts[static_cast<std::size_t>(i)], x);
        Vector row = n > 0 ? Vector(a.chol.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(kbar)) : Vector();
        const double diag2 = detail::eval_unchecked(kernel_, x, x) + lambda_ - row.squaredNorm();
        if (!(diag2 > 0.0)) throw NumericalError("kernel ucb: Cholesky update lost positive definiteness", 0.0, 0.0);
        if (a.chol.rows() <= n) {
            const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * a.chol.rows());
            Matrix bigger = Matrix::Zero(cap, cap);
            if (n > 0) bigger.topLeftCorner(n, n) = a.chol.topLeftCorner(n, n);
            a.chol.swap(bigger);
        }
        if (n > 0) a.chol.block(n, 0, 1, n) = row.transpose();
        a.chol(n, n) = std::sqrt(diag2);
        a.contexts.push_back(x);
        a.rewards.push_back(y);
        // alpha = (K + lambda I)^{-1} y
        const auto m = n + 1;
        Vector yv = Eigen::Map<const Vector>(a.rewards.data(), m);
        const auto l = a.chol.topLeftCorner(m, m).triangularView<Eigen::Lower>();
        a.alpha = l.transpose().solve(l.solve(yv));
    }

    /// Posterior-style mean and variance at x for one arm.
    [[nodiscard]] std::pair<double, double> mean_variance(int arm, const Vector& x) const {
        const auto& a = at(arm);
        if (a.contexts.empty()) throw StateError("kernel ucb: arm " + std::to_string(arm) + " has no observations");
        if (x.size() != a.contexts.front().size()) throw InvalidInput("kernel ucb: dimension mismatch");
        const auto n = static_cast<Eigen::Index>(a.contexts.size());
        Vector kbar(n);
        for (Eigen::Index i = 0; i < n; ++i) kbar[i] = detail::eval_unchecked(kernel_, a.contexts[static_cast<std::size_t>(i)], x);
        const double mean = kbar.dot(a.alpha);
        const Vector v = a.chol.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(kbar);
        const double var = std::max(0.0, detail::eval_unchecked(kernel_, x, x) - v.squaredNorm());
        return {mean, var};
    }

    /// mu(x) + tau * sigma(x).
    [[nodiscard]] double score(int arm, const Vector& x) const {
        const auto [mean, var] = mean_variance(arm, x);
        return mean + tau_ * std::sqrt(var);
    }

    [[nodiscard]] int select(const Vector& x) const {
        std::vector<double> scores(arms_.size());
        for (int a = 0; a < num_arms(); ++a) scores[static_cast<std::size_t>(a)] = score(a, x);
        return argmax_lowest(scores);
    }

private:
    struct Arm {
        std::vector<Vector> contexts;
        std::vector<double> rewards;
        Matrix chol;
        Vector alpha;
    };

    Arm& at(int arm) {
        if (arm < 0 || arm >= num_arms()) throw InvalidInput("kernel ucb: arm index out of range");
        return arms_[static_cast<std::size_t>(arm)];
    }
    const Arm& at(int arm) const {
        if (arm < 0 || arm >= num_arms()) throw InvalidInput("kernel ucb: arm index out of range");
        return arms_[static_cast<std::size_t>(arm)];
    }

    KernelSpec kernel_;
    double lambda_;
    double tau_;
    std::vector<Arm> arms_;
};

/// Symmetric pseudo-inverse solve: eigen-directions with |eigenvalue| below
/// `rel_tol` times the largest are dropped, giving the minimum-norm solution.
[[nodiscard]] inline Vector pinv_solve_symmetric(const Matrix& a, const Vector& b, double rel_tol = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
    const Vector& ev = eig.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    Vector coords = eig.eigenvectors().transpose() * b;
    for (Eigen::Index i = 0; i < ev.size(); ++i) coords[i] = std::abs(ev[i]) > rel_tol * top && top > 0.0 ? coords[i] / ev[i] : 0.0;
    return eig.eigenvectors() * coords;
}

/// Unregularized weighted least squares: theta = pinv(X^T W X) X^T W Y.
[[nodiscard]] inline Vector wls_fit(const ArmHistory& history) {
    if (history.empty()) throw InvalidInput("wls_fit: empty history");
    const auto d = history.contexts.front().size();
    Matrix xtwx = Matrix::Zero(d, d);
    Vector xtwy = Vector::Zero(d);
    for (std::size_t s = 0; s < history.size(); ++s) {
        const auto& x = history.contexts[s];
        xtwx.selfadjointView<Eigen::Lower>().rankUpdate(x, history.weights[s]);
        xtwy += (history.weights[s] * history.rewards[s]) * x;
    }
    return pinv_solve_symmetric(xtwx.selfadjointView<Eigen::Lower>(), xtwy);
}

/// Weighted linear least squares per arm in primal form, kept as running
/// sums X^T W X and X^T W Y. With `ridge` the fit is
/// (X^T W X + t lambda I)^{-1} X^T W Y, otherwise the pseudo-inverse solution.
class WeightedLinearModel {
public:
    WeightedLinearModel(int num_arms, int dim, bool ridge) : dim_(dim), ridge_(ridge), arms_(static_cast<std::size_t>(num_arms)) {
        if (num_arms < 1 || dim < 1) throw InvalidInput("weighted linear model: bad shape");
        for (auto& a : arms_) {
            a.xtwx = Matrix::Zero(dim, dim);
            a.xtwy = Vector::Zero(dim);
        }
    }

    [[nodiscard]] bool ridge() const noexcept { return ridge_; }

    void record(int arm, Step t, const Vector& x, double y, double propensity) {
        auto& a = at(arm);
        if (x.size() != dim_) throw InvalidInput("weighted linear model: dimension mismatch");
        record_observation(a.history, t, x, y, propensity);
        const double w = a.history.weights.back();
        a.xtwx.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
        a.xtwy += (w * y) * x;
    }

    void fit(int arm, Step t, double lambda) {
        auto& a = at(arm);
        if (a.history.empty()) throw InvalidInput("weighted linear model: empty history");
        Matrix m = a.xtwx.selfadjointView<Eigen::Lower>();
        if (ridge_) {
            if (!(lambda > 0.0)) throw InvalidInput("weighted linear model: lambda must be > 0");
            m.diagonal().array() += static_cast<double>(t) * lambda;
            Eigen::LDLT<Matrix> ldlt(m);
            a.theta = ldlt.solve(a.xtwy);
        } else {
            a.theta = pinv_solve_symmetric(m, a.xtwy);
        }
        a.fitted = true;
    }

    [[nodiscard]] bool is_fitted(int arm) const { return at(arm).fitted; }
    [[nodiscard]] const ArmHistory& history(int arm) const { return at(arm).history; }
    [[nodiscard]] const Vector& theta(int arm) const { return at(arm).theta; }

    [[nodiscard]] double predict(int arm, const Vector& x) const {
        const auto& a = at(arm);
        if (!a.fitted) throw StateError("weighted linear model: arm not fitted");
        return a.theta.dot(x);
    }

private:
    struct Arm {
        ArmHistory history;
        Matrix xtwx;
        Vector xtwy;
        Vector theta;
        bool fitted = false;
    };

    Arm& at(int arm) {
        if (arm < 0 || arm >= static_cast<int>(arms_.size())) throw InvalidInput("weighted linear model: arm out of range");
        return arms_[static_cast<std::size_t>(arm)];
    }
    const Arm& at(int arm) const {
        if (arm < 0 || arm >= static_cast<int>(arms_.size())) throw InvalidInput("weighted linear model: arm out of range");
        return arms_[static_cast<std::size_t>(arm)];
    }

    int dim_;
    bool ridge_;
    std::vector<Arm> arms_;
};

}  // namespace kbandit
