#pragma once

// Positive-definite kernels, Gram matrices and cross-kernel vectors.
//
// Gaussian convention: k(x, y) = exp(-gamma^2 * ||x - y||^2). gamma multiplies
// inside the square, so this is NOT the exp(-||x - y||^2 / (2 l^2)) convention;
// gamma = 1 / (sqrt(2) * l) converts between the two.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kbandit/errors.hpp"

namespace kbandit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelKind { Gaussian, Linear };

struct KernelSpec {
    KernelKind kind = KernelKind::Gaussian;
    double gamma = 1.0;  // Gaussian only
    double kappa = 1.0;  // upper bound on k(x, x) over the context domain

    static KernelSpec gaussian(double gamma) {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gaussian kernel: gamma must be > 0");
        return {KernelKind::Gaussian, gamma, 1.0};
    }

    /// `kappa` is sup <x, x> over the domain the kernel will be evaluated on.
    static KernelSpec linear(double kappa) {
        if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidInput("linear kernel: kappa must be > 0");
        return {KernelKind::Linear, 1.0, kappa};
    }

    bool operator==(const KernelSpec&) const = default;
};

inline std::string to_string(KernelKind kind) { return kind == KernelKind::Gaussian ? "gaussian" : "linear"; }

namespace detail {
inline void require_same_dim(const Vector& x, const Vector& y) {
    if (x.size() != y.size()) {
        throw InvalidInput("kernel: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                           std::to_string(y.size()) + ")");
    }
}

inline void require_points(std::span<const Vector> points) {
    if (points.empty()) throw InvalidInput("kernel: empty point list");
    const auto d = points.front().size();
    for (const auto& p : points) {
        if (p.size() != d) throw InvalidInput("kernel: points have non-uniform dimension");
    }
}

// Unchecked evaluation for inner loops.
inline double eval_unchecked(const KernelSpec& spec, const Vector& x, const Vector& y) {
    if (spec.kind == KernelKind::Linear) return x.dot(y);
    return std::exp(-spec.gamma * spec.gamma * (x - y).squaredNorm());
}
}  // namespace detail

[[nodiscard]] inline double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& y) {
    detail::require_same_dim(x, y);
    return detail::eval_unchecked(spec, x, y);
}

/// Upper triangle computed once per pair and mirrored, so the result is bitwise symmetric.
[[nodiscard]] inline Matrix gram_matrix(const KernelSpec& spec, std::span<const Vector> points) {
    detail::require_points(points);
    const auto n = static_cast<Eigen::Index>(points.size());
    Matrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            const double v = detail::eval_unchecked(spec, points[i], points[j]);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

/// Entry s is k(points[s], x).
[[nodiscard]] inline Vector cross_vector(const KernelSpec& spec, std::span<const Vector> points, const Vector& x) {
    detail::require_points(points);
    detail::require_same_dim(points.front(), x);
    Vector out(static_cast<Eigen::Index>(points.size()));
    for (std::size_t s = 0; s < points.size(); ++s) out[static_cast<Eigen::Index>(s)] = detail::eval_unchecked(spec, points[s], x);
    return out;
}

}  // namespace kbandit
