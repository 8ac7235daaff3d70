#pragma once

// Exact finite-dimensional feature maps phi with k(x, y) = <phi(x), phi(y)>.
//
// Linear kernel: phi(x) = x.
// Gaussian kernel on a ball of radius R: with s = 2 gamma^2,
//   k(x, y) = e^{-gamma^2 |x|^2} e^{-gamma^2 |y|^2} sum_k (s <x, y>)^k / k!
//           = sum_alpha phi_alpha(x) phi_alpha(y),
//   phi_alpha(x) = e^{-gamma^2 |x|^2} sqrt(s^{|alpha|} / alpha!) x^alpha.
// Truncating at total degree K leaves a remainder bounded by
// (s R^2)^{K+1} / (K+1)!, so K is chosen to push that below `truncation_tol`.
// The map is used only where that bound is below double resolution.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "kbandit/kernels.hpp"

namespace kbandit {

class FeatureMap {
public:
    /// Returns nullopt when no exact map with at most `max_features` coordinates exists.
    static std::optional<FeatureMap> exact(const KernelSpec& kernel, int dim, double radius,
                                           std::size_t max_features, double truncation_tol = 1e-17) {
        if (dim <= 0) throw InvalidInput("feature map: dimension must be positive");
        FeatureMap map;
        map.kernel_ = kernel;
        map.dim_ = dim;
        if (kernel.kind == KernelKind::Linear) {
            if (static_cast<std::size_t>(dim) > max_features) return std::nullopt;
            map.size_ = dim;
            return map;
        }
        if (!(radius >= 0.0) || !std::isfinite(radius)) return std::nullopt;
        const double s = 2.0 * kernel.gamma * kernel.gamma;
        const double sr2 = s * radius * radius;
        int degree = 0;
        // log of (s R^2)^{K+1} / (K+1)!
        auto log_remainder = [&](int k) {
            return sr2 > 0.0 ? (k + 1) * std::log(sr2) - std::lgamma(k + 2.0) : -INFINITY;
        };
        while (log_remainder(degree) > std::log(truncation_tol)) {
            ++degree;
            if (degree > 4096) return std::nullopt;
        }
        // number of multi-indices of total degree <= K in `dim` variables: C(K + d, d)
        double count = 1.0;
        for (int i = 1; i <= dim; ++i) count = count * (degree + i) / i;
        if (count > static_cast<double>(max_features)) return std::nullopt;

        map.degree_ = degree;
        std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
        enumerate(alpha, 0, degree, map.multi_indices_);
        map.log_coeff_.reserve(map.multi_indices_.size());
        for (const auto& a : map.multi_indices_) {
            int total = 0;
            double log_fact = 0.0;
            for (int ai : a) {
                total += ai;
                log_fact += std::lgamma(ai + 1.0);
            }
            map.log_coeff_.push_back(0.5 * (total * std::log(s) - log_fact));
        }
        map.size_ = static_cast<int>(map.multi_indices_.size());
        return map;
    }

    [[nodiscard]] int size() const noexcept { return size_; }
    [[nodiscard]] int input_dim() const noexcept { return dim_; }
    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }

    [[nodiscard]] Vector operator()(const Vector& x) const {
        if (x.size() != dim_) throw InvalidInput("feature map: dimension mismatch");
        if (kernel_.kind == KernelKind::Linear) return x;
        const double g2 = kernel_.gamma * kernel_.gamma;
        const double envelope = std::exp(-g2 * x.squaredNorm());
        // powers[i][p] = x_i^p
        std::vector<std::vector<double>> powers(static_cast<std::size_t>(dim_));
        for (int i = 0; i < dim_; ++i) {
            auto& row = powers[static_cast<std::size_t>(i)];
            row.resize(static_cast<std::size_t>(degree_) + 1);
            row[0] = 1.0;
            for (int p = 1; p <= degree_; ++p) row[static_cast<std::size_t>(p)] = row[static_cast<std::size_t>(p) - 1] * x[i];
        }
        Vector phi(size_);
        for (int f = 0; f < size_; ++f) {
            const auto& a = multi_indices_[static_cast<std::size_t>(f)];
            double mono = 1.0;
            for (int i = 0; i < dim_; ++i) mono *= powers[static_cast<std::size_t>(i)][static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
            phi[f] = envelope * std::exp(log_coeff_[static_cast<std::size_t>(f)]) * mono;
        }
        return phi;
    }

private:
    static void enumerate(std::vector<int>& alpha, std::size_t pos, int remaining, std::vector<std::vector<int>>& out) {
        if (pos + 1 == alpha.size()) {
            for (int v = 0; v <= remaining; ++v) {
                alpha[pos] = v;
                out.push_back(alpha);
            }
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            alpha[pos] = v;
            enumerate(alpha, pos + 1, remaining - v, out);
        }
        alpha[pos] = 0;
    }

    KernelSpec kernel_{};
    int dim_ = 0;
    int size_ = 0;
    int degree_ = 0;
    std::vector<std::vector<int>> multi_indices_;
    std::vector<double> log_coeff_;
};

}  // namespace kbandit
