#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kbandit/features.hpp"
#include "kbandit/kernels.hpp"
#include "oracles.hpp"

using namespace kbandit;

namespace {

Vector v(std::initializer_list<double> xs) {
    Vector out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out[i++] = x;
    return out;
}

std::vector<Vector> random_points(std::mt19937_64& rng, int n, int d, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<Vector> pts;
    for (int i = 0; i < n; ++i) {
        Vector x(d);
        for (int j = 0; j < d; ++j) x[j] = u(rng);
        pts.push_back(x);
    }
    return pts;
}

}  // namespace

TEST(KernelEval, GaussianSelfIsOne) {
    EXPECT_EQ(kernel_eval(KernelSpec::gaussian(1.0), v({0.3, -0.7}), v({0.3, -0.7})), 1.0);
}

TEST(KernelEval, GaussianUnitDistance) {
    EXPECT_NEAR(kernel_eval(KernelSpec::gaussian(1.0), v({0.0, 0.0}), v({0.6, 0.8})), std::exp(-1.0), 1e-15);
}

TEST(KernelEval, GammaMultipliesInsideTheSquare) {
    // exp(-gamma^2 ||x-y||^2): gamma = 2 at distance 0.5 gives exp(-1)
    EXPECT_NEAR(kernel_eval(KernelSpec::gaussian(2.0), v({0.0}), v({0.5})), std::exp(-1.0), 1e-15);
}

TEST(KernelEval, LinearInnerProduct) {
    EXPECT_EQ(kernel_eval(KernelSpec::linear(10.0), v({1, 2}), v({3, -1})), 1.0);
}

TEST(KernelEval, DimensionMismatchThrows) {
    EXPECT_THROW((void)kernel_eval(KernelSpec::gaussian(1.0), v({1, 2}), v({1})), InvalidInput);
}

TEST(KernelSpecTest, RejectsBadParameters) {
    EXPECT_THROW((void)KernelSpec::gaussian(0.0), InvalidInput);
    EXPECT_THROW((void)KernelSpec::gaussian(-1.0), InvalidInput);
    EXPECT_EQ(KernelSpec::gaussian(2.0).kappa, 1.0);
}

TEST(GramMatrix, Examples) {
    const std::vector<Vector> same{v({0}), v({0})};
    EXPECT_TRUE(gram_matrix(KernelSpec::gaussian(1.0), same).isApprox(Matrix::Ones(2, 2)));
    const std::vector<Vector> basis{v({1, 0}), v({0, 1})};
    EXPECT_EQ(gram_matrix(KernelSpec::linear(1.0), basis), Matrix::Identity(2, 2));
    const std::vector<Vector> pair{v({0}), v({1})};
    const Matrix g = gram_matrix(KernelSpec::gaussian(1.0), pair);
    EXPECT_EQ(g(0, 0), 1.0);
    EXPECT_NEAR(g(0, 1), std::exp(-1.0), 1e-15);
    EXPECT_EQ(g(0, 1), g(1, 0));
}

TEST(GramMatrix, EmptyThrows) {
    EXPECT_THROW((void)gram_matrix(KernelSpec::gaussian(1.0), std::vector<Vector>{}), InvalidInput);
}

TEST(GramMatrix, MixedDimensionsThrow) {
    const std::vector<Vector> pts{v({0}), v({0, 1})};
    EXPECT_THROW((void)gram_matrix(KernelSpec::gaussian(1.0), pts), InvalidInput);
}

TEST(GramMatrix, PropertiesOnRandomSets) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const int d = 1 + rep % 4;
        const auto pts = random_points(rng, 30, d, 2.0);
        for (const auto& spec : {KernelSpec::gaussian(0.7), KernelSpec::linear(16.0)}) {
            const Matrix g = gram_matrix(spec, pts);
            EXPECT_TRUE(g == g.transpose()) << "bitwise symmetry";
            Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
            EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9 * g.trace());
            for (Eigen::Index i = 0; i < g.rows(); ++i)
                for (Eigen::Index j = 0; j < g.cols(); ++j) {
                    const double ref = spec.kind == KernelKind::Gaussian ? oracle::gaussian(0.7, pts[i], pts[j]) : oracle::linear(pts[i], pts[j]);
                    EXPECT_NEAR(g(i, j), ref, 1e-14 * std::max(1.0, std::abs(ref)));
                    if (spec.kind == KernelKind::Gaussian) {
                        EXPECT_GT(g(i, j), 0.0);
                        EXPECT_LE(g(i, j), 1.0);
                    }
                }
        }
    }
}

TEST(KernelEval, SymmetricOnSampledPairs) {
    std::mt19937_64 rng(3);
    const auto pts = random_points(rng, 200, 3, 5.0);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        for (const auto& spec : {KernelSpec::gaussian(0.3), KernelSpec::linear(75.0)}) {
            EXPECT_EQ(kernel_eval(spec, pts[i], pts[i + 1]), kernel_eval(spec, pts[i + 1], pts[i]));
        }
    }
}

TEST(CrossVector, Examples) {
    const std::vector<Vector> pts{v({0.2}), v({0.9})};
    EXPECT_EQ(cross_vector(KernelSpec::gaussian(1.0), pts, v({0.2}))[0], 1.0);
    const std::vector<Vector> one{v({2})};
    EXPECT_EQ(cross_vector(KernelSpec::linear(9.0), one, v({3}))[0], 6.0);
    const std::vector<Vector> origin{v({0})};
    EXPECT_NEAR(cross_vector(KernelSpec::gaussian(2.0), origin, v({0.5}))[0], std::exp(-1.0), 1e-15);
    EXPECT_THROW((void)cross_vector(KernelSpec::gaussian(1.0), origin, v({0.5, 1.0})), InvalidInput);
}

TEST(FeatureMapTest, LinearIsIdentity) {
    auto fm = FeatureMap::exact(KernelSpec::linear(3.0), 3, 1.0, 256);
    ASSERT_TRUE(fm);
    EXPECT_EQ(fm->size(), 3);
    EXPECT_EQ((*fm)(v({1, 2, 3})), v({1, 2, 3}));
}

TEST(FeatureMapTest, GaussianInnerProductsReproduceKernel) {
    std::mt19937_64 rng(5);
    for (int d : {1, 2}) {
        for (double gamma : {0.5, 1.0, 2.0}) {
            const auto spec = KernelSpec::gaussian(gamma);
            auto fm = FeatureMap::exact(spec, d, std::sqrt(static_cast<double>(d)), 4096);
            ASSERT_TRUE(fm) << "d=" << d << " gamma=" << gamma;
            EXPECT_EQ(fm->size(), [&] {
                double c = 1;
                for (int i = 1; i <= d; ++i) c = c * (fm->degree() + i) / i;
                return static_cast<int>(c);
            }());
            const auto pts = random_points(rng, 40, d, 1.0);
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                EXPECT_NEAR((*fm)(pts[i]).dot((*fm)(pts[i + 1])), oracle::gaussian(gamma, pts[i], pts[i + 1]), 1e-13);
            }
        }
    }
}

TEST(FeatureMapTest, TooManyFeaturesGivesNullopt) {
    EXPECT_FALSE(FeatureMap::exact(KernelSpec::gaussian(1.0), 3, 10.0 * std::sqrt(3.0), 256));
    EXPECT_FALSE(FeatureMap::exact(KernelSpec::linear(1.0), 300, 1.0, 256));
}
