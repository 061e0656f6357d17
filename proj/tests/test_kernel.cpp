#include "dwgcs/kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dwgcs;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

std::vector<Vector> random_points(std::mt19937_64& rng, int count, int dim)
{
    std::normal_distribution<double> nd;
    std::vector<Vector> pts;
    for (int i = 0; i < count; ++i) {
        Vector x(dim);
        for (int d = 0; d < dim; ++d)
            x[d] = nd(rng);
        pts.push_back(x);
    }
    return pts;
}

} // namespace

TEST(RbfKernel, Evaluation)
{
    RbfKernel k(1.0);
    EXPECT_DOUBLE_EQ(eval(k, scalar(0.3), scalar(0.3)), 1.0);
    // |x - z|^2 / (2 sigma^2) = 2 / 2 = 1
    EXPECT_NEAR(eval(k, scalar(0.0), scalar(std::sqrt(2.0))), std::exp(-1.0), 1e-15);
    EXPECT_THROW(RbfKernel(0.0), InvalidInput);
    EXPECT_THROW(eval(k, scalar(0.0), Vector::Zero(2)), InvalidInput);
}

TEST(RbfKernel, Symmetry)
{
    std::mt19937_64 rng(11);
    RbfKernel k(0.7);
    const auto pts = random_points(rng, 40, 3);
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2)
        EXPECT_EQ(eval(k, pts[i], pts[i + 1]), eval(k, pts[i + 1], pts[i]));
}

TEST(Gram, SmallCases)
{
    const double sigma = 0.8;
    RbfKernel k(sigma);
    std::vector<Vector> a{scalar(0.0)};
    const Matrix g = gram(k, a, a);
    EXPECT_EQ(g.rows(), 1);
    EXPECT_DOUBLE_EQ(g(0, 0), 1.0);

    std::vector<Vector> b{scalar(0.0), scalar(std::sqrt(2.0) * sigma)};
    const Matrix g2 = gram(k, a, b);
    ASSERT_EQ(g2.cols(), 2);
    EXPECT_DOUBLE_EQ(g2(0, 0), 1.0);
    EXPECT_NEAR(g2(0, 1), std::exp(-1.0), 1e-15);
}

TEST(Gram, SymmetricPsdUnitDiagonal)
{
    std::mt19937_64 rng(5);
    RbfKernel k(1.3);
    for (int rep = 0; rep < 10; ++rep) {
        const auto pts = random_points(rng, rep < 5 ? 3 : 25, 2);
        const Matrix g = gram(k, pts, pts);
        EXPECT_TRUE(g.isApprox(g.transpose(), 0.0));
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            EXPECT_EQ(g(i, i), 1.0);
        EXPECT_LE(g.cwiseAbs().maxCoeff(), RbfKernel::kappa() * RbfKernel::kappa());
        Eigen::SelfAdjointEigenSolver<Matrix> es(g);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(Gram, DimensionMismatch)
{
    RbfKernel k(1.0);
    std::vector<Vector> a{scalar(0.0)};
    std::vector<Vector> b{Vector::Zero(2)};
    EXPECT_THROW(gram(k, a, b), InvalidInput);
}

TEST(BandwidthHeuristic, FallsBackToAvailableNeighbour)
{
    std::vector<Vector> two{scalar(0.0), scalar(2.0)};
    EXPECT_DOUBLE_EQ(bandwidth_heuristic(two, 50), 2.0);
}

TEST(BandwidthHeuristic, LineOfThree)
{
    std::vector<Vector> pts{scalar(0.0), scalar(1.0), scalar(2.0)};
    EXPECT_DOUBLE_EQ(bandwidth_heuristic(pts, 1), 1.0);
    // second neighbours: 2, 1, 2
    EXPECT_DOUBLE_EQ(bandwidth_heuristic(pts, 2), 5.0 / 3.0);
}

TEST(BandwidthHeuristic, GridSpacing)
{
    std::vector<Vector> pts;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            Vector x(2);
            x << 0.25 * i, 0.25 * j;
            pts.push_back(x);
        }
    EXPECT_NEAR(bandwidth_heuristic(pts, 1), 0.25, 1e-15);
}

TEST(BandwidthHeuristic, Errors)
{
    EXPECT_THROW(bandwidth_heuristic({scalar(1.0)}, 5), InvalidInput);
    EXPECT_THROW(bandwidth_heuristic({scalar(1.0), scalar(1.0)}, 5), InvalidInput);
    EXPECT_THROW(bandwidth_heuristic({scalar(1.0), scalar(2.0)}, 0), InvalidInput);
}
