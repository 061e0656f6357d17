#include "dwgcs/core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dwgcs;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

} // namespace

TEST(FeatureMap, IdentityOneHotBlocks)
{
    FeatureMap map(FeatureKind::IdentityOneHot, 1, 2);
    EXPECT_EQ(map.size(), 4);
    EXPECT_EQ(feature(map, vec({3}), 1), vec({3, 1, 0, 0}));
    EXPECT_EQ(feature(map, vec({3}), 2), vec({0, 0, 3, 1}));
}

TEST(FeatureMap, QuadraticMonomials)
{
    FeatureMap map(FeatureKind::QuadraticOneHot, 2, 2);
    EXPECT_EQ(map.size(), 2 * (2 + 3 + 1));
    const Vector phi = feature(map, vec({1, 2}), 1);
    EXPECT_EQ(phi, vec({1, 2, 1, 2, 4, 1, 0, 0, 0, 0, 0, 0}));
}

TEST(FeatureMap, DimensionMismatchThrows)
{
    FeatureMap map(FeatureKind::IdentityOneHot, 2, 3);
    EXPECT_THROW(feature(map, vec({1}), 1), InvalidInput);
    EXPECT_THROW(feature(map, vec({1, 2}), 4), InvalidInput);
}

TEST(FeatureMap, SingleNonzeroBlockProperty)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (auto kind : {FeatureKind::IdentityOneHot, FeatureKind::QuadraticOneHot}) {
        for (int k = 2; k <= 4; ++k) {
            FeatureMap map(kind, 3, k);
            for (int rep = 0; rep < 20; ++rep) {
                Vector x(3);
                for (int i = 0; i < 3; ++i)
                    x[i] = nd(rng);
                const double psi_inf = map.instance_map(x).lpNorm<Eigen::Infinity>();
                for (int y = 1; y <= k; ++y) {
                    const Vector phi = map(x, y);
                    EXPECT_DOUBLE_EQ(phi.lpNorm<Eigen::Infinity>(), psi_inf);
                    for (int other = 1; other <= k; ++other) {
                        if (other == y)
                            continue;
                        EXPECT_EQ(phi.segment((other - 1) * map.block_size(), map.block_size()).norm(), 0.0);
                    }
                }
            }
        }
    }
}

TEST(FeatureMap, DescriptorRoundTrip)
{
    FeatureMap map(FeatureKind::QuadraticOneHot, 5, 3);
    const auto back = FeatureMap::from_descriptor(map.descriptor());
    EXPECT_EQ(back.kind(), map.kind());
    EXPECT_EQ(back.dim_instance(), 5);
    EXPECT_EQ(back.n_classes(), 3);
    EXPECT_THROW(FeatureMap::from_descriptor("cubic:2:2"), InvalidInput);
}

TEST(Loss, ZeroOneAndLog)
{
    EXPECT_DOUBLE_EQ(loss(LossKind::ZeroOne, vec({1, 0}), 1).value, 0.0);
    EXPECT_DOUBLE_EQ(loss(LossKind::ZeroOne, vec({0.25, 0.75}), 2).value, 0.25);
    EXPECT_NEAR(loss(LossKind::Log, vec({0.5, 0.5}), 1).value, 0.6931471805599453, 1e-12);
}

TEST(Loss, LogOfZeroSaturates)
{
    const auto v = loss(LossKind::Log, vec({1.0, 0.0}), 2);
    EXPECT_TRUE(v.saturated);
    EXPECT_EQ(v.value, kLogLossCap);
    EXPECT_EQ(loss(LossKind::Log, vec({1.0, 0.0}), 1).value, 0.0);
}

TEST(Loss, UniformRule)
{
    for (int k = 2; k <= 6; ++k) {
        const Vector p = Vector::Constant(k, 1.0 / k);
        for (int y = 1; y <= k; ++y) {
            EXPECT_NEAR(loss(LossKind::ZeroOne, p, y).value, 1.0 - 1.0 / k, 1e-15);
            EXPECT_NEAR(loss(LossKind::Log, p, y).value, std::log(static_cast<double>(k)), 1e-12);
        }
    }
}

TEST(Loss, RangeProperty)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        Vector p(4);
        for (int i = 0; i < 4; ++i)
            p[i] = u(rng);
        p /= p.sum();
        for (int y = 1; y <= 4; ++y) {
            const double l01 = loss(LossKind::ZeroOne, p, y).value;
            EXPECT_GE(l01, 0.0);
            EXPECT_LE(l01, 1.0);
            EXPECT_GT(loss(LossKind::Log, p, y).value, 0.0);
        }
    }
}

TEST(ErrorRate, Basic)
{
    EXPECT_EQ(error_rate({1, 2, 1}, {1, 2, 1}), 0.0);
    EXPECT_EQ(error_rate({1, 1}, {2, 2}), 1.0);
    EXPECT_EQ(error_rate({1, 2, 2, 1}, {1, 2, 1, 1}), 0.25);
    EXPECT_THROW(error_rate({1, 2}, {1}), InvalidInput);
    EXPECT_THROW(error_rate({}, {}), InvalidInput);
}

TEST(Dataset, ValidateRejectsBadLabels)
{
    Dataset d;
    d.dim = 1;
    d.n_classes = 2;
    d.train.push_back({vec({0.0}), 3});
    EXPECT_THROW(d.validate(), InvalidInput);
    d.train[0].y = 2;
    EXPECT_NO_THROW(d.validate());
    d.test_instances.push_back(vec({1.0, 2.0}));
    EXPECT_THROW(d.validate(), InvalidInput);
}
