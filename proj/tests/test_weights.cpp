#include "dwgcs/datagen.hpp"
#include "dwgcs/weights.hpp"

#include "frequency_checks.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dwgcs;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

MarginalModel constant_ratio(double r, double B)
{
    return MarginalModel::from_ratio([r](const Vector&) { return r; }, B);
}

std::vector<Vector> gaussian_cloud(std::mt19937_64& rng, int count, double shift, double sd = 1.0)
{
    std::normal_distribution<double> nd;
    std::vector<Vector> out;
    for (int i = 0; i < count; ++i) {
        Vector x(2);
        x << shift + sd * nd(rng), sd * nd(rng);
        out.push_back(x);
    }
    return out;
}

// Squared discrepancy evaluated term by term from kernel values.
double discrepancy_sq_loops(const Vector& beta, const Vector& alpha, const std::vector<Vector>& tr,
                            const std::vector<Vector>& te, double sigma)
{
    auto k = [sigma](const Vector& a, const Vector& b) { return std::exp(-(a - b).squaredNorm() / (2 * sigma * sigma)); };
    const double n = static_cast<double>(tr.size());
    const double t = static_cast<double>(te.size());
    double s = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i)
        for (std::size_t j = 0; j < tr.size(); ++j)
            s += beta[static_cast<Eigen::Index>(i)] * beta[static_cast<Eigen::Index>(j)] * k(tr[i], tr[j]) / (n * n);
    for (std::size_t i = 0; i < tr.size(); ++i)
        for (std::size_t j = 0; j < te.size(); ++j)
            s -= 2.0 * beta[static_cast<Eigen::Index>(i)] * alpha[static_cast<Eigen::Index>(j)] * k(tr[i], te[j]) /
                 (n * t);
    for (std::size_t i = 0; i < te.size(); ++i)
        for (std::size_t j = 0; j < te.size(); ++j)
            s += alpha[static_cast<Eigen::Index>(i)] * alpha[static_cast<Eigen::Index>(j)] * k(te[i], te[j]) / (t * t);
    return s;
}

struct Constraints {
    double box = 0.0;
    double slab = 0.0;
    double ball = 0.0;
};

// Violations of the DW-KMM constraints, recomputed from the definitions.
Constraints violations(const WeightPair& w, const DwKmmConfig& cfg)
{
    Constraints c;
    const double C = cfg.C();
    for (Eigen::Index i = 0; i < w.beta.size(); ++i)
        c.box = std::max({c.box, -w.beta[i], w.beta[i] - C});
    for (Eigen::Index j = 0; j < w.alpha.size(); ++j)
        c.box = std::max({c.box, -w.alpha[j], w.alpha[j] - 1.0});
    c.slab = std::max(0.0, std::abs(w.beta.mean() - w.alpha.mean()) - cfg.slack(static_cast<std::size_t>(w.beta.size())));
    c.ball = std::max(0.0, (w.alpha - Vector::Ones(w.alpha.size())).norm() -
                               cfg.alpha_radius(static_cast<std::size_t>(w.alpha.size())));
    return c;
}

std::vector<double> d_grid()
{
    std::vector<double> out;
    for (int k = 0; k < 10; ++k) {
        const double s = 1.0 - 0.1 * k;
        out.push_back(1.0 / (s * s));
    }
    return out;
}

} // namespace

TEST(ExactWeights, IdenticalMarginals)
{
    const auto m = constant_ratio(1.0, 1.0);
    const std::vector<Vector> xs{scalar(0.0), scalar(1.0), scalar(-3.0)};
    const auto w = exact_double_weights(m, 2.0, xs, xs);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(w.beta[i], 1.0);
        EXPECT_DOUBLE_EQ(w.alpha[i], 1.0);
    }
}

TEST(ExactWeights, RatioFiveCapTwo)
{
    MarginalModel m{[](const Vector&) { return 0.1; }, [](const Vector&) { return 0.5; }, 5.0};
    const std::vector<Vector> xs{scalar(0.0)};
    const auto w = exact_double_weights(m, 2.0, xs, xs);
    EXPECT_DOUBLE_EQ(w.beta[0], 2.0);
    EXPECT_DOUBLE_EQ(w.alpha[0], 0.4);
    EXPECT_NEAR(w.alpha[0] * 0.5, w.beta[0] * 0.1, 1e-15);
    EXPECT_DOUBLE_EQ(w.alpha_fn(scalar(7.0)), 0.4);
    EXPECT_NEAR(w.D, 6.25, 1e-12);
    EXPECT_NO_THROW(w.validate());
}

TEST(ExactWeights, LargeCIsReweighted)
{
    SyntheticConfig cfg;
    cfg.delta = 0.3;
    cfg.n = 40;
    cfg.t = 40;
    cfg.seed = 2;
    const auto sc = gen_synthetic(cfg);
    const auto& m = *sc.marginals;
    const auto train_x = sc.dataset.train_instances();
    const auto exact = exact_double_weights(m, m.B, train_x, sc.dataset.test_instances);
    const auto rw = reweighted_weights(m, train_x, sc.dataset.test_instances, m.B);
    for (Eigen::Index i = 0; i < exact.beta.size(); ++i)
        EXPECT_NEAR(exact.beta[i], rw.beta[i], 1e-12 * rw.beta[i]);
    for (Eigen::Index j = 0; j < exact.alpha.size(); ++j)
        EXPECT_DOUBLE_EQ(exact.alpha[j], 1.0);
    const auto bigger = exact_double_weights(m, 3.0 * m.B, train_x, sc.dataset.test_instances);
    EXPECT_EQ(bigger.D, 1.0);
    EXPECT_TRUE(bigger.alpha.isApprox(Vector::Ones(bigger.alpha.size())));
}

TEST(ExactWeights, DoubleWeightingIdentity)
{
    Rng rng(17);
    for (double delta : {0.05, 0.1, 0.3, 0.45}) {
        SyntheticConfig cfg;
        cfg.delta = delta;
        const auto m = synthetic_marginals(cfg);
        std::vector<Vector> xs;
        for (int i = 0; i < 300; ++i)
            xs.push_back(synthetic::draw(i % 2 == 0 ? cfg.w_tr() : cfg.w_te(), rng));
        for (double D : d_grid()) {
            const double C = m.B / std::sqrt(D);
            const auto w = exact_double_weights(m, C, xs, xs);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double lhs = w.alpha[static_cast<Eigen::Index>(i)] * m.p_te(xs[i]);
                const double rhs = w.beta[static_cast<Eigen::Index>(i)] * m.p_tr(xs[i]);
                EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(std::abs(lhs), std::abs(rhs)));
            }
            EXPECT_NO_THROW(w.validate());
        }
    }
}

TEST(ExactWeights, SupportEdges)
{
    MarginalModel m{[](const Vector& x) { return x[0] > 0.0 ? 1.0 : 0.0; },
                    [](const Vector& x) { return x[0] < 2.0 ? 1.0 : 0.0; }, 1000.0};
    const std::vector<Vector> xs{scalar(-1.0), scalar(3.0)};
    const auto w = exact_double_weights(m, 4.0, xs, xs);
    EXPECT_EQ(w.beta[0], 4.0);  // outside the training support
    EXPECT_EQ(w.alpha[1], 0.0); // outside the testing support
    EXPECT_THROW(exact_double_weights(m, 0.0, xs, xs), InvalidInput);
}

TEST(Reweighted, DirectFormula)
{
    const std::vector<Vector> xs{scalar(0.0), scalar(1.0)};
    const auto same = reweighted_weights(constant_ratio(1.0, 1.0), xs, xs);
    EXPECT_TRUE(same.beta.isApprox(Vector::Ones(2)));
    const auto five = reweighted_weights(constant_ratio(5.0, 5.0), xs, xs, 1000.0);
    EXPECT_DOUBLE_EQ(five.beta[0], 5.0);
    EXPECT_FALSE(five.clipped);
    EXPECT_TRUE(five.alpha.isApprox(Vector::Ones(2)));
    const auto capped = reweighted_weights(constant_ratio(5000.0, 5000.0), xs, xs, 1000.0);
    EXPECT_DOUBLE_EQ(capped.beta[0], 1000.0);
    EXPECT_TRUE(capped.clipped);
}

TEST(Robust, DirectFormula)
{
    const std::vector<Vector> xs{scalar(0.0)};
    EXPECT_DOUBLE_EQ(robust_weights(constant_ratio(1.0, 1.0), xs, xs).alpha[0], 1.0);
    const auto fifth = robust_weights(constant_ratio(5.0, 5.0), xs, xs);
    EXPECT_DOUBLE_EQ(fifth.alpha[0], 0.2);
    EXPECT_DOUBLE_EQ(fifth.beta[0], 1.0);

    MarginalModel vanishing{[](const Vector&) { return 1.0; }, [](const Vector&) { return 0.0; }, 1.0};
    const auto w = robust_weights(vanishing, xs, xs);
    EXPECT_EQ(w.alpha[0], kRobustAlphaCap);
    EXPECT_TRUE(w.clipped);
    EXPECT_TRUE(w.baseline);
    EXPECT_NO_THROW(w.validate());
}

TEST(Flattening, Limits)
{
    const std::vector<Vector> xs{scalar(0.0)};
    const auto m = constant_ratio(4.0, 4.0);
    EXPECT_DOUBLE_EQ(flattening_weights(m, 0.0, Flattening::Power, xs).beta[0], 1.0);
    EXPECT_DOUBLE_EQ(flattening_weights(m, 1.0, Flattening::Power, xs).beta[0], 4.0);
    // The mixture interpolates from the full ratio at gamma = 0 to 1 at gamma = 1.
    EXPECT_DOUBLE_EQ(flattening_weights(m, 0.0, Flattening::Mixture, xs).beta[0], 4.0);
    EXPECT_DOUBLE_EQ(flattening_weights(m, 1.0, Flattening::Mixture, xs).beta[0], 1.0);
    EXPECT_DOUBLE_EQ(flattening_weights(m, 0.5, Flattening::Power, xs).beta[0], 2.0);
    EXPECT_DOUBLE_EQ(flattening_weights(m, 0.5, Flattening::Mixture, xs).beta[0], 1.6);
    EXPECT_THROW(flattening_weights(m, 1.5, Flattening::Power, xs), InvalidInput);
}

TEST(WeightPair, InvariantsEnforcedForDoubleWeights)
{
    WeightPair w;
    w.B = 2.0;
    w.D = 4.0;
    w.beta = Vector::Constant(2, 1.0);
    w.alpha = Vector::Constant(2, 1.0);
    EXPECT_NO_THROW(w.validate());
    w.beta[0] = 1.1;
    EXPECT_THROW(w.validate(), InvalidInput);
    w.beta[0] = 1.0;
    w.alpha[1] = 1.01;
    EXPECT_THROW(w.validate(), InvalidInput);
    w.baseline = true;
    EXPECT_NO_THROW(w.validate());
    w.alpha[1] = -0.1;
    EXPECT_THROW(w.validate(), InvalidInput);
}

TEST(ClassifierRatio, SameSetGivesUnitWeights)
{
    std::mt19937_64 rng(3);
    const auto xs = gaussian_cloud(rng, 60, 0.0);
    const auto w = classifier_ratio_weights(xs, xs);
    for (Eigen::Index i = 0; i < w.beta.size(); ++i)
        EXPECT_NEAR(w.beta[i], 1.0, 1e-8);
}

TEST(ClassifierRatio, BalancedResamplesOfOnePool)
{
    std::mt19937_64 rng(12);
    const auto pool = gaussian_cloud(rng, 400, 0.0);
    double grand = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<Vector> a, b;
        for (std::size_t k = 0; k < 200; ++k)
            (k < 100 ? a : b).push_back(pool[idx[k]]);
        const double mean = classifier_ratio_weights(a, b).beta.mean();
        EXPECT_NEAR(mean, 1.0, 0.2);
        grand += mean / 50.0;
    }
    EXPECT_NEAR(grand, 1.0, 0.05);
}

TEST(ClassifierRatio, SeparatedClustersHitTheCap)
{
    std::vector<Vector> train, test;
    for (int i = 0; i < 30; ++i) {
        train.push_back(scalar(-10.0 + 0.1 * i));
        test.push_back(scalar(10.0 + 0.1 * i));
    }
    // One training point deep inside the testing cluster.
    train.push_back(scalar(11.45));
    const double cap = 10.0;
    const auto w = classifier_ratio_weights(train, test, cap, 1e-3);
    EXPECT_DOUBLE_EQ(w.beta[30], cap);
    EXPECT_TRUE(w.clipped);
    EXPECT_LT(w.beta[0], 1e-3);
}

TEST(DwKmm, DEqualOneMatchesKmm)
{
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> size(5, 15);
    for (int rep = 0; rep < 20; ++rep) {
        const auto tr = gaussian_cloud(rng, size(rng), 0.0);
        const auto te = gaussian_cloud(rng, size(rng), 0.8, 0.7);
        DwKmmConfig cfg;
        cfg.D = 1.0;
        cfg.B = rep % 2 == 0 ? 1000.0 : 3.0;
        cfg.kernel = RbfKernel(1.0);
        const auto dw = dw_kmm(tr, te, cfg);
        const auto ref = kmm(tr, te, cfg);
        EXPECT_LE((dw.weights.beta - ref.weights.beta).lpNorm<Eigen::Infinity>(), 1e-4) << "rep " << rep;
        EXPECT_TRUE(dw.weights.alpha.isApprox(Vector::Ones(dw.weights.alpha.size())));
        EXPECT_NEAR(dw.objective, ref.objective, 1e-8);
    }
}

TEST(DwKmm, IdenticalSetsReachZero)
{
    std::mt19937_64 rng(6);
    const auto xs = gaussian_cloud(rng, 25, 0.0);
    for (double D : d_grid()) {
        DwKmmConfig cfg;
        cfg.D = D;
        cfg.B = 10.0;
        const auto r = dw_kmm(xs, xs, cfg);
        EXPECT_LE(r.objective, 1e-8) << "D " << D;
    }
}

TEST(DwKmm, TwoByTwoMatchesGridOracle)
{
    std::mt19937_64 rng(9);
    const double step = 0.05;
    for (int rep = 0; rep < 6; ++rep) {
        const auto tr = gaussian_cloud(rng, 2, 0.0);
        const auto te = gaussian_cloud(rng, 2, 1.0);
        DwKmmConfig cfg;
        cfg.B = 1.5;
        cfg.D = std::vector<double>{1.0, 1.5625, 4.0}[static_cast<std::size_t>(rep % 3)];
        cfg.kernel = RbfKernel(0.8);
        const auto all = joint_instances(tr, te);
        const auto problem = dw_kmm_problem(gram(cfg.kernel, all, all), 2, 2, cfg);
        const auto r = dw_kmm(tr, te, cfg);

        // Grid over beta in [0, 1.5], alpha in [0, 1]; infeasible points are
        // skipped. Alpha is evaluated on the same grid, clipped at 1.
        auto f = [&](const Vector& z) {
            Vector w = z;
            w[2] = std::min(w[2], 1.0);
            w[3] = std::min(w[3], 1.0);
            if (problem.violation(w) > 1e-12)
                return std::numeric_limits<double>::infinity();
            return discrepancy_sq_loops(w.head(2), w.tail(2), tr, te, 0.8);
        };
        Vector arg;
        const double grid = oracle::grid_minimum(f, 4, 0.0, 1.5, step, &arg);
        ASSERT_TRUE(std::isfinite(grid));
        const double solver = discrepancy_sq_loops(r.weights.beta, r.weights.alpha, tr, te, 0.8);
        EXPECT_LE(solver, grid + 1e-9);
        // A grid neighbour of the optimum is within half a step per axis.
        Matrix h = problem.hessian;
        const double lip = h.norm();
        Vector z(4);
        z << r.weights.beta, r.weights.alpha;
        const double grad = (problem.hessian * z).norm();
        EXPECT_LE(grid - solver, grad * step + lip * step * step + 1e-9) << "rep " << rep;
    }
}

TEST(DwKmm, ConstraintsHoldOnEveryGridPoint)
{
    for (std::uint64_t seed : {1, 2, 3}) {
        SyntheticConfig sc;
        sc.delta = seed == 1 ? 0.05 : 0.45;
        sc.n = 60;
        sc.t = 50;
        sc.seed = seed;
        const auto data = gen_synthetic(sc);
        const auto tr = data.dataset.train_instances();
        const auto& te = data.dataset.test_instances;
        const auto all = joint_instances(tr, te);
        const double sigma = bandwidth_heuristic(all, 50);
        const Matrix k = gram(RbfKernel(sigma), all, all);
        for (double D : d_grid()) {
            DwKmmConfig cfg;
            cfg.D = D;
            cfg.B = seed == 3 ? 2.0 : 1000.0;
            cfg.kernel = RbfKernel(sigma);
            const auto r = dw_kmm(tr, te, cfg, &k);
            const auto v = violations(r.weights, cfg);
            EXPECT_LE(v.box, 1e-6);
            EXPECT_LE(v.slab, 1e-6);
            EXPECT_LE(v.ball, 1e-6);
            EXPECT_LE(r.kkt_residual, cfg.qp.tol);
            EXPECT_FALSE(r.max_iter_reached);
        }
    }
}

TEST(DwKmm, ObjectiveMonotoneUnderContainment)
{
    SyntheticConfig sc;
    sc.delta = 0.45;
    sc.n = 50;
    sc.t = 50;
    sc.seed = 4;
    const auto data = gen_synthetic(sc);
    const auto tr = data.dataset.train_instances();
    const auto& te = data.dataset.test_instances;
    const auto all = joint_instances(tr, te);
    const RbfKernel kernel(bandwidth_heuristic(all, 50));
    const Matrix k = gram(kernel, all, all);

    // The feasible set for (D1, B1) lies inside that for (D2, B2) when the
    // beta box, the slack and the alpha radius are all no larger.
    auto contained = [&](const DwKmmConfig& a, const DwKmmConfig& b) {
        return a.C() <= b.C() && a.slack(tr.size()) <= b.slack(tr.size()) &&
               a.alpha_radius(te.size()) <= b.alpha_radius(te.size());
    };
    const auto grid = d_grid();
    int asserted = 0;
    for (bool scale_b : {false, true}) {
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            DwKmmConfig a, b;
            a.kernel = b.kernel = kernel;
            a.D = grid[i];
            b.D = grid[i + 1];
            a.B = 3.0;
            // Scaling B with sqrt(D) keeps C fixed.
            b.B = scale_b ? 3.0 * std::sqrt(b.D / a.D) : 3.0;
            a.epsilon = b.epsilon = 0.1;
            if (!contained(a, b))
                continue;
            ++asserted;
            const auto ra = dw_kmm(tr, te, a, &k);
            const auto rb = dw_kmm(tr, te, b, &k);
            EXPECT_LE(rb.objective, ra.objective + 1e-10) << "D " << a.D << " -> " << b.D;
        }
    }
    EXPECT_EQ(asserted, static_cast<int>(grid.size()) - 1);
}

TEST(DwKmm, InvalidConfig)
{
    std::vector<Vector> xs{scalar(0.0), scalar(1.0)};
    DwKmmConfig cfg;
    cfg.D = 0.5;
    EXPECT_THROW(dw_kmm(xs, xs, cfg), InvalidInput);
    cfg.D = 1.0;
    cfg.epsilon = -1.0;
    EXPECT_THROW(dw_kmm(xs, xs, cfg), InvalidInput);
    cfg.epsilon.reset();
    EXPECT_THROW(dw_kmm({}, xs, cfg), InvalidInput);
}

TEST(RkhsDiscrepancy, Examples)
{
    std::mt19937_64 rng(31);
    const auto tr = gaussian_cloud(rng, 12, 0.0);
    const auto te = gaussian_cloud(rng, 9, 1.2);
    const RbfKernel kernel(0.9);

    WeightPair same;
    same.beta = Vector::Ones(12);
    same.alpha = Vector::Ones(12);
    EXPECT_NEAR(rkhs_discrepancy(same, tr, tr, kernel), 0.0, 1e-7);

    WeightPair only_test;
    only_test.beta = Vector::Zero(12);
    only_test.alpha = Vector::Ones(9);
    double sum = 0.0;
    for (const auto& a : te)
        for (const auto& b : te)
            sum += std::exp(-(a - b).squaredNorm() / (2 * 0.81));
    EXPECT_NEAR(rkhs_discrepancy(only_test, tr, te, kernel), std::sqrt(sum / 81.0), 1e-12);

    for (double D : {1.0, 2.0, 6.25}) {
        DwKmmConfig cfg;
        cfg.D = D;
        cfg.B = 4.0;
        cfg.kernel = kernel;
        const auto r = dw_kmm(tr, te, cfg);
        const double disc = rkhs_discrepancy(r.weights, tr, te, kernel);
        EXPECT_NEAR(disc, std::sqrt(r.objective), 1e-8);
        EXPECT_NEAR(disc * disc, discrepancy_sq_loops(r.weights.beta, r.weights.alpha, tr, te, 0.9), 1e-12);
    }

    WeightPair bad;
    bad.beta = Vector::Ones(3);
    bad.alpha = Vector::Ones(9);
    EXPECT_THROW(rkhs_discrepancy(bad, tr, te, kernel), InvalidInput);
}

TEST(FrequencyChecks, HoeffdingEstimationBound)
{
    for (double D : {1.0, 4.0}) {
        const auto rate = checks::hoeffding(0.1, D, 100, 200, 0.1, 77);
        EXPECT_GE(rate.rate(), 0.9) << "D " << D << " held " << rate.held;
    }
}

TEST(FrequencyChecks, DiscrepancyBound)
{
    for (double D : {1.0, 4.0}) {
        const auto rate = checks::discrepancy(0.1, D, 100, 100, 1.0, 200, 0.1, 78);
        EXPECT_GE(rate.rate(), 0.9) << "D " << D << " held " << rate.held;
    }
}
