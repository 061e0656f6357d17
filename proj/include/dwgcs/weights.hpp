#ifndef DWGCS_WEIGHTS_HPP
#define DWGCS_WEIGHTS_HPP

#include "dwgcs/core.hpp"
#include "dwgcs/kernel.hpp"
#include "dwgcs/solvers/qp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace dwgcs {

using Density = std::function<double(const Vector&)>;

/// Training and testing marginals over instances. Only the ratio of the two
/// densities enters the weight formulas, so an estimated ratio r(x) can be
/// wrapped as p_tr = 1, p_te = r (see from_ratio).
struct MarginalModel {
    Density p_tr;
    Density p_te;
    /// Supremum of p_te / p_tr.
    double B = 1.0;

    static MarginalModel from_ratio(Density ratio, double B)
    {
        return {[](const Vector&) { return 1.0; }, std::move(ratio), B};
    }
};

struct WeightPair {
    Vector beta;
    Vector alpha;
    /// alpha as a function of the instance, when the marginals are known.
    Density alpha_fn;
    double D = 1.0;
    double B = 1.0;
    /// Single-weight baselines may leave the double-weighting box.
    bool baseline = false;
    /// Set when a weight hit a numerical cap.
    bool clipped = false;

    double C() const { return B / std::sqrt(D); }

    void validate() const
    {
        if (!beta.allFinite() || !alpha.allFinite())
            throw NumericalError("weights: non-finite entries");
        if (beta.size() > 0 && beta.minCoeff() < 0.0)
            throw InvalidInput("weights: negative beta");
        if (alpha.size() > 0 && alpha.minCoeff() < 0.0)
            throw InvalidInput("weights: negative alpha");
        if (baseline)
            return;
        if (beta.size() > 0 && beta.maxCoeff() > C() + 1e-6)
            throw InvalidInput("weights: beta exceeds B/sqrt(D)");
        if (alpha.size() > 0 && alpha.maxCoeff() > 1.0 + 1e-9)
            throw InvalidInput("weights: alpha exceeds 1");
    }
};

namespace detail {

inline double beta_value(double p_tr, double p_te, double cap)
{
    if (p_tr <= 0.0)
        return p_te > 0.0 ? cap : std::min(1.0, cap);
    return std::min(p_te / p_tr, cap);
}

inline double alpha_value(double p_tr, double p_te, double C)
{
    if (p_te <= 0.0)
        return p_tr > 0.0 ? 0.0 : std::min(C, 1.0);
    return std::min(C * p_tr / p_te, 1.0);
}

inline double ratio(const MarginalModel& m, const Vector& x)
{
    const double tr = m.p_tr(x);
    const double te = m.p_te(x);
    if (tr <= 0.0)
        return te > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    return te / tr;
}

} // namespace detail

/// beta = min(p_te / p_tr, C), alpha = min(C p_tr / p_te, 1).
inline WeightPair exact_double_weights(const MarginalModel& m, double C, const std::vector<Vector>& train_x,
                                       const std::vector<Vector>& test_x)
{
    if (!(C > 0.0))
        throw InvalidInput("exact weights: C must be positive");
    WeightPair w;
    w.B = m.B;
    w.D = C < m.B ? (m.B / C) * (m.B / C) : 1.0;
    if (C > m.B)
        w.B = C;
    w.beta.resize(static_cast<Eigen::Index>(train_x.size()));
    for (std::size_t i = 0; i < train_x.size(); ++i)
        w.beta[static_cast<Eigen::Index>(i)] = detail::beta_value(m.p_tr(train_x[i]), m.p_te(train_x[i]), C);
    w.alpha_fn = [m, C](const Vector& x) { return detail::alpha_value(m.p_tr(x), m.p_te(x), C); };
    w.alpha.resize(static_cast<Eigen::Index>(test_x.size()));
    for (std::size_t j = 0; j < test_x.size(); ++j)
        w.alpha[static_cast<Eigen::Index>(j)] = w.alpha_fn(test_x[j]);
    return w;
}

/// beta = p_te / p_tr capped at `cap`, alpha = 1.
inline WeightPair reweighted_weights(const MarginalModel& m, const std::vector<Vector>& train_x,
                                     const std::vector<Vector>& test_x, double cap = 1000.0)
{
    WeightPair w;
    w.baseline = true;
    w.B = cap;
    w.beta.resize(static_cast<Eigen::Index>(train_x.size()));
    for (std::size_t i = 0; i < train_x.size(); ++i) {
        const double r = detail::ratio(m, train_x[i]);
        w.clipped = w.clipped || r > cap;
        w.beta[static_cast<Eigen::Index>(i)] = std::min(r, cap);
    }
    w.alpha = Vector::Ones(static_cast<Eigen::Index>(test_x.size()));
    w.alpha_fn = [](const Vector&) { return 1.0; };
    return w;
}

inline constexpr double kRobustAlphaCap = 1e6;

/// beta = 1, alpha = p_tr / p_te (may exceed 1; capped at 1e6).
inline WeightPair robust_weights(const MarginalModel& m, const std::vector<Vector>& train_x,
                                 const std::vector<Vector>& test_x)
{
    WeightPair w;
    w.baseline = true;
    w.B = m.B;
    w.beta = Vector::Ones(static_cast<Eigen::Index>(train_x.size()));
    auto fn = [m](const Vector& x) {
        const double te = m.p_te(x);
        const double tr = m.p_tr(x);
        if (te <= 0.0)
            return tr > 0.0 ? kRobustAlphaCap : 1.0;
        return std::min(tr / te, kRobustAlphaCap);
    };
    w.alpha.resize(static_cast<Eigen::Index>(test_x.size()));
    for (std::size_t j = 0; j < test_x.size(); ++j) {
        const double a = fn(test_x[j]);
        w.clipped = w.clipped || a >= kRobustAlphaCap;
        w.alpha[static_cast<Eigen::Index>(j)] = a;
    }
    w.alpha_fn = fn;
    return w;
}

enum class Flattening { Power, Mixture };

/// Power: beta = r^gamma. Mixture: beta = p_te / (gamma p_te + (1 - gamma) p_tr).
/// alpha is left empty (these baselines never use test weights).
inline WeightPair flattening_weights(const MarginalModel& m, double gamma, Flattening variant,
                                     const std::vector<Vector>& train_x)
{
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw InvalidInput("flattening: gamma must lie in [0, 1]");
    WeightPair w;
    w.baseline = true;
    w.B = m.B;
    w.beta.resize(static_cast<Eigen::Index>(train_x.size()));
    for (std::size_t i = 0; i < train_x.size(); ++i) {
        double b;
        if (variant == Flattening::Power) {
            b = gamma == 0.0 ? 1.0 : std::pow(detail::ratio(m, train_x[i]), gamma);
        } else {
            const double te = m.p_te(train_x[i]);
            const double denom = gamma * te + (1.0 - gamma) * m.p_tr(train_x[i]);
            b = denom > 0.0 ? te / denom : 1.0;
        }
        if (!std::isfinite(b)) {
            b = kRobustAlphaCap;
            w.clipped = true;
        }
        w.beta[static_cast<Eigen::Index>(i)] = b;
    }
    w.alpha_fn = [](const Vector&) { return 1.0; };
    return w;
}

/// Logistic discriminator between training (label 0) and testing (label 1)
/// instances, giving r(x) = (n / t) q(x) / (1 - q(x)).
struct RatioClassifier {
    Vector w;
    double bias = 0.0;
    double prior = 1.0;

    double log_ratio(const Vector& x) const { return std::log(prior) + w.dot(x) + bias; }
    double operator()(const Vector& x) const { return std::exp(std::min(log_ratio(x), 700.0)); }
};

/// Newton's method on the L2-regularized logistic loss; the intercept is not
/// penalized.
inline RatioClassifier fit_ratio_classifier(const std::vector<Vector>& train_x, const std::vector<Vector>& test_x,
                                            double l2 = 1.0)
{
    const std::size_t n = train_x.size();
    const std::size_t t = test_x.size();
    if (n < 2 || t < 2)
        throw InvalidInput("ratio classifier: need at least two instances per side");
    const Eigen::Index d = train_x.front().size();
    const Eigen::Index p = d + 1;
    Matrix x(static_cast<Eigen::Index>(n + t), p);
    Vector y(static_cast<Eigen::Index>(n + t));
    for (std::size_t i = 0; i < n + t; ++i) {
        const Vector& v = i < n ? train_x[i] : test_x[i - n];
        if (v.size() != d)
            throw InvalidInput("ratio classifier: dimension mismatch");
        const auto r = static_cast<Eigen::Index>(i);
        x.row(r).head(d) = v.transpose();
        x(r, d) = 1.0;
        y[r] = i < n ? 0.0 : 1.0;
    }
    Vector theta = Vector::Zero(p);
    Matrix reg = Matrix::Identity(p, p) * l2;
    reg(d, d) = 0.0;
    for (int it = 0; it < 100; ++it) {
        const Vector margin = x * theta;
        Vector g = reg * theta;
        Matrix h = reg;
        Vector s(margin.size());
        for (Eigen::Index i = 0; i < margin.size(); ++i)
            s[i] = 1.0 / (1.0 + std::exp(-margin[i]));
        g += x.transpose() * (s - y);
        const Vector curv = (s.array() * (1.0 - s.array())).matrix();
        h += x.transpose() * curv.asDiagonal() * x;
        h.diagonal().array() += 1e-10;
        const Vector step = h.ldlt().solve(g);
        if (!step.allFinite())
            throw NumericalError("ratio classifier: Newton step failed");
        theta -= step;
        if (step.lpNorm<Eigen::Infinity>() < 1e-12)
            break;
    }
    RatioClassifier out;
    out.w = theta.head(d);
    out.bias = theta[d];
    out.prior = static_cast<double>(n) / static_cast<double>(t);
    return out;
}

/// Reweighted-style pair from the discriminator: beta = r(x) clipped to
/// [0, cap], alpha = 1.
inline WeightPair classifier_ratio_weights(const std::vector<Vector>& train_x, const std::vector<Vector>& test_x,
                                           double cap = 1000.0, double l2 = 1.0)
{
    const auto model = fit_ratio_classifier(train_x, test_x, l2);
    return reweighted_weights(MarginalModel::from_ratio(model, cap), train_x, test_x, cap);
}

struct DwKmmConfig {
    double D = 1.0;
    double B = 1000.0;
    /// Mean-matching slack; defaults to (B / sqrt(D)) / sqrt(n).
    std::optional<double> epsilon;
    RbfKernel kernel{1.0};
    solvers::QpSettings qp{};

    double C() const { return B / std::sqrt(D); }
    double slack(std::size_t n) const { return epsilon ? *epsilon : C() / std::sqrt(static_cast<double>(n)); }
    double alpha_radius(std::size_t t) const
    {
        return (1.0 - 1.0 / std::sqrt(D)) * std::sqrt(static_cast<double>(t));
    }
    void validate() const
    {
        if (!(D >= 1.0))
            throw InvalidInput("dw-kmm: D must be >= 1");
        if (!(B > 0.0))
            throw InvalidInput("dw-kmm: B must be positive");
        if (epsilon && !(*epsilon >= 0.0))
            throw InvalidInput("dw-kmm: epsilon must be nonnegative");
    }
};

struct KmmSolution {
    WeightPair weights;
    /// Squared RKHS discrepancy at the solution.
    double objective = 0.0;
    double kkt_residual = 0.0;
    bool max_iter_reached = false;
};

inline std::vector<Vector> joint_instances(const std::vector<Vector>& train_x, const std::vector<Vector>& test_x)
{
    std::vector<Vector> all(train_x);
    all.insert(all.end(), test_x.begin(), test_x.end());
    return all;
}

/// The DW-KMM quadratic program over z = (beta, alpha) for a precomputed
/// joint Gram matrix (training rows first).
inline solvers::QpProblem dw_kmm_problem(const Matrix& joint_gram, std::size_t n, std::size_t t,
                                         const DwKmmConfig& cfg)
{
    cfg.validate();
    const auto nn = static_cast<Eigen::Index>(n);
    const auto tt = static_cast<Eigen::Index>(t);
    if (joint_gram.rows() != nn + tt || joint_gram.cols() != nn + tt)
        throw InvalidInput("dw-kmm: Gram size mismatch");
    Vector scale(nn + tt);
    scale.head(nn).setConstant(1.0 / static_cast<double>(n));
    scale.tail(tt).setConstant(-1.0 / static_cast<double>(t));

    solvers::QpProblem p;
    p.hessian = 2.0 * scale.asDiagonal() * joint_gram * scale.asDiagonal();
    p.linear = Vector::Zero(nn + tt);
    p.lower = Vector::Zero(nn + tt);
    p.upper.resize(nn + tt);
    p.upper.head(nn).setConstant(cfg.C());
    p.upper.tail(tt).setConstant(1.0);
    p.linear_slacks.push_back({scale, 0.0, cfg.slack(n)});
    solvers::BallConstraint ball;
    ball.center = Vector::Ones(tt);
    ball.radius = cfg.alpha_radius(t);
    for (Eigen::Index j = 0; j < tt; ++j)
        ball.indices.push_back(nn + j);
    p.ball = ball;
    return p;
}

inline KmmSolution dw_kmm(const std::vector<Vector>& train_x, const std::vector<Vector>& test_x,
                          const DwKmmConfig& cfg, const Matrix* joint_gram = nullptr,
                          const Vector* start = nullptr)
{
    if (train_x.empty() || test_x.empty())
        throw InvalidInput("dw-kmm: need training and testing instances");
    const std::size_t n = train_x.size();
    const std::size_t t = test_x.size();
    Matrix local;
    if (!joint_gram) {
        const auto all = joint_instances(train_x, test_x);
        local = gram(cfg.kernel, all, all);
        joint_gram = &local;
    }
    const auto problem = dw_kmm_problem(*joint_gram, n, t, cfg);
    Vector z0(static_cast<Eigen::Index>(n + t));
    if (start) {
        z0 = *start;
    } else if (cfg.D > 1.0) {
        // Strictly inside the box and the alpha-ball, with equal means.
        z0.setConstant(0.5 * (1.0 / std::sqrt(cfg.D) + std::min(cfg.C(), 1.0)));
    } else {
        z0.head(static_cast<Eigen::Index>(n)).setConstant(std::min(1.0, 0.5 * cfg.C()));
        z0.tail(static_cast<Eigen::Index>(t)).setConstant(1.0);
    }
    const auto r = solvers::solve_qp(problem, cfg.qp, z0);

    KmmSolution out;
    out.weights.beta = r.z.head(static_cast<Eigen::Index>(n));
    out.weights.alpha = r.z.tail(static_cast<Eigen::Index>(t));
    out.weights.D = cfg.D;
    out.weights.B = cfg.B;
    out.objective = std::max(0.0, r.objective);
    out.kkt_residual = r.kkt_residual;
    out.max_iter_reached = r.max_iter_reached;
    return out;
}

/// Conventional kernel mean matching: beta only, alpha fixed at 1.
/// min |(1/n) sum beta_i k(x_i) - (1/t) sum k(x_j)|^2
/// s.t. 0 <= beta <= B, |mean(beta) - 1| <= eps.
inline KmmSolution kmm(const std::vector<Vector>& train_x, const std::vector<Vector>& test_x,
                       const DwKmmConfig& cfg)
{
    if (train_x.empty() || test_x.empty())
        throw InvalidInput("kmm: need training and testing instances");
    DwKmmConfig one = cfg;
    one.D = 1.0;
    one.validate();
    const double n = static_cast<double>(train_x.size());
    const double t = static_cast<double>(test_x.size());
    const Matrix k_tr = gram(cfg.kernel, train_x, train_x);
    const Matrix k_cross = gram(cfg.kernel, train_x, test_x);
    const Matrix k_te = gram(cfg.kernel, test_x, test_x);

    solvers::QpProblem p;
    p.hessian = (2.0 / (n * n)) * k_tr;
    p.linear = (-2.0 / (n * t)) * k_cross.rowwise().sum();
    p.lower = Vector::Zero(k_tr.rows());
    p.upper = Vector::Constant(k_tr.rows(), one.C());
    p.linear_slacks.push_back({Vector::Constant(k_tr.rows(), 1.0 / n), 1.0, one.slack(train_x.size())});
    const Vector z0 = Vector::Constant(k_tr.rows(), std::min(one.C(), 1.0));
    const auto r = solvers::solve_qp(p, cfg.qp, z0);

    KmmSolution out;
    out.weights.beta = r.z;
    out.weights.alpha = Vector::Ones(static_cast<Eigen::Index>(test_x.size()));
    out.weights.alpha_fn = [](const Vector&) { return 1.0; };
    out.weights.B = cfg.B;
    out.objective = std::max(0.0, r.objective + k_te.sum() / (t * t));
    out.kkt_residual = r.kkt_residual;
    out.max_iter_reached = r.max_iter_reached;
    return out;
}

/// |(1/n) sum beta_i k(x_i) - (1/t) sum alpha_j k(x_j)|_H.
inline double rkhs_discrepancy(const WeightPair& pair, const std::vector<Vector>& train_x,
                               const std::vector<Vector>& test_x, const RbfKernel& kernel)
{
    if (static_cast<std::size_t>(pair.beta.size()) != train_x.size() ||
        static_cast<std::size_t>(pair.alpha.size()) != test_x.size())
        throw InvalidInput("rkhs discrepancy: weight dimensions do not match data");
    const double n = static_cast<double>(train_x.size());
    const double t = static_cast<double>(test_x.size());
    const Vector b = pair.beta / n;
    const Vector a = pair.alpha / t;
    const double sq = b.dot(gram(kernel, train_x, train_x) * b) - 2.0 * b.dot(gram(kernel, train_x, test_x) * a) +
                      a.dot(gram(kernel, test_x, test_x) * a);
    return std::sqrt(std::max(0.0, sq));
}

} // namespace dwgcs

#endif
