#ifndef DWGCS_MRC_HPP
#define DWGCS_MRC_HPP

#include "dwgcs/core.hpp"
#include "dwgcs/kernel.hpp"
#include "dwgcs/solvers/lp.hpp"
#include "dwgcs/solvers/subgradient.hpp"
#include "dwgcs/weights.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dwgcs {

/// The set of distributions with the testing marginal whose alpha-weighted
/// feature expectation lies within lambda of tau.
struct UncertaintySpec {
    Vector tau;
    Vector lambda;
    /// alpha at each instance used for the expectation term.
    Vector alpha_values;
    FeatureMap feature_map{FeatureKind::IdentityOneHot, 1, 2};

    void validate() const
    {
        const auto m = feature_map.size();
        if (tau.size() != m || lambda.size() != m)
            throw InvalidInput("uncertainty set: tau/lambda length does not match the feature map");
        if (lambda.size() > 0 && lambda.minCoeff() < 0.0)
            throw InvalidInput("uncertainty set: negative lambda");
        if (alpha_values.size() > 0 && alpha_values.minCoeff() < 0.0)
            throw InvalidInput("uncertainty set: negative alpha");
    }
};

struct MrcModel {
    Vector mu;
    LossKind loss = LossKind::ZeroOne;
    double minimax_risk = 0.0;
    UncertaintySpec spec;
    double D = 1.0;
    int iterations = 0;
};

/// (1/n) sum beta_i Phi(x_i, y_i).
inline Vector mean_vector(const std::vector<LabeledSample>& train, const Vector& beta, const FeatureMap& map)
{
    if (static_cast<std::size_t>(beta.size()) != train.size())
        throw InvalidInput("mean vector: beta length does not match the training set");
    if (train.empty())
        throw InvalidInput("mean vector: no training samples");
    Vector tau = Vector::Zero(map.size());
    const int b = map.block_size();
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& s = train[i];
        if (s.y < 1 || s.y > map.n_classes())
            throw InvalidInput("mean vector: label out of range");
        tau.segment((s.y - 1) * b, b) += beta[static_cast<Eigen::Index>(i)] * map.instance_map(s.x);
    }
    return tau / static_cast<double>(train.size());
}

namespace detail {

    struct Phi01 {
        double value = 0.0;
        /// Labels (0-based) of the maximizing subset.
        std::vector<int> set;
    };

    /// 1 + max over nonempty C of (sum_{y in C} v_y - 1) / |C|. The best C is
    /// a prefix of the labels sorted by decreasing value; `order` receives that
    /// sort and `size` the length of the maximizing prefix.
    template <class Values>
    double phi01_prefix(const Values& v, std::vector<int>& order, int& size)
    {
        const int k = static_cast<int>(v.size());
        order.resize(static_cast<std::size_t>(k));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v(a) > v(b); });
        double sum = 0.0;
        double best = -std::numeric_limits<double>::infinity();
        size = 1;
        for (int r = 0; r < k; ++r) {
            sum += v(order[static_cast<std::size_t>(r)]);
            const double val = (sum - 1.0) / (r + 1);
            if (val > best) {
                best = val;
                size = r + 1;
            }
        }
        return 1.0 + best;
    }

    inline Phi01 phi01_values(const Vector& v)
    {
        Phi01 out;
        int size = 1;
        out.value = phi01_prefix(v, out.set, size);
        out.set.resize(static_cast<std::size_t>(size));
        return out;
    }

    inline double log_sum_exp(const Vector& v)
    {
        const double top = v.maxCoeff();
        return top + std::log((v.array() - top).exp().sum());
    }

    /// v_y = alpha * psi(x)^T mu_y.
    inline Vector label_values(const Vector& mu, const Vector& x, double alpha, const FeatureMap& map)
    {
        if (mu.size() != map.size())
            throw InvalidInput("mrc: parameter length does not match the feature map");
        const Vector psi = map.instance_map(x);
        const int b = map.block_size();
        Vector v(map.n_classes());
        for (int y = 0; y < map.n_classes(); ++y)
            v[y] = alpha * psi.dot(mu.segment(y * b, b));
        return v;
    }

    inline double phi(LossKind loss, const Vector& v)
    {
        return loss == LossKind::ZeroOne ? phi01_values(v).value : log_sum_exp(v);
    }

    inline Vector probabilities(LossKind loss, const Vector& v)
    {
        if (loss == LossKind::Log) {
            const Vector e = (v.array() - v.maxCoeff()).exp();
            return e / e.sum();
        }
        const double f = phi01_values(v).value;
        return (v.array() - f + 1.0).max(0.0);
    }

} // namespace detail

inline double phi01(const Vector& mu, const Vector& x, double alpha_x, const FeatureMap& map)
{
    if (alpha_x < 0.0)
        throw InvalidInput("phi01: negative alpha");
    return detail::phi01_values(detail::label_values(mu, x, alpha_x, map)).value;
}

inline double phi_log(const Vector& mu, const Vector& x, double alpha_x, const FeatureMap& map)
{
    if (alpha_x < 0.0)
        throw InvalidInput("phi_log: negative alpha");
    return detail::log_sum_exp(detail::label_values(mu, x, alpha_x, map));
}

/// -tau^T mu + sum_j w_j phi(mu, x_j, alpha_j) + lambda^T |mu| over a fixed
/// set of instances with masses w_j.
class MrcObjective {
public:
    MrcObjective(const FeatureMap& map, LossKind loss, const std::vector<Vector>& xs, Vector alpha, Vector mass,
                 Vector tau, Vector lambda)
        : map_(map), loss_(loss), psi_(map.instance_matrix(xs)), alpha_(std::move(alpha)), mass_(std::move(mass)),
          tau_(std::move(tau)), lambda_(std::move(lambda))
    {
        const auto count = static_cast<Eigen::Index>(xs.size());
        if (alpha_.size() != count || mass_.size() != count)
            throw InvalidInput("mrc objective: alpha/mass length does not match the instances");
        if (tau_.size() != map.size() || lambda_.size() != map.size())
            throw InvalidInput("mrc objective: tau/lambda length does not match the feature map");
    }

    double operator()(const Vector& mu) const { return -tau_.dot(mu) + expectation(mu) + lambda_.dot(mu.cwiseAbs()); }

    /// sum_j w_j phi(mu, x_j, alpha_j).
    double expectation(const Vector& mu) const
    {
        const Matrix v = values(mu);
        double sum = 0.0;
        for (Eigen::Index j = 0; j < v.rows(); ++j)
            sum += mass_[j] * detail::phi(loss_, v.row(j).transpose());
        return sum;
    }

    double value_and_subgradient(const Vector& mu, Vector& grad) const
    {
        const Matrix v = values(mu);
        const int k = map_.n_classes();
        Matrix coeff = Matrix::Zero(v.rows(), k);
        std::vector<int> order;
        double sum = 0.0;
        for (Eigen::Index j = 0; j < v.rows(); ++j) {
            const auto row = v.row(j);
            if (loss_ == LossKind::ZeroOne) {
                int size = 1;
                sum += mass_[j] * detail::phi01_prefix(row, order, size);
                const double share = mass_[j] * alpha_[j] / static_cast<double>(size);
                for (int r = 0; r < size; ++r)
                    coeff(j, order[static_cast<std::size_t>(r)]) = share;
            } else {
                const double top = row.maxCoeff();
                double z = 0.0;
                for (int y = 0; y < k; ++y) {
                    coeff(j, y) = std::exp(row(y) - top);
                    z += coeff(j, y);
                }
                sum += mass_[j] * (top + std::log(z));
                coeff.row(j) *= mass_[j] * alpha_[j] / z;
            }
        }
        const Matrix g = psi_.transpose() * coeff;
        grad = -tau_ + Eigen::Map<const Vector>(g.data(), g.size());
        for (Eigen::Index i = 0; i < mu.size(); ++i)
            if (mu[i] != 0.0)
                grad[i] += mu[i] > 0.0 ? lambda_[i] : -lambda_[i];
        return -tau_.dot(mu) + sum + lambda_.dot(mu.cwiseAbs());
    }

    /// Standard error of the expectation term when the instances are an
    /// i.i.d. sample with equal masses.
    double expectation_std_error(const Vector& mu) const
    {
        const Matrix v = values(mu);
        const auto count = v.rows();
        if (count < 2)
            return 0.0;
        Vector terms(count);
        for (Eigen::Index j = 0; j < count; ++j)
            terms[j] = detail::phi(loss_, v.row(j).transpose());
        const double mean = terms.mean();
        const double var = (terms.array() - mean).square().sum() / static_cast<double>(count - 1);
        return std::sqrt(var / static_cast<double>(count));
    }

    const Vector& tau() const { return tau_; }
    const Vector& lambda() const { return lambda_; }

private:
    Matrix values(const Vector& mu) const
    {
        if (mu.size() != map_.size())
            throw InvalidInput("mrc objective: parameter length does not match the feature map");
        const Eigen::Map<const Matrix> blocks(mu.data(), map_.block_size(), map_.n_classes());
        return alpha_.asDiagonal() * (psi_ * blocks);
    }

    FeatureMap map_;
    LossKind loss_;
    Matrix psi_;
    Vector alpha_;
    Vector mass_;
    Vector tau_;
    Vector lambda_;
};

struct LambdaSelection {
    Vector lambda;
    /// p(y | x_j): row j, column y - 1.
    Matrix conditional;
};

/// min 1^T lambda over lambda >= 0 and p(y|x_j) >= 0 with sum_y p(y|x_j) = mass_j
/// and |sum_j sum_y p(y|x_j) alpha_j Phi(x_j, y) - tau| <= lambda.
inline LambdaSelection select_lambda_weighted(const Vector& tau, const Vector& alpha_values,
                                              const std::vector<Vector>& xs, const Vector& mass,
                                              const FeatureMap& map)
{
    const auto count = static_cast<Eigen::Index>(xs.size());
    if (count < 1)
        throw InvalidInput("select_lambda: need at least one instance");
    if (alpha_values.size() != count || mass.size() != count)
        throw InvalidInput("select_lambda: alpha/mass length does not match the instances");
    if (tau.size() != map.size())
        throw InvalidInput("select_lambda: tau length does not match the feature map");
    const int k = map.n_classes();
    const int b = map.block_size();
    const Eigen::Index m = map.size();
    const Eigen::Index np = count * k;

    // a(:, j k + y) = alpha_j Phi(x_j, y).
    Matrix a = Matrix::Zero(m, np);
    const Matrix psi = map.instance_matrix(xs);
    for (Eigen::Index j = 0; j < count; ++j)
        for (int y = 0; y < k; ++y)
            a.block(y * b, j * k + y, b, 1) = alpha_values[j] * psi.row(j).transpose();

    solvers::LpProblem lp;
    lp.objective = Vector::Zero(np + m);
    lp.objective.tail(m).setOnes();
    lp.a_ub = Matrix::Zero(2 * m, np + m);
    lp.a_ub.topLeftCorner(m, np) = a;
    lp.a_ub.bottomLeftCorner(m, np) = -a;
    lp.a_ub.topRightCorner(m, m) = -Matrix::Identity(m, m);
    lp.a_ub.bottomRightCorner(m, m) = -Matrix::Identity(m, m);
    lp.b_ub.resize(2 * m);
    lp.b_ub << tau, -tau;
    lp.a_eq = Matrix::Zero(count, np + m);
    for (Eigen::Index j = 0; j < count; ++j)
        lp.a_eq.block(j, j * k, 1, k).setOnes();
    lp.b_eq = mass;

    const auto sol = solvers::solve_lp(lp);
    LambdaSelection out;
    out.conditional.resize(count, k);
    for (Eigen::Index j = 0; j < count; ++j)
        for (int y = 0; y < k; ++y)
            out.conditional(j, y) = std::max(0.0, sol.x[j * k + y]);
    // The tightest lambda for the returned p.
    out.lambda = (a * sol.x.head(np) - tau).cwiseAbs();
    return out;
}

inline Vector select_lambda(const Vector& tau, const Vector& alpha_values, const std::vector<Vector>& test_x,
                            const FeatureMap& map)
{
    const auto t = static_cast<Eigen::Index>(test_x.size());
    if (t < 1)
        throw InvalidInput("select_lambda: need at least one testing instance");
    return select_lambda_weighted(tau, alpha_values, test_x, Vector::Constant(t, 1.0 / static_cast<double>(t)), map)
        .lambda;
}

struct MrcSettings {
    solvers::SubgradSettings solver{};
    /// Replaces the LP-selected lambda when set.
    std::optional<Vector> lambda;
};

namespace detail {

    inline MrcModel fit_on(const FeatureMap& map, LossKind loss, const std::vector<Vector>& xs, const Vector& alpha,
                           const Vector& mass, const Vector& tau, const MrcSettings& settings, double D)
    {
        MrcModel model;
        model.loss = loss;
        model.D = D;
        model.spec.feature_map = map;
        model.spec.tau = tau;
        model.spec.alpha_values = alpha;
        if (settings.lambda) {
            if (settings.lambda->size() != map.size() || settings.lambda->minCoeff() < 0.0)
                throw InvalidInput("mrc fit: lambda override must be nonnegative with length m");
            model.spec.lambda = *settings.lambda;
        } else {
            model.spec.lambda = select_lambda_weighted(tau, alpha, xs, mass, map).lambda;
        }
        model.spec.validate();

        const MrcObjective objective(map, loss, xs, alpha, mass, tau, model.spec.lambda);
        const auto r = solvers::minimize_subgradient(
            [&](const Vector& mu, Vector& grad) { return objective.value_and_subgradient(mu, grad); },
            Vector::Zero(map.size()), settings.solver);
        model.mu = r.argmin;
        model.iterations = r.iterations;
        model.minimax_risk = objective(model.mu);
        return model;
    }

} // namespace detail

/// Learns the classifier parameters from the weighted mean vector, the
/// selected lambda and the testing instances.
inline MrcModel fit(const std::vector<LabeledSample>& train, const std::vector<Vector>& test_x,
                    const WeightPair& weights, LossKind loss, const FeatureMap& map, const MrcSettings& settings = {})
{
    if (static_cast<std::size_t>(weights.beta.size()) != train.size() ||
        static_cast<std::size_t>(weights.alpha.size()) != test_x.size())
        throw InvalidInput("mrc fit: weight dimensions do not match the data");
    if (test_x.empty())
        throw InvalidInput("mrc fit: no testing instances");
    weights.validate();
    const auto t = static_cast<Eigen::Index>(test_x.size());
    const Vector tau = mean_vector(train, weights.beta, map);
    return detail::fit_on(map, loss, test_x, weights.alpha, Vector::Constant(t, 1.0 / static_cast<double>(t)), tau,
                          settings, weights.D);
}

/// Variant for known marginals without testing instances: the expectation
/// over the testing marginal is taken on the training instances with masses
/// beta_i / n, and alpha is evaluated there through weights.alpha_fn.
inline MrcModel fit_without_test(const std::vector<LabeledSample>& train, const WeightPair& weights, LossKind loss,
                                 const FeatureMap& map, const MrcSettings& settings = {})
{
    if (static_cast<std::size_t>(weights.beta.size()) != train.size())
        throw InvalidInput("mrc fit: beta length does not match the training set");
    if (!weights.alpha_fn)
        throw InvalidInput("mrc fit: alpha function required without testing instances");
    std::vector<Vector> xs;
    xs.reserve(train.size());
    Vector alpha(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        xs.push_back(train[i].x);
        alpha[static_cast<Eigen::Index>(i)] = weights.alpha_fn(train[i].x);
    }
    const Vector mass = weights.beta / static_cast<double>(train.size());
    if (!(mass.sum() > 0.0))
        throw InvalidInput("mrc fit: beta sums to zero");
    const Vector tau = mean_vector(train, weights.beta, map);
    return detail::fit_on(map, loss, xs, alpha, mass / mass.sum(), tau, settings, weights.D);
}

/// Algorithm objective recomputed at the stored parameters.
inline double recompute_minimax_risk(const MrcModel& model, const std::vector<Vector>& test_x)
{
    const auto t = static_cast<Eigen::Index>(test_x.size());
    const MrcObjective objective(model.spec.feature_map, model.loss, test_x, model.spec.alpha_values,
                                 Vector::Constant(t, 1.0 / static_cast<double>(t)), model.spec.tau,
                                 model.spec.lambda);
    return objective(model.mu);
}

inline Vector predict_probs(const MrcModel& model, const Vector& x, double alpha_x)
{
    if (alpha_x < 0.0)
        throw InvalidInput("predict_probs: negative alpha");
    return detail::probabilities(model.loss, detail::label_values(model.mu, x, alpha_x, model.spec.feature_map));
}

/// argmax_y Phi(x, y)^T mu, ties to the smallest label.
inline Label predict_label(const MrcModel& model, const Vector& x)
{
    const Vector v = detail::label_values(model.mu, x, 1.0, model.spec.feature_map);
    Eigen::Index best = 0;
    for (Eigen::Index y = 1; y < v.size(); ++y)
        if (v[y] > v[best])
            best = y;
    return static_cast<Label>(best + 1);
}

inline std::vector<Label> predict_labels(const MrcModel& model, const std::vector<Vector>& xs)
{
    std::vector<Label> out;
    out.reserve(xs.size());
    for (const auto& x : xs)
        out.push_back(predict_label(model, x));
    return out;
}

inline Rule as_rule(const MrcModel& model)
{
    return [model](const Vector& x, double alpha) { return predict_probs(model, x, alpha); };
}

/// D values with 1 - 1/sqrt(D) in {0, 0.1, ..., 0.9}.
inline std::vector<double> default_d_grid()
{
    std::vector<double> grid;
    for (int i = 0; i < 10; ++i) {
        const double s = 1.0 - 0.1 * i;
        grid.push_back(1.0 / (s * s));
    }
    return grid;
}

struct DSelection {
    double D = 1.0;
    std::size_t index = 0;
    std::vector<double> risks;
    std::vector<MrcModel> models;
    MrcModel model;
};

using WeightProvider = std::function<WeightPair(double D)>;

/// Fits one model per D and keeps the one with the lowest minimax risk
/// (ties to the earlier grid entry).
inline DSelection select_D(const std::vector<LabeledSample>& train, const std::vector<Vector>& test_x,
                           const std::vector<double>& grid, LossKind loss, const FeatureMap& map,
                           const WeightProvider& weights_for, const MrcSettings& settings = {})
{
    if (grid.empty())
        throw InvalidInput("select_D: empty grid");
    DSelection out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 1.0))
            throw InvalidInput("select_D: grid values must be >= 1");
        auto model = fit(train, test_x, weights_for(grid[i]), loss, map, settings);
        model.D = grid[i];
        out.risks.push_back(model.minimax_risk);
        if (i == 0 || model.minimax_risk < out.risks[out.index])
            out.index = i;
        out.models.push_back(std::move(model));
    }
    out.D = grid[out.index];
    out.model = out.models[out.index];
    return out;
}

/// select_D with DW-KMM weights; the joint Gram matrix is computed once.
inline DSelection select_D(const std::vector<LabeledSample>& train, const std::vector<Vector>& test_x,
                           const std::vector<double>& grid, LossKind loss, const FeatureMap& map,
                           const DwKmmConfig& base, const MrcSettings& settings = {})
{
    std::vector<Vector> train_x;
    train_x.reserve(train.size());
    for (const auto& s : train)
        train_x.push_back(s.x);
    const auto all = joint_instances(train_x, test_x);
    const Matrix joint = gram(base.kernel, all, all);
    return select_D(
        train, test_x, grid, loss, map,
        [&](double D) {
            DwKmmConfig cfg = base;
            cfg.D = D;
            return dw_kmm(train_x, test_x, cfg, &joint).weights;
        },
        settings);
}

/// E_te[alpha(x) Phi(x, y)] estimated from labeled testing draws.
inline Vector expected_feature(const std::vector<LabeledSample>& draws, const Density& alpha_fn,
                               const FeatureMap& map)
{
    if (draws.empty())
        throw InvalidInput("expected feature: no draws");
    Vector alpha(static_cast<Eigen::Index>(draws.size()));
    for (std::size_t i = 0; i < draws.size(); ++i)
        alpha[static_cast<Eigen::Index>(i)] = alpha_fn(draws[i].x);
    return mean_vector(draws, alpha, map);
}

struct MonteCarloValue {
    double value = 0.0;
    double std_error = 0.0;
};

struct SmallestRisk {
    double value = 0.0;
    double std_error = 0.0;
    Vector mu;
};

/// Smallest minimax risk with exact expectations, both replaced by averages
/// over labeled testing draws.
inline SmallestRisk smallest_minimax_risk(const std::vector<LabeledSample>& draws, const Density& alpha_fn,
                                          const FeatureMap& map, LossKind loss,
                                          const solvers::SubgradSettings& settings = {})
{
    const auto count = static_cast<Eigen::Index>(draws.size());
    if (count < 2)
        throw InvalidInput("smallest minimax risk: need at least two draws");
    std::vector<Vector> xs;
    xs.reserve(draws.size());
    Vector alpha(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        xs.push_back(draws[static_cast<std::size_t>(i)].x);
        alpha[i] = alpha_fn(xs.back());
    }
    const Vector tau = mean_vector(draws, alpha, map);
    const MrcObjective objective(map, loss, xs, alpha, Vector::Constant(count, 1.0 / static_cast<double>(count)), tau,
                                 Vector::Zero(map.size()));
    const auto r = solvers::minimize_subgradient(
        [&](const Vector& mu, Vector& grad) { return objective.value_and_subgradient(mu, grad); },
        Vector::Zero(map.size()), settings);

    // Per-draw terms -alpha Phi^T mu + phi(mu, x, alpha).
    Vector terms(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        const auto& s = draws[static_cast<std::size_t>(i)];
        const Vector v = detail::label_values(r.argmin, s.x, alpha[i], map);
        terms[i] = -v[s.y - 1] + detail::phi(loss, v);
    }
    const double mean = terms.mean();
    const double var = (terms.array() - mean).square().sum() / static_cast<double>(count - 1);
    return {objective(r.argmin), std::sqrt(var / static_cast<double>(count)), r.argmin};
}

/// Expected loss of the randomized rule, by Monte Carlo over labeled testing
/// draws (0-1: 1 - h(y|x); log: -log h(y|x), capped).
inline MonteCarloValue mc_risk(const MrcModel& model, const std::vector<LabeledSample>& draws, const Density& alpha_fn)
{
    const auto count = static_cast<Eigen::Index>(draws.size());
    if (count < 2)
        throw InvalidInput("mc risk: need at least two draws");
    Vector terms(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        const auto& s = draws[static_cast<std::size_t>(i)];
        terms[i] = loss(model.loss, predict_probs(model, s.x, alpha_fn(s.x)), s.y).value;
    }
    const double mean = terms.mean();
    const double var = (terms.array() - mean).square().sum() / static_cast<double>(count - 1);
    return {mean, std::sqrt(var / static_cast<double>(count))};
}

struct BoundSettings {
    /// Confidence level of the sample-size bound.
    double delta = 0.1;
    std::size_t n = 0;
    double B = 1.0;
    /// Number of standard errors tolerated before a bound counts as violated.
    double tolerance_se = 3.0;
    bool smallest_risk = true;
    solvers::SubgradSettings smallest_risk_solver{.max_iter = 2000};
    /// Reused instead of solving for the smallest minimax risk again.
    std::optional<SmallestRisk> smallest;
};

struct BoundReport {
    MonteCarloValue risk;
    double minimax_risk = 0.0;
    /// Minimax objective at mu* with the testing expectation taken over the draws.
    MonteCarloValue population_minimax_risk;
    Vector expected_feature;
    bool lambda_covers = false;
    /// First bound: R(U) + (|tau - E Phi_alpha| - lambda)^T |mu*|.
    double bound_first = 0.0;
    bool first_violated = false;
    std::optional<SmallestRisk> smallest;
    /// Second bound: R_inf + lambda^T (|mu_inf| - |mu*|) + |tau - E Phi_alpha|^T |mu_inf - mu*|.
    double bound_second = 0.0;
    bool second_violated = false;
    /// R_inf + M |mu_inf - mu*|_inf sqrt(2 B^2 log(2 / delta) / (D n)).
    double bound_corollary = 0.0;
    bool corollary_violated = false;
    double M = 0.0;
};

/// Evaluates the risk bounds for a fitted model against labeled draws from
/// the testing distribution.
inline BoundReport bound_report(const MrcModel& model, const std::vector<LabeledSample>& draws,
                                const Density& alpha_fn, const BoundSettings& settings)
{
    const auto& map = model.spec.feature_map;
    BoundReport rep;
    rep.risk = mc_risk(model, draws, alpha_fn);
    rep.minimax_risk = model.minimax_risk;
    rep.expected_feature = expected_feature(draws, alpha_fn, map);
    const Vector est_error = (model.spec.tau - rep.expected_feature).cwiseAbs();
    rep.lambda_covers = (model.spec.lambda - est_error).minCoeff() >= 0.0;

    const auto count = static_cast<Eigen::Index>(draws.size());
    std::vector<Vector> xs;
    xs.reserve(draws.size());
    Vector alpha(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        xs.push_back(draws[static_cast<std::size_t>(i)].x);
        alpha[i] = alpha_fn(xs.back());
    }
    const MrcObjective population(map, model.loss, xs, alpha, Vector::Constant(count, 1.0 / static_cast<double>(count)),
                                  model.spec.tau, model.spec.lambda);
    rep.population_minimax_risk = {population(model.mu), population.expectation_std_error(model.mu)};

    // Per-draw differences loss - phi share the draws, so their spread gives
    // the error of the first bound's gap.
    Vector diff(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        const auto& s = draws[static_cast<std::size_t>(i)];
        const Vector v = detail::label_values(model.mu, s.x, alpha[i], map);
        diff[i] = loss(model.loss, detail::probabilities(model.loss, v), s.y).value - detail::phi(model.loss, v);
    }
    const double mean = diff.mean();
    const double diff_se =
        std::sqrt((diff.array() - mean).square().sum() / static_cast<double>(count - 1) / static_cast<double>(count));

    rep.bound_first = rep.population_minimax_risk.value + (est_error - model.spec.lambda).dot(model.mu.cwiseAbs());
    rep.first_violated = rep.risk.value > rep.bound_first + settings.tolerance_se * diff_se;

    for (const auto& s : draws)
        rep.M = std::max(rep.M, map.instance_map(s.x).cwiseAbs().maxCoeff());

    if (settings.smallest_risk) {
        rep.smallest = settings.smallest ? *settings.smallest
                                         : smallest_minimax_risk(draws, alpha_fn, map, model.loss,
                                                                 settings.smallest_risk_solver);
        const Vector& mu_inf = rep.smallest->mu;
        const double se = std::hypot(rep.risk.std_error, rep.smallest->std_error);
        rep.bound_second = rep.smallest->value + model.spec.lambda.dot(mu_inf.cwiseAbs() - model.mu.cwiseAbs()) +
                           est_error.dot((mu_inf - model.mu).cwiseAbs());
        rep.second_violated = rep.risk.value > rep.bound_second + settings.tolerance_se * se;
        if (settings.n > 0) {
            rep.bound_corollary = rep.smallest->value +
                                  rep.M * (mu_inf - model.mu).cwiseAbs().maxCoeff() *
                                      std::sqrt(2.0 * settings.B * settings.B * std::log(2.0 / settings.delta) /
                                                (model.D * static_cast<double>(settings.n)));
            rep.corollary_violated = rep.risk.value > rep.bound_corollary + settings.tolerance_se * se;
        }
    }
    return rep;
}

namespace detail {

    inline std::string join(const Vector& v)
    {
        std::ostringstream os;
        os << std::setprecision(17);
        for (Eigen::Index i = 0; i < v.size(); ++i)
            os << (i ? " " : "") << v[i];
        return os.str();
    }

    inline Vector split(const std::string& s)
    {
        std::istringstream is(s);
        std::vector<double> vals;
        std::string tok;
        while (is >> tok) {
            std::size_t used = 0;
            vals.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw InvalidInput("model text: bad number " + tok);
        }
        return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    }

} // namespace detail

/// key=value lines; numbers at 17 significant digits so a round trip is exact.
inline std::string to_text(const MrcModel& model)
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "loss=" << to_string(model.loss) << "\n";
    os << "feature_map=" << model.spec.feature_map.descriptor() << "\n";
    os << "D=" << model.D << "\n";
    os << "minimax_risk=" << model.minimax_risk << "\n";
    os << "mu=" << detail::join(model.mu) << "\n";
    os << "lambda=" << detail::join(model.spec.lambda) << "\n";
    os << "tau=" << detail::join(model.spec.tau) << "\n";
    os << "alpha=" << detail::join(model.spec.alpha_values) << "\n";
    return os.str();
}

inline MrcModel model_from_text(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("model text: missing '=' in line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw InvalidInput("model text: missing key " + key);
        return it->second;
    };
    MrcModel m;
    m.loss = loss_from_string(get("loss"));
    m.spec.feature_map = FeatureMap::from_descriptor(get("feature_map"));
    m.D = std::stod(get("D"));
    m.minimax_risk = std::stod(get("minimax_risk"));
    m.mu = detail::split(get("mu"));
    m.spec.lambda = detail::split(get("lambda"));
    m.spec.tau = detail::split(get("tau"));
    m.spec.alpha_values = detail::split(get("alpha"));
    if (m.mu.size() != m.spec.feature_map.size())
        throw InvalidInput("model text: mu length does not match the feature map");
    m.spec.validate();
    return m;
}

} // namespace dwgcs

#endif
