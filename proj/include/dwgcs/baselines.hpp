#ifndef DWGCS_BASELINES_HPP
#define DWGCS_BASELINES_HPP

#include "dwgcs/core.hpp"
#include "dwgcs/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace dwgcs {

class UnsupportedBaseline : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// Binary logistic rules h(y|x) = 1 / (1 + exp(-a(x) y psi(x)^T mu)) with
/// label 1 mapped to y = +1 and label 2 to y = -1.
struct LogisticModel {
    Vector mu;
    FeatureMap map{FeatureKind::IdentityOneHot, 1, 2};

    double score(const Vector& x) const { return map.instance_map(x).dot(mu); }
    Label predict(const Vector& x) const { return score(x) >= 0.0 ? 1 : 2; }

    /// Probabilities of labels 1 and 2 with confidence scale `a`.
    Vector probs(const Vector& x, double a = 1.0) const
    {
        const double p1 = 1.0 / (1.0 + std::exp(-a * score(x)));
        Vector p(2);
        p << p1, 1.0 - p1;
        return p;
    }
};

struct LogisticSettings {
    double l2 = 1e-3;
    int max_iter = 20000;
    double tol = 1e-9;
};

namespace detail {

    inline void require_binary(const FeatureMap& map)
    {
        if (map.n_classes() != 2)
            throw UnsupportedBaseline("logistic baselines support two classes only");
    }

    inline double sign_label(Label y) { return y == 1 ? 1.0 : -1.0; }

    inline double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

} // namespace detail

/// Weighted logistic loss (1/n) sum beta_i log(1 + exp(-y_i psi_i^T mu)) + (l2/2)|mu|^2.
inline double reweighted_lr_objective(const std::vector<LabeledSample>& train, const Vector& beta,
                                      const FeatureMap& map, const Vector& mu, double l2, Vector* grad = nullptr)
{
    double f = 0.0;
    if (grad)
        *grad = Vector::Zero(mu.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const Vector psi = map.instance_map(train[i].x);
        const double y = detail::sign_label(train[i].y);
        const double m = y * psi.dot(mu);
        const double b = beta[static_cast<Eigen::Index>(i)];
        f += b * detail::log1p_exp(-m);
        if (grad)
            *grad -= (b * y / (1.0 + std::exp(m))) * psi;
    }
    const double n = static_cast<double>(train.size());
    if (grad)
        *grad = *grad / n + l2 * mu;
    return f / n + 0.5 * l2 * mu.squaredNorm();
}

/// Accelerated gradient descent with a fixed 1/L step and adaptive restart.
inline LogisticModel fit_reweighted_lr(const std::vector<LabeledSample>& train, const Vector& beta,
                                       const FeatureMap& map, const LogisticSettings& settings = {})
{
    detail::require_binary(map);
    if (train.empty() || static_cast<std::size_t>(beta.size()) != train.size())
        throw InvalidInput("reweighted lr: beta length does not match the training set");
    if (beta.size() > 0 && beta.minCoeff() < 0.0)
        throw InvalidInput("reweighted lr: negative beta");
    const int b = map.block_size();
    double lip = settings.l2;
    for (std::size_t i = 0; i < train.size(); ++i)
        lip += 0.25 * beta[static_cast<Eigen::Index>(i)] * map.instance_map(train[i].x).squaredNorm() /
               static_cast<double>(train.size());
    const double step = 1.0 / lip;

    Vector x = Vector::Zero(b);
    Vector x_prev = x;
    Vector y = x;
    Vector g;
    double theta = 1.0;
    double f_prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < settings.max_iter; ++it) {
        reweighted_lr_objective(train, beta, map, y, settings.l2, &g);
        if (g.lpNorm<Eigen::Infinity>() <= settings.tol)
            break;
        x_prev = x;
        x = y - step * g;
        const double fx = reweighted_lr_objective(train, beta, map, x, settings.l2);
        if (fx > f_prev) {
            theta = 1.0;
            y = x;
        } else {
            const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            y = x + ((theta - 1.0) / theta_next) * (x - x_prev);
            theta = theta_next;
        }
        f_prev = fx;
    }
    LogisticModel out;
    out.map = map;
    const double fy = reweighted_lr_objective(train, beta, map, y, settings.l2);
    const double fx = reweighted_lr_objective(train, beta, map, x, settings.l2);
    out.mu = fy <= fx ? y : x;
    return out;
}

/// -(1/n) sum psi_i y_i / 2 + (1/n) sum (psi_i / 2) (1 - e^{-r_i s_i}) / (1 + e^{-r_i s_i}),
/// s_i = psi_i^T mu, with the testing-marginal expectation taken on the
/// training instances and r = p_tr / p_te.
inline Vector robust_gradient(const std::vector<LabeledSample>& train, const Vector& r, const FeatureMap& map,
                              const Vector& mu)
{
    Vector g = Vector::Zero(mu.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const Vector psi = map.instance_map(train[i].x);
        const double s = r[static_cast<Eigen::Index>(i)] * psi.dot(mu);
        g += 0.5 * (std::tanh(0.5 * s) - detail::sign_label(train[i].y)) * psi;
    }
    return g / static_cast<double>(train.size());
}

struct RobustSettings {
    double l2 = 1e-3;
    int epochs = 200;
    double step0 = 10.0;
    std::uint64_t seed = 0;
};

/// Stochastic gradient on the robust objective, one training instance per
/// step, steps step0 / sqrt(k + 1) and averaged iterates. The rule scales the
/// score by alpha(x) = p_tr / p_te at prediction time.
inline LogisticModel fit_robust(const std::vector<LabeledSample>& train, const Vector& alpha_on_train,
                                const FeatureMap& map, const RobustSettings& settings = {})
{
    detail::require_binary(map);
    if (train.empty() || static_cast<std::size_t>(alpha_on_train.size()) != train.size())
        throw InvalidInput("robust: alpha length does not match the training set");
    if (alpha_on_train.minCoeff() < 0.0)
        throw InvalidInput("robust: negative alpha");
    std::vector<Vector> xs;
    xs.reserve(train.size());
    for (const auto& s : train)
        xs.push_back(s.x);
    const Matrix psi = map.instance_matrix(xs);
    Vector ys(psi.rows());
    for (Eigen::Index i = 0; i < psi.rows(); ++i)
        ys[i] = detail::sign_label(train[static_cast<std::size_t>(i)].y);
    // Normalize the step by the per-sample curvature bound.
    const double scale = 1.0 / std::max(1.0, psi.rowwise().squaredNorm().maxCoeff());

    Rng rng(settings.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Vector mu = Vector::Zero(psi.cols());
    Vector avg = mu;
    double weight = 0.0;
    long k = 0;
    for (int epoch = 0; epoch < settings.epochs; ++epoch) {
        rng.shuffle(order);
        for (const auto i : order) {
            const auto row = static_cast<Eigen::Index>(i);
            const double s = alpha_on_train[row] * psi.row(row).dot(mu);
            const Vector g =
                0.5 * (std::tanh(0.5 * s) - ys[row]) * psi.row(row).transpose() + settings.l2 * mu;
            const double step = settings.step0 * scale / std::sqrt(static_cast<double>(k) + 1.0);
            mu -= step * g;
            weight += step;
            avg += (step / weight) * (mu - avg);
            ++k;
        }
    }
    LogisticModel out;
    out.map = map;
    out.mu = avg;
    return out;
}

} // namespace dwgcs

#endif
