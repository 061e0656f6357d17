#ifndef DWGCS_SOLVERS_SUBGRADIENT_HPP
#define DWGCS_SOLVERS_SUBGRADIENT_HPP

#include "dwgcs/core.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dwgcs::solvers {

/// Returns f(x) and writes a subgradient into `grad`.
using SubgradientOracle = std::function<double(const Vector& x, Vector& grad)>;

enum class StepRule { NesterovDecay, Constant };

struct SubgradSettings {
    int max_iter = 10000;
    bool averaging = true;
    StepRule step_rule = StepRule::NesterovDecay;
    /// Stop once a zero subgradient (norm <= tol) is observed.
    double tol = 1e-12;
    double step0 = 1.0;
    bool record_history = false;
};

struct SubgradResult {
    Vector argmin;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    /// Best value after each iteration (when record_history is set).
    std::vector<double> best_history;
};

/// Subgradient descent with Nesterov extrapolation, diminishing steps
/// step0 / sqrt(k + 1) and running iterate averaging. The best point seen is
/// returned, among plain and averaged iterates.
inline SubgradResult minimize_subgradient(const SubgradientOracle& f, const Vector& start,
                                          const SubgradSettings& settings = {})
{
    if (settings.max_iter < 1)
        throw InvalidInput("subgradient: max_iter must be positive");
    const Eigen::Index dim = start.size();
    SubgradResult out;
    Vector grad(dim);
    Vector x = start;
    Vector x_prev = start;
    Vector y = start;
    Vector avg = start;
    double avg_weight = 0.0;
    Vector scratch(dim);

    auto consider = [&](const Vector& p, double v) {
        if (!std::isfinite(v))
            throw NumericalError("subgradient: objective is not finite");
        if (v < out.value) {
            out.value = v;
            out.argmin = p;
        }
    };

    double theta_prev = 1.0;
    for (int k = 0; k < settings.max_iter; ++k) {
        const double fy = f(y, grad);
        if (!grad.allFinite())
            throw NumericalError("subgradient: oracle returned a non-finite subgradient at iteration " +
                                 std::to_string(k));
        consider(y, fy);
        out.iterations = k + 1;
        if (grad.norm() <= settings.tol) {
            if (settings.record_history)
                out.best_history.push_back(out.value);
            break;
        }

        const double step = settings.step_rule == StepRule::Constant
                                ? settings.step0
                                : settings.step0 / std::sqrt(static_cast<double>(k) + 1.0);
        x_prev = x;
        x = y - step * grad;

        const double theta = 2.0 / (static_cast<double>(k) + 2.0);
        y = x + theta * (1.0 / theta_prev - 1.0) * (x - x_prev);
        theta_prev = theta;

        if (settings.averaging) {
            // Step-weighted average of the plain iterates.
            avg_weight += step;
            avg += (step / avg_weight) * (x - avg);
            if ((k + 1) % 10 == 0 || k + 1 == settings.max_iter)
                consider(avg, f(avg, scratch));
        }
        if (settings.record_history)
            out.best_history.push_back(out.value);
    }
    const double fx = f(x, scratch);
    consider(x, fx);
    if (settings.record_history && !out.best_history.empty())
        out.best_history.back() = out.value;
    return out;
}

inline SubgradResult minimize_subgradient(const SubgradientOracle& f, Eigen::Index dim,
                                          const SubgradSettings& settings = {})
{
    return minimize_subgradient(f, Vector::Zero(dim), settings);
}

} // namespace dwgcs::solvers

#endif
