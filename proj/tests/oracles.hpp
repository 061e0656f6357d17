// Independent reference computations used only by the test suites. Nothing in
// here calls into the solver code paths it is used to check.
#ifndef DWGCS_TESTS_ORACLES_HPP
#define DWGCS_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Minimum of f over the grid lo + step*i (per coordinate) spanning [lo, hi]^dim.
inline double grid_minimum(const std::function<double(const Vector&)>& f, int dim, double lo, double hi,
                           double step, Vector* argmin = nullptr)
{
    const int per_axis = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    Vector z(dim);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        for (int d = 0; d < dim; ++d)
            z[d] = std::min(hi, lo + step * idx[static_cast<std::size_t>(d)]);
        const double v = f(z);
        if (v < best) {
            best = v;
            if (argmin)
                *argmin = z;
        }
        int d = 0;
        while (d < dim && ++idx[static_cast<std::size_t>(d)] == per_axis) {
            idx[static_cast<std::size_t>(d)] = 0;
            ++d;
        }
        if (d == dim)
            break;
    }
    return best;
}

/// Repeated grid search: `points` per axis over [c - half, c + half]^dim, then
/// recentre on the best point and shrink the box by `shrink`.
inline double zooming_grid_minimum(const std::function<double(const Vector&)>& f, Vector centre, double half,
                                   int points, int levels, double shrink = 0.3)
{
    const auto dim = static_cast<int>(centre.size());
    double best = f(centre);
    std::vector<int> idx(static_cast<std::size_t>(dim));
    Vector z(dim);
    for (int level = 0; level < levels; ++level) {
        std::fill(idx.begin(), idx.end(), 0);
        Vector best_z = centre;
        while (true) {
            for (int d = 0; d < dim; ++d)
                z[d] = centre[d] - half + 2.0 * half * idx[static_cast<std::size_t>(d)] / (points - 1.0);
            const double v = f(z);
            if (v < best) {
                best = v;
                best_z = z;
            }
            int d = 0;
            while (d < dim && ++idx[static_cast<std::size_t>(d)] == points) {
                idx[static_cast<std::size_t>(d)] = 0;
                ++d;
            }
            if (d == dim)
                break;
        }
        centre = best_z;
        half *= shrink;
    }
    return best;
}

/// phi_01 by enumerating all 2^k - 1 nonempty label subsets.
inline double phi01_bruteforce(const Vector& values)
{
    const int k = static_cast<int>(values.size());
    double best = -std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
        double sum = 0.0;
        int size = 0;
        for (int y = 0; y < k; ++y)
            if (mask & (1u << y)) {
                sum += values[y];
                ++size;
            }
        best = std::max(best, (sum - 1.0) / size);
    }
    return 1.0 + best;
}

/// Optimal value of  min c^T x, A x <= b  (x free) by enumerating every
/// vertex: each choice of `n` linearly independent active rows.
inline double lp_vertex_enumeration(const Vector& c, const Matrix& a, const Vector& b, Vector* best_x = nullptr)
{
    const int n = static_cast<int>(c.size());
    const int m = static_cast<int>(a.rows());
    std::vector<int> pick(static_cast<std::size_t>(n));
    std::iota(pick.begin(), pick.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        Matrix sub(n, n);
        Vector rhs(n);
        for (int r = 0; r < n; ++r) {
            sub.row(r) = a.row(pick[static_cast<std::size_t>(r)]);
            rhs[r] = b[pick[static_cast<std::size_t>(r)]];
        }
        Eigen::FullPivLU<Matrix> lu(sub);
        if (lu.rank() == n) {
            const Vector x = lu.solve(rhs);
            if (((a * x - b).array() <= 1e-9).all()) {
                const double v = c.dot(x);
                if (v < best) {
                    best = v;
                    if (best_x)
                        *best_x = x;
                }
            }
        }
        int i = n - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - n + i)
            --i;
        if (i < 0)
            break;
        ++pick[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j)
            pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
    return best;
}

/// Type-7 quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(v.size() - 1, lo + 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Newton's method for  min sum_i w_i log(1 + exp(-y_i x_i^T mu)) + 0.5 l2 |mu|^2.
inline Vector logistic_newton(const Matrix& x, const Vector& y, const Vector& w, double l2, int iters = 100)
{
    Vector mu = Vector::Zero(x.cols());
    for (int it = 0; it < iters; ++it) {
        Vector g = l2 * mu;
        Matrix h = l2 * Matrix::Identity(x.cols(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double m = y[i] * x.row(i).dot(mu);
            const double s = 1.0 / (1.0 + std::exp(m));
            g -= w[i] * s * y[i] * x.row(i).transpose();
            h += w[i] * s * (1.0 - s) * x.row(i).transpose() * x.row(i);
        }
        const Vector step = h.ldlt().solve(g);
        mu -= step;
        if (step.norm() < 1e-14)
            break;
    }
    return mu;
}

} // namespace oracle

#endif
