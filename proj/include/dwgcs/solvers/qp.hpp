#ifndef DWGCS_SOLVERS_QP_HPP
#define DWGCS_SOLVERS_QP_HPP

#include "dwgcs/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace dwgcs::solvers {

/// |a^T z - b| <= slack
struct LinearSlack {
    Vector a;
    double b = 0.0;
    double slack = 0.0;
};

/// |z[indices] - center| <= radius (Euclidean).
struct BallConstraint {
    Vector center;
    double radius = 0.0;
    std::vector<Eigen::Index> indices;
};

/// minimize 0.5 z^T H z + c^T z over a box intersected with optional slabs
/// and an optional Euclidean ball on a subset of the variables.
struct QpProblem {
    Matrix hessian;
    Vector linear;
    Vector lower;
    Vector upper;
    std::vector<LinearSlack> linear_slacks;
    std::optional<BallConstraint> ball;

    Eigen::Index size() const { return hessian.rows(); }

    double objective(const Vector& z) const { return 0.5 * z.dot(hessian * z) + linear.dot(z); }

    /// Largest constraint violation at z (0 when feasible).
    double violation(const Vector& z) const
    {
        double v = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            v = std::max({v, lower[i] - z[i], z[i] - upper[i]});
        for (const auto& s : linear_slacks)
            v = std::max(v, std::abs(s.a.dot(z) - s.b) - s.slack);
        if (ball) {
            double sq = 0.0;
            for (std::size_t j = 0; j < ball->indices.size(); ++j) {
                const double d = z[ball->indices[j]] - ball->center[static_cast<Eigen::Index>(j)];
                sq += d * d;
            }
            v = std::max(v, std::sqrt(sq) - ball->radius);
        }
        return v;
    }
};

enum class QpMethod {
    /// Interior point when the start is strictly feasible, else projected gradient.
    Auto,
    ProjectedGradient,
    InteriorPoint,
};

struct QpSettings {
    int max_iter = 20000;
    double tol = 1e-6;
    double jitter = 1e-10;
    double feasibility_tol = 1e-6;
    bool polish = true;
    int dykstra_iter = 500;
    QpMethod method = QpMethod::Auto;
    int ipm_max_iter = 100;
};

struct QpResult {
    Vector z;
    double objective = 0.0;
    /// Fixed-point residual |z - P(z - grad/L)|_inf of the projected-gradient map.
    double kkt_residual = 0.0;
    int iterations = 0;
    bool max_iter_reached = false;
    bool polished = false;
    bool interior_point = false;
};

class QpInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

    /// Projection onto {box} intersected with the ball, for the ball's coordinates.
    /// With multiplier mu >= 0 the KKT point is clip((y + mu c) / (1 + mu)), so we
    /// search s = 1 / (1 + mu) in (0, 1].
    inline void project_box_ball(Vector& z, const Vector& lo, const Vector& hi, const BallConstraint& ball)
    {
        const auto m = static_cast<Eigen::Index>(ball.indices.size());
        Vector y(m), l(m), h(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto i = ball.indices[static_cast<std::size_t>(j)];
            y[j] = z[i];
            l[j] = lo[i];
            h[j] = hi[i];
        }
        auto at = [&](double s) { return (ball.center + s * (y - ball.center)).cwiseMax(l).cwiseMin(h).eval(); };
        auto dist = [&](const Vector& w) { return (w - ball.center).norm(); };

        Vector w = at(1.0);
        if (dist(w) > ball.radius) {
            const bool center_in_box = ((ball.center - l).minCoeff() >= 0.0) && ((h - ball.center).minCoeff() >= 0.0);
            if (center_in_box) {
                // |clip(s u, l - c, h - c)| is piecewise in s: saturated coordinates
                // contribute a constant, the others s^2 u_i^2.
                const Vector u = y - ball.center;
                std::vector<std::pair<double, Eigen::Index>> brk;
                brk.reserve(static_cast<std::size_t>(m));
                for (Eigen::Index j = 0; j < m; ++j) {
                    if (u[j] > 0.0)
                        brk.push_back({(h[j] - ball.center[j]) / u[j], j});
                    else if (u[j] < 0.0)
                        brk.push_back({(l[j] - ball.center[j]) / u[j], j});
                }
                std::sort(brk.begin(), brk.end());
                double sat = 0.0;
                double free_sq = 0.0;
                for (const auto& [s, j] : brk)
                    free_sq += u[j] * u[j];
                const double r2 = ball.radius * ball.radius;
                double s_star = 1.0;
                std::size_t pos = 0;
                double s_lo = 0.0;
                while (true) {
                    const double s_hi = pos < brk.size() ? std::min(brk[pos].first, 1.0) : 1.0;
                    // On [s_lo, s_hi] the squared distance is sat + s^2 free_sq.
                    const double val_hi = sat + s_hi * s_hi * free_sq;
                    if (val_hi >= r2 || pos >= brk.size()) {
                        const double s = free_sq > 0.0 ? std::sqrt(std::max(0.0, (r2 - sat) / free_sq)) : s_hi;
                        s_star = std::clamp(s, s_lo, s_hi);
                        break;
                    }
                    const auto j = brk[pos].second;
                    const double cap = u[j] > 0.0 ? h[j] - ball.center[j] : l[j] - ball.center[j];
                    sat += cap * cap;
                    free_sq -= u[j] * u[j];
                    s_lo = s_hi;
                    ++pos;
                    if (s_lo >= 1.0) {
                        s_star = 1.0;
                        break;
                    }
                }
                w = at(s_star);
            } else {
                double a = 0.0, b = 1.0;
                for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
                    const double s = 0.5 * (a + b);
                    (dist(at(s)) > ball.radius ? b : a) = s;
                }
                w = at(a);
            }
        }
        for (Eigen::Index j = 0; j < m; ++j)
            z[ball.indices[static_cast<std::size_t>(j)]] = w[j];
    }

    inline void project_box_and_ball(Vector& z, const QpProblem& p)
    {
        if (!p.ball) {
            z = z.cwiseMax(p.lower).cwiseMin(p.upper);
            return;
        }
        // The ball coordinates are clipped inside project_box_ball; clipping
        // them first would not give the projection onto the intersection.
        const Vector y = z;
        z = z.cwiseMax(p.lower).cwiseMin(p.upper);
        for (const auto i : p.ball->indices)
            z[i] = y[i];
        project_box_ball(z, p.lower, p.upper, *p.ball);
    }

    inline void project_slab(Vector& z, const LinearSlack& s)
    {
        const double aa = s.a.squaredNorm();
        if (aa == 0.0)
            return;
        const double r = s.a.dot(z) - s.b;
        if (r > s.slack)
            z -= ((r - s.slack) / aa) * s.a;
        else if (r < -s.slack)
            z -= ((r + s.slack) / aa) * s.a;
    }

    /// Euclidean projection onto the full feasible set.
    /// One slab: exact, by monotone search on the slab multiplier.
    /// Several slabs: Dykstra's alternating projections.
    inline Vector project(const Vector& y, const QpProblem& p, const QpSettings& settings)
    {
        Vector z = y;
        if (p.linear_slacks.empty()) {
            project_box_and_ball(z, p);
            return z;
        }
        if (p.linear_slacks.size() == 1) {
            const auto& s = p.linear_slacks.front();
            auto at = [&](double nu) {
                Vector w = y - nu * s.a;
                project_box_and_ball(w, p);
                return w;
            };
            z = at(0.0);
            const double g0 = s.a.dot(z) - s.b;
            if (std::abs(g0) <= s.slack)
                return z;
            // g(nu) = a^T z(nu) - b is nonincreasing in nu.
            const double target = g0 > 0.0 ? s.slack : -s.slack;
            const double dir = g0 > 0.0 ? 1.0 : -1.0;
            const double aa = std::max(s.a.squaredNorm(), 1e-300);
            double lo = 0.0;
            double hi = dir * std::abs(g0 - target) / aa;
            int expand = 0;
            while (dir * (s.a.dot(at(hi)) - s.b - target) > 0.0 && expand < 200) {
                lo = hi;
                hi *= 2.0;
                ++expand;
            }
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid == lo || mid == hi)
                    break;
                const double g = s.a.dot(at(mid)) - s.b;
                if (dir * (g - target) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            return at(hi);
        }
        // Dykstra over {box, ball} and each slab.
        const std::size_t sets = p.linear_slacks.size() + 1;
        std::vector<Vector> incr(sets, Vector::Zero(y.size()));
        for (int it = 0; it < settings.dykstra_iter; ++it) {
            Vector before = z;
            for (std::size_t k = 0; k < sets; ++k) {
                Vector w = z + incr[k];
                Vector proj = w;
                if (k == 0)
                    project_box_and_ball(proj, p);
                else
                    project_slab(proj, p.linear_slacks[k - 1]);
                incr[k] = w - proj;
                z = proj;
            }
            if ((z - before).lpNorm<Eigen::Infinity>() < 1e-14)
                break;
        }
        return z;
    }

    /// Upper estimate of the largest eigenvalue of a PSD matrix: power
    /// iteration with a safety margin, capped by the Gershgorin bound.
    inline double largest_eigenvalue(const Matrix& h)
    {
        if (h.rows() == 0)
            return 0.0;
        const double gershgorin = h.cwiseAbs().rowwise().sum().maxCoeff();
        Vector v = Vector::Ones(h.rows()) / std::sqrt(static_cast<double>(h.rows()));
        double est = 0.0;
        for (int it = 0; it < 200; ++it) {
            Vector w = h * v;
            const double norm = w.norm();
            if (!(norm > 0.0))
                return gershgorin;
            const double next = v.dot(w);
            v = w / norm;
            if (it > 5 && std::abs(next - est) <= 1e-6 * std::abs(next)) {
                est = next;
                break;
            }
            est = next;
        }
        return std::min(gershgorin, 1.05 * est + 1e-300);
    }

    /// Sylvester inertia of H + shift I via pivoted LDL^T.
    inline bool is_positive_semidefinite(const Matrix& h, double shift)
    {
        Matrix shifted = h;
        shifted.diagonal().array() += shift;
        Eigen::LDLT<Matrix> ldlt(shifted);
        if (ldlt.info() != Eigen::Success)
            return false;
        return ldlt.vectorD().minCoeff() >= 0.0;
    }

    inline double fixed_point_residual(const Vector& z, const QpProblem& p, const Matrix& h, double lip,
                                       const QpSettings& settings)
    {
        const Vector g = h * z + p.linear;
        return (z - project(z - g / lip, p, settings)).lpNorm<Eigen::Infinity>();
    }

    /// Active-set refinement: fix variables at active bounds, treat active slabs
    /// as equalities and solve the reduced KKT system. An active ball adds the
    /// term 2 rho (z - c) on its free coordinates; rho is found by a safeguarded
    /// Newton search on 1/r - 1/|z - c|.
    inline std::optional<Vector> polish(const Vector& z, const QpProblem& p, const Matrix& h, double lip)
    {
        constexpr double kProx = 1e-9;
        const Eigen::Index n = z.size();
        Vector g = h * z + p.linear;
        const double span_raw = (p.upper - p.lower).cwiseAbs().maxCoeff();
        const double span = std::max(1.0, span_raw < 1e300 ? span_raw : 1.0);
        const double tol_active = 1e-7 * span;

        // Ball state at z and a least-squares estimate of its multiplier.
        std::vector<Eigen::Index> ball_pos(static_cast<std::size_t>(n), -1);
        bool ball_active = false;
        double rho0 = 0.0;
        if (p.ball) {
            double sq = 0.0, gw = 0.0;
            for (std::size_t j = 0; j < p.ball->indices.size(); ++j) {
                const auto i = p.ball->indices[j];
                ball_pos[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(j);
                const double d = z[i] - p.ball->center[static_cast<Eigen::Index>(j)];
                sq += d * d;
                gw += g[i] * d;
            }
            ball_active = std::sqrt(sq) >= p.ball->radius - 1e-7 * std::max(1.0, p.ball->radius);
            if (ball_active && sq > 0.0)
                rho0 = std::max(0.0, -gw / (2.0 * sq));
            if (ball_active)
                for (std::size_t j = 0; j < p.ball->indices.size(); ++j) {
                    const auto i = p.ball->indices[j];
                    g[i] += 2.0 * rho0 * (z[i] - p.ball->center[static_cast<Eigen::Index>(j)]);
                }
        }

        std::vector<Eigen::Index> free_idx;
        Vector zfix = Vector::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (p.upper[i] - p.lower[i] <= 0.0)
                zfix[i] = p.lower[i];
            else if (z[i] - p.lower[i] <= tol_active && g[i] >= 0.0)
                zfix[i] = p.lower[i];
            else if (p.upper[i] - z[i] <= tol_active && g[i] <= 0.0)
                zfix[i] = p.upper[i];
            else
                free_idx.push_back(i);
        }
        std::vector<std::pair<const LinearSlack*, double>> eqs;
        for (const auto& s : p.linear_slacks) {
            const double r = s.a.dot(z) - s.b;
            if (r >= s.slack - 1e-7 * std::max(1.0, s.slack))
                eqs.push_back({&s, s.b + s.slack});
            else if (r <= -s.slack + 1e-7 * std::max(1.0, s.slack))
                eqs.push_back({&s, s.b - s.slack});
        }
        const auto nf = static_cast<Eigen::Index>(free_idx.size());
        const auto ne = static_cast<Eigen::Index>(eqs.size());
        if (nf == 0)
            return std::nullopt;

        Matrix kkt = Matrix::Zero(nf + ne, nf + ne);
        Vector rhs = Vector::Zero(nf + ne);
        const Vector hz = h * zfix;
        for (Eigen::Index a = 0; a < nf; ++a) {
            const auto ia = free_idx[static_cast<std::size_t>(a)];
            for (Eigen::Index b = 0; b < nf; ++b)
                kkt(a, b) = h(ia, free_idx[static_cast<std::size_t>(b)]);
            // Proximal term towards the current point: picks the nearest
            // solution when H is singular on the free face.
            kkt(a, a) += kProx * lip;
            rhs[a] = -(p.linear[ia] + hz[ia]) + kProx * lip * z[ia];
        }
        for (Eigen::Index e = 0; e < ne; ++e) {
            const auto& s = *eqs[static_cast<std::size_t>(e)].first;
            for (Eigen::Index a = 0; a < nf; ++a) {
                kkt(a, nf + e) = s.a[free_idx[static_cast<std::size_t>(a)]];
                kkt(nf + e, a) = s.a[free_idx[static_cast<std::size_t>(a)]];
            }
            rhs[nf + e] = eqs[static_cast<std::size_t>(e)].second - s.a.dot(zfix);
        }

        auto assemble = [&](const Vector& sol) {
            Vector out = zfix;
            for (Eigen::Index a = 0; a < nf; ++a)
                out[free_idx[static_cast<std::size_t>(a)]] = sol[a];
            return out;
        };

        // Free coordinates that belong to the ball, with their centres.
        std::vector<std::pair<Eigen::Index, double>> ball_free;
        double fixed_sq = 0.0;
        if (ball_active) {
            for (Eigen::Index a = 0; a < nf; ++a) {
                const auto pos = ball_pos[static_cast<std::size_t>(free_idx[static_cast<std::size_t>(a)])];
                if (pos >= 0)
                    ball_free.push_back({a, p.ball->center[pos]});
            }
            for (std::size_t j = 0; j < p.ball->indices.size(); ++j) {
                const auto i = p.ball->indices[j];
                if (ball_pos[static_cast<std::size_t>(i)] >= 0 &&
                    std::find(free_idx.begin(), free_idx.end(), i) == free_idx.end()) {
                    const double d = zfix[i] - p.ball->center[static_cast<Eigen::Index>(j)];
                    fixed_sq += d * d;
                }
            }
        }

        if (!ball_active || ball_free.empty()) {
            const Vector sol = kkt.partialPivLu().solve(rhs);
            if (!sol.allFinite())
                return std::nullopt;
            return assemble(sol);
        }

        const double r = p.ball->radius;
        if (fixed_sq > r * r)
            return std::nullopt;
        auto solve_at = [&](double rho, Vector& sol, Vector* dsol) {
            Matrix m = kkt;
            Vector b = rhs;
            for (const auto& [a, c] : ball_free) {
                m(a, a) += 2.0 * rho;
                b[a] += 2.0 * rho * c;
            }
            const Eigen::PartialPivLU<Matrix> lu(m);
            sol = lu.solve(b);
            double sq = fixed_sq;
            for (const auto& [a, c] : ball_free)
                sq += (sol[a] - c) * (sol[a] - c);
            if (dsol) {
                Vector db = Vector::Zero(b.size());
                for (const auto& [a, c] : ball_free)
                    db[a] = -2.0 * (sol[a] - c);
                *dsol = lu.solve(db);
            }
            return std::sqrt(sq);
        };

        Vector sol, dsol;
        if (solve_at(0.0, sol, nullptr) <= r)
            return sol.allFinite() ? std::optional<Vector>(assemble(sol)) : std::nullopt;

        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double rho = rho0 > 0.0 ? rho0 : 1e-12 * lip;
        for (int it = 0; it < 60; ++it) {
            const double norm = solve_at(rho, sol, &dsol);
            if (!sol.allFinite())
                return std::nullopt;
            if (std::abs(norm - r) <= 1e-13 * std::max(1.0, r))
                return assemble(sol);
            if (norm > r)
                lo = rho;
            else
                hi = rho;
            double dnorm = 0.0;
            for (const auto& [a, c] : ball_free)
                dnorm += (sol[a] - c) * dsol[a];
            dnorm /= std::max(norm, 1e-300);
            // phi(rho) = 1/r - 1/norm is close to linear in rho.
            const double phi = 1.0 / r - 1.0 / norm;
            const double dphi = dnorm / (norm * norm);
            double next = dphi != 0.0 ? rho - phi / dphi : std::numeric_limits<double>::quiet_NaN();
            if (!(next > lo && next < hi) || !std::isfinite(next))
                next = std::isfinite(hi) ? 0.5 * (lo + hi) : std::max(2.0 * rho, 1e-12 * lip);
            rho = next;
        }
        return std::nullopt;
    }

    /// Mehrotra predictor-corrector interior point. Box and slab sides are
    /// f_i(z) <= 0, the ball is (|z_B - c|^2 - r^2) / 2 + s = 0 with s > 0;
    /// slabs of zero width become equalities and pinned coordinates are
    /// eliminated. The start must be strictly inside the linear constraints;
    /// returns nothing if it is not.
    inline std::optional<Vector> interior_point(const QpProblem& p, const Matrix& h, const Vector& start, double lip,
                                                const QpSettings& settings, int& iterations)
    {
        iterations = 0;
        const Eigen::Index n = p.size();
        std::vector<Eigen::Index> free_idx;
        std::vector<Eigen::Index> pos(static_cast<std::size_t>(n), -1);
        Vector zfull = start;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (p.upper[i] > p.lower[i]) {
                pos[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(free_idx.size());
                free_idx.push_back(i);
            } else {
                zfull[i] = p.lower[i];
            }
        }
        const auto nf = static_cast<Eigen::Index>(free_idx.size());
        if (nf == 0)
            return zfull;
        std::vector<Eigen::Index> fixed_idx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (pos[static_cast<std::size_t>(i)] < 0)
                fixed_idx.push_back(i);

        const Matrix hf = h(free_idx, free_idx);
        Vector cf = p.linear(free_idx);
        Vector xfix(static_cast<Eigen::Index>(fixed_idx.size()));
        for (std::size_t k = 0; k < fixed_idx.size(); ++k)
            xfix[static_cast<Eigen::Index>(k)] = zfull[fixed_idx[k]];
        if (!fixed_idx.empty())
            cf += h(free_idx, fixed_idx) * xfix;
        const Vector lo = p.lower(free_idx);
        const Vector hi = p.upper(free_idx);
        Vector lo_mask = Vector::Zero(nf), hi_mask = Vector::Zero(nf);
        for (Eigen::Index i = 0; i < nf; ++i) {
            lo_mask[i] = std::isfinite(lo[i]) ? 1.0 : 0.0;
            hi_mask[i] = std::isfinite(hi[i]) ? 1.0 : 0.0;
        }

        struct Side {
            Vector a;
            double b;
        };
        std::vector<Side> sides;
        std::vector<Vector> eq_rows;
        std::vector<double> eq_rhs;
        for (const auto& sl : p.linear_slacks) {
            const Vector af = sl.a(free_idx);
            double shift = 0.0;
            for (std::size_t k = 0; k < fixed_idx.size(); ++k)
                shift += sl.a[fixed_idx[k]] * xfix[static_cast<Eigen::Index>(k)];
            const double b = sl.b - shift;
            if (sl.slack <= 0.0) {
                eq_rows.push_back(af);
                eq_rhs.push_back(b);
            } else {
                sides.push_back({af, b + sl.slack});
                sides.push_back({-af, -b + sl.slack});
            }
        }
        const auto ns = static_cast<Eigen::Index>(sides.size());
        const auto ne = static_cast<Eigen::Index>(eq_rows.size());
        Matrix a_eq(ne, nf);
        Vector b_eq(ne);
        for (Eigen::Index e = 0; e < ne; ++e) {
            a_eq.row(e) = eq_rows[static_cast<std::size_t>(e)].transpose();
            b_eq[e] = eq_rhs[static_cast<std::size_t>(e)];
        }

        bool has_ball = false;
        std::vector<Eigen::Index> ball_idx;
        Vector ball_c;
        double ball_r2 = 0.0;
        if (p.ball) {
            has_ball = true;
            std::vector<double> centre;
            double fixed_sq = 0.0;
            for (std::size_t j = 0; j < p.ball->indices.size(); ++j) {
                const auto i = p.ball->indices[j];
                const double c = p.ball->center[static_cast<Eigen::Index>(j)];
                if (pos[static_cast<std::size_t>(i)] >= 0) {
                    ball_idx.push_back(pos[static_cast<std::size_t>(i)]);
                    centre.push_back(c);
                } else {
                    fixed_sq += (zfull[i] - c) * (zfull[i] - c);
                }
            }
            ball_r2 = p.ball->radius * p.ball->radius - fixed_sq;
            ball_c = Eigen::Map<const Vector>(centre.data(), static_cast<Eigen::Index>(centre.size()));
            if (ball_idx.empty())
                has_ball = false;
            if (ball_r2 <= 0.0)
                return std::nullopt;
        }

        // Linear constraint values at x, all of which must stay negative.
        struct Values {
            Vector lo, hi, side;
        };
        auto values = [&](const Vector& x) {
            Values v;
            v.lo = (lo - x).cwiseProduct(lo_mask);
            v.hi = (x - hi).cwiseProduct(hi_mask);
            for (Eigen::Index i = 0; i < nf; ++i) {
                if (lo_mask[i] == 0.0)
                    v.lo[i] = -1.0;
                if (hi_mask[i] == 0.0)
                    v.hi[i] = -1.0;
            }
            v.side.resize(ns);
            for (Eigen::Index k = 0; k < ns; ++k)
                v.side[k] = sides[static_cast<std::size_t>(k)].a.dot(x) - sides[static_cast<std::size_t>(k)].b;
            return v;
        };
        auto strictly_inside = [&](const Values& v) {
            return v.lo.maxCoeff() < 0.0 && v.hi.maxCoeff() < 0.0 && (ns == 0 || v.side.maxCoeff() < 0.0);
        };
        // The ball is (|x_B - c|^2 - r^2) / 2 + s = 0 with slack s > 0, so
        // iterates may leave it before convergence.
        auto ball_value = [&](const Vector& xv) {
            double sq = 0.0;
            for (std::size_t j = 0; j < ball_idx.size(); ++j) {
                const double d = xv[ball_idx[j]] - ball_c[static_cast<Eigen::Index>(j)];
                sq += d * d;
            }
            return 0.5 * (sq - ball_r2);
        };
        auto ball_grad = [&](const Vector& xv) {
            Vector g = Vector::Zero(nf);
            for (std::size_t j = 0; j < ball_idx.size(); ++j)
                g[ball_idx[j]] = xv[ball_idx[j]] - ball_c[static_cast<Eigen::Index>(j)];
            return g;
        };

        Vector x = zfull(free_idx);
        Values f = values(x);
        if (!strictly_inside(f))
            return std::nullopt;
        if (ne > 0 && (a_eq * x - b_eq).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + b_eq.cwiseAbs().maxCoeff()))
            return std::nullopt;

        const double m_count = lo_mask.sum() + hi_mask.sum() + static_cast<double>(ns) + (has_ball ? 1.0 : 0.0);
        const double scale = std::max(lip, 1e-300);
        Vector lam_lo = (scale * 0.1 * lo_mask).cwiseQuotient(-f.lo);
        Vector lam_hi = (scale * 0.1 * hi_mask).cwiseQuotient(-f.hi);
        Vector lam_side(ns);
        for (Eigen::Index k = 0; k < ns; ++k)
            lam_side[k] = scale * 0.1 / -f.side[k];
        double s_ball = 1.0, lam_ball = 0.0;
        if (has_ball) {
            s_ball = std::max(-ball_value(x), 0.5 * ball_r2);
            lam_ball = scale * 0.1 / s_ball;
        }
        Vector nu = Vector::Zero(ne);

        struct State {
            Vector x, lam_lo, lam_hi, lam_side, nu;
            double s_ball, lam_ball;
        };
        auto dual_residual = [&](const State& st) {
            Vector r = hf * st.x + cf - st.lam_lo + st.lam_hi;
            for (Eigen::Index k = 0; k < ns; ++k)
                r += st.lam_side[k] * sides[static_cast<std::size_t>(k)].a;
            if (has_ball)
                r += st.lam_ball * ball_grad(st.x);
            if (ne > 0)
                r += a_eq.transpose() * st.nu;
            return r;
        };
        State cur{x, lam_lo, lam_hi, lam_side, nu, s_ball, lam_ball};
        const double gap_tol = 1e-14 * scale * std::max<double>(1.0, static_cast<double>(nf));
        const double dual_tol = 1e-11 * scale;
        const double ball_tol = 1e-12 * std::max(1.0, ball_r2);
        for (int it = 0; it < settings.ipm_max_iter; ++it) {
            iterations = it + 1;
            double gap = -(cur.lam_lo.dot(f.lo.cwiseProduct(lo_mask)) + cur.lam_hi.dot(f.hi.cwiseProduct(hi_mask)));
            for (Eigen::Index k = 0; k < ns; ++k)
                gap -= cur.lam_side[k] * f.side[k];
            const double ball_res = has_ball ? ball_value(cur.x) + cur.s_ball : 0.0;
            if (has_ball)
                gap += cur.lam_ball * cur.s_ball;
            const Vector rd = dual_residual(cur);
            const double rp = ne > 0 ? (a_eq * cur.x - b_eq).cwiseAbs().maxCoeff() : 0.0;
            if (gap <= gap_tol && rd.lpNorm<Eigen::Infinity>() <= dual_tol && std::abs(ball_res) <= ball_tol &&
                rp <= 1e-9 * (1.0 + (ne > 0 ? b_eq.cwiseAbs().maxCoeff() : 0.0)))
                break;
            // Eliminated multiplier and slack steps leave M dx = rhs with
            // M = H + diagonal + rank-one terms. M is factorized once and
            // reused for the predictor and the corrector.
            Matrix m = hf;
            for (Eigen::Index i = 0; i < nf; ++i) {
                if (lo_mask[i] != 0.0)
                    m(i, i) += cur.lam_lo[i] / -f.lo[i];
                if (hi_mask[i] != 0.0)
                    m(i, i) += cur.lam_hi[i] / -f.hi[i];
            }
            for (Eigen::Index k = 0; k < ns; ++k) {
                const Vector& a = sides[static_cast<std::size_t>(k)].a;
                m.noalias() += (cur.lam_side[k] / -f.side[k]) * a * a.transpose();
            }
            Vector gb;
            if (has_ball) {
                gb = ball_grad(cur.x);
                for (Eigen::Index j : ball_idx)
                    m(j, j) += cur.lam_ball;
                m.noalias() += (cur.lam_ball / cur.s_ball) * gb * gb.transpose();
            }
            Eigen::LLT<Matrix> llt(m);
            const bool use_llt = llt.info() == Eigen::Success;
            Eigen::PartialPivLU<Matrix> lu;
            Matrix mia;
            Eigen::LDLT<Matrix> schur;
            if (use_llt) {
                if (ne > 0) {
                    mia = llt.solve(a_eq.transpose());
                    schur.compute(a_eq * mia);
                }
            } else {
                Matrix kkt = Matrix::Zero(nf + ne, nf + ne);
                kkt.topLeftCorner(nf, nf) = m;
                if (ne > 0) {
                    kkt.topRightCorner(nf, ne) = a_eq.transpose();
                    kkt.bottomLeftCorner(ne, nf) = a_eq;
                }
                lu.compute(kkt);
            }
            const Vector base_rhs = -(hf * cur.x + cf + (ne > 0 ? Vector(a_eq.transpose() * cur.nu) : Vector::Zero(nf)));
            const Vector eq_res = ne > 0 ? Vector(a_eq * cur.x - b_eq) : Vector();

            struct Direction {
                Vector dx, dnu, dlo, dhi, dside;
                double dlb = 0.0, dsb = 0.0;
            };
            // Targets are the complementarity products -lam f (lam s for the
            // ball) aimed for after the step.
            auto direction = [&](const Vector& mu_lo, const Vector& mu_hi, const Vector& mu_side, double mu_ball) {
                Direction d;
                Vector rhs = base_rhs;
                for (Eigen::Index i = 0; i < nf; ++i) {
                    if (lo_mask[i] != 0.0)
                        rhs[i] -= mu_lo[i] / f.lo[i];
                    if (hi_mask[i] != 0.0)
                        rhs[i] += mu_hi[i] / f.hi[i];
                }
                for (Eigen::Index k = 0; k < ns; ++k)
                    rhs += sides[static_cast<std::size_t>(k)].a * (mu_side[k] / f.side[k]);
                if (has_ball)
                    rhs -= gb * ((cur.lam_ball * ball_res + mu_ball) / cur.s_ball);
                d.dnu = Vector::Zero(ne);
                if (use_llt) {
                    const Vector mir = llt.solve(rhs);
                    if (ne > 0) {
                        d.dnu = schur.solve(a_eq * mir + eq_res);
                        d.dx = mir - mia * d.dnu;
                    } else {
                        d.dx = mir;
                    }
                } else {
                    Vector full(nf + ne);
                    full.head(nf) = rhs;
                    if (ne > 0)
                        full.tail(ne) = -eq_res;
                    const Vector sol = lu.solve(full);
                    d.dx = sol.head(nf);
                    d.dnu = sol.tail(ne);
                }
                auto dlam = [](double lam, double fv, double grad_dot, double mu) {
                    return -lam - mu / fv - lam * grad_dot / fv;
                };
                d.dlo = Vector::Zero(nf);
                d.dhi = Vector::Zero(nf);
                d.dside.resize(ns);
                for (Eigen::Index i = 0; i < nf; ++i) {
                    if (lo_mask[i] != 0.0)
                        d.dlo[i] = dlam(cur.lam_lo[i], f.lo[i], -d.dx[i], mu_lo[i]);
                    if (hi_mask[i] != 0.0)
                        d.dhi[i] = dlam(cur.lam_hi[i], f.hi[i], d.dx[i], mu_hi[i]);
                }
                for (Eigen::Index k = 0; k < ns; ++k)
                    d.dside[k] = dlam(cur.lam_side[k], f.side[k], sides[static_cast<std::size_t>(k)].a.dot(d.dx),
                                      mu_side[k]);
                if (has_ball) {
                    const double rc = mu_ball - cur.lam_ball * cur.s_ball;
                    d.dlb = (cur.lam_ball / cur.s_ball) * gb.dot(d.dx) + (cur.lam_ball * ball_res + rc) / cur.s_ball;
                    d.dsb = (rc - cur.s_ball * d.dlb) / cur.lam_ball;
                }
                return d;
            };
            // Largest step keeping multipliers, the ball slack and the linear
            // constraints nonnegative.
            auto max_step = [&](const Direction& d) {
                double step = 1.0;
                auto limit = [&](double v, double dv) {
                    if (dv < 0.0)
                        step = std::min(step, -v / dv);
                };
                for (Eigen::Index i = 0; i < nf; ++i) {
                    if (lo_mask[i] != 0.0) {
                        limit(cur.lam_lo[i], d.dlo[i]);
                        limit(-f.lo[i], d.dx[i]);
                    }
                    if (hi_mask[i] != 0.0) {
                        limit(cur.lam_hi[i], d.dhi[i]);
                        limit(-f.hi[i], -d.dx[i]);
                    }
                }
                for (Eigen::Index k = 0; k < ns; ++k) {
                    limit(cur.lam_side[k], d.dside[k]);
                    limit(-f.side[k], -sides[static_cast<std::size_t>(k)].a.dot(d.dx));
                }
                if (has_ball) {
                    limit(cur.lam_ball, d.dlb);
                    limit(cur.s_ball, d.dsb);
                }
                return step;
            };

            // Predictor.
            const Vector zero_nf = Vector::Zero(nf), zero_ns = Vector::Zero(ns);
            const Direction aff = direction(zero_nf, zero_nf, zero_ns, 0.0);
            const double a_aff = max_step(aff);
            double gap_aff = 0.0;
            Vector c_lo = Vector::Zero(nf), c_hi = Vector::Zero(nf), c_side(ns);
            for (Eigen::Index i = 0; i < nf; ++i) {
                if (lo_mask[i] != 0.0) {
                    gap_aff += (cur.lam_lo[i] + a_aff * aff.dlo[i]) * (-f.lo[i] + a_aff * aff.dx[i]);
                    c_lo[i] = aff.dlo[i] * -aff.dx[i];
                }
                if (hi_mask[i] != 0.0) {
                    gap_aff += (cur.lam_hi[i] + a_aff * aff.dhi[i]) * (-f.hi[i] - a_aff * aff.dx[i]);
                    c_hi[i] = aff.dhi[i] * aff.dx[i];
                }
            }
            for (Eigen::Index k = 0; k < ns; ++k) {
                const double df = sides[static_cast<std::size_t>(k)].a.dot(aff.dx);
                gap_aff += (cur.lam_side[k] + a_aff * aff.dside[k]) * (-f.side[k] - a_aff * df);
                c_side[k] = aff.dside[k] * df;
            }
            double c_ball = 0.0;
            if (has_ball) {
                gap_aff += (cur.lam_ball + a_aff * aff.dlb) * (cur.s_ball + a_aff * aff.dsb);
                c_ball = -aff.dlb * aff.dsb;
            }
            const double sigma = std::clamp(std::pow(std::max(gap_aff, 0.0) / gap, 3.0), 0.0, 1.0);
            const double mu = sigma * gap / m_count;

            // Corrector.
            const Direction d = direction((mu * lo_mask + c_lo).eval(), (mu * hi_mask + c_hi).eval(),
                                          (Vector::Constant(ns, mu) + c_side).eval(), mu + c_ball);
            if (!d.dx.allFinite() || !d.dnu.allFinite())
                return std::nullopt;
            double step = 0.99 * max_step(d);

            State next;
            Values f_new;
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
                next = State{cur.x + step * d.dx,
                             cur.lam_lo + step * d.dlo,
                             cur.lam_hi + step * d.dhi,
                             cur.lam_side + step * d.dside,
                             cur.nu + step * d.dnu,
                             cur.s_ball + step * d.dsb,
                             cur.lam_ball + step * d.dlb};
                f_new = values(next.x);
                if (strictly_inside(f_new)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
                break;
            cur = std::move(next);
            f = std::move(f_new);
        }
        for (Eigen::Index i = 0; i < nf; ++i)
            zfull[free_idx[static_cast<std::size_t>(i)]] = cur.x[i];
        return zfull;
    }

} // namespace detail

/// Interior point from a strictly feasible start, falling back to accelerated
/// projected gradient (FISTA with adaptive restart) when it cannot start or
/// misses the residual tolerance. Active-set polishing is attempted at
/// geometrically spaced iterations and once more at the end.
inline QpResult solve_qp(const QpProblem& problem, const QpSettings& settings = {},
                         const std::optional<Vector>& start = std::nullopt)
{
    const Eigen::Index n = problem.size();
    if (problem.hessian.cols() != n || problem.linear.size() != n || problem.lower.size() != n ||
        problem.upper.size() != n)
        throw InvalidInput("qp: inconsistent dimensions");
    if ((problem.upper - problem.lower).minCoeff() < 0.0)
        throw QpInfeasible("qp: empty box");
    if (!problem.hessian.isApprox(problem.hessian.transpose(), 1e-10))
        throw InvalidInput("qp: hessian not symmetric");

    QpProblem p = problem;
    // A zero-radius ball pins its coordinates: turn them into fixed bounds.
    if (p.ball && p.ball->radius <= 0.0) {
        for (std::size_t j = 0; j < p.ball->indices.size(); ++j) {
            const auto i = p.ball->indices[j];
            const double c = p.ball->center[static_cast<Eigen::Index>(j)];
            if (c < p.lower[i] - settings.feasibility_tol || c > p.upper[i] + settings.feasibility_tol)
                throw QpInfeasible("qp: pinned ball center outside the box");
            p.lower[i] = p.upper[i] = c;
        }
        p.ball.reset();
    }

    Matrix h = p.hessian;
    h.diagonal().array() += settings.jitter;
    const double max_abs = n > 0 ? h.cwiseAbs().maxCoeff() : 0.0;
    if (n > 0 && !detail::is_positive_semidefinite(h, 1e-8 * std::max(1.0, max_abs)))
        throw NumericalError("qp: hessian is not positive semidefinite");
    double lip = detail::largest_eigenvalue(h);
    if (!(lip > 0.0))
        lip = 1.0;

    Vector z0 = start ? *start : Vector(0.5 * (p.lower.cwiseMax(-1e6) + p.upper.cwiseMin(1e6)));

    if (settings.method != QpMethod::ProjectedGradient) {
        int ipm_iters = 0;
        auto sol = detail::interior_point(p, h, z0, lip, settings, ipm_iters);
        if (!sol && settings.method == QpMethod::InteriorPoint)
            throw QpInfeasible("qp: interior point needs a strictly feasible start");
        if (sol && p.violation(*sol) <= settings.feasibility_tol) {
            const double res = detail::fixed_point_residual(*sol, p, h, lip, settings);
            if (res <= settings.tol || settings.method == QpMethod::InteriorPoint) {
                QpResult result;
                result.z = *sol;
                result.objective = problem.objective(*sol);
                result.kkt_residual = res;
                result.iterations = ipm_iters;
                result.interior_point = true;
                result.max_iter_reached = res > settings.tol;
                return result;
            }
            // Not accurate enough: continue from here with projected gradient.
            z0 = *sol;
        }
    }

    Vector z = detail::project(z0, p, settings);
    if (p.violation(z) > settings.feasibility_tol)
        throw QpInfeasible("qp: feasible region appears empty (projection of a starting guess is infeasible)");

    auto objective_h = [&](const Vector& v) { return 0.5 * v.dot(h * v) + p.linear.dot(v); };
    // Accepts an active-set candidate if it is feasible, no worse in
    // objective, and meets the residual tolerance.
    auto try_polish = [&](const Vector& from, double& residual) -> std::optional<Vector> {
        auto cand = detail::polish(from, p, h, lip);
        if (!cand || p.violation(*cand) > 1e-9)
            return std::nullopt;
        const double res = detail::fixed_point_residual(*cand, p, h, lip, settings);
        const double obj_cur = objective_h(from);
        if (res > settings.tol || objective_h(*cand) > obj_cur + 1e-12 * std::max(1.0, std::abs(obj_cur)))
            return std::nullopt;
        residual = res;
        return cand;
    };

    Vector y = z;
    double theta = 1.0;
    QpResult result;
    int it = 0;
    int next_polish = 100;
    bool done = false;
    for (; it < settings.max_iter && !done; ++it) {
        const Vector g = h * y + p.linear;
        Vector z_next = detail::project(y - g / lip, p, settings);
        const double step = (z_next - y).lpNorm<Eigen::Infinity>();
        const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
        // Gradient-based restart keeps the momentum from overshooting.
        if ((y - z_next).dot(z_next - z) > 0.0) {
            y = z_next;
            theta = 1.0;
        } else {
            y = z_next + ((theta - 1.0) / theta_next) * (z_next - z);
            theta = theta_next;
        }
        z = std::move(z_next);
        if (step <= 0.25 * settings.tol && detail::fixed_point_residual(z, p, h, lip, settings) <= settings.tol)
            done = true;
        else if (settings.polish && it + 1 == next_polish) {
            // Attempts at geometrically spaced iterations keep the total
            // factorization cost proportional to the last attempt.
            next_polish = std::min(2 * next_polish, next_polish + 2000);
            double res = 0.0;
            if (auto cand = try_polish(z, res)) {
                z = *cand;
                result.polished = true;
                done = true;
            }
        }
    }
    result.iterations = it;
    result.kkt_residual = detail::fixed_point_residual(z, p, h, lip, settings);
    if (settings.polish && !result.polished) {
        Vector cur = z;
        for (int pass = 0; pass < 3; ++pass) {
            double res = 0.0;
            auto cand = try_polish(cur, res);
            if (!cand || res > result.kkt_residual)
                break;
            cur = *cand;
            result.kkt_residual = res;
            result.polished = true;
        }
        z = cur;
    }
    result.max_iter_reached = result.kkt_residual > settings.tol;

    result.z = z;
    result.objective = problem.objective(z);
    return result;
}

} // namespace dwgcs::solvers

#endif
