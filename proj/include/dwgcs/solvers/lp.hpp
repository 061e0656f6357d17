#ifndef DWGCS_SOLVERS_LP_HPP
#define DWGCS_SOLVERS_LP_HPP

#include "dwgcs/core.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dwgcs::solvers {

/// minimize c^T x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x_i >= 0 where nonneg[i].
struct LpProblem {
    Vector objective;
    Matrix a_eq;
    Vector b_eq;
    Matrix a_ub;
    Vector b_ub;
    std::vector<bool> nonneg;

    Eigen::Index size() const { return objective.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

enum class PivotRule {
    /// Smallest-index entering and leaving variables throughout.
    Bland,
    /// Most negative reduced cost, switching to Bland's rule during runs of
    /// degenerate pivots (guarantees termination).
    DantzigBlandFallback,
};

struct LpSettings {
    PivotRule rule = PivotRule::DantzigBlandFallback;
    double tol = 1e-9;
    int max_pivots = 200000;
    int degenerate_switch = 20;
};

struct LpSolution {
    LpStatus status = LpStatus::Optimal;
    Vector x;
    double objective = 0.0;
    /// Dual multipliers of the equality and inequality rows of the original
    /// problem; y_ub <= 0 at optimality.
    Vector dual_eq;
    Vector dual_ub;
    int pivots = 0;
};

class LpError : public std::runtime_error {
public:
    LpError(LpStatus status, const std::string& what) : std::runtime_error(what), status_(status) {}
    LpStatus status() const { return status_; }

private:
    LpStatus status_;
};

namespace detail {

    /// Dense two-phase tableau simplex on  min c^T x, A x = b (b >= 0), x >= 0.
    class Tableau {
    public:
        Tableau(const Matrix& a, const Vector& b, const Vector& c, const LpSettings& settings)
            : rows_(a.rows()), vars_(a.cols()), settings_(settings), cost_(c)
        {
            // Columns: original variables, then one artificial per row, then rhs.
            t_.setZero(rows_ + 1, vars_ + rows_ + 1);
            t_.topLeftCorner(rows_, vars_) = a;
            t_.block(0, vars_, rows_, rows_).setIdentity();
            t_.topRightCorner(rows_, 1) = b;
            basis_.resize(static_cast<std::size_t>(rows_));
            for (Eigen::Index i = 0; i < rows_; ++i)
                basis_[static_cast<std::size_t>(i)] = vars_ + i;
            active_row_.assign(static_cast<std::size_t>(rows_), true);
        }

        LpStatus run()
        {
            // Phase 1: minimize the sum of artificials.
            Vector phase1 = Vector::Zero(vars_ + rows_);
            phase1.tail(rows_).setOnes();
            set_objective(phase1);
            allowed_ = vars_ + rows_;
            auto st = iterate();
            if (st != LpStatus::Optimal)
                return st;
            if (-t_(rows_, vars_ + rows_) > settings_.tol * std::max(1.0, t_.topRightCorner(rows_, 1).cwiseAbs().maxCoeff()))
                return LpStatus::Infeasible;
            drive_out_artificials();

            Vector phase2 = Vector::Zero(vars_ + rows_);
            phase2.head(vars_) = cost_;
            set_objective(phase2);
            allowed_ = vars_;
            return iterate();
        }

        Vector solution() const
        {
            Vector x = Vector::Zero(vars_);
            for (Eigen::Index i = 0; i < rows_; ++i)
                if (active_row_[static_cast<std::size_t>(i)] && basis_[static_cast<std::size_t>(i)] < vars_)
                    x[basis_[static_cast<std::size_t>(i)]] = t_(i, vars_ + rows_);
            return x;
        }

        const std::vector<Eigen::Index>& basis() const { return basis_; }
        const std::vector<bool>& active_rows() const { return active_row_; }
        int pivots() const { return pivots_; }

    private:
        void set_objective(const Vector& c)
        {
            t_.row(rows_).setZero();
            t_.row(rows_).head(vars_ + rows_) = c.transpose();
            for (Eigen::Index i = 0; i < rows_; ++i) {
                if (!active_row_[static_cast<std::size_t>(i)])
                    continue;
                const double cb = c[basis_[static_cast<std::size_t>(i)]];
                if (cb != 0.0)
                    t_.row(rows_) -= cb * t_.row(i);
            }
        }

        void pivot(Eigen::Index row, Eigen::Index col)
        {
            t_.row(row) /= t_(row, col);
            for (Eigen::Index i = 0; i <= rows_; ++i) {
                if (i == row)
                    continue;
                const double f = t_(i, col);
                if (f != 0.0)
                    t_.row(i) -= f * t_.row(row);
            }
            basis_[static_cast<std::size_t>(row)] = col;
            ++pivots_;
        }

        LpStatus iterate()
        {
            const Eigen::Index rhs = vars_ + rows_;
            int degenerate_run = 0;
            while (true) {
                if (pivots_ >= settings_.max_pivots)
                    return LpStatus::IterationLimit;
                const bool bland = settings_.rule == PivotRule::Bland || degenerate_run >= settings_.degenerate_switch;
                Eigen::Index enter = -1;
                double best = -settings_.tol;
                for (Eigen::Index j = 0; j < allowed_; ++j) {
                    const double d = t_(rows_, j);
                    if (d < best) {
                        enter = j;
                        if (bland)
                            break;
                        best = d;
                    }
                }
                if (enter < 0)
                    return LpStatus::Optimal;

                Eigen::Index leave = -1;
                double ratio = std::numeric_limits<double>::infinity();
                for (Eigen::Index i = 0; i < rows_; ++i) {
                    if (!active_row_[static_cast<std::size_t>(i)])
                        continue;
                    const double a = t_(i, enter);
                    if (a <= settings_.tol)
                        continue;
                    const double r = t_(i, rhs) / a;
                    if (r < ratio - 1e-12 ||
                        (r <= ratio + 1e-12 && leave >= 0 &&
                         basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                        ratio = std::min(ratio, r);
                        leave = i;
                    }
                }
                if (leave < 0)
                    return LpStatus::Unbounded;
                degenerate_run = ratio <= settings_.tol ? degenerate_run + 1 : 0;
                pivot(leave, enter);
            }
        }

        void drive_out_artificials()
        {
            for (Eigen::Index i = 0; i < rows_; ++i) {
                if (basis_[static_cast<std::size_t>(i)] < vars_)
                    continue;
                Eigen::Index col = -1;
                for (Eigen::Index j = 0; j < vars_; ++j) {
                    if (std::abs(t_(i, j)) > 1e-9) {
                        col = j;
                        break;
                    }
                }
                if (col >= 0)
                    pivot(i, col);
                else
                    active_row_[static_cast<std::size_t>(i)] = false; // redundant row
            }
        }

        Eigen::Index rows_;
        Eigen::Index vars_;
        Eigen::Index allowed_ = 0;
        LpSettings settings_;
        Vector cost_;
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t_;
        std::vector<Eigen::Index> basis_;
        std::vector<bool> active_row_;
        int pivots_ = 0;
    };

} // namespace detail

inline LpSolution solve_lp(const LpProblem& p, const LpSettings& settings = {})
{
    const Eigen::Index nv = p.size();
    const Eigen::Index neq = p.a_eq.rows();
    const Eigen::Index nub = p.a_ub.rows();
    if ((neq > 0 && (p.a_eq.cols() != nv || p.b_eq.size() != neq)) ||
        (nub > 0 && (p.a_ub.cols() != nv || p.b_ub.size() != nub)))
        throw InvalidInput("lp: inconsistent dimensions");
    std::vector<bool> nonneg = p.nonneg;
    if (nonneg.empty())
        nonneg.assign(static_cast<std::size_t>(nv), true);
    if (static_cast<Eigen::Index>(nonneg.size()) != nv)
        throw InvalidInput("lp: nonneg mask length mismatch");

    // Standard form columns: x+ for every variable, x- for free ones, slacks.
    std::vector<Eigen::Index> neg_col(static_cast<std::size_t>(nv), -1);
    Eigen::Index cols = nv;
    for (Eigen::Index j = 0; j < nv; ++j)
        if (!nonneg[static_cast<std::size_t>(j)])
            neg_col[static_cast<std::size_t>(j)] = cols++;
    const Eigen::Index slack0 = cols;
    cols += nub;
    const Eigen::Index rows = neq + nub;

    Matrix a = Matrix::Zero(rows, cols);
    Vector b(rows);
    Vector c = Vector::Zero(cols);
    for (Eigen::Index j = 0; j < nv; ++j) {
        c[j] = p.objective[j];
        if (neg_col[static_cast<std::size_t>(j)] >= 0)
            c[neg_col[static_cast<std::size_t>(j)]] = -p.objective[j];
    }
    auto put_row = [&](Eigen::Index r, const auto& coeffs, double rhs) {
        for (Eigen::Index j = 0; j < nv; ++j) {
            a(r, j) = coeffs[j];
            if (neg_col[static_cast<std::size_t>(j)] >= 0)
                a(r, neg_col[static_cast<std::size_t>(j)]) = -coeffs[j];
        }
        b[r] = rhs;
    };
    for (Eigen::Index i = 0; i < neq; ++i)
        put_row(i, p.a_eq.row(i), p.b_eq[i]);
    for (Eigen::Index i = 0; i < nub; ++i) {
        put_row(neq + i, p.a_ub.row(i), p.b_ub[i]);
        a(neq + i, slack0 + i) = 1.0;
    }
    Vector sign = Vector::Ones(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (b[i] < 0.0) {
            a.row(i) *= -1.0;
            b[i] = -b[i];
            sign[i] = -1.0;
        }
    }

    detail::Tableau tab(a, b, c, settings);
    LpSolution out;
    out.status = tab.run();
    out.pivots = tab.pivots();
    if (out.status == LpStatus::Infeasible)
        throw LpError(out.status, "lp: problem is infeasible");
    if (out.status == LpStatus::Unbounded)
        throw LpError(out.status, "lp: problem is unbounded");
    if (out.status == LpStatus::IterationLimit)
        throw LpError(out.status, "lp: pivot limit reached");

    const Vector xs = tab.solution();
    out.x = xs.head(nv);
    for (Eigen::Index j = 0; j < nv; ++j)
        if (neg_col[static_cast<std::size_t>(j)] >= 0)
            out.x[j] -= xs[neg_col[static_cast<std::size_t>(j)]];
    out.objective = p.objective.dot(out.x);

    // Duals from the final basis: B^T y = c_B over the non-redundant rows.
    std::vector<Eigen::Index> live;
    for (Eigen::Index i = 0; i < rows; ++i)
        if (tab.active_rows()[static_cast<std::size_t>(i)])
            live.push_back(i);
    const auto nl = static_cast<Eigen::Index>(live.size());
    Matrix bmat(nl, nl);
    Vector cb(nl);
    for (Eigen::Index r = 0; r < nl; ++r) {
        const Eigen::Index col = tab.basis()[static_cast<std::size_t>(live[static_cast<std::size_t>(r)])];
        cb[r] = col < cols ? c[col] : 0.0;
        for (Eigen::Index q = 0; q < nl; ++q) {
            const Eigen::Index row = live[static_cast<std::size_t>(q)];
            bmat(q, r) = col < cols ? a(row, col) : (col - cols == row ? 1.0 : 0.0);
        }
    }
    Vector y_live = nl > 0 ? Vector(bmat.transpose().fullPivLu().solve(cb)) : Vector();
    Vector y = Vector::Zero(rows);
    for (Eigen::Index r = 0; r < nl; ++r)
        y[live[static_cast<std::size_t>(r)]] = y_live[r] * sign[live[static_cast<std::size_t>(r)]];
    out.dual_eq = y.head(neq);
    out.dual_ub = y.tail(nub);
    return out;
}

} // namespace dwgcs::solvers

#endif
