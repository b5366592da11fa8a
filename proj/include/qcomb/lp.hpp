#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qcomb/errors.hpp"

namespace qcomb {

enum class LpStatus { optimal, infeasible, unbounded, numeric_failure };

inline std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::numeric_failure: return "numeric_failure";
    }
    return "unknown";
}

enum class VarDomain { nonnegative, free };

/// minimize objective . x
/// subject to  eq_lhs x = eq_rhs,  le_lhs x <= le_rhs,
/// and per-variable domains (x_j >= 0 or x_j free).
struct LinearProgram {
    std::vector<double> objective;
    std::vector<std::vector<double>> eq_lhs;
    std::vector<double> eq_rhs;
    std::vector<std::vector<double>> le_lhs;
    std::vector<double> le_rhs;
    std::vector<VarDomain> domains;
};

struct LpSolution {
    LpStatus status = LpStatus::numeric_failure;
    std::vector<double> x;      // populated when optimal
    double objective = 0.0;     // objective . x when optimal
    long iterations = 0;
};

inline void validate(const LinearProgram& lp) {
    const std::size_t n = lp.objective.size();
    if (n == 0) throw ParameterError("linear program has no variables");
    if (lp.domains.size() != n) throw ParameterError("domain flags must cover every variable");
    for (double c : lp.objective)
        if (!std::isfinite(c)) throw ParameterError("non-finite objective coefficient");
    if (lp.eq_lhs.size() != lp.eq_rhs.size())
        throw ParameterError("equality matrix and rhs row counts differ");
    if (lp.le_lhs.size() != lp.le_rhs.size())
        throw ParameterError("inequality matrix and rhs row counts differ");
    auto check_rows = [n](const std::vector<std::vector<double>>& rows, const std::vector<double>& rhs,
                          const char* what) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != n)
                throw ParameterError(std::string(what) + " row " + std::to_string(i) +
                                     " has wrong width");
            for (double a : rows[i])
                if (!std::isfinite(a)) throw ParameterError("non-finite constraint coefficient");
            if (!std::isfinite(rhs[i])) throw ParameterError("non-finite rhs entry");
        }
    };
    check_rows(lp.eq_lhs, lp.eq_rhs, "equality");
    check_rows(lp.le_lhs, lp.le_rhs, "inequality");
}

/// Plain-text rendering of a program for debugging.
inline std::string dump(const LinearProgram& lp) {
    std::ostringstream out;
    out << "minimize";
    for (std::size_t j = 0; j < lp.objective.size(); ++j)
        out << (j ? " + " : " ") << lp.objective[j] << "*x" << j;
    out << "\n";
    for (std::size_t i = 0; i < lp.eq_lhs.size(); ++i) {
        out << "  eq" << i << ":";
        for (std::size_t j = 0; j < lp.eq_lhs[i].size(); ++j)
            out << " " << lp.eq_lhs[i][j] << "*x" << j;
        out << " = " << lp.eq_rhs[i] << "\n";
    }
    for (std::size_t i = 0; i < lp.le_lhs.size(); ++i) {
        out << "  le" << i << ":";
        for (std::size_t j = 0; j < lp.le_lhs[i].size(); ++j)
            out << " " << lp.le_lhs[i][j] << "*x" << j;
        out << " <= " << lp.le_rhs[i] << "\n";
    }
    out << "  domains:";
    for (std::size_t j = 0; j < lp.domains.size(); ++j)
        out << " x" << j << (lp.domains[j] == VarDomain::free ? " free" : " >= 0");
    out << "\n";
    return out.str();
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Equality-standard-form problem with per-variable bounds.
/// Columns are sparse; rows are implicit.
struct SimplexProblem {
    std::size_t rows = 0;
    std::vector<std::vector<std::pair<std::size_t, double>>> cols;
    std::vector<double> cost;
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<double> rhs;
};

struct SimplexResult {
    LpStatus status = LpStatus::numeric_failure;
    std::vector<double> x;      // per column
    std::vector<double> duals;  // per row, from the final phase-2 basis
    double objective = 0.0;
    long iterations = 0;
};

/// Bounded-variable primal simplex, two phases, dense basis inverse.
///
/// Determinism: Dantzig pricing with lowest-index tie breaking, a
/// two-pass ratio test that prefers the largest pivot among the
/// blocking candidates, and Bland's rule after a degenerate stall.
class BoundedSimplex {
public:
    explicit BoundedSimplex(const SimplexProblem& p) : p_(p), m_(p.rows) {}

    SimplexResult run() {
        SimplexResult res;
        const std::size_t n_struct = p_.cols.size();
        ncols_ = n_struct + m_; // structural + artificial
        state_.assign(ncols_, State::at_lo);
        xval_.assign(ncols_, 0.0);

        // Nonbasic start: finite lower bound if any, else finite upper,
        // else zero for free columns.
        for (std::size_t j = 0; j < n_struct; ++j) {
            if (p_.lo[j] > -kInf) {
                state_[j] = State::at_lo;
                xval_[j] = p_.lo[j];
            } else if (p_.hi[j] < kInf) {
                state_[j] = State::at_up;
                xval_[j] = p_.hi[j];
            } else {
                state_[j] = State::at_zero;
                xval_[j] = 0.0;
            }
        }

        // Residual of the nonbasic start decides each artificial's sign.
        std::vector<double> resid = p_.rhs;
        for (std::size_t j = 0; j < n_struct; ++j) {
            if (xval_[j] == 0.0) continue;
            for (const auto& [r, v] : p_.cols[j]) resid[r] -= v * xval_[j];
        }
        art_sign_.assign(m_, 1.0);
        basis_.resize(m_);
        basic_pos_.assign(ncols_, npos);
        for (std::size_t i = 0; i < m_; ++i) {
            art_sign_[i] = resid[i] < 0.0 ? -1.0 : 1.0;
            const std::size_t aj = n_struct + i;
            basis_[i] = aj;
            basic_pos_[aj] = i;
            state_[aj] = State::basic;
        }

        binv_.assign(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) binv_[i * m_ + i] = art_sign_[i];
        xb_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) xb_[i] = std::fabs(resid[i]);

        bscale_ = 1.0;
        for (double b : p_.rhs) bscale_ = std::max(bscale_, std::fabs(b));
        feas_tol_ = 1e-9 * (1.0 + bscale_);

        // Phase 1: minimize the artificial sum.
        cost_.assign(ncols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) cost_[n_struct + i] = 1.0;
        dual_tol_ = 1e-9;
        LpStatus ph1 = iterate(true);
        if (ph1 != LpStatus::optimal) {
            res.status = ph1 == LpStatus::unbounded ? LpStatus::numeric_failure : ph1;
            res.iterations = iters_;
            return res;
        }
        double infeas = 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_struct) infeas += xb_[i];
        if (infeas > 1e-7 * (1.0 + bscale_)) {
            res.status = LpStatus::infeasible;
            res.iterations = iters_;
            return res;
        }
        // Artificials still in the basis sit at zero; freeze them there.
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t aj = n_struct + i;
            if (basic_pos_[aj] == npos) {
                state_[aj] = State::at_lo;
                xval_[aj] = 0.0;
            }
        }
        art_frozen_ = true;

        // Phase 2: the real objective.
        double cscale = 1.0;
        for (std::size_t j = 0; j < n_struct; ++j) cscale = std::max(cscale, std::fabs(p_.cost[j]));
        dual_tol_ = 1e-9 * cscale;
        cost_.assign(ncols_, 0.0);
        for (std::size_t j = 0; j < n_struct; ++j) cost_[j] = p_.cost[j];
        LpStatus ph2 = iterate(false);
        res.iterations = iters_;
        if (ph2 != LpStatus::optimal) {
            res.status = ph2;
            return res;
        }

        // Clean refactorization before extraction.
        if (!refactor()) {
            res.status = LpStatus::numeric_failure;
            return res;
        }

        res.x.assign(n_struct, 0.0);
        for (std::size_t j = 0; j < n_struct; ++j)
            res.x[j] = state_[j] == State::basic ? xb_[basic_pos_[j]] : xval_[j];
        res.duals = dual_vector();
        res.objective = 0.0;
        for (std::size_t j = 0; j < n_struct; ++j) res.objective += p_.cost[j] * res.x[j];
        res.status = LpStatus::optimal;
        return res;
    }

private:
    enum class State { basic, at_lo, at_up, at_zero };
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    const SimplexProblem& p_;
    std::size_t m_;
    std::size_t ncols_ = 0;
    std::vector<double> cost_;
    std::vector<State> state_;
    std::vector<double> xval_;      // nonbasic resting values
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> basic_pos_;
    std::vector<double> binv_;      // dense m x m basis inverse
    std::vector<double> xb_;        // basic variable values
    std::vector<double> art_sign_;
    bool art_frozen_ = false;
    double bscale_ = 1.0;
    double feas_tol_ = 1e-9;
    double dual_tol_ = 1e-9;
    long iters_ = 0;

    double col_lo(std::size_t j) const {
        if (j < p_.cols.size()) return p_.lo[j];
        return 0.0;
    }
    double col_hi(std::size_t j) const {
        if (j < p_.cols.size()) return p_.hi[j];
        return art_frozen_ ? 0.0 : kInf;
    }

    /// binv * (sparse column j), artificial columns are signed units.
    void ftran(std::size_t j, std::vector<double>& w) const {
        w.assign(m_, 0.0);
        if (j < p_.cols.size()) {
            for (const auto& [r, v] : p_.cols[j])
                for (std::size_t i = 0; i < m_; ++i) w[i] += binv_[i * m_ + r] * v;
        } else {
            const std::size_t r = j - p_.cols.size();
            for (std::size_t i = 0; i < m_; ++i) w[i] = binv_[i * m_ + r] * art_sign_[r];
        }
    }

    std::vector<double> dual_vector() const {
        std::vector<double> y(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0) continue;
            for (std::size_t r = 0; r < m_; ++r) y[r] += cb * binv_[i * m_ + r];
        }
        return y;
    }

    double reduced_cost(std::size_t j, const std::vector<double>& y) const {
        double d = cost_[j];
        if (j < p_.cols.size()) {
            for (const auto& [r, v] : p_.cols[j]) d -= y[r] * v;
        } else {
            const std::size_t r = j - p_.cols.size();
            d -= y[r] * art_sign_[r];
        }
        return d;
    }

    /// Rebuild the dense basis inverse and basic values from scratch.
    bool refactor() {
        std::vector<double> mat(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t j = basis_[i];
            if (j < p_.cols.size()) {
                for (const auto& [r, v] : p_.cols[j]) mat[r * m_ + i] = v;
            } else {
                const std::size_t r = j - p_.cols.size();
                mat[r * m_ + i] = art_sign_[r];
            }
        }
        // Gauss-Jordan with partial pivoting on [mat | I].
        std::vector<double> inv(m_ * m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
        for (std::size_t col = 0; col < m_; ++col) {
            std::size_t piv = col;
            double best = std::fabs(mat[col * m_ + col]);
            for (std::size_t r = col + 1; r < m_; ++r) {
                const double a = std::fabs(mat[r * m_ + col]);
                if (a > best) best = a, piv = r;
            }
            if (best < 1e-12) return false;
            if (piv != col) {
                for (std::size_t k = 0; k < m_; ++k) {
                    std::swap(mat[piv * m_ + k], mat[col * m_ + k]);
                    std::swap(inv[piv * m_ + k], inv[col * m_ + k]);
                }
            }
            const double d = 1.0 / mat[col * m_ + col];
            for (std::size_t k = 0; k < m_; ++k) {
                mat[col * m_ + k] *= d;
                inv[col * m_ + k] *= d;
            }
            for (std::size_t r = 0; r < m_; ++r) {
                if (r == col) continue;
                const double f = mat[r * m_ + col];
                if (f == 0.0) continue;
                for (std::size_t k = 0; k < m_; ++k) {
                    mat[r * m_ + k] -= f * mat[col * m_ + k];
                    inv[r * m_ + k] -= f * inv[col * m_ + k];
                }
            }
        }
        binv_ = std::move(inv);
        recompute_xb();
        return true;
    }

    void recompute_xb() {
        std::vector<double> rhs = p_.rhs;
        for (std::size_t j = 0; j < ncols_; ++j) {
            if (state_[j] == State::basic || xval_[j] == 0.0) continue;
            if (j < p_.cols.size()) {
                for (const auto& [r, v] : p_.cols[j]) rhs[r] -= v * xval_[j];
            } else {
                const std::size_t r = j - p_.cols.size();
                rhs[r] -= art_sign_[r] * xval_[j];
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            double s = 0.0;
            for (std::size_t r = 0; r < m_; ++r) s += binv_[i * m_ + r] * rhs[r];
            xb_[i] = s;
        }
    }

    LpStatus iterate(bool phase1) {
        const long cap = 2000 + 40L * static_cast<long>(m_ + ncols_);
        long stall = 0;
        bool bland = false;
        long since_refactor = 0;
        std::vector<double> w;

        for (long it = 0; it < cap; ++it, ++iters_) {
            if (since_refactor >= 512) {
                if (!refactor()) return LpStatus::numeric_failure;
                since_refactor = 0;
            }
            const std::vector<double> y = dual_vector();

            // Pricing.
            std::size_t enter = npos;
            int dir = 0;
            double best_score = bland ? 0.0 : dual_tol_;
            for (std::size_t j = 0; j < ncols_; ++j) {
                const State st = state_[j];
                if (st == State::basic) continue;
                if (col_lo(j) == col_hi(j)) continue; // frozen
                const double d = reduced_cost(j, y);
                double score = 0.0;
                int cand_dir = 0;
                if (st == State::at_lo && d < -dual_tol_) score = -d, cand_dir = +1;
                else if (st == State::at_up && d > dual_tol_) score = d, cand_dir = -1;
                else if (st == State::at_zero && std::fabs(d) > dual_tol_)
                    score = std::fabs(d), cand_dir = d < 0.0 ? +1 : -1;
                if (cand_dir == 0) continue;
                if (bland) { enter = j; dir = cand_dir; break; }
                if (score > best_score) { best_score = score; enter = j; dir = cand_dir; }
            }
            if (enter == npos) {
                if (phase1) return LpStatus::optimal;
                return LpStatus::optimal;
            }

            ftran(enter, w);

            // Ratio test, two passes: a relaxed pass fixes the step, the
            // second pass picks the largest pivot among the blockers.
            const double span = col_hi(enter) - col_lo(enter);
            double limit = (state_[enter] != State::at_zero && span < kInf) ? span : kInf;
            double relaxed = limit;
            for (std::size_t i = 0; i < m_; ++i) {
                const double wi = dir * w[i];
                if (wi > 1e-11) {
                    const double lo = col_lo(basis_[i]);
                    if (lo > -kInf) relaxed = std::min(relaxed, (xb_[i] - lo + feas_tol_) / wi);
                } else if (wi < -1e-11) {
                    const double hi = col_hi(basis_[i]);
                    if (hi < kInf) relaxed = std::min(relaxed, (xb_[i] - hi - feas_tol_) / wi);
                }
            }
            if (relaxed == kInf) {
                if (phase1) return LpStatus::numeric_failure;
                return LpStatus::unbounded;
            }
            auto strict_ratio = [&](std::size_t i) -> double {
                const double wi = dir * w[i];
                if (wi > 1e-11) {
                    const double lo = col_lo(basis_[i]);
                    if (lo <= -kInf) return kInf;
                    return (xb_[i] - lo) / wi;
                }
                if (wi < -1e-11) {
                    const double hi = col_hi(basis_[i]);
                    if (hi >= kInf) return kInf;
                    return (xb_[i] - hi) / wi;
                }
                return kInf;
            };

            std::size_t leave_pos = npos;
            double step = limit;
            if (bland) {
                // Lowest variable index among the strict minimum-ratio
                // blockers, as Bland's rule requires.
                double strict_min = kInf;
                for (std::size_t i = 0; i < m_; ++i)
                    strict_min = std::min(strict_min, strict_ratio(i));
                if (limit > strict_min) {
                    for (std::size_t i = 0; i < m_; ++i)
                        if (strict_ratio(i) <= strict_min &&
                            (leave_pos == npos || basis_[i] < basis_[leave_pos]))
                            leave_pos = i;
                    step = std::max(0.0, strict_min);
                }
            } else {
                // Harris style: the relaxed pass fixed the step window,
                // take the largest pivot inside it.
                double best_piv = 0.0;
                for (std::size_t i = 0; i < m_; ++i) {
                    const double ratio = strict_ratio(i);
                    if (ratio > relaxed) continue;
                    const double piv = std::fabs(w[i]);
                    if (piv > best_piv) {
                        best_piv = piv;
                        leave_pos = i;
                        step = std::max(0.0, ratio);
                    }
                }
                if (leave_pos != npos && limit <= step) {
                    leave_pos = npos;
                    step = limit;
                }
            }

            if (leave_pos == npos) {
                // No basic blocker inside the step: the entering variable
                // flips to its opposite bound, or the phase is unbounded.
                if (limit == kInf) {
                    if (phase1) return LpStatus::numeric_failure;
                    return LpStatus::unbounded;
                }
                for (std::size_t i = 0; i < m_; ++i) xb_[i] -= dir * limit * w[i];
                xval_[enter] = state_[enter] == State::at_lo ? col_hi(enter) : col_lo(enter);
                state_[enter] = state_[enter] == State::at_lo ? State::at_up : State::at_lo;
                stall = 0;
                continue;
            }

            // Pivot: entering replaces the blocker at leave_pos.
            const std::size_t leave = basis_[leave_pos];
            const double enter_start = state_[enter] == State::at_zero ? 0.0 : xval_[enter];
            for (std::size_t i = 0; i < m_; ++i) xb_[i] -= dir * step * w[i];
            const double leave_val = dir * w[leave_pos] > 0.0 ? col_lo(leave) : col_hi(leave);
            state_[leave] = dir * w[leave_pos] > 0.0 ? State::at_lo : State::at_up;
            xval_[leave] = leave_val;
            basic_pos_[leave] = npos;

            basis_[leave_pos] = enter;
            basic_pos_[enter] = leave_pos;
            state_[enter] = State::basic;
            xb_[leave_pos] = enter_start + dir * step;

            const double piv = w[leave_pos];
            if (std::fabs(piv) < 1e-12) return LpStatus::numeric_failure;
            const double inv_piv = 1.0 / piv;
            for (std::size_t k = 0; k < m_; ++k) binv_[leave_pos * m_ + k] *= inv_piv;
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == leave_pos) continue;
                const double f = w[i];
                if (f == 0.0) continue;
                for (std::size_t k = 0; k < m_; ++k)
                    binv_[i * m_ + k] -= f * binv_[leave_pos * m_ + k];
            }
            ++since_refactor;

            if (step <= 1e-12) {
                if (++stall > 40 + static_cast<long>(m_)) bland = true;
            } else {
                stall = 0;
                bland = false;
            }
        }
        return LpStatus::numeric_failure;
    }
};

inline SimplexResult solve_bounded(const SimplexProblem& p) {
    BoundedSimplex s(p);
    return s.run();
}

} // namespace detail

/// Solves a general linear program. Statuses are data, never exceptions;
/// only malformed input throws. On optimal the result satisfies the
/// residual contract: max equality residual and inequality violation
/// <= 1e-9 relative to 1 + max |rhs|.
inline LpSolution solve(const LinearProgram& lp) {
    validate(lp);
    const std::size_t n = lp.objective.size();
    const std::size_t me = lp.eq_lhs.size();
    const std::size_t ml = lp.le_lhs.size();

    detail::SimplexProblem p;
    p.rows = me + ml;
    p.rhs.reserve(p.rows);
    for (double b : lp.eq_rhs) p.rhs.push_back(b);
    for (double b : lp.le_rhs) p.rhs.push_back(b);

    p.cols.resize(n + ml);
    p.cost.assign(n + ml, 0.0);
    p.lo.assign(n + ml, 0.0);
    p.hi.assign(n + ml, detail::kInf);
    for (std::size_t j = 0; j < n; ++j) {
        p.cost[j] = lp.objective[j];
        if (lp.domains[j] == VarDomain::free) p.lo[j] = -detail::kInf;
        for (std::size_t i = 0; i < me; ++i)
            if (lp.eq_lhs[i][j] != 0.0) p.cols[j].push_back({i, lp.eq_lhs[i][j]});
        for (std::size_t i = 0; i < ml; ++i)
            if (lp.le_lhs[i][j] != 0.0) p.cols[j].push_back({me + i, lp.le_lhs[i][j]});
    }
    for (std::size_t i = 0; i < ml; ++i) p.cols[n + i].push_back({me + i, 1.0});

    detail::SimplexResult r = detail::solve_bounded(p);
    LpSolution out;
    out.status = r.status;
    out.iterations = r.iterations;
    if (r.status != LpStatus::optimal) return out;

    out.x.assign(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(n));
    out.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) out.objective += lp.objective[j] * out.x[j];

    double bmax = 0.0;
    for (double b : p.rhs) bmax = std::max(bmax, std::fabs(b));
    const double tol = 1e-9 * (1.0 + bmax);
    for (std::size_t i = 0; i < me; ++i) {
        double s = -lp.eq_rhs[i];
        for (std::size_t j = 0; j < n; ++j) s += lp.eq_lhs[i][j] * out.x[j];
        if (std::fabs(s) > tol) {
            out.status = LpStatus::numeric_failure;
            out.x.clear();
            return out;
        }
    }
    for (std::size_t i = 0; i < ml; ++i) {
        double s = -lp.le_rhs[i];
        for (std::size_t j = 0; j < n; ++j) s += lp.le_lhs[i][j] * out.x[j];
        if (s > tol) {
            out.status = LpStatus::numeric_failure;
            out.x.clear();
            return out;
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (lp.domains[j] == VarDomain::nonnegative && out.x[j] < -tol) {
            out.status = LpStatus::numeric_failure;
            out.x.clear();
            return out;
        }
    }
    return out;
}

/// One pinball regression in LP clothing. Rows carry their own level so
/// pooled multi-level fits reuse the same machinery. `constrained`
/// selects simplex coefficients (nonnegative, summing to one) instead
/// of free ones.
struct PinballFitProblem {
    std::size_t coefficients = 0;   // P regressors per row
    std::vector<double> regressors; // R x P, row-major
    std::vector<double> response;   // R
    std::vector<double> row_level;  // R, each in (0,1)
    bool constrained = false;
};

struct PinballFitResult {
    std::vector<double> coefficients;
    double objective = 0.0; // minimized pinball sum, recomputed from the coefficients
    long iterations = 0;
};

inline void validate(const PinballFitProblem& p) {
    const std::size_t P = p.coefficients;
    const std::size_t R = p.response.size();
    if (P == 0) throw ParameterError("pinball fit needs at least one coefficient");
    if (R == 0) throw ParameterError("pinball fit needs at least one row");
    if (p.regressors.size() != R * P) throw ParameterError("regressor matrix has wrong size");
    if (p.row_level.size() != R) throw ParameterError("row levels must cover every row");
    for (double v : p.regressors)
        if (!std::isfinite(v)) throw ParameterError("non-finite regressor");
    for (double v : p.response)
        if (!std::isfinite(v)) throw ParameterError("non-finite response");
    for (double q : p.row_level)
        if (!std::isfinite(q) || q <= 0.0 || q >= 1.0)
            throw ParameterError("row level outside (0,1)");
}

inline double pinball_objective(const PinballFitProblem& p, const std::vector<double>& beta) {
    const std::size_t P = p.coefficients;
    const std::size_t R = p.response.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
        double yhat = 0.0;
        for (std::size_t j = 0; j < P; ++j) yhat += p.regressors[i * P + j] * beta[j];
        const double q = p.row_level[i];
        const double y = p.response[i];
        if (yhat >= y) {
            const double diff = yhat - y;
            sum += diff - q * diff;
        } else {
            sum += q * (y - yhat);
        }
    }
    return sum;
}

/// Explicit auxiliary-variable formulation: variables are the P
/// coefficients followed by R auxiliaries v_i, with
///   v_i >= q_i * (y_i - x_i . beta)   and   v_i >= (1-q_i) * (x_i . beta - y_i),
/// minimizing sum v_i. Constrained fits add the simplex rows.
inline LinearProgram pinball_fit_lp(const PinballFitProblem& p) {
    validate(p);
    const std::size_t P = p.coefficients;
    const std::size_t R = p.response.size();
    LinearProgram lp;
    lp.objective.assign(P + R, 0.0);
    for (std::size_t i = 0; i < R; ++i) lp.objective[P + i] = 1.0;
    lp.domains.assign(P + R, VarDomain::nonnegative);
    if (!p.constrained)
        for (std::size_t j = 0; j < P; ++j) lp.domains[j] = VarDomain::free;
    if (p.constrained) {
        std::vector<double> row(P + R, 0.0);
        for (std::size_t j = 0; j < P; ++j) row[j] = 1.0;
        lp.eq_lhs.push_back(std::move(row));
        lp.eq_rhs.push_back(1.0);
    }
    lp.le_lhs.reserve(2 * R);
    lp.le_rhs.reserve(2 * R);
    for (std::size_t i = 0; i < R; ++i) {
        const double q = p.row_level[i];
        const double y = p.response[i];
        std::vector<double> under(P + R, 0.0);
        std::vector<double> over(P + R, 0.0);
        for (std::size_t j = 0; j < P; ++j) {
            const double x = p.regressors[i * P + j];
            under[j] = -q * x;
            over[j] = (1.0 - q) * x;
        }
        under[P + i] = -1.0;
        over[P + i] = -1.0;
        lp.le_lhs.push_back(std::move(under));
        lp.le_rhs.push_back(-q * y);
        lp.le_lhs.push_back(std::move(over));
        lp.le_rhs.push_back((1.0 - q) * y);
    }
    return lp;
}

/// Solves a pinball regression through the dual program
///   max y . u (+ lambda)   s.t.   X' u (+ lambda 1) {<=,=} 0,
///   u_i in [q_i - 1, q_i],
/// whose basis has only P rows, so large fits stay cheap. The
/// primal coefficients are the negated row duals. Constrained results
/// are clipped onto the simplex (the clip is within solver tolerance);
/// the reported objective is recomputed from the final coefficients.
inline PinballFitResult pinball_fit(const PinballFitProblem& p) {
    validate(p);
    const std::size_t P = p.coefficients;
    const std::size_t R = p.response.size();

    detail::SimplexProblem sp;
    sp.rows = P;
    sp.rhs.assign(P, 0.0);
    const std::size_t n_u = R;
    const std::size_t n_extra = p.constrained ? 1 + P : 0; // lambda + row slacks
    sp.cols.resize(n_u + n_extra);
    sp.cost.assign(n_u + n_extra, 0.0);
    sp.lo.assign(n_u + n_extra, 0.0);
    sp.hi.assign(n_u + n_extra, detail::kInf);
    for (std::size_t i = 0; i < R; ++i) {
        sp.cost[i] = -p.response[i];
        sp.lo[i] = p.row_level[i] - 1.0;
        sp.hi[i] = p.row_level[i];
        auto& col = sp.cols[i];
        for (std::size_t j = 0; j < P; ++j) {
            const double x = p.regressors[i * P + j];
            if (x != 0.0) col.push_back({j, x});
        }
    }
    if (p.constrained) {
        auto& lam = sp.cols[n_u];
        for (std::size_t j = 0; j < P; ++j) lam.push_back({j, 1.0});
        sp.cost[n_u] = -1.0;
        sp.lo[n_u] = -detail::kInf;
        for (std::size_t j = 0; j < P; ++j) sp.cols[n_u + 1 + j].push_back({j, 1.0});
    }

    detail::SimplexResult r = detail::solve_bounded(sp);
    if (r.status != LpStatus::optimal)
        throw InternalError("pinball fit solver returned " + to_string(r.status) +
                            "; the fit program is feasible and bounded by construction");

    std::vector<double> beta(P);
    for (std::size_t j = 0; j < P; ++j) beta[j] = -r.duals[j];

    if (p.constrained) {
        double sum = 0.0;
        for (double& b : beta) {
            if (b < 0.0) {
                if (b < -1e-6)
                    throw InternalError("constrained pinball fit produced weight " +
                                        std::to_string(b));
                b = 0.0;
            }
            sum += b;
        }
        if (std::fabs(sum - 1.0) > 1e-6)
            throw InternalError("constrained pinball fit weights sum to " + std::to_string(sum));
        if (sum > 0.0)
            for (double& b : beta) b /= sum;
    }

    PinballFitResult out;
    out.coefficients = std::move(beta);
    out.iterations = r.iterations;
    out.objective = pinball_objective(p, out.coefficients);
    const double lp_obj = -r.objective;
    if (std::fabs(out.objective - lp_obj) > 1e-6 * (1.0 + std::fabs(lp_obj)))
        throw InternalError("pinball fit objective mismatch: recomputed " +
                            std::to_string(out.objective) + " vs LP " + std::to_string(lp_obj));
    return out;
}

} // namespace qcomb
