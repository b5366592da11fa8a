#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qcomb/lp.hpp"
#include "qcomb/loss.hpp"

using namespace qcomb;

namespace {

/// Dense Gaussian elimination with partial pivoting. Returns false on
/// a (numerically) singular basis.
bool dense_solve(std::vector<std::vector<double>> a, std::vector<double> b,
                 std::vector<double>& x) {
    const std::size_t m = b.size();
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-10) return false;
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < m; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    x.resize(m);
    for (std::size_t r = 0; r < m; ++r) x[r] = b[r] / a[r][r];
    return true;
}

/// Brute-force LP oracle: enumerate every basic solution of the
/// slack-form system and keep the best feasible one. Only sensible for
/// tiny instances (here n+m <= 12).
double enumerate_optimum(const LinearProgram& lp, bool& found) {
    const std::size_t n = lp.objective.size();
    const std::size_t m = lp.le_lhs.size();
    const std::size_t cols = n + m;
    found = false;
    double best = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> basis(m);
    std::vector<bool> chosen(cols, false);
    // Iterate all m-subsets of the columns.
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    while (true) {
        std::vector<std::vector<double>> B(m, std::vector<double>(m, 0.0));
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t col = idx[j];
            for (std::size_t r = 0; r < m; ++r)
                B[r][j] = col < n ? lp.le_lhs[r][col] : (col - n == r ? 1.0 : 0.0);
        }
        std::vector<double> xb;
        if (dense_solve(B, lp.le_rhs, xb)) {
            bool feasible = true;
            for (double v : xb)
                if (v < -1e-9) feasible = false;
            if (feasible) {
                double obj = 0.0;
                for (std::size_t j = 0; j < m; ++j)
                    if (idx[j] < n) obj += lp.objective[idx[j]] * xb[j];
                if (obj < best) {
                    best = obj;
                    found = true;
                }
            }
        }
        // Next combination.
        std::size_t k = m;
        while (k > 0) {
            --k;
            if (idx[k] != k + cols - m) {
                ++idx[k];
                for (std::size_t j = k + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
                break;
            }
            if (k == 0) return found ? best : 0.0;
        }
    }
}

} // namespace

TEST(Solve, KnownBoundedOptimum) {
    // min -x0 - 2*x1  s.t.  x0 + x1 <= 4, x1 <= 3, x >= 0  ->  x = (1,3), obj -7.
    LinearProgram lp;
    lp.objective = {-1.0, -2.0};
    lp.le_lhs = {{1.0, 1.0}, {0.0, 1.0}};
    lp.le_rhs = {4.0, 3.0};
    lp.domains = {VarDomain::nonnegative, VarDomain::nonnegative};
    const LpSolution s = solve(lp);
    ASSERT_EQ(s.status, LpStatus::optimal);
    EXPECT_NEAR(s.objective, -7.0, 1e-9);
    EXPECT_NEAR(s.x[0], 1.0, 1e-9);
    EXPECT_NEAR(s.x[1], 3.0, 1e-9);
}

TEST(Solve, EqualityAndFreeVariable) {
    // min x0 (free)  s.t.  x0 + x1 = 3, x1 <= 1, x1 >= 0  ->  x = (2,1), obj 2.
    LinearProgram lp;
    lp.objective = {1.0, 0.0};
    lp.eq_lhs = {{1.0, 1.0}};
    lp.eq_rhs = {3.0};
    lp.le_lhs = {{0.0, 1.0}};
    lp.le_rhs = {1.0};
    lp.domains = {VarDomain::free, VarDomain::nonnegative};
    const LpSolution s = solve(lp);
    ASSERT_EQ(s.status, LpStatus::optimal);
    EXPECT_NEAR(s.objective, 2.0, 1e-9);
    EXPECT_NEAR(s.x[0], 2.0, 1e-9);
}

TEST(Solve, DetectsUnbounded) {
    LinearProgram lp;
    lp.objective = {-1.0, 0.0};
    lp.le_lhs = {{0.0, 1.0}};
    lp.le_rhs = {1.0};
    lp.domains = {VarDomain::nonnegative, VarDomain::nonnegative};
    EXPECT_EQ(solve(lp).status, LpStatus::unbounded);
}

TEST(Solve, DetectsInfeasible) {
    LinearProgram lp;
    lp.objective = {1.0};
    lp.le_lhs = {{1.0}};
    lp.le_rhs = {-1.0};
    lp.domains = {VarDomain::nonnegative};
    EXPECT_EQ(solve(lp).status, LpStatus::infeasible);

    LinearProgram eq;
    eq.objective = {1.0, 1.0};
    eq.eq_lhs = {{1.0, 1.0}};
    eq.eq_rhs = {-2.0};
    eq.domains = {VarDomain::nonnegative, VarDomain::nonnegative};
    EXPECT_EQ(solve(eq).status, LpStatus::infeasible);
}

TEST(Solve, ValidationErrors) {
    LinearProgram lp;
    EXPECT_THROW(solve(lp), ParameterError); // no variables
    lp.objective = {1.0, 2.0};
    lp.domains = {VarDomain::nonnegative};
    EXPECT_THROW(solve(lp), ParameterError); // domains do not cover
    lp.domains = {VarDomain::nonnegative, VarDomain::nonnegative};
    lp.le_lhs = {{1.0}};
    lp.le_rhs = {1.0};
    EXPECT_THROW(solve(lp), ParameterError); // wrong row width
    lp.le_lhs = {{1.0, std::nan("")}};
    EXPECT_THROW(solve(lp), ParameterError);
}

TEST(Solve, MatchesVertexEnumerationOnRandomInstances) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> coef(-2.0, 3.0);
    std::uniform_real_distribution<double> cost(-3.0, 3.0);
    std::uniform_real_distribution<double> rhs(1.0, 6.0);
    for (int inst = 0; inst < 40; ++inst) {
        const std::size_t n = 2 + rng() % 5; // up to 6
        const std::size_t m = 1 + rng() % 5; // extra cap row brings it to <= 6
        LinearProgram lp;
        lp.objective.resize(n);
        for (auto& c : lp.objective) c = cost(rng);
        lp.domains.assign(n, VarDomain::nonnegative);
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<double> row(n);
            for (auto& a : row) a = coef(rng);
            lp.le_lhs.push_back(std::move(row));
            lp.le_rhs.push_back(rhs(rng));
        }
        // Bounding box keeps the instance bounded regardless of signs.
        lp.le_lhs.push_back(std::vector<double>(n, 1.0));
        lp.le_rhs.push_back(2.0 + static_cast<double>(rng() % 7));

        bool found = false;
        const double oracle = enumerate_optimum(lp, found);
        ASSERT_TRUE(found);
        const LpSolution s = solve(lp);
        ASSERT_EQ(s.status, LpStatus::optimal) << dump(lp);
        EXPECT_NEAR(s.objective, oracle, 1e-6 * (1.0 + std::fabs(oracle))) << dump(lp);
    }
}

TEST(Solve, DeterministicAcrossRepeatSolves) {
    LinearProgram lp;
    lp.objective = {-1.0, -1.0, 2.0};
    lp.le_lhs = {{1.0, 2.0, 1.0}, {3.0, 1.0, 0.0}};
    lp.le_rhs = {4.0, 5.0};
    lp.domains.assign(3, VarDomain::nonnegative);
    const LpSolution a = solve(lp);
    const LpSolution b = solve(lp);
    ASSERT_EQ(a.status, LpStatus::optimal);
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_EQ(a.x, b.x);
}

TEST(Solve, ObjectiveScaleEquivariance) {
    LinearProgram lp;
    lp.objective = {-2.0, -3.0};
    lp.le_lhs = {{1.0, 1.0}, {1.0, 3.0}};
    lp.le_rhs = {4.0, 6.0};
    lp.domains.assign(2, VarDomain::nonnegative);
    const LpSolution base = solve(lp);
    for (double c : {0.5, 2.0, 10.0}) {
        LinearProgram scaled = lp;
        for (auto& v : scaled.objective) v *= c;
        const LpSolution s = solve(scaled);
        ASSERT_EQ(s.status, LpStatus::optimal);
        EXPECT_NEAR(s.objective, c * base.objective, 1e-9 * (1.0 + c));
        EXPECT_EQ(s.x, base.x);
    }
}

namespace {

PinballFitProblem random_fit(std::mt19937_64& rng, std::size_t P, std::size_t R,
                             bool constrained) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    PinballFitProblem p;
    p.coefficients = P;
    p.constrained = constrained;
    const double levels[3] = {0.2, 0.5, 0.8};
    for (std::size_t i = 0; i < R; ++i) {
        double signal = 0.0;
        for (std::size_t j = 0; j < P; ++j) {
            const double x = 5.0 + unif(rng);
            p.regressors.push_back(x);
            signal += x;
        }
        p.response.push_back(signal / static_cast<double>(P) + 0.4 * unif(rng));
        p.row_level.push_back(levels[rng() % 3]);
    }
    return p;
}

} // namespace

TEST(PinballFit, RouteEquivalence) {
    std::mt19937_64 rng(5);
    for (int inst = 0; inst < 25; ++inst) {
        const std::size_t P = 1 + rng() % 4;
        const std::size_t R = P + 5 + rng() % 40;
        const bool constrained = (inst % 2) == 0;
        const PinballFitProblem p = random_fit(rng, P, R, constrained);

        const PinballFitResult dual = pinball_fit(p);
        const LpSolution explicit_form = solve(pinball_fit_lp(p));
        ASSERT_EQ(explicit_form.status, LpStatus::optimal);
        EXPECT_NEAR(dual.objective, explicit_form.objective,
                    1e-9 * (1.0 + std::fabs(explicit_form.objective)));
        if (constrained) {
            double sum = 0.0;
            for (std::size_t j = 0; j < P; ++j) {
                EXPECT_GE(dual.coefficients[j], -1e-9);
                sum += dual.coefficients[j];
            }
            EXPECT_NEAR(sum, 1.0, 1e-8);
        }
    }
}

TEST(PinballFit, AuxiliaryVariablesHitTheMaxForm) {
    // At the optimum of the relaxed program each auxiliary equals the
    // pinball residual exactly; the dropped complementarity constraint
    // is inactive.
    std::mt19937_64 rng(6);
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t P = 2;
        const std::size_t R = 25;
        const PinballFitProblem p = random_fit(rng, P, R, true);
        const LpSolution s = solve(pinball_fit_lp(p));
        ASSERT_EQ(s.status, LpStatus::optimal);
        for (std::size_t i = 0; i < R; ++i) {
            double yhat = 0.0;
            for (std::size_t j = 0; j < P; ++j) yhat += p.regressors[i * P + j] * s.x[j];
            const double q = p.row_level[i];
            const double expected =
                std::max(q * (p.response[i] - yhat), (1.0 - q) * (yhat - p.response[i]));
            EXPECT_NEAR(s.x[P + i], expected, 1e-8);
        }
    }
}

TEST(PinballFit, ObjectiveIsRecomputedFromCoefficients) {
    std::mt19937_64 rng(7);
    const PinballFitProblem p = random_fit(rng, 3, 60, false);
    const PinballFitResult r = pinball_fit(p);
    EXPECT_NEAR(r.objective, pinball_objective(p, r.coefficients), 1e-12 * (1.0 + r.objective));
}

TEST(PinballFit, MedianSpecialCase) {
    // Intercept-only median regression: any optimum attains the loss of
    // an in-sample median.
    PinballFitProblem p;
    p.coefficients = 1;
    p.constrained = false;
    const std::vector<double> y = {3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0};
    for (double v : y) {
        p.regressors.push_back(1.0);
        p.response.push_back(v);
        p.row_level.push_back(0.5);
    }
    const PinballFitResult r = pinball_fit(p);
    std::vector<double> best_candidates = y;
    double best = std::numeric_limits<double>::infinity();
    for (double c : best_candidates) best = std::min(best, pinball_objective(p, {c}));
    EXPECT_NEAR(r.objective, best, 1e-9);
}

TEST(PinballFit, GridSearchOracleTwoModels) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t T = 30;
        PinballFitProblem p;
        p.coefficients = 2;
        p.constrained = true;
        for (std::size_t t = 0; t < T; ++t) {
            const double base = 10.0 + 2.0 * unif(rng);
            p.regressors.push_back(base + 0.8 * unif(rng));
            p.regressors.push_back(base + 0.8 * unif(rng));
            p.response.push_back(base + unif(rng));
            p.row_level.push_back(0.7);
        }
        const PinballFitResult r = pinball_fit(p);
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 10000; ++i) {
            const double w = static_cast<double>(i) * 1e-4;
            best = std::min(best, pinball_objective(p, {w, 1.0 - w}));
        }
        // The fit can never be worse than any grid point; it may sit
        // below the grid's best by at most half a step times the
        // objective's Lipschitz constant sum_t |x_t0 - x_t1|.
        double lipschitz = 0.0;
        for (std::size_t t = 0; t < T; ++t)
            lipschitz += std::fabs(p.regressors[2 * t] - p.regressors[2 * t + 1]);
        EXPECT_LE(r.objective, best + 1e-9);
        EXPECT_GE(r.objective, best - 0.5e-4 * lipschitz);
    }
}

TEST(PinballFit, ValidationErrors) {
    PinballFitProblem p;
    EXPECT_THROW(pinball_fit(p), ParameterError);
    p.coefficients = 1;
    p.regressors = {1.0};
    p.response = {2.0};
    p.row_level = {1.5};
    EXPECT_THROW(pinball_fit(p), ParameterError);
    p.row_level = {0.5};
    EXPECT_NO_THROW(pinball_fit(p));
}
