#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qcomb/core.hpp"
#include "qcomb/loss.hpp"
#include "qcomb/lp.hpp"
#include "qcomb/rearrange.hpp"

namespace qcomb {

/// Fit-time knobs. The explicit-LP / dual-route pair solve the same
/// programs and return the same objectives; the threshold only trades
/// the auxiliary-variable formulation's transparency for speed on
/// long histories. The force flags exist for tests.
struct FitOptions {
    bool intercept = false;     // unconstrained regressions only
    bool bi_per_level = false;  // select BI per level rather than overall
    std::size_t explicit_lp_max_rows = 400;
    bool force_explicit_lp = false;
    bool force_dual_route = false;
};

/// The regressor matrix a combination regression runs on: T rows of
/// P values drawn from a panel.
struct RegressorView {
    RegressorKind kind = RegressorKind::targeted;
    std::size_t coefficients = 0; // P
    std::vector<double> rows;     // T x P, row-major
};

/// Builds the regressor rows for one level (targeted) or for the
/// level-independent kinds (all, averaged; level_index ignored).
/// "all" columns are model-major: model 0's Q quantiles, then model 1's.
inline RegressorView make_regressor_view(const ForecastPanel& panel, RegressorKind kind,
                                         std::size_t level_index = 0) {
    const std::size_t N = panel.models();
    const std::size_t T = panel.steps();
    const std::size_t Q = panel.levels();
    RegressorView view;
    view.kind = kind;
    switch (kind) {
        case RegressorKind::targeted: {
            if (level_index >= Q) throw ParameterError("targeted view level index out of range");
            view.coefficients = N;
            view.rows.reserve(T * N);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t n = 0; n < N; ++n) view.rows.push_back(panel.value(n, t, level_index));
            break;
        }
        case RegressorKind::all: {
            view.coefficients = N * Q;
            view.rows.reserve(T * N * Q);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t k = 0; k < Q; ++k) view.rows.push_back(panel.value(n, t, k));
            break;
        }
        case RegressorKind::averaged: {
            view.coefficients = N;
            view.rows.reserve(T * N);
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t n = 0; n < N; ++n) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < Q; ++k) s += panel.value(n, t, k);
                    view.rows.push_back(s / static_cast<double>(Q));
                }
            }
            break;
        }
    }
    return view;
}

/// Inverse-loss weights per level. Models with zero loss split the
/// mass equally among themselves; everyone else gets zero.
inline std::vector<std::vector<double>> weights_wa(const LossTable& table) {
    const std::size_t N = table.model_ids.size();
    const std::size_t Q = table.grid.size();
    std::vector<std::vector<double>> weights(Q, std::vector<double>(N, 0.0));
    for (std::size_t k = 0; k < Q; ++k) {
        std::size_t zero_count = 0;
        for (std::size_t n = 0; n < N; ++n)
            if (table.mean_by_level[n][k] == 0.0) ++zero_count;
        if (zero_count > 0) {
            for (std::size_t n = 0; n < N; ++n)
                if (table.mean_by_level[n][k] == 0.0)
                    weights[k][n] = 1.0 / static_cast<double>(zero_count);
        } else {
            double denom = 0.0;
            for (std::size_t n = 0; n < N; ++n) denom += 1.0 / table.mean_by_level[n][k];
            for (std::size_t n = 0; n < N; ++n)
                weights[k][n] = (1.0 / table.mean_by_level[n][k]) / denom;
        }
    }
    return weights;
}

namespace detail {

struct RouteResult {
    std::vector<double> coefficients;
    double objective = 0.0;
    long iterations = 0;
};

/// Runs one pinball regression through the route the options pick:
/// the explicit auxiliary-variable LP for short histories, the dual
/// program otherwise.
inline RouteResult solve_pinball(const PinballFitProblem& prob, const FitOptions& options) {
    const std::size_t R = prob.response.size();
    bool use_explicit = R <= options.explicit_lp_max_rows;
    if (options.force_explicit_lp) use_explicit = true;
    if (options.force_dual_route) use_explicit = false;

    RouteResult out;
    if (!use_explicit) {
        PinballFitResult fit = pinball_fit(prob);
        out.coefficients = std::move(fit.coefficients);
        out.objective = fit.objective;
        out.iterations = fit.iterations;
        return out;
    }

    const LinearProgram lp = pinball_fit_lp(prob);
    const LpSolution sol = solve(lp);
    if (sol.status != LpStatus::optimal)
        throw InternalError("combination fit solver returned " + to_string(sol.status) +
                            "; the fit program is feasible and bounded by construction");
    const std::size_t P = prob.coefficients;
    std::vector<double> beta(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(P));
    if (prob.constrained) {
        double sum = 0.0;
        for (double& b : beta) {
            if (b < 0.0) {
                if (b < -1e-6)
                    throw InternalError("constrained fit produced weight " + std::to_string(b));
                b = 0.0;
            }
            sum += b;
        }
        if (std::fabs(sum - 1.0) > 1e-6)
            throw InternalError("constrained fit weights sum to " + std::to_string(sum));
        if (sum > 0.0)
            for (double& b : beta) b /= sum;
    }
    out.coefficients = std::move(beta);
    out.iterations = sol.iterations;
    out.objective = pinball_objective(prob, out.coefficients);
    if (std::fabs(out.objective - sol.objective) > 1e-6 * (1.0 + std::fabs(sol.objective)))
        throw InternalError("fit objective mismatch between LP value and recomputation");
    return out;
}

inline PinballFitProblem regression_problem(const RegressorView& view, const ActualSeries& actuals,
                                            double level, bool constrained, bool intercept) {
    const std::size_t T = actuals.size();
    const std::size_t P = view.coefficients;
    PinballFitProblem prob;
    prob.constrained = constrained;
    prob.coefficients = P + (intercept ? 1 : 0);
    prob.regressors.reserve(T * prob.coefficients);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < P; ++j) prob.regressors.push_back(view.rows[t * P + j]);
        if (intercept) prob.regressors.push_back(1.0);
    }
    prob.response = actuals.values();
    prob.row_level.assign(T, level);
    return prob;
}

inline void warn_if_underdetermined(FitDiagnostics& diag, MethodTag tag, std::size_t rows,
                                    std::size_t coefficients) {
    if (rows < coefficients)
        diag.warnings.push_back(to_string(tag) + ": " + std::to_string(rows) +
                                " fit steps for " + std::to_string(coefficients) +
                                " coefficients; the fit is underdetermined but proceeds");
}

} // namespace detail

/// Per-level constrained or unconstrained pinball regression; handles
/// QRA-E/A/T and CQRA-E/A/T through the regressor kind.
inline CombinationModel fit_qra(MethodTag tag, const AlignedDataset& data,
                                const FitOptions& options = {}) {
    const RegressorKind kind = regressor_kind_of(tag);
    const bool constrained = is_constrained(tag);
    switch (tag) {
        case MethodTag::QRA_E:
        case MethodTag::QRA_A:
        case MethodTag::QRA_T:
        case MethodTag::CQRA_E:
        case MethodTag::CQRA_A:
        case MethodTag::CQRA_T: break;
        default: throw ParameterError(to_string(tag) + " is not a regression method");
    }
    if (options.intercept && constrained)
        throw ParameterError("intercepts are available only for unconstrained regressions");

    const ForecastPanel& panel = data.panel;
    const std::size_t T = panel.steps();
    const std::size_t Q = panel.levels();

    FitDiagnostics diag;
    std::vector<std::vector<double>> coefficients(Q);
    std::optional<std::vector<double>> intercepts;
    if (options.intercept) intercepts.emplace(Q, 0.0);

    RegressorView shared_view;
    if (kind != RegressorKind::targeted) shared_view = make_regressor_view(panel, kind);

    for (std::size_t k = 0; k < Q; ++k) {
        const RegressorView& view = kind == RegressorKind::targeted
                                        ? (shared_view = make_regressor_view(panel, kind, k))
                                        : shared_view;
        if (k == 0)
            detail::warn_if_underdetermined(diag, tag, T,
                                            view.coefficients + (options.intercept ? 1 : 0));
        PinballFitProblem prob = detail::regression_problem(view, data.actuals,
                                                            panel.grid().level(k), constrained,
                                                            options.intercept);
        detail::RouteResult r = detail::solve_pinball(prob, options);
        if (options.intercept) {
            (*intercepts)[k] = r.coefficients.back();
            r.coefficients.pop_back();
        }
        coefficients[k] = std::move(r.coefficients);
        diag.objective_per_level.push_back(r.objective);
        diag.iterations += r.iterations;
    }

    CombinationModel model;
    model.method = tag;
    model.model_ids = panel.model_ids();
    model.grid = panel.grid();
    model.profile.emplace(tag, kind, constrained, panel.model_ids(), panel.grid(),
                          std::move(coefficients), std::move(intercepts));
    model.diagnostics = std::move(diag);
    return model;
}

/// Constrained per-level combination of the targeted quantiles.
inline CombinationModel fit_cqra_t(const AlignedDataset& data, const FitOptions& options = {}) {
    return fit_qra(MethodTag::CQRA_T, data, options);
}

/// One simplex-constrained weight vector shared by every level: a
/// single program pooling all T*Q rows, each row keeping its own level.
inline CombinationModel fit_cqra_shared(const AlignedDataset& data,
                                        const FitOptions& options = {}) {
    const ForecastPanel& panel = data.panel;
    const std::size_t N = panel.models();
    const std::size_t T = panel.steps();
    const std::size_t Q = panel.levels();

    PinballFitProblem prob;
    prob.coefficients = N;
    prob.constrained = true;
    prob.regressors.reserve(T * Q * N);
    prob.response.reserve(T * Q);
    prob.row_level.reserve(T * Q);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < Q; ++k) {
            for (std::size_t n = 0; n < N; ++n) prob.regressors.push_back(panel.value(n, t, k));
            prob.response.push_back(data.actuals.value(t));
            prob.row_level.push_back(panel.grid().level(k));
        }
    }

    FitDiagnostics diag;
    detail::warn_if_underdetermined(diag, MethodTag::CQRA_SHARED, T * Q, N);
    detail::RouteResult r = detail::solve_pinball(prob, options);
    diag.iterations = r.iterations;

    // Per-level share of the pooled objective, recomputed from the
    // single weight vector.
    diag.objective_per_level.assign(Q, 0.0);
    for (std::size_t k = 0; k < Q; ++k) {
        double sum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            double yhat = 0.0;
            for (std::size_t n = 0; n < N; ++n) yhat += panel.value(n, t, k) * r.coefficients[n];
            sum += pinball(yhat, data.actuals.value(t), panel.grid().level(k));
        }
        diag.objective_per_level[k] = sum;
    }

    std::vector<std::vector<double>> coefficients(Q, r.coefficients);
    CombinationModel model;
    model.method = MethodTag::CQRA_SHARED;
    model.model_ids = panel.model_ids();
    model.grid = panel.grid();
    model.profile.emplace(MethodTag::CQRA_SHARED, RegressorKind::targeted, true,
                          panel.model_ids(), panel.grid(), std::move(coefficients));
    model.diagnostics = std::move(diag);
    return model;
}

namespace detail {

inline CombinationModel fit_bi(const AlignedDataset& data, const FitOptions& options) {
    const ForecastPanel& panel = data.panel;
    const std::size_t N = panel.models();
    const std::size_t Q = panel.levels();
    const std::size_t T = panel.steps();
    const LossTable table = loss_table(panel, data.actuals);

    std::vector<std::vector<double>> coefficients(Q, std::vector<double>(N, 0.0));
    FitDiagnostics diag;
    if (options.bi_per_level) {
        for (std::size_t k = 0; k < Q; ++k) {
            std::size_t best = 0;
            for (std::size_t n = 1; n < N; ++n)
                if (table.mean_by_level[n][k] < table.mean_by_level[best][k]) best = n;
            coefficients[k][best] = 1.0;
            diag.objective_per_level.push_back(table.mean_by_level[best][k] *
                                               static_cast<double>(T));
        }
    } else {
        std::size_t best = 0;
        for (std::size_t n = 1; n < N; ++n)
            if (table.overall_mean[n] < table.overall_mean[best]) best = n;
        for (std::size_t k = 0; k < Q; ++k) {
            coefficients[k][best] = 1.0;
            diag.objective_per_level.push_back(table.mean_by_level[best][k] *
                                               static_cast<double>(T));
        }
    }

    CombinationModel model;
    model.method = MethodTag::BI;
    model.model_ids = panel.model_ids();
    model.grid = panel.grid();
    model.profile.emplace(MethodTag::BI, RegressorKind::targeted, true, panel.model_ids(),
                          panel.grid(), std::move(coefficients));
    model.diagnostics = std::move(diag);
    return model;
}

inline CombinationModel fit_stateless(MethodTag tag, const AlignedDataset& data) {
    CombinationModel model;
    model.method = tag;
    model.model_ids = data.panel.model_ids();
    model.grid = data.panel.grid();
    return model;
}

inline CombinationModel fit_sa(const AlignedDataset& data) {
    const ForecastPanel& panel = data.panel;
    const std::size_t N = panel.models();
    const std::size_t Q = panel.levels();
    std::vector<std::vector<double>> coefficients(
        Q, std::vector<double>(N, 1.0 / static_cast<double>(N)));
    CombinationModel model;
    model.method = MethodTag::SA;
    model.model_ids = panel.model_ids();
    model.grid = panel.grid();
    model.profile.emplace(MethodTag::SA, RegressorKind::targeted, true, panel.model_ids(),
                          panel.grid(), std::move(coefficients));
    return model;
}

inline CombinationModel fit_wa(const AlignedDataset& data) {
    const LossTable table = loss_table(data.panel, data.actuals);
    CombinationModel model;
    model.method = MethodTag::WA;
    model.model_ids = data.panel.model_ids();
    model.grid = data.panel.grid();
    model.profile.emplace(MethodTag::WA, RegressorKind::targeted, true, data.panel.model_ids(),
                          data.panel.grid(), weights_wa(table));
    return model;
}

} // namespace detail

CombinationModel fit(MethodTag tag, const AlignedDataset& data, const FitOptions& options);

/// Applies a fitted model to a panel. The panel must carry the
/// fit-time model set (same order) and grid. Rearrangement defaults
/// on for prediction output.
inline CombinedForecast predict(const CombinationModel& model, const ForecastPanel& panel,
                                bool apply_rearrange = true) {
    if (panel.model_ids() != model.model_ids)
        throw ContractError("panel model set differs from the fit-time model set for " +
                            to_string(model.method));
    if (panel.grid() != model.grid)
        throw ContractError("panel grid differs from the fit-time grid for " +
                            to_string(model.method));
    const std::size_t N = panel.models();
    const std::size_t T = panel.steps();
    const std::size_t Q = panel.levels();

    std::vector<double> values(T * Q, 0.0);
    switch (model.method) {
        case MethodTag::NS: {
            // Pooled ascending sort; level j (1-based) takes position
            // 1 + (j-1) * N.
            std::vector<double> pool(N * Q);
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t k = 0; k < Q; ++k) pool[n * Q + k] = panel.value(n, t, k);
                std::stable_sort(pool.begin(), pool.end());
                for (std::size_t k = 0; k < Q; ++k) values[t * Q + k] = pool[k * N];
            }
            break;
        }
        case MethodTag::MED: {
            std::vector<double> slice(N);
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t k = 0; k < Q; ++k) {
                    for (std::size_t n = 0; n < N; ++n) slice[n] = panel.value(n, t, k);
                    std::stable_sort(slice.begin(), slice.end());
                    values[t * Q + k] = N % 2 == 1
                                            ? slice[N / 2]
                                            : 0.5 * (slice[N / 2 - 1] + slice[N / 2]);
                }
            }
            break;
        }
        default: {
            if (!model.profile)
                throw ContractError(to_string(model.method) + " model carries no weight profile");
            const WeightProfile& profile = *model.profile;
            for (std::size_t k = 0; k < Q; ++k) {
                const std::vector<double>& w = profile.coefficients()[k];
                const double b = profile.intercepts() ? (*profile.intercepts())[k] : 0.0;
                for (std::size_t t = 0; t < T; ++t) {
                    double yhat = b;
                    switch (profile.kind()) {
                        case RegressorKind::targeted:
                            for (std::size_t n = 0; n < N; ++n)
                                yhat += w[n] * panel.value(n, t, k);
                            break;
                        case RegressorKind::all:
                            for (std::size_t n = 0; n < N; ++n)
                                for (std::size_t j = 0; j < Q; ++j)
                                    yhat += w[n * Q + j] * panel.value(n, t, j);
                            break;
                        case RegressorKind::averaged:
                            for (std::size_t n = 0; n < N; ++n) {
                                double s = 0.0;
                                for (std::size_t j = 0; j < Q; ++j) s += panel.value(n, t, j);
                                yhat += w[n] * (s / static_cast<double>(Q));
                            }
                            break;
                    }
                    values[t * Q + k] = yhat;
                }
            }
            break;
        }
    }

    CombinedForecast out(panel.time(), panel.grid(), std::move(values), false);
    return apply_rearrange ? rearrange(out) : out;
}

namespace detail {

/// In-sample pinball sums per level for any fitted model.
inline std::vector<double> in_sample_objectives(const CombinationModel& model,
                                                const AlignedDataset& data) {
    const CombinedForecast fitted = predict(model, data.panel, false);
    const std::size_t T = fitted.steps();
    const std::size_t Q = fitted.levels();
    std::vector<double> sums(Q, 0.0);
    for (std::size_t k = 0; k < Q; ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t)
            s += pinball(fitted.value(t, k), data.actuals.value(t), fitted.grid().level(k));
        sums[k] = s;
    }
    return sums;
}

} // namespace detail

/// Fit dispatcher covering every method tag.
inline CombinationModel fit(MethodTag tag, const AlignedDataset& data,
                            const FitOptions& options = {}) {
    CombinationModel model;
    switch (tag) {
        case MethodTag::BI: model = detail::fit_bi(data, options); break;
        case MethodTag::NS:
        case MethodTag::MED: model = detail::fit_stateless(tag, data); break;
        case MethodTag::SA: model = detail::fit_sa(data); break;
        case MethodTag::WA: model = detail::fit_wa(data); break;
        case MethodTag::QRA_E:
        case MethodTag::QRA_A:
        case MethodTag::QRA_T:
        case MethodTag::CQRA_E:
        case MethodTag::CQRA_A:
        case MethodTag::CQRA_T: model = fit_qra(tag, data, options); break;
        case MethodTag::CQRA_SHARED: model = fit_cqra_shared(data, options); break;
    }
    if (model.diagnostics.objective_per_level.empty())
        model.diagnostics.objective_per_level = detail::in_sample_objectives(model, data);
    return model;
}

} // namespace qcomb
