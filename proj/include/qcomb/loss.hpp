#pragma once

#include <string>
#include <vector>

#include "qcomb/core.hpp"
#include "qcomb/errors.hpp"

namespace qcomb {

/// Pinball (check) loss of a single quantile forecast against an
/// observation. Level must lie strictly inside (0,1). A tie between
/// forecast and observation falls in the over-forecast branch, where
/// the loss is zero anyway.
inline double pinball(double forecast, double actual, double level) {
    if (!is_finite(level) || level <= 0.0 || level >= 1.0)
        throw ParameterError("pinball level must lie in (0,1), got " + std::to_string(level));
    if (!is_finite(forecast) || !is_finite(actual))
        throw ParameterError("pinball arguments must be finite");
    // diff - level * diff instead of (1 - level) * diff: algebraically
    // equal, but exact for representable products like 0.9 * 10.
    if (forecast >= actual) {
        const double diff = forecast - actual;
        return diff - level * diff;
    }
    return level * (actual - forecast);
}

/// Mean pinball loss per model and level over an aligned history,
/// plus each model's overall mean across levels.
struct LossTable {
    std::vector<std::string> model_ids;
    QuantileGrid grid{std::vector<double>{0.5}};
    std::vector<std::vector<double>> mean_by_level; // [model][level]
    std::vector<double> overall_mean;               // [model]
};

inline LossTable loss_table(const ForecastPanel& panel, const ActualSeries& actuals) {
    if (panel.time() != actuals.time())
        throw AlignmentError("loss table needs a shared time index; align the inputs first");
    const std::size_t N = panel.models();
    const std::size_t T = panel.steps();
    const std::size_t Q = panel.levels();
    LossTable table;
    table.model_ids = panel.model_ids();
    table.grid = panel.grid();
    table.mean_by_level.assign(N, std::vector<double>(Q, 0.0));
    table.overall_mean.assign(N, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t k = 0; k < Q; ++k) {
            double sum = 0.0;
            for (std::size_t t = 0; t < T; ++t)
                sum += pinball(panel.value(n, t, k), actuals.value(t), panel.grid().level(k));
            table.mean_by_level[n][k] = sum / static_cast<double>(T);
        }
        double acc = 0.0;
        for (std::size_t k = 0; k < Q; ++k) acc += table.mean_by_level[n][k];
        table.overall_mean[n] = acc / static_cast<double>(Q);
    }
    return table;
}

/// Mean pinball loss of a combined forecast over all steps and levels.
inline double pinball_score(const CombinedForecast& combined, const ActualSeries& actuals) {
    if (combined.time() != actuals.time())
        throw AlignmentError("pinball score needs a shared time index; align the inputs first");
    const std::size_t T = combined.steps();
    const std::size_t Q = combined.levels();
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < Q; ++k)
            sum += pinball(combined.value(t, k), actuals.value(t), combined.grid().level(k));
    return sum / static_cast<double>(T * Q);
}

} // namespace qcomb
