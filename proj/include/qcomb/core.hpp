#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qcomb/errors.hpp"

namespace qcomb {

/// Combination method identifiers. The first eleven form the fixed
/// reporting order; CQRA_SHARED estimates one weight vector across
/// all levels and is reported after CQRA_T when requested.
enum class MethodTag {
    BI,
    NS,
    MED,
    SA,
    WA,
    QRA_E,
    QRA_A,
    QRA_T,
    CQRA_E,
    CQRA_A,
    CQRA_T,
    CQRA_SHARED,
};

/// Which regressor block a weight vector applies to:
///   targeted  - the N forecasts of the level being combined
///   all       - all N*Q forecast quantiles
///   averaged  - per-model averages over the Q levels (length N)
enum class RegressorKind { targeted, all, averaged };

inline std::string to_string(MethodTag tag) {
    switch (tag) {
        case MethodTag::BI: return "BI";
        case MethodTag::NS: return "NS";
        case MethodTag::MED: return "MED";
        case MethodTag::SA: return "SA";
        case MethodTag::WA: return "WA";
        case MethodTag::QRA_E: return "QRA-E";
        case MethodTag::QRA_A: return "QRA-A";
        case MethodTag::QRA_T: return "QRA-T";
        case MethodTag::CQRA_E: return "CQRA-E";
        case MethodTag::CQRA_A: return "CQRA-A";
        case MethodTag::CQRA_T: return "CQRA-T";
        case MethodTag::CQRA_SHARED: return "CQRA-SHARED";
    }
    throw InternalError("unknown method tag");
}

inline std::string to_string(RegressorKind kind) {
    switch (kind) {
        case RegressorKind::targeted: return "targeted";
        case RegressorKind::all: return "all";
        case RegressorKind::averaged: return "averaged";
    }
    throw InternalError("unknown regressor kind");
}

inline MethodTag parse_method(const std::string& name) {
    std::string s;
    s.reserve(name.size());
    for (char c : name) s.push_back(c == '_' ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (s == "BI") return MethodTag::BI;
    if (s == "NS") return MethodTag::NS;
    if (s == "MED") return MethodTag::MED;
    if (s == "SA") return MethodTag::SA;
    if (s == "WA") return MethodTag::WA;
    if (s == "QRA-E") return MethodTag::QRA_E;
    if (s == "QRA-A") return MethodTag::QRA_A;
    if (s == "QRA-T") return MethodTag::QRA_T;
    if (s == "CQRA-E") return MethodTag::CQRA_E;
    if (s == "CQRA-A") return MethodTag::CQRA_A;
    if (s == "CQRA-T") return MethodTag::CQRA_T;
    if (s == "CQRA-SHARED") return MethodTag::CQRA_SHARED;
    throw ParameterError("unknown method name: " + name);
}

inline RegressorKind parse_regressor_kind(const std::string& name) {
    if (name == "targeted") return RegressorKind::targeted;
    if (name == "all") return RegressorKind::all;
    if (name == "averaged") return RegressorKind::averaged;
    throw ParameterError("unknown regressor kind: " + name);
}

/// Fixed method ordering for reports.
inline const std::vector<MethodTag>& report_order() {
    static const std::vector<MethodTag> order = {
        MethodTag::BI,     MethodTag::NS,     MethodTag::MED,   MethodTag::SA,
        MethodTag::WA,     MethodTag::QRA_E,  MethodTag::QRA_A, MethodTag::QRA_T,
        MethodTag::CQRA_E, MethodTag::CQRA_A, MethodTag::CQRA_T};
    return order;
}

inline RegressorKind regressor_kind_of(MethodTag tag) {
    switch (tag) {
        case MethodTag::QRA_E:
        case MethodTag::CQRA_E: return RegressorKind::averaged;
        case MethodTag::QRA_A:
        case MethodTag::CQRA_A: return RegressorKind::all;
        default: return RegressorKind::targeted;
    }
}

inline bool is_constrained(MethodTag tag) {
    switch (tag) {
        case MethodTag::QRA_E:
        case MethodTag::QRA_A:
        case MethodTag::QRA_T: return false;
        default: return true;
    }
}

/// NS and MED need no fitted state and carry no weight profile.
inline bool has_profile(MethodTag tag) {
    return tag != MethodTag::NS && tag != MethodTag::MED;
}

inline bool is_finite(double v) { return std::isfinite(v); }

/// Strictly increasing quantile levels, each in the open interval (0,1).
class QuantileGrid {
public:
    explicit QuantileGrid(std::vector<double> levels) : levels_(std::move(levels)) {
        if (levels_.empty()) throw ParameterError("quantile grid must hold at least one level");
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            if (!is_finite(levels_[i]) || levels_[i] <= 0.0 || levels_[i] >= 1.0)
                throw ParameterError("quantile level at position " + std::to_string(i) +
                                     " is outside (0,1)");
            if (i > 0 && levels_[i] <= levels_[i - 1])
                throw ParameterError("quantile levels must be strictly increasing (position " +
                                     std::to_string(i) + ")");
        }
    }

    std::size_t size() const { return levels_.size(); }
    double level(std::size_t k) const { return levels_.at(k); }
    const std::vector<double>& levels() const { return levels_; }

    /// Index of a level, matched to within 1e-12. Throws if absent.
    std::size_t index_of(double level) const {
        for (std::size_t k = 0; k < levels_.size(); ++k)
            if (std::fabs(levels_[k] - level) <= 1e-12) return k;
        throw ParameterError("level " + std::to_string(level) + " is not on the grid");
    }

    bool operator==(const QuantileGrid& other) const { return levels_ == other.levels_; }
    bool operator!=(const QuantileGrid& other) const { return !(*this == other); }

private:
    std::vector<double> levels_;
};

/// The nine-level decile grid 0.1, 0.2, ..., 0.9.
inline QuantileGrid default_quantile_grid() {
    return QuantileGrid({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
}

/// Strictly increasing epoch-second timestamps.
class TimeIndex {
public:
    explicit TimeIndex(std::vector<std::int64_t> stamps) : stamps_(std::move(stamps)) {
        if (stamps_.empty()) throw ParameterError("time index must hold at least one stamp");
        for (std::size_t i = 1; i < stamps_.size(); ++i)
            if (stamps_[i] <= stamps_[i - 1])
                throw ParameterError("timestamps must be strictly increasing (position " +
                                     std::to_string(i) + ")");
    }

    std::size_t size() const { return stamps_.size(); }
    std::int64_t stamp(std::size_t t) const { return stamps_.at(t); }
    const std::vector<std::int64_t>& stamps() const { return stamps_; }

    TimeIndex slice(std::size_t begin, std::size_t end) const {
        if (begin >= end || end > stamps_.size()) throw ParameterError("invalid time slice");
        return TimeIndex(std::vector<std::int64_t>(stamps_.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   stamps_.begin() + static_cast<std::ptrdiff_t>(end)));
    }

    bool operator==(const TimeIndex& other) const { return stamps_ == other.stamps_; }
    bool operator!=(const TimeIndex& other) const { return !(*this == other); }

private:
    std::vector<std::int64_t> stamps_;
};

/// Observed values on a time index. Values must be finite.
class ActualSeries {
public:
    ActualSeries(TimeIndex time, std::vector<double> values)
        : time_(std::move(time)), values_(std::move(values)) {
        if (values_.size() != time_.size())
            throw ParameterError("actuals length " + std::to_string(values_.size()) +
                                 " does not match time index length " + std::to_string(time_.size()));
        for (std::size_t t = 0; t < values_.size(); ++t)
            if (!is_finite(values_[t]))
                throw ParameterError("actual value at position " + std::to_string(t) +
                                     " is not finite");
    }

    const TimeIndex& time() const { return time_; }
    std::size_t size() const { return values_.size(); }
    double value(std::size_t t) const { return values_.at(t); }
    const std::vector<double>& values() const { return values_; }

    ActualSeries slice(std::size_t begin, std::size_t end) const {
        return ActualSeries(time_.slice(begin, end),
                            std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(begin),
                                                values_.begin() + static_cast<std::ptrdiff_t>(end)));
    }

private:
    TimeIndex time_;
    std::vector<double> values_;
};

/// N models x T time steps x Q quantile levels of finite forecast values.
/// Storage is a flat row-major tensor indexed (model, time, level).
class ForecastPanel {
public:
    ForecastPanel(std::vector<std::string> model_ids, TimeIndex time, QuantileGrid grid,
                  std::vector<double> values)
        : model_ids_(std::move(model_ids)),
          time_(std::move(time)),
          grid_(std::move(grid)),
          values_(std::move(values)) {
        if (model_ids_.empty()) throw ParameterError("panel must hold at least one model");
        for (std::size_t n = 0; n < model_ids_.size(); ++n) {
            if (model_ids_[n].empty())
                throw ParameterError("model id at position " + std::to_string(n) + " is empty");
            for (std::size_t m = n + 1; m < model_ids_.size(); ++m)
                if (model_ids_[n] == model_ids_[m])
                    throw ParameterError("duplicate model id: " + model_ids_[n]);
        }
        const std::size_t expected = model_ids_.size() * time_.size() * grid_.size();
        if (values_.size() != expected)
            throw ParameterError("panel values size " + std::to_string(values_.size()) +
                                 " does not match N*T*Q = " + std::to_string(expected));
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!is_finite(values_[i]))
                throw ParameterError("panel value at flat position " + std::to_string(i) +
                                     " is not finite");
    }

    std::size_t models() const { return model_ids_.size(); }
    std::size_t steps() const { return time_.size(); }
    std::size_t levels() const { return grid_.size(); }

    const std::vector<std::string>& model_ids() const { return model_ids_; }
    const TimeIndex& time() const { return time_; }
    const QuantileGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }

    double value(std::size_t n, std::size_t t, std::size_t k) const {
        return values_[index(n, t, k)];
    }

    std::size_t index(std::size_t n, std::size_t t, std::size_t k) const {
        return (n * time_.size() + t) * grid_.size() + k;
    }

    ForecastPanel slice_time(std::size_t begin, std::size_t end) const {
        TimeIndex sliced = time_.slice(begin, end);
        const std::size_t Q = grid_.size();
        std::vector<double> vals;
        vals.reserve(model_ids_.size() * sliced.size() * Q);
        for (std::size_t n = 0; n < model_ids_.size(); ++n)
            for (std::size_t t = begin; t < end; ++t)
                for (std::size_t k = 0; k < Q; ++k) vals.push_back(value(n, t, k));
        return ForecastPanel(model_ids_, std::move(sliced), grid_, std::move(vals));
    }

private:
    std::vector<std::string> model_ids_;
    TimeIndex time_;
    QuantileGrid grid_;
    std::vector<double> values_;
};

/// A single combined forecast: T x Q finite values. When produced with
/// rearrangement enabled every time row is non-decreasing across levels.
class CombinedForecast {
public:
    CombinedForecast(TimeIndex time, QuantileGrid grid, std::vector<double> values, bool rearranged)
        : time_(std::move(time)), grid_(std::move(grid)), values_(std::move(values)), rearranged_(rearranged) {
        if (values_.size() != time_.size() * grid_.size())
            throw ParameterError("combined forecast size does not match T*Q");
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!is_finite(values_[i]))
                throw ParameterError("combined value at flat position " + std::to_string(i) +
                                     " is not finite");
        if (rearranged_) {
            const std::size_t Q = grid_.size();
            for (std::size_t t = 0; t < time_.size(); ++t)
                for (std::size_t k = 1; k < Q; ++k)
                    if (values_[t * Q + k] < values_[t * Q + k - 1])
                        throw ParameterError("rearranged forecast has a decreasing row at step " +
                                             std::to_string(t));
        }
    }

    const TimeIndex& time() const { return time_; }
    const QuantileGrid& grid() const { return grid_; }
    std::size_t steps() const { return time_.size(); }
    std::size_t levels() const { return grid_.size(); }
    bool rearranged() const { return rearranged_; }
    const std::vector<double>& values() const { return values_; }
    double value(std::size_t t, std::size_t k) const { return values_.at(t * grid_.size() + k); }

private:
    TimeIndex time_;
    QuantileGrid grid_;
    std::vector<double> values_;
    bool rearranged_;
};

/// Per-level combination weights, plus the metadata needed to apply
/// them to a new panel. Constrained profiles live on the simplex:
/// coefficients >= -1e-9, each level sums to 1 within 1e-8, no intercepts.
class WeightProfile {
public:
    WeightProfile(MethodTag method, RegressorKind kind, bool constrained,
                  std::vector<std::string> model_ids, QuantileGrid grid,
                  std::vector<std::vector<double>> coefficients,
                  std::optional<std::vector<double>> intercepts = std::nullopt)
        : method_(method),
          kind_(kind),
          constrained_(constrained),
          model_ids_(std::move(model_ids)),
          grid_(std::move(grid)),
          coefficients_(std::move(coefficients)),
          intercepts_(std::move(intercepts)) {
        if (!has_profile(method_)) throw ParameterError(to_string(method_) + " carries no weight profile");
        if (model_ids_.empty()) throw ParameterError("weight profile needs at least one model id");
        const std::size_t N = model_ids_.size();
        const std::size_t Q = grid_.size();
        const std::size_t expected = kind_ == RegressorKind::all ? N * Q : N;
        if (coefficients_.size() != Q)
            throw ParameterError("profile must hold one coefficient vector per level");
        for (std::size_t k = 0; k < Q; ++k) {
            const auto& w = coefficients_[k];
            if (w.size() != expected)
                throw ParameterError("coefficient vector for level index " + std::to_string(k) +
                                     " has length " + std::to_string(w.size()) + ", expected " +
                                     std::to_string(expected));
            double sum = 0.0;
            for (double c : w) {
                if (!is_finite(c)) throw ParameterError("non-finite coefficient in profile");
                if (constrained_ && c < -1e-9)
                    throw ParameterError("constrained coefficient below zero tolerance at level index " +
                                         std::to_string(k));
                sum += c;
            }
            if (constrained_ && std::fabs(sum - 1.0) > 1e-8)
                throw ParameterError("constrained coefficients for level index " + std::to_string(k) +
                                     " sum to " + std::to_string(sum) + ", expected 1");
        }
        if (intercepts_) {
            if (constrained_) throw ParameterError("constrained profiles carry no intercept");
            if (intercepts_->size() != Q)
                throw ParameterError("intercept vector must hold one entry per level");
            for (double b : *intercepts_)
                if (!is_finite(b)) throw ParameterError("non-finite intercept in profile");
        }
    }

    MethodTag method() const { return method_; }
    RegressorKind kind() const { return kind_; }
    bool constrained() const { return constrained_; }
    const std::vector<std::string>& model_ids() const { return model_ids_; }
    const QuantileGrid& grid() const { return grid_; }
    const std::vector<std::vector<double>>& coefficients() const { return coefficients_; }
    const std::vector<double>& coefficients_for(double level) const {
        return coefficients_[grid_.index_of(level)];
    }
    const std::optional<std::vector<double>>& intercepts() const { return intercepts_; }

private:
    MethodTag method_;
    RegressorKind kind_;
    bool constrained_;
    std::vector<std::string> model_ids_;
    QuantileGrid grid_;
    std::vector<std::vector<double>> coefficients_;
    std::optional<std::vector<double>> intercepts_;
};

/// Fit-time byproducts: the minimized in-sample pinball sum per level,
/// solver iteration counts, and any non-fatal warnings.
struct FitDiagnostics {
    std::vector<double> objective_per_level;
    long iterations = 0;
    std::vector<std::string> warnings;
};

/// A fitted combination method. NS and MED carry no profile; every
/// model still records the fit-time model set and grid so prediction
/// can enforce its contract.
struct CombinationModel {
    MethodTag method;
    std::optional<WeightProfile> profile;
    std::vector<std::string> model_ids;
    QuantileGrid grid{std::vector<double>{0.5}};
    FitDiagnostics diagnostics;
};

/// A panel and an actual series verified to share one time index.
struct AlignedDataset {
    ForecastPanel panel;
    ActualSeries actuals;
};

/// Verifies stamp-for-stamp equality of the two time indices.
/// Throws AlignmentError naming the first offending index.
inline AlignedDataset align(ForecastPanel panel, ActualSeries actuals) {
    const auto& pt = panel.time().stamps();
    const auto& at = actuals.time().stamps();
    const std::size_t common = std::min(pt.size(), at.size());
    for (std::size_t i = 0; i < common; ++i)
        if (pt[i] != at[i])
            throw AlignmentError("time indices disagree at index " + std::to_string(i) +
                                 ": panel stamp " + std::to_string(pt[i]) + " vs actual stamp " +
                                 std::to_string(at[i]));
    if (pt.size() != at.size())
        throw AlignmentError("time indices disagree at index " + std::to_string(common) +
                             ": one series ends early (panel length " + std::to_string(pt.size()) +
                             ", actuals length " + std::to_string(at.size()) + ")");
    return AlignedDataset{std::move(panel), std::move(actuals)};
}

/// Chronological split: the first ceil(fit_fraction * T) steps form the
/// fit part, the remainder the evaluation part. Either part empty is an
/// error.
inline std::pair<AlignedDataset, AlignedDataset> split_by_ratio(const AlignedDataset& data,
                                                                double fit_fraction) {
    if (!is_finite(fit_fraction) || fit_fraction <= 0.0 || fit_fraction >= 1.0)
        throw ParameterError("fit fraction must lie strictly between 0 and 1");
    const std::size_t T = data.panel.steps();
    const auto fit_count =
        static_cast<std::size_t>(std::ceil(fit_fraction * static_cast<double>(T) - 1e-9));
    if (fit_count == 0)
        throw ParameterError("split leaves the fit part empty");
    if (fit_count >= T)
        throw ParameterError("split leaves the evaluation part empty (fit part would take all " +
                             std::to_string(T) + " steps)");
    AlignedDataset fit{data.panel.slice_time(0, fit_count), data.actuals.slice(0, fit_count)};
    AlignedDataset eval{data.panel.slice_time(fit_count, T), data.actuals.slice(fit_count, T)};
    return {std::move(fit), std::move(eval)};
}

} // namespace qcomb
