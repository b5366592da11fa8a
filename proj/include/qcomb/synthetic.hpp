#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qcomb/combine.hpp"
#include "qcomb/core.hpp"
#include "qcomb/distributions.hpp"
#include "qcomb/errors.hpp"

namespace qcomb {

enum class NoiseFamily { gaussian, laplace, scaled_t };

inline std::string to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return "gaussian";
        case NoiseFamily::laplace: return "laplace";
        case NoiseFamily::scaled_t: return "scaled-t";
    }
    throw InternalError("unknown noise family");
}

inline NoiseFamily parse_noise_family(const std::string& name) {
    if (name == "gaussian") return NoiseFamily::gaussian;
    if (name == "laplace") return NoiseFamily::laplace;
    if (name == "scaled-t" || name == "scaled_t") return NoiseFamily::scaled_t;
    throw ParameterError("unknown noise family: " + name);
}

/// A seeded scenario: y_t = m(t) + eps_t with
///   m(t) = level + amplitude * (sin(2 pi t / period) + 0.25 sin(4 pi t / period))
/// and iid noise from one of three families with closed-form quantiles.
/// The second harmonic keeps a fundamental-only cycle regression from
/// being exactly specified. The four split fractions carve the series
/// chronologically into train / validation / combination / test parts.
struct SyntheticScenario {
    std::uint64_t seed = 1;
    std::size_t length = 2400;
    double level = 100.0;
    double amplitude = 20.0;
    double period = 48.0;
    NoiseFamily noise = NoiseFamily::gaussian;
    std::vector<double> noise_params = {6.0}; // gaussian {sigma}, laplace {b}, scaled-t {nu, s}
    std::array<double, 4> splits = {0.25, 0.25, 0.25, 0.25};
};

inline void validate(const SyntheticScenario& s) {
    if (s.length < 4) throw ParameterError("scenario length must be at least 4");
    if (!std::isfinite(s.level)) throw ParameterError("scenario level must be finite");
    if (!std::isfinite(s.amplitude) || s.amplitude < 0.0)
        throw ParameterError("scenario amplitude must be finite and non-negative");
    if (!std::isfinite(s.period) || s.period < 2.0)
        throw ParameterError("scenario period must be at least 2 time steps");
    switch (s.noise) {
        case NoiseFamily::gaussian:
            if (s.noise_params.size() != 1 || !(s.noise_params[0] > 0.0))
                throw ParameterError("gaussian noise needs one positive parameter (sigma)");
            break;
        case NoiseFamily::laplace:
            if (s.noise_params.size() != 1 || !(s.noise_params[0] > 0.0))
                throw ParameterError("laplace noise needs one positive parameter (b)");
            break;
        case NoiseFamily::scaled_t:
            if (s.noise_params.size() != 2 || !(s.noise_params[0] > 2.0) ||
                !(s.noise_params[1] > 0.0))
                throw ParameterError("scaled-t noise needs nu > 2 and a positive scale s");
            break;
    }
    double sum = 0.0;
    for (double f : s.splits) {
        if (!(f > 0.0)) throw ParameterError("each split fraction must be positive");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1");
}

/// Closed-form noise quantile for a scenario's family.
inline double noise_quantile(NoiseFamily family, const std::vector<double>& params, double p) {
    switch (family) {
        case NoiseFamily::gaussian: return params.at(0) * dist::normal_quantile(p);
        case NoiseFamily::laplace: return dist::laplace_quantile(p, params.at(0));
        case NoiseFamily::scaled_t:
            return params.at(1) * dist::student_t_quantile(p, params.at(0));
    }
    throw InternalError("unknown noise family");
}

/// key=value scenario text ('#' starts a comment). Keys: seed, length,
/// level, amplitude, period, noise, noise_params, splits.
inline SyntheticScenario parse_scenario(const std::string& text) {
    SyntheticScenario s;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto bad = [&](const std::string& why) {
        return ParameterError("scenario line " + std::to_string(line_no) + ": " + why);
    };
    auto to_double = [&](const std::string& v) {
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw bad("not a number: " + v);
        }
    };
    auto split_list = [&](const std::string& v) {
        std::vector<double> vals;
        std::string item;
        std::istringstream items(v);
        while (std::getline(items, item, ',')) vals.push_back(to_double(item));
        return vals;
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw bad("expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        while (!value.empty() && (value.front() == ' ' || value.front() == '\t'))
            value.erase(value.begin());
        if (key == "seed") s.seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "length") s.length = static_cast<std::size_t>(std::stoull(value));
        else if (key == "level") s.level = to_double(value);
        else if (key == "amplitude") s.amplitude = to_double(value);
        else if (key == "period") s.period = to_double(value);
        else if (key == "noise") s.noise = parse_noise_family(value);
        else if (key == "noise_params") s.noise_params = split_list(value);
        else if (key == "splits") {
            const auto vals = split_list(value);
            if (vals.size() != 4) throw bad("splits needs four fractions");
            for (std::size_t i = 0; i < 4; ++i) s.splits[i] = vals[i];
        } else throw bad("unknown key: " + key);
    }
    validate(s);
    return s;
}

/// Chronological part boundaries: indices b1 <= b2 <= b3 delimiting
/// train [0,b1), validation [b1,b2), combination [b2,b3), test [b3,T).
inline std::array<std::size_t, 3> split_boundaries(const SyntheticScenario& s) {
    const auto T = static_cast<double>(s.length);
    std::array<std::size_t, 3> b{};
    double cum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        cum += s.splits[i];
        b[i] = static_cast<std::size_t>(std::llround(cum * T));
    }
    if (b[0] < 1 || b[1] <= b[0] || b[2] <= b[1] || b[2] >= s.length)
        throw ParameterError("split fractions leave an empty part at length " +
                             std::to_string(s.length));
    return b;
}

/// Generated series plus the base-model features and the true
/// conditional quantile surface (mean path plus closed-form noise
/// quantiles; the noise is iid, so conditioning adds nothing).
struct SyntheticData {
    TimeIndex time{std::vector<std::int64_t>{0}};
    ActualSeries actuals{TimeIndex{std::vector<std::int64_t>{0}}, std::vector<double>{0.0}};
    QuantileGrid grid{std::vector<double>{0.5}};
    std::vector<double> mean_path;    // m(t)
    std::vector<double> lag1;         // y_{t-1}; t = 0 uses a warmup draw
    std::vector<double> sin_term;     // sin(2 pi t / period)
    std::vector<double> cos_term;     // cos(2 pi t / period)
    std::vector<double> true_surface; // T x Q
};

inline double scenario_mean(const SyntheticScenario& s, double t) {
    const double w = 2.0 * 3.14159265358979323846 * t / s.period;
    return s.level + s.amplitude * (std::sin(w) + 0.25 * std::sin(2.0 * w));
}

inline SyntheticData generate(const SyntheticScenario& scenario, const QuantileGrid& grid) {
    validate(scenario);
    const std::size_t T = scenario.length;
    const std::size_t Q = grid.size();

    // Inverse-CDF sampling from raw mt19937_64 uniforms keeps the
    // stream identical across standard libraries.
    std::mt19937_64 rng(scenario.seed);
    auto uniform = [&rng]() {
        return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    };
    auto draw = [&](double p) { return noise_quantile(scenario.noise, scenario.noise_params, p); };

    SyntheticData data;
    data.grid = grid;
    data.mean_path.resize(T);
    data.lag1.resize(T);
    data.sin_term.resize(T);
    data.cos_term.resize(T);
    data.true_surface.resize(T * Q);

    const double warmup = scenario_mean(scenario, -1.0) + draw(uniform());
    std::vector<double> y(T);
    std::vector<std::int64_t> stamps(T);
    constexpr std::int64_t origin = 1451606400; // 2016-01-01T00:00:00Z
    double prev = warmup;
    for (std::size_t t = 0; t < T; ++t) {
        const double td = static_cast<double>(t);
        data.mean_path[t] = scenario_mean(scenario, td);
        y[t] = data.mean_path[t] + draw(uniform());
        data.lag1[t] = prev;
        prev = y[t];
        const double w = 2.0 * 3.14159265358979323846 * td / scenario.period;
        data.sin_term[t] = std::sin(w);
        data.cos_term[t] = std::cos(w);
        stamps[t] = origin + 3600 * static_cast<std::int64_t>(t);
        for (std::size_t k = 0; k < Q; ++k)
            data.true_surface[t * Q + k] = data.mean_path[t] + draw(grid.level(k));
    }
    data.time = TimeIndex(stamps);
    data.actuals = ActualSeries(data.time, std::move(y));
    return data;
}

/// Feature menus for the linear base forecasters. Every menu includes
/// a constant column.
enum class BaseFeatures { const_only, lag_only, cycle_only, lag_and_cycle };

inline std::string to_string(BaseFeatures f) {
    switch (f) {
        case BaseFeatures::const_only: return "const";
        case BaseFeatures::lag_only: return "lag1";
        case BaseFeatures::cycle_only: return "cycle";
        case BaseFeatures::lag_and_cycle: return "lag1+cycle";
    }
    throw InternalError("unknown feature set");
}

inline std::size_t feature_count(BaseFeatures f) {
    switch (f) {
        case BaseFeatures::const_only: return 1;
        case BaseFeatures::lag_only: return 2;
        case BaseFeatures::cycle_only: return 3;
        case BaseFeatures::lag_and_cycle: return 4;
    }
    throw InternalError("unknown feature set");
}

inline void feature_row(const SyntheticData& data, BaseFeatures f, std::size_t t,
                        std::vector<double>& row) {
    row.clear();
    row.push_back(1.0);
    if (f == BaseFeatures::lag_only || f == BaseFeatures::lag_and_cycle)
        row.push_back(data.lag1[t]);
    if (f == BaseFeatures::cycle_only || f == BaseFeatures::lag_and_cycle) {
        row.push_back(data.sin_term[t]);
        row.push_back(data.cos_term[t]);
    }
}

/// A linear quantile regression per level over one feature menu.
struct LinearQuantileModel {
    BaseFeatures features = BaseFeatures::const_only;
    QuantileGrid grid{std::vector<double>{0.5}};
    std::vector<std::vector<double>> coefficients; // per level
    std::vector<double> objective_per_level;       // in-sample pinball sums
};

/// Fits one base model on rows [begin, end) of a generated series.
inline LinearQuantileModel fit_base(const SyntheticData& data, std::size_t begin, std::size_t end,
                                    BaseFeatures features, const FitOptions& options = {}) {
    if (begin >= end || end > data.actuals.size()) throw ParameterError("invalid base-fit range");
    const std::size_t R = end - begin;
    const std::size_t P = feature_count(features);
    if (R < P)
        throw ParameterError("base fit needs at least " + std::to_string(P) + " rows, got " +
                             std::to_string(R));
    LinearQuantileModel model;
    model.features = features;
    model.grid = data.grid;
    std::vector<double> row;
    for (std::size_t k = 0; k < data.grid.size(); ++k) {
        PinballFitProblem prob;
        prob.coefficients = P;
        prob.constrained = false;
        prob.regressors.reserve(R * P);
        prob.response.reserve(R);
        for (std::size_t t = begin; t < end; ++t) {
            feature_row(data, features, t, row);
            prob.regressors.insert(prob.regressors.end(), row.begin(), row.end());
            prob.response.push_back(data.actuals.value(t));
        }
        prob.row_level.assign(R, data.grid.level(k));
        detail::RouteResult r = detail::solve_pinball(prob, options);
        model.coefficients.push_back(std::move(r.coefficients));
        model.objective_per_level.push_back(r.objective);
    }
    return model;
}

/// Base-model forecasts over rows [begin, end): (end-begin) x Q values.
inline std::vector<double> predict_base(const LinearQuantileModel& model,
                                        const SyntheticData& data, std::size_t begin,
                                        std::size_t end) {
    if (begin >= end || end > data.actuals.size())
        throw ParameterError("invalid base-predict range");
    const std::size_t Q = model.grid.size();
    std::vector<double> out;
    out.reserve((end - begin) * Q);
    std::vector<double> row;
    for (std::size_t t = begin; t < end; ++t) {
        feature_row(data, model.features, t, row);
        for (std::size_t k = 0; k < Q; ++k) {
            double v = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) v += model.coefficients[k][j] * row[j];
            out.push_back(v);
        }
    }
    return out;
}

/// A base-model pool: forecasts over the combination and test spans
/// (models trained on the train prefix only), the matching actuals,
/// and the true surface for oracle comparisons.
struct PoolResult {
    ForecastPanel panel;
    ActualSeries actuals;
    std::size_t combine_steps = 0; // prefix of the panel reserved for combination fitting
    std::vector<double> true_surface;
};

inline const std::vector<BaseFeatures>& default_pool_features() {
    static const std::vector<BaseFeatures> sets = {
        BaseFeatures::lag_only, BaseFeatures::cycle_only, BaseFeatures::lag_and_cycle};
    return sets;
}

inline PoolResult make_pool(const SyntheticScenario& scenario, const QuantileGrid& grid,
                            const std::vector<BaseFeatures>& features = default_pool_features(),
                            const FitOptions& options = {}) {
    if (features.empty()) throw ParameterError("pool needs at least one base model");
    const SyntheticData data = generate(scenario, grid);
    const auto bounds = split_boundaries(scenario);
    const std::size_t b1 = bounds[0], b2 = bounds[1], b3 = bounds[2];
    const std::size_t T = scenario.length;
    const std::size_t Q = grid.size();
    const std::size_t span = T - b2; // combination + test

    // Repeated menus are allowed (they yield identical panel slices);
    // ids stay unique via an occurrence suffix.
    std::vector<std::string> ids;
    std::vector<double> values;
    values.reserve(features.size() * span * Q);
    std::map<std::string, std::size_t> seen;
    for (const BaseFeatures f : features) {
        std::string id = to_string(f);
        const std::size_t count = ++seen[id];
        if (count > 1) id += "#" + std::to_string(count);
        ids.push_back(std::move(id));
        LinearQuantileModel model = fit_base(data, 0, b1, f, options);
        std::vector<double> fc = predict_base(model, data, b2, T);
        values.insert(values.end(), fc.begin(), fc.end());
    }

    PoolResult pool{
        ForecastPanel(std::move(ids), data.time.slice(b2, T), grid, std::move(values)),
        data.actuals.slice(b2, T), b3 - b2,
        std::vector<double>(data.true_surface.begin() + static_cast<std::ptrdiff_t>(b2 * Q),
                            data.true_surface.end())};
    return pool;
}

} // namespace qcomb
