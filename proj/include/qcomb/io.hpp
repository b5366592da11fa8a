#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qcomb/core.hpp"
#include "qcomb/errors.hpp"

namespace qcomb::io {

// ---------------------------------------------------------------------------
// Scalar formatting and parsing
// ---------------------------------------------------------------------------

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (res.ec != std::errc()) throw InternalError("double formatting failed");
    return std::string(buf.data(), res.ptr);
}

/// Six-significant-digit report rendering (269.953 stays "269.953").
inline std::string format_report(double v) {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.6g", v);
    return std::string(buf.data());
}

inline double parse_double_field(const std::string& text, const std::string& where) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
        throw IngestionError(where + ": not a finite number: '" + text + "'");
    return v;
}

inline std::int64_t parse_int_field(const std::string& text, const std::string& where) {
    std::int64_t v = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw IngestionError(where + ": not an integer: '" + text + "'");
    return v;
}

namespace detail {

/// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline unsigned days_in_month(std::int64_t y, unsigned m) {
    static const unsigned lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2) {
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return leap ? 29 : 28;
    }
    return lengths[m - 1];
}

} // namespace detail

/// Accepts either integer epoch seconds or an ISO-8601 UTC instant
/// (YYYY-MM-DDTHH:MM:SSZ); returns epoch seconds.
inline std::int64_t parse_timestamp(const std::string& text, const std::string& where) {
    const bool iso = text.size() == 20 && text[4] == '-' && text[7] == '-' && text[10] == 'T' &&
                     text[13] == ':' && text[16] == ':' && text[19] == 'Z';
    if (!iso) return parse_int_field(text, where);
    auto num = [&](std::size_t pos, std::size_t len) {
        for (std::size_t i = pos; i < pos + len; ++i)
            if (text[i] < '0' || text[i] > '9')
                throw IngestionError(where + ": malformed timestamp '" + text + "'");
        return parse_int_field(text.substr(pos, len), where);
    };
    const std::int64_t y = num(0, 4);
    const auto mo = static_cast<unsigned>(num(5, 2));
    const auto d = static_cast<unsigned>(num(8, 2));
    const std::int64_t h = num(11, 2);
    const std::int64_t mi = num(14, 2);
    const std::int64_t s = num(17, 2);
    if (mo < 1 || mo > 12 || d < 1 || d > detail::days_in_month(y, mo) || h > 23 || mi > 59 ||
        s > 59)
        throw IngestionError(where + ": timestamp out of range '" + text + "'");
    return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

// ---------------------------------------------------------------------------
// Line-level CSV plumbing
// ---------------------------------------------------------------------------

namespace detail {

struct CsvRow {
    std::size_t line_no = 0; // 1-based, header is line 1
    std::vector<std::string> fields;
};

/// Splits simple comma-separated content (no quoting; all our fields
/// are identifiers or numbers). Requires the exact header and a fixed
/// field count per row; blank trailing lines are permitted.
inline std::vector<CsvRow> read_csv(const std::string& content, const std::string& expect_header,
                                    std::size_t fields, const std::string& what) {
    std::vector<CsvRow> rows;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!saw_header) {
            if (line != expect_header)
                throw IngestionError(what + ": expected header '" + expect_header + "', got '" +
                                     line + "'");
            saw_header = true;
            continue;
        }
        if (line.empty()) continue;
        CsvRow row;
        row.line_no = line_no;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            row.fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (row.fields.size() != fields)
            throw IngestionError(what + " line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(fields) + " fields, got " +
                                 std::to_string(row.fields.size()));
        rows.push_back(std::move(row));
    }
    if (!saw_header) throw IngestionError(what + ": file is empty");
    return rows;
}

} // namespace detail

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// Writes through a sibling temp file and renames over the target, so
/// readers never observe a half-written file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IngestionError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw IngestionError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Forecast and actual CSV formats
// ---------------------------------------------------------------------------

inline constexpr const char* forecasts_header = "model,timestamp,level,value";
inline constexpr const char* actuals_header = "timestamp,value";

/// Assembles a dense panel from long-format rows. Rows may arrive in
/// any order; model order is first appearance; the grid and time index
/// are the sorted distinct levels and stamps. Each (model, timestamp,
/// level) cell must appear exactly once.
inline ForecastPanel read_forecasts(const std::string& content,
                                    const std::string& what = "forecasts") {
    const auto rows = detail::read_csv(content, forecasts_header, 4, what);
    if (rows.empty()) throw IngestionError(what + ": no data rows");

    struct Parsed {
        std::size_t line_no;
        std::size_t model;
        std::int64_t stamp;
        double level;
        double value;
    };
    std::vector<Parsed> parsed;
    parsed.reserve(rows.size());
    std::vector<std::string> model_ids;
    std::unordered_map<std::string, std::size_t> model_index;
    std::vector<std::int64_t> stamps;
    std::vector<double> levels;
    for (const auto& row : rows) {
        const std::string where = what + " line " + std::to_string(row.line_no);
        Parsed p{};
        p.line_no = row.line_no;
        auto it = model_index.find(row.fields[0]);
        if (it == model_index.end()) {
            it = model_index.emplace(row.fields[0], model_ids.size()).first;
            model_ids.push_back(row.fields[0]);
        }
        p.model = it->second;
        p.stamp = parse_timestamp(row.fields[1], where);
        p.level = parse_double_field(row.fields[2], where);
        p.value = parse_double_field(row.fields[3], where);
        parsed.push_back(p);
        stamps.push_back(p.stamp);
        levels.push_back(p.level);
    }
    std::sort(stamps.begin(), stamps.end());
    stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    std::optional<QuantileGrid> grid;
    std::optional<TimeIndex> time;
    try {
        grid.emplace(levels); // validates the (0,1) range
        time.emplace(stamps);
    } catch (const ParameterError& e) {
        throw IngestionError(what + ": " + e.what());
    }
    const std::size_t N = model_ids.size();
    const std::size_t T = stamps.size();
    const std::size_t Q = levels.size();

    std::map<std::int64_t, std::size_t> stamp_index;
    for (std::size_t t = 0; t < T; ++t) stamp_index.emplace(stamps[t], t);
    std::map<double, std::size_t> level_index;
    for (std::size_t k = 0; k < Q; ++k) level_index.emplace(levels[k], k);

    std::vector<double> values(N * T * Q, 0.0);
    std::vector<std::size_t> seen_at(N * T * Q, 0);
    for (const auto& p : parsed) {
        const std::size_t flat =
            (p.model * T + stamp_index.at(p.stamp)) * Q + level_index.at(p.level);
        if (seen_at[flat] != 0)
            throw IngestionError(what + ": duplicate cell model=" + model_ids[p.model] +
                                 " timestamp=" + std::to_string(p.stamp) +
                                 " level=" + format_double(p.level) + " (lines " +
                                 std::to_string(seen_at[flat]) + " and " +
                                 std::to_string(p.line_no) + ")");
        seen_at[flat] = p.line_no;
        values[flat] = p.value;
    }
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < Q; ++k)
                if (seen_at[(n * T + t) * Q + k] == 0)
                    throw IngestionError(what + ": missing cell model=" + model_ids[n] +
                                         " timestamp=" + std::to_string(stamps[t]) +
                                         " level=" + format_double(levels[k]));
    try {
        return ForecastPanel(std::move(model_ids), std::move(*time), std::move(*grid),
                             std::move(values));
    } catch (const ParameterError& e) {
        throw IngestionError(what + ": " + e.what());
    }
}

/// Reads `timestamp,value` rows; stamps must already be strictly
/// increasing (reordering actuals silently would hide data problems).
inline ActualSeries read_actuals(const std::string& content, const std::string& what = "actuals") {
    const auto rows = detail::read_csv(content, actuals_header, 2, what);
    if (rows.empty()) throw IngestionError(what + ": no data rows");
    std::vector<std::int64_t> stamps;
    std::vector<double> values;
    stamps.reserve(rows.size());
    values.reserve(rows.size());
    for (const auto& row : rows) {
        const std::string where = what + " line " + std::to_string(row.line_no);
        const std::int64_t stamp = parse_timestamp(row.fields[0], where);
        if (!stamps.empty() && stamp <= stamps.back())
            throw IngestionError(where + ": timestamps must be strictly increasing (" +
                                 std::to_string(stamp) + " after " +
                                 std::to_string(stamps.back()) + ")");
        stamps.push_back(stamp);
        values.push_back(parse_double_field(row.fields[1], where));
    }
    try {
        return ActualSeries(TimeIndex(std::move(stamps)), std::move(values));
    } catch (const ParameterError& e) {
        throw IngestionError(what + ": " + e.what());
    }
}

inline std::string write_forecasts(const ForecastPanel& panel) {
    std::string out(forecasts_header);
    out += '\n';
    for (std::size_t n = 0; n < panel.models(); ++n)
        for (std::size_t t = 0; t < panel.steps(); ++t)
            for (std::size_t k = 0; k < panel.grid().size(); ++k) {
                out += panel.model_ids()[n];
                out += ',';
                out += std::to_string(panel.time().stamps()[t]);
                out += ',';
                out += format_double(panel.grid().level(k));
                out += ',';
                out += format_double(panel.value(n, t, k));
                out += '\n';
            }
    return out;
}

inline std::string write_actuals(const ActualSeries& actuals) {
    std::string out(actuals_header);
    out += '\n';
    for (std::size_t t = 0; t < actuals.size(); ++t) {
        out += std::to_string(actuals.time().stamps()[t]);
        out += ',';
        out += format_double(actuals.value(t));
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Combined-forecast CSV (prediction output)
// ---------------------------------------------------------------------------

inline constexpr const char* combined_header = "timestamp,level,value";

inline std::string write_combined(const CombinedForecast& combined) {
    std::string out(combined_header);
    out += '\n';
    for (std::size_t t = 0; t < combined.time().size(); ++t)
        for (std::size_t k = 0; k < combined.grid().size(); ++k) {
            out += std::to_string(combined.time().stamps()[t]);
            out += ',';
            out += format_double(combined.grid().level(k));
            out += ',';
            out += format_double(combined.value(t, k));
            out += '\n';
        }
    return out;
}

// ---------------------------------------------------------------------------
// Weights files (JSON)
// ---------------------------------------------------------------------------

inline constexpr int weights_schema_version = 1;

inline std::string write_weights(const CombinationModel& model) {
    nlohmann::json j;
    j["schema_version"] = weights_schema_version;
    j["method"] = to_string(model.method);
    j["regressors"] = to_string(regressor_kind_of(model.method));
    j["constrained"] = is_constrained(model.method);
    j["model_ids"] = model.model_ids;
    j["grid"] = model.grid.levels();
    if (model.profile) {
        nlohmann::json levels = nlohmann::json::array();
        for (std::size_t k = 0; k < model.grid.size(); ++k) {
            nlohmann::json entry;
            entry["level"] = model.grid.level(k);
            entry["coefficients"] = model.profile->coefficients()[k];
            if (model.profile->intercepts()) entry["intercept"] = (*model.profile->intercepts())[k];
            levels.push_back(std::move(entry));
        }
        j["profile"] = nlohmann::json{{"levels", std::move(levels)}};
    } else {
        j["profile"] = nullptr;
    }
    j["diagnostics"] = {{"objective_per_level", model.diagnostics.objective_per_level},
                        {"iterations", model.diagnostics.iterations},
                        {"warnings", model.diagnostics.warnings}};
    return j.dump(2) + "\n";
}

inline CombinationModel read_weights(const std::string& content,
                                     const std::string& what = "weights") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(what + ": invalid JSON: " + e.what());
    }
    try {
        if (!j.is_object()) throw SchemaError(what + ": top level must be an object");
        if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
            j["schema_version"].get<int>() != weights_schema_version)
            throw SchemaError(what + ": unsupported schema_version (expected " +
                              std::to_string(weights_schema_version) + ")");

        CombinationModel model;
        model.method = parse_method(j.at("method").get<std::string>());
        if (j.contains("regressors") &&
            j["regressors"].get<std::string>() != to_string(regressor_kind_of(model.method)))
            throw SchemaError(what + ": regressors tag disagrees with method " +
                              to_string(model.method));
        if (j.contains("constrained") &&
            j["constrained"].get<bool>() != is_constrained(model.method))
            throw SchemaError(what + ": constrained flag disagrees with method " +
                              to_string(model.method));
        model.model_ids = j.at("model_ids").get<std::vector<std::string>>();
        model.grid = QuantileGrid(j.at("grid").get<std::vector<double>>());

        const auto& profile = j.at("profile");
        if (profile.is_null()) {
            if (has_profile(model.method))
                throw SchemaError(what + ": method " + to_string(model.method) +
                                  " requires a weight profile");
        } else {
            if (!has_profile(model.method))
                throw SchemaError(what + ": method " + to_string(model.method) +
                                  " does not take a weight profile");
            const auto& levels = profile.at("levels");
            if (!levels.is_array() || levels.size() != model.grid.size())
                throw SchemaError(what + ": profile must list one entry per grid level");
            std::vector<std::vector<double>> coefficients;
            std::vector<double> intercepts;
            std::size_t with_intercept = 0;
            for (std::size_t k = 0; k < levels.size(); ++k) {
                const auto& entry = levels[k];
                const double level = entry.at("level").get<double>();
                if (std::fabs(level - model.grid.level(k)) > 1e-12)
                    throw SchemaError(what + ": profile level order disagrees with grid at index " +
                                      std::to_string(k));
                coefficients.push_back(entry.at("coefficients").get<std::vector<double>>());
                if (entry.contains("intercept")) {
                    ++with_intercept;
                    intercepts.push_back(entry["intercept"].get<double>());
                }
            }
            if (with_intercept != 0 && with_intercept != levels.size())
                throw SchemaError(what + ": intercepts must appear on all levels or none");
            std::optional<std::vector<double>> maybe_intercepts;
            if (with_intercept == levels.size()) maybe_intercepts = std::move(intercepts);
            try {
                model.profile = WeightProfile(model.method, regressor_kind_of(model.method),
                                              is_constrained(model.method), model.model_ids,
                                              model.grid, std::move(coefficients),
                                              std::move(maybe_intercepts));
            } catch (const ParameterError& e) {
                throw SchemaError(what + ": invalid profile: " + e.what());
            }
        }
        if (j.contains("diagnostics")) {
            const auto& d = j["diagnostics"];
            if (d.contains("objective_per_level"))
                model.diagnostics.objective_per_level =
                    d["objective_per_level"].get<std::vector<double>>();
            if (d.contains("iterations")) model.diagnostics.iterations = d["iterations"].get<long>();
            if (d.contains("warnings"))
                model.diagnostics.warnings = d["warnings"].get<std::vector<std::string>>();
        }
        return model;
    } catch (const SchemaError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(what + ": " + e.what());
    } catch (const ParameterError& e) {
        // Bad method names or grids inside a weights file are schema
        // violations, not caller errors.
        throw SchemaError(what + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Report, improvement, and crossing tables
// ---------------------------------------------------------------------------

inline constexpr const char* report_header = "method,series,pinball";
inline constexpr const char* improvements_header = "method,series,improvement_vs_bi_pct";
inline constexpr const char* crossings_header = "method,crossed_steps,total_steps";

struct ReportRow {
    std::string method;
    std::string series;
    double pinball = 0.0;
};

inline std::size_t method_rank(const std::string& method) {
    const auto& order = report_order();
    for (std::size_t i = 0; i < order.size(); ++i)
        if (to_string(order[i]) == method) return i;
    if (method == to_string(MethodTag::CQRA_SHARED)) return order.size();
    return order.size() + 1;
}

/// Rows are stably ordered by the fixed method rank; ties (several
/// series under one method) keep their insertion order.
inline std::string write_report(std::vector<ReportRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return method_rank(a.method) < method_rank(b.method);
    });
    std::string out(report_header);
    out += '\n';
    for (const auto& row : rows) {
        out += row.method;
        out += ',';
        out += row.series;
        out += ',';
        out += format_report(row.pinball);
        out += '\n';
    }
    return out;
}

inline std::vector<ReportRow> read_report(const std::string& content,
                                          const std::string& what = "report") {
    const auto rows = detail::read_csv(content, report_header, 3, what);
    std::vector<ReportRow> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        const std::string where = what + " line " + std::to_string(row.line_no);
        out.push_back({row.fields[0], row.fields[1], parse_double_field(row.fields[2], where)});
    }
    return out;
}

struct ImprovementRow {
    std::string method;
    std::string series;
    double improvement_vs_bi_pct = 0.0;
};

inline std::string write_improvements(std::vector<ImprovementRow> rows) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ImprovementRow& a, const ImprovementRow& b) {
                         return method_rank(a.method) < method_rank(b.method);
                     });
    std::string out(improvements_header);
    out += '\n';
    for (const auto& row : rows) {
        out += row.method;
        out += ',';
        out += row.series;
        out += ',';
        out += format_report(row.improvement_vs_bi_pct);
        out += '\n';
    }
    return out;
}

struct CrossingRow {
    std::string method;
    std::size_t crossed_steps = 0;
    std::size_t total_steps = 0;
};

inline std::string write_crossings(std::vector<CrossingRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const CrossingRow& a, const CrossingRow& b) {
        return method_rank(a.method) < method_rank(b.method);
    });
    std::string out(crossings_header);
    out += '\n';
    for (const auto& row : rows) {
        out += row.method;
        out += ',';
        out += std::to_string(row.crossed_steps);
        out += ',';
        out += std::to_string(row.total_steps);
        out += '\n';
    }
    return out;
}

} // namespace qcomb::io
