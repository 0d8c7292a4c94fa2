#pragma once

// Parsing, validation and cleaning of World Weather Repository exports.

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "aqf/core.hpp"

namespace aqf {

/// The 19 model features in canonical order: 12 meteorological, the
/// current-day index, 6 pollutants.
enum class Feature : std::size_t {
    temperature_celsius,
    wind_mph,
    wind_degree,
    wind_direction,
    pressure_mb,
    precip_mm,
    humidity,
    cloud,
    feels_like_celsius,
    visibility_km,
    uv_index,
    gust_mph,
    aqi,
    co,
    ozone,
    no2,
    so2,
    pm2_5,
    pm10,
};

inline constexpr std::size_t kFeatureCount = 19;

/// Source column for each Feature, same order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureColumns = {
    "temperature_celsius",
    "wind_mph",
    "wind_degree",
    "wind_direction",
    "pressure_mb",
    "precip_mm",
    "humidity",
    "cloud",
    "feels_like_celsius",
    "visibility_km",
    "uv_index",
    "gust_mph",
    "air_quality_gb-defra-index",
    "air_quality_Carbon_Monoxide",
    "air_quality_Ozone",
    "air_quality_Nitrogen_dioxide",
    "air_quality_Sulphur_dioxide",
    "air_quality_PM2.5",
    "air_quality_PM10",
};

inline constexpr std::string_view kCountryColumn = "country";
inline constexpr std::string_view kTimestampColumn = "last_updated";

inline std::vector<std::string> required_columns() {
    std::vector<std::string> cols{std::string(kCountryColumn), std::string(kTimestampColumn)};
    for (auto c : kFeatureColumns) cols.emplace_back(c);
    return cols;
}

inline constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }

inline std::optional<std::size_t> feature_index(std::string_view column) {
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (kFeatureColumns[i] == column) return i;
    return std::nullopt;
}

/// 16-point compass, N = 0 clockwise to NNW = 15.
inline constexpr std::array<std::string_view, 16> kCompassPoints = {
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE",
    "S", "SSW", "SW", "WSW", "W", "WNW", "NW", "NNW",
};

inline std::optional<int> compass_ordinal(std::string_view s) {
    for (std::size_t i = 0; i < kCompassPoints.size(); ++i)
        if (kCompassPoints[i] == s) return static_cast<int>(i);
    return std::nullopt;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string source_path;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

namespace detail {

// Splits one CSV record starting at `pos`; handles quoted fields with
// embedded commas, doubled quotes and newlines.
inline std::vector<std::string> read_csv_record(std::string_view text, std::size_t& pos) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    bool at_cell_start = true;
    while (pos < text.size()) {
        const char c = text[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < text.size() && text[pos] == '"') {
                    cell.push_back('"');
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
            continue;
        }
        if (c == '"' && at_cell_start) {
            quoted = true;
            at_cell_start = false;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
            at_cell_start = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
            break;
        } else {
            cell.push_back(c);
            at_cell_start = false;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw SchemaError("read failure on '" + path + "'");
    return ss.str();
}

}  // namespace detail

/// Parses CSV text. Every data row must have the header's cell count.
inline RawTable parse_csv_text(std::string_view text, std::string source = "<memory>") {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    RawTable table;
    table.source_path = std::move(source);
    std::size_t pos = 0;
    while (pos < text.size() && (text[pos] == '\n' || text[pos] == '\r')) ++pos;
    if (pos >= text.size()) throw SchemaError("empty CSV file '" + table.source_path + "'");
    table.header = detail::read_csv_record(text, pos);
    for (auto& h : table.header) h = std::string(detail::trim(h));

    std::size_t row_index = 0;
    while (pos < text.size()) {
        const std::size_t start = pos;
        auto cells = detail::read_csv_record(text, pos);
        // blank lines only tolerated at the end of the file
        if (cells.size() == 1 && cells[0].empty()) {
            const auto rest = text.substr(start);
            if (rest.find_first_not_of("\r\n") == std::string_view::npos) break;
        }
        if (cells.size() != table.header.size()) {
            throw SchemaError("ragged row " + std::to_string(row_index) + " in '" + table.source_path +
                              "': expected " + std::to_string(table.header.size()) + " cells, got " +
                              std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
        ++row_index;
    }
    return table;
}

inline RawTable parse_csv(const std::string& path) {
    return parse_csv_text(detail::read_file(path), path);
}

struct CleanRecord {
    std::string country;
    Date date;
    /// Normalized "YYYY-MM-DD HH:MM" timestamp the date was taken from.
    std::string last_updated;
    std::array<double, kFeatureCount> values{};

    double operator[](Feature f) const { return values[index_of(f)]; }
    double& operator[](Feature f) { return values[index_of(f)]; }
    int aqi() const { return static_cast<int>(values[index_of(Feature::aqi)]); }
    int wind_direction_code() const { return static_cast<int>(values[index_of(Feature::wind_direction)]); }

    friend bool operator==(const CleanRecord&, const CleanRecord&) = default;
};

struct SchemaReport {
    std::vector<std::string> missing_columns;
    std::size_t input_row_count = 0;
    std::size_t dropped_row_count = 0;
    std::size_t duplicate_date_collapsed_count = 0;
    std::size_t record_count = 0;
    std::size_t country_count = 0;
    std::map<std::string, std::size_t> warning_counters;
};

inline std::vector<std::string> missing_columns(const RawTable& raw) {
    std::vector<std::string> out;
    for (const auto& c : required_columns())
        if (!raw.column(c)) out.push_back(c);
    return out;
}

struct Timestamp {
    Date date;
    int minute_of_day = 0;
    std::string normalized;
};

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM" and "YYYY-MM-DD HH:MM:SS"
/// (space or 'T' separator). Seconds are dropped.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    s = detail::trim(s);
    if (s.size() < 10) return std::nullopt;
    Timestamp ts;
    try {
        ts.date = Date::parse(s.substr(0, 10));
    } catch (const SchemaError&) {
        return std::nullopt;
    }
    auto rest = s.substr(10);
    int hh = 0, mm = 0;
    if (!rest.empty()) {
        if ((rest[0] != ' ' && rest[0] != 'T') || rest.size() < 6 || rest[3] != ':') return std::nullopt;
        auto num2 = [](std::string_view p, int& out) {
            auto [e, ec] = std::from_chars(p.data(), p.data() + 2, out);
            return ec == std::errc{} && e == p.data() + 2;
        };
        if (!num2(rest.substr(1, 2), hh) || !num2(rest.substr(4, 2), mm)) return std::nullopt;
        if (hh > 23 || mm > 59) return std::nullopt;
        auto tail = rest.substr(6);
        if (!tail.empty()) {
            int sec = 0;
            if (tail.size() != 3 || tail[0] != ':' || !num2(tail.substr(1, 2), sec) || sec > 59) return std::nullopt;
        }
    }
    ts.minute_of_day = hh * 60 + mm;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d:%02d", hh, mm);
    ts.normalized = ts.date.str() + " " + buf;
    return ts;
}

/// Validates rows and converts them into typed records. Rows with an
/// unparseable, missing or out-of-range required cell are dropped; no value
/// is ever imputed. Several rows for one (country, date) collapse onto the
/// row with the latest timestamp (later file position breaks exact ties).
/// Output is sorted by (country, date).
inline std::pair<std::vector<CleanRecord>, SchemaReport> clean(const RawTable& raw) {
    SchemaReport report;
    report.missing_columns = missing_columns(raw);
    if (!report.missing_columns.empty()) {
        std::string names;
        for (const auto& c : report.missing_columns) names += (names.empty() ? "" : ", ") + c;
        throw SchemaError("missing required column(s): " + names);
    }
    report.input_row_count = raw.rows.size();

    const std::size_t country_col = *raw.column(kCountryColumn);
    const std::size_t ts_col = *raw.column(kTimestampColumn);
    std::array<std::size_t, kFeatureCount> feature_cols{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) feature_cols[i] = *raw.column(kFeatureColumns[i]);

    auto drop = [&](const char* reason) {
        ++report.dropped_row_count;
        ++report.warning_counters[reason];
    };

    struct Slot {
        CleanRecord record;
        int minute = 0;
    };
    std::map<std::pair<std::string, std::int64_t>, Slot> by_key;

    for (const auto& row : raw.rows) {
        CleanRecord rec;
        rec.country = std::string(detail::trim(row[country_col]));
        if (rec.country.empty()) {
            drop("dropped_missing_country");
            continue;
        }
        auto ts = parse_timestamp(row[ts_col]);
        if (!ts) {
            drop("dropped_bad_timestamp");
            continue;
        }
        rec.date = ts->date;
        rec.last_updated = ts->normalized;

        bool ok = true;
        const char* reason = nullptr;
        for (std::size_t i = 0; i < kFeatureCount && ok; ++i) {
            const auto cell = detail::trim(row[feature_cols[i]]);
            if (static_cast<Feature>(i) == Feature::wind_direction) {
                auto code = compass_ordinal(cell);
                if (!code) {
                    ok = false;
                    reason = cell.empty() ? "dropped_missing_value" : "dropped_unknown_wind_direction";
                } else {
                    rec.values[i] = *code;
                }
                continue;
            }
            auto v = detail::parse_number(cell);
            if (!v) {
                ok = false;
                reason = cell.empty() ? "dropped_missing_value" : "dropped_unparseable_value";
                continue;
            }
            rec.values[i] = *v;
        }
        if (!ok) {
            drop(reason);
            continue;
        }

        const double aqi = rec[Feature::aqi];
        if (aqi != std::floor(aqi) || aqi < 0 || aqi > 10) {
            drop("dropped_index_out_of_range");
            continue;
        }
        auto in_range = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
        if (!in_range(rec[Feature::humidity], 0, 100) || !in_range(rec[Feature::cloud], 0, 100) ||
            !in_range(rec[Feature::wind_degree], 0, 360) || rec[Feature::uv_index] < 0) {
            drop("dropped_out_of_range");
            continue;
        }

        auto key = std::make_pair(rec.country, rec.date.days());
        auto it = by_key.find(key);
        if (it == by_key.end()) {
            by_key.emplace(std::move(key), Slot{std::move(rec), ts->minute_of_day});
        } else {
            ++report.duplicate_date_collapsed_count;
            if (ts->minute_of_day >= it->second.minute) it->second = Slot{std::move(rec), ts->minute_of_day};
        }
    }

    std::vector<CleanRecord> records;
    records.reserve(by_key.size());
    std::size_t zero_index = 0;
    for (auto& [key, slot] : by_key) {
        if (slot.record.aqi() == 0) ++zero_index;
        records.push_back(std::move(slot.record));
    }
    if (zero_index > 0) report.warning_counters["index_zero"] = zero_index;
    report.record_count = records.size();
    std::size_t countries = 0;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (i == 0 || records[i].country != records[i - 1].country) ++countries;
    report.country_count = countries;
    return {std::move(records), std::move(report)};
}

/// Serializes records back into the input schema (required columns only).
inline std::string write_clean_csv(const std::vector<CleanRecord>& records) {
    std::string out;
    const auto cols = required_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += '\n';
    for (const auto& r : records) {
        out += detail::csv_escape(r.country);
        out += ',';
        out += r.last_updated.empty() ? r.date.str() + " 00:00" : r.last_updated;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            out += ',';
            if (static_cast<Feature>(i) == Feature::wind_direction)
                out += kCompassPoints.at(static_cast<std::size_t>(r.values[i]));
            else
                out += format_double(r.values[i]);
        }
        out += '\n';
    }
    return out;
}

struct CountrySeries {
    std::string country;
    std::vector<CleanRecord> records;

    Date first_date() const { return records.front().date; }
    Date last_date() const { return records.back().date; }
};

/// One series per country, lexicographic by name, each sorted by date.
/// Assumes (country, date) pairs are unique, which clean() guarantees.
inline std::vector<CountrySeries> group_by_country(std::vector<CleanRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const CleanRecord& a, const CleanRecord& b) {
        if (a.country != b.country) return a.country < b.country;
        return a.date < b.date;
    });
    std::vector<CountrySeries> out;
    for (auto& r : records) {
        if (out.empty() || out.back().country != r.country) out.push_back({r.country, {}});
        out.back().records.push_back(std::move(r));
    }
    return out;
}

inline const CountrySeries* find_country(const std::vector<CountrySeries>& series, std::string_view name) {
    for (const auto& s : series)
        if (s.country == name) return &s;
    return nullptr;
}

}  // namespace aqf
