#pragma once

// Lag-1 supervised datasets, index banding, scenario split and fold plans.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "aqf/core.hpp"
#include "aqf/ingest.hpp"

namespace aqf {

struct Band {
    std::string name;
    int lo = 0;
    int hi = 0;
};

/// Ordered index bands. Class integers follow alphabetical band-name order,
/// so the default DAQI map encodes High=0, Low=1, Moderate=2, Very High=3.
class BandMap {
public:
    BandMap() : BandMap(std::vector<Band>{{"Low", 1, 3}, {"Moderate", 4, 6}, {"High", 7, 9}, {"Very High", 10, 10}}) {}

    explicit BandMap(std::vector<Band> bands) : bands_(std::move(bands)) {
        if (bands_.empty()) throw SchemaError("band map is empty");
        int expect = 1;
        for (const auto& b : bands_) {
            if (b.name.empty()) throw SchemaError("band map: empty band name");
            if (b.lo != expect || b.hi < b.lo)
                throw SchemaError("band map must partition 1-10 in ascending ranges (problem at '" + b.name + "')");
            expect = b.hi + 1;
        }
        if (expect != 11) throw SchemaError("band map must cover 1-10");
        names_sorted_.reserve(bands_.size());
        for (const auto& b : bands_) names_sorted_.push_back(b.name);
        std::sort(names_sorted_.begin(), names_sorted_.end());
        if (std::adjacent_find(names_sorted_.begin(), names_sorted_.end()) != names_sorted_.end())
            throw SchemaError("band map: duplicate band name");
    }

    /// Parses "Low:1-3,Moderate:4-6,High:7-9,Very High:10".
    static BandMap parse(std::string_view text) {
        std::vector<Band> bands;
        while (!text.empty()) {
            auto comma = text.find(',');
            auto item = detail::trim(text.substr(0, comma));
            text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
            auto colon = item.rfind(':');
            if (colon == std::string_view::npos) throw SchemaError("band map entry '" + std::string(item) + "' lacks ':'");
            Band b;
            b.name = std::string(detail::trim(item.substr(0, colon)));
            auto range = detail::trim(item.substr(colon + 1));
            auto dash = range.find('-');
            auto lo = detail::parse_number(range.substr(0, dash));
            auto hi = dash == std::string_view::npos ? lo : detail::parse_number(range.substr(dash + 1));
            if (!lo || !hi) throw SchemaError("band map entry '" + std::string(item) + "' has a bad range");
            b.lo = static_cast<int>(*lo);
            b.hi = static_cast<int>(*hi);
            bands.push_back(std::move(b));
        }
        return BandMap(std::move(bands));
    }

    std::string str() const {
        std::string out;
        for (const auto& b : bands_) {
            if (!out.empty()) out += ',';
            out += b.name + ":" + std::to_string(b.lo);
            if (b.hi != b.lo) out += "-" + std::to_string(b.hi);
        }
        return out;
    }

    const std::vector<Band>& bands() const { return bands_; }
    std::size_t class_count() const { return bands_.size(); }

    int encode(std::string_view name) const {
        auto it = std::lower_bound(names_sorted_.begin(), names_sorted_.end(), name);
        if (it == names_sorted_.end() || *it != name) throw SchemaError("unknown band '" + std::string(name) + "'");
        return static_cast<int>(it - names_sorted_.begin());
    }

    const std::string& decode(int cls) const { return names_sorted_.at(static_cast<std::size_t>(cls)); }

    /// Class names indexed by class integer.
    const std::vector<std::string>& class_names() const { return names_sorted_; }

    friend bool operator==(const BandMap& a, const BandMap& b) { return a.str() == b.str(); }

private:
    std::vector<Band> bands_;
    std::vector<std::string> names_sorted_;
};

struct BandLookup {
    std::string name;
    int cls = 0;
    bool clamped = false;
};

/// Band of an index value. 0 is clamped to 1 and reported as clamped.
inline BandLookup band_of(int aqi, const BandMap& map) {
    if (aqi < 0 || aqi > 10) throw SchemaError("index " + std::to_string(aqi) + " outside 0-10");
    const bool clamped = aqi == 0;
    if (clamped) aqi = 1;
    for (const auto& b : map.bands())
        if (aqi >= b.lo && aqi <= b.hi) return {b.name, map.encode(b.name), clamped};
    throw SchemaError("index not covered by band map");  // unreachable for a valid map
}

/// Band for a continuous prediction, rounded to the nearest index and
/// clipped to 1-10.
inline BandLookup band_of_value(double value, const BandMap& map) {
    const int idx = static_cast<int>(std::clamp(std::lround(value), 1L, 10L));
    return band_of(idx, map);
}

inline constexpr std::string_view kCategoryFeature = "categories";

struct RowKey {
    std::string country;
    Date feature_date;

    Date target_date() const { return feature_date + 1; }
    friend bool operator==(const RowKey&, const RowKey&) = default;
    friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

struct SupervisedDataset {
    Matrix x;
    std::vector<double> y;
    std::vector<std::string> feature_names;
    std::vector<RowKey> row_keys;
    Task task = Task::regression;
    /// Class names by class integer (classification only).
    std::vector<std::string> class_names;
    std::size_t excluded_gap_count = 0;
    std::size_t clamped_index_count = 0;

    std::size_t rows() const { return y.size(); }
    std::size_t class_count() const { return class_names.size(); }

    SupervisedDataset subset(std::span<const std::size_t> idx) const {
        SupervisedDataset out;
        out.x = x.select_rows(idx);
        out.y = gather<double>(y, idx);
        out.row_keys = gather<RowKey>(row_keys, idx);
        out.feature_names = feature_names;
        out.task = task;
        out.class_names = class_names;
        return out;
    }
};

/// Which of the 19 record features feed the models (canonical order kept).
struct FeatureSelection {
    std::vector<std::size_t> indices;

    static FeatureSelection all() {
        FeatureSelection s;
        for (std::size_t i = 0; i < kFeatureCount; ++i) s.indices.push_back(i);
        return s;
    }

    static FeatureSelection excluding(const std::vector<std::string>& names) {
        for (const auto& n : names)
            if (!feature_index(n)) throw SchemaError("cannot exclude unknown feature '" + n + "'");
        FeatureSelection s;
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            if (std::find(names.begin(), names.end(), kFeatureColumns[i]) == names.end()) s.indices.push_back(i);
        if (s.indices.empty()) throw SchemaError("every feature excluded");
        return s;
    }
};

/// Feature vector for one day (class-of-day appended for classification).
inline std::vector<double> feature_row(const CleanRecord& rec, Task task, const BandMap& map,
                                       const FeatureSelection& sel) {
    std::vector<double> row;
    row.reserve(sel.indices.size() + 1);
    for (auto i : sel.indices) row.push_back(rec.values[i]);
    if (task == Task::classification) row.push_back(band_of(rec.aqi(), map).cls);
    return row;
}

inline std::vector<std::string> feature_names(Task task, const FeatureSelection& sel) {
    std::vector<std::string> names;
    for (auto i : sel.indices) names.emplace_back(kFeatureColumns[i]);
    if (task == Task::classification) names.emplace_back(kCategoryFeature);
    return names;
}

/// One row per consecutive-day pair within a country: features from day t,
/// target from day t+1. Pairs spanning a date gap are skipped and counted.
inline SupervisedDataset build_supervised(const std::vector<CountrySeries>& series, Task task,
                                          const BandMap& map = {},
                                          const FeatureSelection& sel = FeatureSelection::all()) {
    SupervisedDataset ds;
    ds.task = task;
    ds.feature_names = feature_names(task, sel);
    if (task == Task::classification) ds.class_names = map.class_names();

    std::vector<double> flat;
    for (const auto& s : series) {
        for (std::size_t i = 0; i + 1 < s.records.size(); ++i) {
            const auto& today = s.records[i];
            const auto& tomorrow = s.records[i + 1];
            if (tomorrow.date - today.date != 1) {
                ++ds.excluded_gap_count;
                continue;
            }
            auto row = feature_row(today, task, map, sel);
            flat.insert(flat.end(), row.begin(), row.end());
            if (task == Task::classification) {
                auto b = band_of(tomorrow.aqi(), map);
                ds.clamped_index_count += b.clamped;
                ds.y.push_back(b.cls);
            } else {
                ds.y.push_back(tomorrow.aqi());
            }
            ds.row_keys.push_back({s.country, today.date});
        }
    }
    if (ds.y.empty()) throw InsufficientDataError("no country has two consecutive dates");
    ds.x = Matrix(ds.y.size(), ds.feature_names.size(), std::move(flat));
    return ds;
}

struct ScenarioRow {
    std::string country;
    CleanRecord record;  // final observed day
    Date scenario_date() const { return record.date + 1; }
};

struct HoldoutPair {
    std::string country;
    CleanRecord features;  // day before the final day
    CleanRecord target;    // final day
};

struct ScenarioSplit {
    /// Every series with its final record removed, so no lag pair targets a
    /// country's final date.
    std::vector<CountrySeries> training;
    std::vector<ScenarioRow> scenario;
    std::vector<HoldoutPair> holdout;
};

inline ScenarioSplit split_scenario(const std::vector<CountrySeries>& series) {
    ScenarioSplit out;
    for (const auto& s : series) {
        if (s.records.size() < 2) continue;
        CountrySeries trimmed{s.country, {s.records.begin(), s.records.end() - 1}};
        out.scenario.push_back({s.country, s.records.back()});
        const auto& prev = s.records[s.records.size() - 2];
        if (s.records.back().date - prev.date == 1) out.holdout.push_back({s.country, prev, s.records.back()});
        out.training.push_back(std::move(trimmed));
    }
    return out;
}

struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> fold_of;
    std::uint64_t seed = 0;
    bool time_blocked = false;

    std::vector<std::size_t> test_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> fold_sizes() const {
        std::vector<std::size_t> sizes(k, 0);
        for (auto f : fold_of) ++sizes[f];
        return sizes;
    }
};

/// Shuffled k-fold: a seeded permutation dealt round-robin, so fold sizes
/// differ by at most one and the earlier folds take the remainder.
inline FoldPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw SchemaError("kfold: k must be >= 2");
    if (n < k) throw InsufficientDataError("kfold: fewer rows (" + std::to_string(n) + ") than folds");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    FoldPlan plan{k, std::vector<std::size_t>(n), seed, false};
    for (std::size_t pos = 0; pos < n; ++pos) plan.fold_of[perm[pos]] = pos % k;
    return plan;
}

/// Time-blocked folds: rows ordered by feature date (row index breaks
/// ties) and cut into k contiguous, near-equal blocks.
inline FoldPlan kfold_time_blocked(const std::vector<RowKey>& keys, std::size_t k) {
    const std::size_t n = keys.size();
    if (k < 2) throw SchemaError("kfold: k must be >= 2");
    if (n < k) throw InsufficientDataError("kfold: fewer rows than folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return keys[a].feature_date < keys[b].feature_date; });
    FoldPlan plan{k, std::vector<std::size_t>(n), 0, true};
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t j = 0; j < size; ++j) plan.fold_of[order[pos++]] = f;
    }
    return plan;
}

}  // namespace aqf
