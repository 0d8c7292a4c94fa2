#pragma once

// Pipeline configuration: a flat, typed `key = value` text format.
//
//   # comment
//   input = data/GlobalWeatherRepository.csv
//   task = both
//   exclude_feature = feels_like_celsius, visibility_km
//   hp.random_forest.n_trees = 200
//
// Every key is listed in PipelineConfig::set. Command-line flags are applied
// through the same setter after the file, so they obey the same validation.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aqf/core.hpp"
#include "aqf/dataset.hpp"
#include "aqf/ingest.hpp"
#include "aqf/models.hpp"

namespace aqf {

inline constexpr std::string_view kDefaultCountry = "Democratic Republic of Congo";

struct PipelineConfig {
    std::string input;
    std::string out = "out";
    std::vector<Task> tasks = {Task::regression, Task::classification};
    std::string country{kDefaultCountry};
    std::vector<std::string> exclude_features;
    BandMap band_map;

    std::uint64_t seed = 42;
    std::optional<std::uint64_t> seed_kmeans, seed_folds, seed_models, seed_explain;

    std::size_t kfold_k = 5;
    bool cv_time_blocked = false;
    double nrmse_threshold = 0.10;
    unsigned workers = 1;

    std::vector<std::string> explain_methods = {"permutation", "lime", "pdp"};
    std::size_t explain_repeats = 5;
    std::size_t lime_samples = 5000;
    std::size_t pdp_grid = 20;
    std::vector<std::string> pdp_features = {"air_quality_gb-defra-index", "air_quality_PM2.5", "air_quality_PM10",
                                             "pressure_mb"};

    Family model_regression = Family::random_forest;
    Family model_classification = Family::random_forest;
    std::map<Family, Hyperparameters> hp_overrides;

    std::uint64_t kmeans_seed() const { return seed_kmeans.value_or(seed); }
    std::uint64_t folds_seed() const { return seed_folds.value_or(seed); }
    std::uint64_t models_seed() const { return seed_models.value_or(seed); }
    std::uint64_t explain_seed() const { return seed_explain.value_or(seed); }

    Family model_for(Task t) const { return t == Task::regression ? model_regression : model_classification; }

    FeatureSelection selection() const { return FeatureSelection::excluding(exclude_features); }

    ModelSpec spec_for(Task t) const {
        auto it = hp_overrides.find(model_for(t));
        return ModelSpec::make(model_for(t), t, models_seed(), it == hp_overrides.end() ? Hyperparameters{} : it->second);
    }

    /// Applies one key. Throws SchemaError naming the key on any problem.
    void set(const std::string& key, const std::string& raw);

    /// Cross-field checks; call after all keys are applied.
    void validate() const;

    /// Canonical text of every field that can change an artifact's content
    /// (excludes `out` and `workers`).
    std::string canonical() const;

    /// 16 hex digits of FNV-1a over canonical().
    std::string hash() const;

    static PipelineConfig parse(std::string_view text, const std::string& source = "<config>");
    static PipelineConfig load(const std::string& path) { return parse(detail::read_file(path), path); }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!piece.empty()) out.emplace_back(piece);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_integer(const std::string& key, std::string_view v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size())
        throw SchemaError("config key '" + key + "': expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

inline double parse_real(const std::string& key, std::string_view v) {
    const auto d = parse_number(v);
    if (!d) throw SchemaError("config key '" + key + "': expected a number, got '" + std::string(v) + "'");
    return *d;
}

inline bool parse_bool(const std::string& key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw SchemaError("config key '" + key + "': expected true/false, got '" + std::string(v) + "'");
}

inline std::vector<Task> parse_tasks(std::string_view v) {
    if (v == "both") return {Task::regression, Task::classification};
    try {
        return {parse_task(v)};
    } catch (const Error&) {
        throw SchemaError("task must be regression, classification or both, got '" + std::string(v) + "'");
    }
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& raw) {
    const std::string_view v = detail::trim(raw);
    auto family_for_task = [&](Task t) {
        const Family f = parse_family(v);
        if (!family_supports(f, t))
            throw SchemaError("config key '" + key + "': " + std::string(v) + " does not support " +
                              std::string(task_name(t)));
        return f;
    };
    if (key == "input") input = v;
    else if (key == "out") out = v;
    else if (key == "task") tasks = detail::parse_tasks(v);
    else if (key == "country") country = v;
    else if (key == "exclude_feature") {
        for (auto& name : detail::split_list(v)) {
            if (!feature_index(name)) throw SchemaError("cannot exclude unknown feature '" + name + "'");
            if (std::find(exclude_features.begin(), exclude_features.end(), name) == exclude_features.end())
                exclude_features.push_back(name);
        }
    } else if (key == "band_map") band_map = BandMap::parse(v);
    else if (key == "seed") seed = detail::parse_integer<std::uint64_t>(key, v);
    else if (key == "seed.kmeans") seed_kmeans = detail::parse_integer<std::uint64_t>(key, v);
    else if (key == "seed.folds") seed_folds = detail::parse_integer<std::uint64_t>(key, v);
    else if (key == "seed.models") seed_models = detail::parse_integer<std::uint64_t>(key, v);
    else if (key == "seed.explain") seed_explain = detail::parse_integer<std::uint64_t>(key, v);
    else if (key == "kfold.k") kfold_k = detail::parse_integer<std::size_t>(key, v);
    else if (key == "cv.time_blocked") cv_time_blocked = detail::parse_bool(key, v);
    else if (key == "nrmse.threshold") nrmse_threshold = detail::parse_real(key, v);
    else if (key == "workers") workers = detail::parse_integer<unsigned>(key, v);
    else if (key == "explain.method") {
        explain_methods = v == "all" ? std::vector<std::string>{"permutation", "lime", "pdp"} : detail::split_list(v);
        for (const auto& m : explain_methods)
            if (m != "permutation" && m != "lime" && m != "pdp")
                throw SchemaError("explain.method must be lime, permutation, pdp or all, got '" + m + "'");
    } else if (key == "explain.repeats") explain_repeats = detail::parse_integer<std::size_t>(key, v);
    else if (key == "explain.lime_samples") lime_samples = detail::parse_integer<std::size_t>(key, v);
    else if (key == "explain.pdp_grid") pdp_grid = detail::parse_integer<std::size_t>(key, v);
    else if (key == "explain.pdp_features") pdp_features = detail::split_list(v);
    else if (key == "model.regression") model_regression = family_for_task(Task::regression);
    else if (key == "model.classification") model_classification = family_for_task(Task::classification);
    else if (key.rfind("hp.", 0) == 0) {
        const auto dot = key.find('.', 3);
        if (dot == std::string::npos) throw SchemaError("config key '" + key + "': expected hp.<family>.<name>");
        const Family f = parse_family(key.substr(3, dot - 3));
        const std::string name = key.substr(dot + 1);
        if (!default_hyperparameters(f).count(name))
            throw SchemaError("config key '" + key + "': unknown hyperparameter for " + std::string(family_name(f)));
        hp_overrides[f][name] = detail::parse_real(key, v);
        // range check through the spec validator
        auto overrides = hp_overrides[f];
        const Task t = family_supports(f, Task::regression) ? Task::regression : Task::classification;
        ModelSpec::make(f, t, 0, overrides);
    } else {
        throw SchemaError("unknown config key '" + key + "'");
    }
}

inline void PipelineConfig::validate() const {
    if (kfold_k < 2) throw SchemaError("kfold.k must be >= 2");
    if (!(nrmse_threshold > 0)) throw SchemaError("nrmse.threshold must be > 0");
    (void)FeatureSelection::excluding(exclude_features);
    if (explain_repeats < 1) throw SchemaError("explain.repeats must be >= 1");
    if (lime_samples < 10) throw SchemaError("explain.lime_samples must be >= 10");
    if (pdp_grid < 2) throw SchemaError("explain.pdp_grid must be >= 2");
    for (const auto& f : pdp_features)
        if (!feature_index(f) && f != kCategoryFeature) throw SchemaError("explain.pdp_features: unknown feature '" + f + "'");
    if (tasks.empty()) throw SchemaError("no task selected");
}

inline std::string PipelineConfig::canonical() const {
    std::ostringstream s;
    s << "input=" << input << '\n';
    s << "task=";
    for (auto t : tasks) s << task_name(t) << ';';
    s << "\ncountry=" << country << '\n';
    auto excluded = exclude_features;
    std::sort(excluded.begin(), excluded.end());
    s << "exclude_feature=";
    for (const auto& e : excluded) s << e << ';';
    s << "\nband_map=" << band_map.str() << '\n';
    s << "seed.kmeans=" << kmeans_seed() << "\nseed.folds=" << folds_seed() << "\nseed.models=" << models_seed()
      << "\nseed.explain=" << explain_seed() << '\n';
    s << "kfold.k=" << kfold_k << "\ncv.time_blocked=" << cv_time_blocked
      << "\nnrmse.threshold=" << format_double(nrmse_threshold) << '\n';
    s << "explain.method=";
    for (const auto& m : explain_methods) s << m << ';';
    s << "\nexplain.repeats=" << explain_repeats << "\nexplain.lime_samples=" << lime_samples
      << "\nexplain.pdp_grid=" << pdp_grid << "\nexplain.pdp_features=";
    for (const auto& f : pdp_features) s << f << ';';
    s << "\nmodel.regression=" << family_name(model_regression)
      << "\nmodel.classification=" << family_name(model_classification) << '\n';
    for (const auto& [family, hp] : hp_overrides)
        for (const auto& [k, v] : hp)
            if (default_hyperparameters(family).at(k) != v)
                s << "hp." << family_name(family) << '.' << k << '=' << format_double(v) << '\n';
    return s.str();
}

inline std::string PipelineConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
}

inline PipelineConfig PipelineConfig::parse(std::string_view text, const std::string& source) {
    PipelineConfig cfg;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw SchemaError(source + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key(detail::trim(line.substr(0, eq)));
        try {
            cfg.set(key, std::string(line.substr(eq + 1)));
        } catch (const SchemaError& e) {
            throw SchemaError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

}  // namespace aqf
