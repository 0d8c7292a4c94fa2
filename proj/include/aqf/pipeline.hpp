#pragma once

// Subcommand driver. Subcommands compose through the output directory:
// ingest writes the cleaned table and the dataset sidecar, every later
// stage reads them back. Data artifacts carry the config hash and seeds;
// wall-clock timestamps go only to run_metadata.json.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqf/config.hpp"
#include "aqf/eda.hpp"
#include "aqf/explain.hpp"
#include "aqf/forecast.hpp"
#include "aqf/ingest.hpp"
#include "aqf/metrics.hpp"
#include "aqf/models.hpp"

namespace aqf {

using nlohmann::json;

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"ingest", "eda", "train", "evaluate", "explain", "project", "report", "all"};
    return names;
}

inline constexpr std::string_view kSidecarName = "dataset.json";
inline constexpr std::string_view kCleanName = "clean.csv";

namespace report {

inline json provenance(const PipelineConfig& cfg) {
    return {{"config_hash", cfg.hash()},
            {"seeds",
             {{"global", cfg.seed},
              {"kmeans", cfg.kmeans_seed()},
              {"folds", cfg.folds_seed()},
              {"models", cfg.models_seed()},
              {"explain", cfg.explain_seed()}}}};
}

inline json approximations() {
    return json::array({
        "Gradient Boosting A/B rows use one generic gradient-boosted-tree learner with two presets "
        "(depth-limited and leaf-limited) in place of XGBoost and LightGBM",
        "Linear SVR/SVC rows use linear-kernel margin learners trained by subgradient descent in place of kernel SVMs",
    });
}

inline json to_json(const RegressionScores& s) {
    return {{"mse", s.mse}, {"r2", s.r2}, {"mean_residual", s.mean_residual}, {"r2_undefined", s.r2_undefined}};
}

inline json to_json(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
    json rows = json::array();
    for (std::size_t p = 0; p < cm.classes; ++p) {
        json row = json::array();
        for (std::size_t t = 0; t < cm.classes; ++t) row.push_back(cm.at(p, t));
        rows.push_back(row);
    }
    return {{"layout", "rows = predicted class, columns = true class"}, {"class_names", names}, {"counts", rows},
            {"diagonal", cm.is_diagonal()}};
}

inline json to_json(const ClassificationScores& s, const std::vector<std::string>& names) {
    json per = json::array();
    for (std::size_t k = 0; k < s.per_class.size(); ++k) {
        const auto& r = s.per_class[k];
        per.push_back({{"class", k},
                       {"name", k < names.size() ? names[k] : std::to_string(k)},
                       {"precision", r.precision},
                       {"recall", r.recall},
                       {"f1", r.f1},
                       {"support", r.support},
                       {"precision_undefined", r.precision_undefined},
                       {"recall_undefined", r.recall_undefined}});
    }
    return {{"accuracy", s.accuracy},   {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
            {"per_class", per},         {"confusion", to_json(s.confusion, names)}};
}

inline std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!out.empty() && out.back() != '_')
            out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

}  // namespace report

/// Output-directory context for one run.
class Pipeline {
public:
    Pipeline(PipelineConfig cfg, std::ostream& log = std::cerr) : cfg_(std::move(cfg)), log_(log) {}

    const PipelineConfig& config() const { return cfg_; }
    std::filesystem::path out_path(std::string_view name) const { return std::filesystem::path(cfg_.out) / name; }

    void ingest();
    void eda();
    void train();
    void evaluate();
    void explain();
    void project();
    void report();

    void run(const std::string& subcommand);

private:
    PipelineConfig cfg_;
    std::ostream& log_;
    std::optional<std::vector<CleanRecord>> records_;

    void write_text(std::string_view name, const std::string& text) const;
    void write_json(std::string_view name, json j) const;
    json read_json(std::string_view name, std::string_view producer) const;
    const std::vector<CleanRecord>& records();
    std::vector<CountrySeries> series() { return group_by_country(records()); }
    SupervisedDataset dataset(Task t) { return build_supervised(series(), t, cfg_.band_map, cfg_.selection()); }
    FoldPlan folds(const SupervisedDataset& d) const {
        return cfg_.cv_time_blocked ? kfold_time_blocked(d.row_keys, cfg_.kfold_k)
                                    : kfold(d.rows(), cfg_.kfold_k, cfg_.folds_seed());
    }
    FitOptions fit_options() const { return {cfg_.workers}; }
    void record_run(const std::string& subcommand, const std::string& started, const std::string& finished) const;
};

// ------------------------------------------------------------ plumbing

inline void Pipeline::write_text(std::string_view name, const std::string& text) const {
    std::filesystem::create_directories(cfg_.out);
    const auto path = out_path(name);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot write " + path.string());
    out << text;
    if (!out) throw SchemaError("failed writing " + path.string());
}

inline void Pipeline::write_json(std::string_view name, json j) const {
    j["provenance"] = report::provenance(cfg_);
    write_text(name, j.dump(2) + "\n");
}

inline json Pipeline::read_json(std::string_view name, std::string_view producer) const {
    const auto path = out_path(name);
    if (!std::filesystem::exists(path))
        throw SchemaError("missing " + path.string() + "; run `" + std::string(producer) + "` first");
    try {
        return json::parse(detail::read_file(path.string()));
    } catch (const json::exception& e) {
        throw SchemaError("malformed " + path.string() + ": " + e.what());
    }
}

inline const std::vector<CleanRecord>& Pipeline::records() {
    if (!records_) {
        const json sidecar = read_json(kSidecarName, "ingest");
        const auto path = out_path(kCleanName);
        if (!std::filesystem::exists(path)) throw SchemaError("missing " + path.string() + "; run `ingest` first");
        auto [recs, rep] = clean(parse_csv(path.string()));
        if (sidecar.value("record_count", std::size_t{0}) != recs.size())
            throw SchemaError("sidecar record count does not match " + path.string() + "; rerun `ingest`");
        records_ = std::move(recs);
    }
    return *records_;
}

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void Pipeline::record_run(const std::string& subcommand, const std::string& started,
                                 const std::string& finished) const {
    const auto path = out_path("run_metadata.json");
    json meta = json::object();
    if (std::filesystem::exists(path)) {
        try {
            meta = json::parse(detail::read_file(path.string()));
        } catch (const json::exception&) {
            meta = json::object();
        }
    }
    meta["runs"][subcommand] = {{"started", started}, {"finished", finished}, {"config_hash", cfg_.hash()},
                                {"workers", cfg_.workers}};
    std::filesystem::create_directories(cfg_.out);
    std::ofstream(path, std::ios::binary) << meta.dump(2) << "\n";
}

// ------------------------------------------------------------ subcommands

inline void Pipeline::ingest() {
    if (cfg_.input.empty()) throw SchemaError("no input file (set `input` or pass --input)");
    auto [recs, rep] = clean(parse_csv(cfg_.input));
    if (recs.empty()) throw InsufficientDataError("no usable rows in " + cfg_.input);
    write_text(kCleanName, write_clean_csv(recs));

    json schema = {{"input_row_count", rep.input_row_count},
                   {"dropped_row_count", rep.dropped_row_count},
                   {"duplicate_date_collapsed_count", rep.duplicate_date_collapsed_count},
                   {"record_count", rep.record_count},
                   {"country_count", rep.country_count},
                   {"missing_columns", rep.missing_columns},
                   {"warning_counters", rep.warning_counters}};
    write_json("schema_report.json", schema);

    const auto grouped = group_by_country(recs);
    Date first = recs.front().date, last = recs.front().date;
    for (const auto& r : recs) {
        first = std::min(first, r.date);
        last = std::max(last, r.date);
    }
    json tasks = json::object();
    for (auto t : {Task::regression, Task::classification}) {
        const auto d = build_supervised(grouped, t, cfg_.band_map, cfg_.selection());
        json entry = {{"rows", d.rows()},
                      {"feature_names", d.feature_names},
                      {"excluded_gap_count", d.excluded_gap_count},
                      {"clamped_index_count", d.clamped_index_count}};
        if (t == Task::classification) {
            std::vector<std::size_t> counts(d.class_count(), 0);
            for (double y : d.y) ++counts[static_cast<std::size_t>(y)];
            entry["class_names"] = d.class_names;
            entry["class_counts"] = counts;
        }
        tasks[std::string(task_name(t))] = entry;
    }
    json sidecar = {{"source", cfg_.input},
                    {"clean_table", kCleanName},
                    {"record_count", recs.size()},
                    {"country_count", grouped.size()},
                    {"first_date", first.str()},
                    {"last_date", last.str()},
                    {"band_map", cfg_.band_map.str()},
                    {"excluded_features", cfg_.exclude_features},
                    {"supervised", tasks}};
    write_json(kSidecarName, sidecar);
    records_ = std::move(recs);
    log_ << "ingest: " << records_->size() << " records, " << grouped.size() << " countries\n";
}

inline void Pipeline::eda() {
    const auto& recs = records();
    const auto st = standardize(recs);
    KMeansOptions opt;
    opt.seed = cfg_.kmeans_seed();
    opt.workers = cfg_.workers;
    const auto km = kmeans(st.matrix, 2, opt);
    const auto sum = summarize_clusters(km.assignments, recs);

    json clusters = json::array();
    for (std::size_t c = 0; c < 2; ++c) {
        json means = json::object();
        for (std::size_t f = 0; f < kFeatureCount; ++f) means[std::string(kFeatureColumns[f])] = sum.feature_means[c][f];
        clusters.push_back({{"label", "Cluster " + std::to_string(c + 1)},
                            {"record_count", sum.record_counts[c]},
                            {"country_count", sum.countries[c].size()},
                            {"countries", sum.countries[c]},
                            {"aqi_frequency", sum.aqi_frequency[c]},
                            {"feature_means", means}});
    }
    json out = {{"method", "k-means, k=2, k-means++ seeding, best of 10 restarts by inertia, standardized features"},
                {"inertia", km.inertia},
                {"iterations", km.iterations},
                {"best_restart", km.best_restart},
                {"distinct_countries", sum.distinct_countries},
                {"clusters", clusters},
                {"difference_countries", sum.difference_countries},
                {"difference_count", sum.difference_countries.size()},
                {"difference_aqi_frequency", sum.difference_frequency},
                {"note", "Cluster 2 is the cluster with the lower mean pm2_5 (cleaner air)"}};
    write_json("clusters.json", out);

    std::string freq = "aqi,cluster_1,cluster_2,difference\n";
    for (std::size_t i = 0; i < 10; ++i)
        freq += std::to_string(i + 1) + "," + std::to_string(sum.aqi_frequency[0][i]) + "," +
                std::to_string(sum.aqi_frequency[1][i]) + "," + std::to_string(sum.difference_frequency[i]) + "\n";
    write_text("aqi_frequency.csv", freq);

    const auto corr = pearson_matrix(recs);
    std::string csv = "feature";
    for (const auto& l : corr.labels) csv += "," + l;
    csv += "\n";
    json target = json::object();
    for (std::size_t i = 0; i < corr.labels.size(); ++i) {
        csv += corr.labels[i];
        for (std::size_t j = 0; j < corr.labels.size(); ++j) csv += "," + format_double(corr.values(i, j));
        csv += "\n";
        target[corr.labels[i]] = corr.at(kFeatureColumns[index_of(Feature::aqi)], corr.labels[i]);
    }
    write_text("correlation.csv", csv);
    write_json("correlation.json", {{"target", kFeatureColumns[index_of(Feature::aqi)]},
                                    {"target_correlation", target},
                                    {"constant_columns", corr.constant_columns}});
    log_ << "eda: clusters of " << sum.countries[0].size() << " and " << sum.countries[1].size() << " countries, "
         << sum.difference_countries.size() << " differences\n";
}

inline void Pipeline::train() {
    for (auto t : cfg_.tasks) {
        const auto d = dataset(t);
        const auto spec = cfg_.spec_for(t);
        const auto model = fit(spec, d, fit_options());
        json j = model_to_json(model);
        j["training_rows"] = d.rows();
        write_json("model_" + std::string(task_name(t)) + ".json", j);
        log_ << "train: " << task_name(t) << " " << spec.name() << " on " << d.rows() << " rows\n";
    }
}

inline void Pipeline::evaluate() {
    std::map<Task, std::vector<LeaderboardRow>> boards;
    for (auto t : cfg_.tasks) {
        const auto d = dataset(t);
        const auto plan = folds(d);
        const auto rows = round1(d, model_zoo(t, cfg_.models_seed(), cfg_.hp_overrides), plan, fit_options());
        const std::string tn(task_name(t));

        json jrows = json::array();
        std::string csv = "rank,model,family,cv_mean,fold_scores,";
        csv += t == Task::regression ? "train_mse,train_r2,error\n" : "train_accuracy,train_precision,train_recall,train_f1,error\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            json jr = {{"rank", i + 1},
                       {"model", r.name},
                       {"family", family_name(r.spec.family)},
                       {"hyperparameters", r.spec.hp},
                       {"cv_mean", r.cv.mean},
                       {"cv_fold_scores", r.cv.fold_scores},
                       {"error", r.error}};
            std::string folds_txt;
            for (double s : r.cv.fold_scores) folds_txt += (folds_txt.empty() ? "" : ";") + format_double(s);
            csv += std::to_string(i + 1) + "," + detail::csv_escape(r.name) + "," + std::string(family_name(r.spec.family)) +
                   "," + format_double(r.cv.mean) + "," + folds_txt + ",";
            if (r.regression) {
                jr["training"] = report::to_json(*r.regression);
                csv += format_double(r.regression->mse) + "," + format_double(r.regression->r2);
            } else if (r.classification) {
                jr["training"] = report::to_json(*r.classification, d.class_names);
                csv += format_double(r.classification->accuracy) + "," + format_double(r.classification->precision) +
                       "," + format_double(r.classification->recall) + "," + format_double(r.classification->f1);
            } else {
                csv += t == Task::regression ? "," : ",,,";
            }
            csv += "," + detail::csv_escape(r.error) + "\n";
            jrows.push_back(jr);
        }
        const std::size_t best = select_best(rows);
        json lb = {{"task", tn},
                   {"score", t == Task::regression ? "r2" : "accuracy"},
                   {"folds", {{"k", plan.k}, {"time_blocked", plan.time_blocked}, {"sizes", plan.fold_sizes()}}},
                   {"rows", jrows},
                   {"selected", rows[best].name},
                   {"tie_tolerance", kCvTieTolerance},
                   {"approximations", report::approximations()}};
        if (!plan.time_blocked)
            lb["leakage_note"] =
                "shuffled k-fold mixes dates across folds, so neighbouring days of one country can sit on both "
                "sides of a split; set cv.time_blocked = true for date-ordered folds";
        write_json("leaderboard_" + tn + ".json", lb);
        write_text("leaderboard_" + tn + ".csv", csv);

        const auto model = fit(rows[best].spec, d, fit_options());
        const auto r2 = round2(model, d, cfg_.nrmse_threshold, cfg_.workers);
        json j2 = {{"task", tn}, {"model", r2.model_name}, {"rows", d.rows()}};
        if (r2.regression) {
            j2["training"] = report::to_json(*r2.regression);
            json countries = json::array();
            for (const auto& c : r2.nrmse->countries)
                countries.push_back({{"country", c.country},
                                     {"rows", c.rows},
                                     {"rmse", c.rmse},
                                     {"mean_observed", c.mean_observed},
                                     {"range_observed", c.range_observed},
                                     {"nrmse", c.nrmse},
                                     {"nrmse_range", c.nrmse_range},
                                     {"degenerate", c.degenerate},
                                     {"above_threshold", c.above_threshold}});
            j2["nrmse"] = {{"normalizer", "country mean of the observed index"},
                           {"threshold", r2.nrmse->threshold},
                           {"mean_nrmse", r2.nrmse->mean_nrmse},
                           {"above_threshold_count", r2.nrmse->above_count},
                           {"country_count", r2.nrmse->countries.size()},
                           {"countries", countries}};
        } else {
            j2["training"] = report::to_json(*r2.classification, d.class_names);
            j2["mcc"] = {{"value", r2.mcc->value}, {"undefined", r2.mcc->undefined}};
        }
        write_json("round2_" + tn + ".json", j2);
        log_ << "evaluate: " << tn << " best " << rows[best].name << " cv " << rows[best].cv.mean << "\n";
        boards[t] = rows;
    }
    if (boards.size() == 2) {
        json cmp = json::array();
        for (const auto& c : compare_boards(boards[Task::regression], boards[Task::classification]))
            cmp.push_back({{"framing", c.framing},
                           {"regression_model", c.regression_model},
                           {"classification_model", c.classification_model},
                           {"regression_cv", c.regression_cv},
                           {"classification_cv", c.classification_cv},
                           {"absolute_delta", c.absolute_delta},
                           {"relative_delta", c.relative_delta}});
        write_json("comparison.json",
                   {{"comparisons", cmp},
                    {"note", "cv scores differ in kind (R^2 vs accuracy); deltas are reported, not interpreted"}});
    }
}

inline void Pipeline::explain() {
    for (auto t : cfg_.tasks) {
        const std::string tn(task_name(t));
        const TrainedModel model = [&] {
            try {
                return model_from_json(read_json("model_" + tn + ".json", "train"));
            } catch (const json::exception& e) {
                throw SchemaError(std::string("malformed model file: ") + e.what());
            }
        }();
        const auto d = dataset(t);
        if (model.feature_names != d.feature_names)
            throw SchemaError("model_" + tn + ".json was trained on different features; rerun `train`");
        const auto has = [&](const char* m) {
            return std::find(cfg_.explain_methods.begin(), cfg_.explain_methods.end(), m) != cfg_.explain_methods.end();
        };
        if (has("permutation")) {
            const auto table = permutation_importance(model, d.x, d.y, t == Task::regression ? Scorer::r2 : Scorer::accuracy,
                                                      cfg_.explain_repeats, cfg_.explain_seed(), cfg_.workers);
            std::string csv = "rank,feature,mean_drop,std_drop\n";
            for (std::size_t i = 0; i < table.entries.size(); ++i)
                csv += std::to_string(i + 1) + "," + table.entries[i].name + "," + format_double(table.entries[i].mean) +
                       "," + format_double(table.entries[i].std) + "\n";
            write_text("importance_" + tn + ".csv", csv);
            json jt = json::array();
            for (const auto& e : table.entries)
                jt.push_back({{"feature", e.name}, {"mean_drop", e.mean}, {"std_drop", e.std}, {"drops", e.drops}});
            write_json("importance_" + tn + ".json", {{"task", tn},
                                                      {"model", model.spec.name()},
                                                      {"scorer", table.scorer},
                                                      {"baseline", table.baseline},
                                                      {"repeats", table.repeats},
                                                      {"entries", jt}});
        }
        if (has("lime")) {
            const auto s = series();
            const auto* cs = find_country(s, cfg_.country);
            if (!cs) throw InsufficientDataError("country '" + cfg_.country + "' not in the data");
            const auto& rec = cs->records.back();
            const auto instance = feature_row(rec, t, cfg_.band_map, cfg_.selection());
            std::vector<double> scale(d.x.cols());
            for (std::size_t j = 0; j < d.x.cols(); ++j) scale[j] = stddev(d.x.column(j));
            LimeOptions lo;
            lo.n_samples = cfg_.lime_samples;
            lo.seed = cfg_.explain_seed();
            const auto ex = lime_explain(model, instance, scale, lo);
            json weights = json::array();
            for (std::size_t j = 0; j < ex.weights.size(); ++j)
                weights.push_back({{"feature", ex.feature_names[j]}, {"value", ex.instance[j]}, {"weight", ex.weights[j]}});
            json jl = {{"task", tn},
                       {"model", model.spec.name()},
                       {"country", cs->country},
                       {"instance_date", rec.date.str()},
                       {"n_samples", ex.n_samples},
                       {"kernel_width", ex.kernel_width},
                       {"intercept", ex.intercept},
                       {"local_prediction", ex.local_prediction},
                       {"model_output", ex.model_output},
                       {"degenerate", ex.degenerate},
                       {"weights", weights}};
            if (ex.target_class >= 0) {
                jl["target_class"] = ex.target_class;
                jl["target_class_name"] = model.class_names.at(static_cast<std::size_t>(ex.target_class));
            }
            write_json("lime_" + tn + ".json", jl);
        }
        if (has("pdp")) {
            for (const auto& fname : cfg_.pdp_features) {
                const auto it = std::find(d.feature_names.begin(), d.feature_names.end(), fname);
                if (it == d.feature_names.end()) continue;  // excluded or not part of this task
                const auto curve = pdp(model, d.x, static_cast<std::size_t>(it - d.feature_names.begin()),
                                       cfg_.pdp_grid, cfg_.workers);
                std::string csv = "grid";
                if (t == Task::regression) {
                    csv += ",prediction";
                } else {
                    for (const auto& c : model.class_names) csv += ",p_" + report::slug(c);
                }
                csv += "\n";
                for (std::size_t g = 0; g < curve.grid.size(); ++g) {
                    csv += format_double(curve.grid[g]);
                    for (std::size_t k = 0; k < curve.values.cols(); ++k) csv += "," + format_double(curve.values(g, k));
                    csv += "\n";
                }
                write_text("pdp_" + tn + "_" + report::slug(fname) + ".csv", csv);
            }
        }
        log_ << "explain: " << tn << " done\n";
    }
}

inline void Pipeline::project() {
    const auto s = series();
    json tasks = json::object();
    std::string country_name;
    for (auto t : cfg_.tasks) {
        const std::string tn(task_name(t));
        const auto r = project_next_day(cfg_.spec_for(t), s, cfg_.country, cfg_.band_map, cfg_.selection(), fit_options());
        country_name = r.country;
        json counts = json::object();
        for (const auto& [cls, n] : r.class_counts) counts[cfg_.band_map.decode(cls)] = n;
        tasks[tn] = {{"model", r.model_name},
                     {"training_rows", r.training_rows},
                     {"holdout_excluded_from_training", r.holdout_excluded_from_training},
                     {"holdout",
                      {{"feature_date", r.holdout_feature_date.str()},
                       {"date", r.holdout_date.str()},
                       {"prediction", r.holdout_prediction},
                       {"actual", r.holdout_actual},
                       {"predicted_band", r.holdout_predicted_band},
                       {"actual_band", r.holdout_actual_band}}},
                     {"scenario",
                      {{"feature_date", r.scenario_feature_date.str()},
                       {"date", r.scenario_date.str()},
                       {"prediction", r.scenario_prediction},
                       {"band", r.scenario_band}}},
                     {"observed_band_counts", counts}};
        std::string csv = "date,kind,actual,predicted\n";
        for (const auto& p : r.series)
            csv += p.date.str() + "," + p.kind + "," + (p.actual ? format_double(*p.actual) : "") + "," +
                   format_double(p.predicted) + "\n";
        write_text("projection_" + report::slug(r.country) + "_" + tn + "_series.csv", csv);
    }
    write_json("projection_" + report::slug(country_name) + ".json",
               {{"country", country_name},
                {"tasks", tasks},
                {"band_map", cfg_.band_map.str()},
                {"band_note", "bands follow the configured index map; under the default map index 3 is Low, not Moderate"}});
    log_ << "project: " << country_name << " done\n";
}

inline void Pipeline::report() {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::exists(cfg_.out))
        for (const auto& e : std::filesystem::directory_iterator(cfg_.out))
            if (e.path().extension() == ".json" && e.path().filename() != "summary.json" &&
                e.path().filename() != "run_metadata.json")
                files.push_back(e.path());
    if (files.empty()) throw SchemaError("nothing to report in " + cfg_.out + "; run `ingest` first");
    std::sort(files.begin(), files.end());
    json artifacts = json::object();
    for (const auto& f : files) {
        try {
            artifacts[f.filename().string()] = json::parse(detail::read_file(f.string()));
        } catch (const json::exception& e) {
            throw SchemaError("malformed " + f.string() + ": " + e.what());
        }
    }
    write_json("summary.json", {{"artifacts", artifacts}, {"config", cfg_.canonical()}});
    log_ << "report: bundled " << files.size() << " artifacts\n";
}

inline void Pipeline::run(const std::string& subcommand) {
    if (subcommand == "all") {
        for (const char* s : {"ingest", "eda", "train", "evaluate", "explain", "project", "report"}) run(s);
        return;
    }
    const std::string started = utc_now();
    if (subcommand == "ingest") ingest();
    else if (subcommand == "eda") eda();
    else if (subcommand == "train") train();
    else if (subcommand == "evaluate") evaluate();
    else if (subcommand == "explain") explain();
    else if (subcommand == "project") project();
    else if (subcommand == "report") report();
    else throw SchemaError("unknown subcommand '" + subcommand + "'");
    record_run(subcommand, started, utc_now());
}

/// Runs one subcommand and maps failures to exit codes (2 schema/config,
/// 3 insufficient data, 4 numeric or internal), with the message on `err`.
inline int run(const std::string& subcommand, const PipelineConfig& cfg, std::ostream& err = std::cerr) {
    try {
        cfg.validate();
        Pipeline p(cfg, err);
        p.run(subcommand);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace aqf
