#pragma once

// Two-round evaluation of the model zoo and next-day projection with a
// held-out validation day.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aqf/dataset.hpp"
#include "aqf/metrics.hpp"
#include "aqf/models.hpp"

namespace aqf {

struct LeaderboardRow {
    ModelSpec spec;
    std::string name;
    CvResult cv;
    std::optional<RegressionScores> regression;          // training-data fit
    std::optional<ClassificationScores> classification;  // training-data fit
    std::string error;                                   // non-empty when fitting failed

    bool ok() const { return error.empty(); }
};

/// Round 1: k-fold cv mean plus full-data training metrics for every spec.
/// A failing spec is annotated, not fatal. Rows come back ordered by cv
/// mean (descending, input order on ties), failed rows last.
inline std::vector<LeaderboardRow> round1(const SupervisedDataset& data, const std::vector<ModelSpec>& specs,
                                          const FoldPlan& plan, const FitOptions& opt = {}) {
    if (specs.size() < 2) throw SchemaError("round1 needs at least 2 model specs");
    std::vector<LeaderboardRow> rows;
    for (const auto& spec : specs) {
        LeaderboardRow row{spec, spec.name(), {}, std::nullopt, std::nullopt, {}};
        try {
            row.cv = cross_val(spec, data, plan, opt);
            const auto model = fit(spec, data, opt);
            const auto pred = model.predict(data.x, opt.workers);
            if (data.task == Task::regression)
                row.regression = regression_scores(data.y, pred);
            else
                row.classification = classification_scores(data.y, pred, data.class_count());
        } catch (const Error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.ok() != b.ok()) return a.ok();
        return a.cv.mean > b.cv.mean;
    });
    return rows;
}

/// Rows whose cv mean lies within this distance of the best count as tied
/// (the leaderboard is reported to two decimals).
inline constexpr double kCvTieTolerance = 0.005;

/// Highest cv mean; among near-ties prefer (classification) higher F1 then
/// accuracy, (regression) lower MSE then higher R^2, then earlier row.
inline std::size_t select_best(const std::vector<LeaderboardRow>& rows, double tie_tolerance = kCvTieTolerance) {
    std::optional<std::size_t> top;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].ok() && (!top || rows[i].cv.mean > rows[*top].cv.mean)) top = i;
    if (!top) throw InsufficientDataError("no successfully evaluated model to select");
    const double best_cv = rows[*top].cv.mean;
    auto better = [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.classification && b.classification) {
            if (a.classification->f1 != b.classification->f1) return a.classification->f1 > b.classification->f1;
            return a.classification->accuracy > b.classification->accuracy;
        }
        if (a.regression && b.regression) {
            if (a.regression->mse != b.regression->mse) return a.regression->mse < b.regression->mse;
            return a.regression->r2 > b.regression->r2;
        }
        return false;
    };
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].ok() || rows[i].cv.mean < best_cv - tie_tolerance) continue;
        if (!best || better(rows[i], rows[*best])) best = i;
    }
    return *best;
}

struct Round2Result {
    Task task = Task::regression;
    std::string model_name;
    std::optional<RegressionScores> regression;
    std::optional<NrmseSummary> nrmse;
    std::optional<ClassificationScores> classification;
    std::optional<MccResult> mcc;
};

/// Round 2: training-data diagnostics of the selected (already fitted) model.
inline Round2Result round2(const TrainedModel& model, const SupervisedDataset& data, double nrmse_threshold = 0.10,
                           unsigned workers = 1) {
    Round2Result r;
    r.task = data.task;
    r.model_name = model.spec.name();
    const auto pred = model.predict(data.x, workers);
    if (data.task == Task::regression) {
        r.regression = regression_scores(data.y, pred);
        r.nrmse = nrmse_by_country(data.y, pred, data.row_keys, nrmse_threshold);
    } else {
        r.classification = classification_scores(data.y, pred, data.class_count());
        r.mcc = mcc(r.classification->confusion);
    }
    return r;
}

struct TaskComparison {
    std::string framing;
    std::string regression_model;
    std::string classification_model;
    double regression_cv = 0.0;
    double classification_cv = 0.0;
    double absolute_delta = 0.0;
    double relative_delta = 0.0;  // delta / |regression cv|, 0 when that is 0
};

inline TaskComparison compare_tasks(std::string framing, const LeaderboardRow& reg, const LeaderboardRow& cls) {
    TaskComparison c;
    c.framing = std::move(framing);
    c.regression_model = reg.name;
    c.classification_model = cls.name;
    c.regression_cv = reg.cv.mean;
    c.classification_cv = cls.cv.mean;
    c.absolute_delta = c.classification_cv - c.regression_cv;
    c.relative_delta = c.regression_cv != 0 ? c.absolute_delta / std::abs(c.regression_cv) : 0.0;
    return c;
}

/// Same-family comparison (e.g. random forest on both tasks) and the
/// selected-best comparison, both computed from the given boards.
inline std::vector<TaskComparison> compare_boards(const std::vector<LeaderboardRow>& reg,
                                                  const std::vector<LeaderboardRow>& cls,
                                                  Family family = Family::random_forest) {
    std::vector<TaskComparison> out;
    auto find = [&](const std::vector<LeaderboardRow>& rows) -> const LeaderboardRow* {
        for (const auto& r : rows)
            if (r.spec.family == family && r.ok()) return &r;
        return nullptr;
    };
    if (auto a = find(reg), b = find(cls); a && b) out.push_back(compare_tasks("same_family", *a, *b));
    out.push_back(compare_tasks("selected_best", reg[select_best(reg)], cls[select_best(cls)]));
    return out;
}

// ----------------------------------------------------------- projection

struct SeriesPoint {
    Date date;  // date of the predicted (target) day
    std::optional<double> actual;
    double predicted = 0.0;
    std::string kind;  // "train", "holdout" or "scenario"
};

struct ProjectionResult {
    std::string country;
    Task task = Task::regression;
    std::string model_name;
    Date holdout_feature_date;
    Date holdout_date;
    double holdout_prediction = 0.0;
    double holdout_actual = 0.0;
    std::string holdout_predicted_band;
    std::string holdout_actual_band;
    Date scenario_feature_date;
    Date scenario_date;
    double scenario_prediction = 0.0;
    std::string scenario_band;
    /// Records of the country per class integer (all observed days).
    std::map<int, std::size_t> class_counts;
    std::size_t training_rows = 0;
    bool holdout_excluded_from_training = false;
    std::vector<SeriesPoint> series;
};

inline std::string band_for_prediction(double value, Task task, const BandMap& map) {
    return task == Task::regression ? band_of_value(value, map).name : map.decode(static_cast<int>(value));
}

/// Retrains on every country's lag pairs except each final pair, predicts
/// the country's withheld final day, then feeds the final day's features
/// to project the first unobserved day.
inline ProjectionResult project_next_day(const ModelSpec& spec, const std::vector<CountrySeries>& series,
                                         std::string_view country, const BandMap& map = {},
                                         const FeatureSelection& sel = FeatureSelection::all(),
                                         const FitOptions& opt = {}) {
    const CountrySeries* cs = find_country(series, country);
    if (!cs) throw InsufficientDataError("country '" + std::string(country) + "' not found");
    if (cs->records.size() < 3)
        throw InsufficientDataError("country '" + std::string(country) + "' needs at least 3 records for projection");
    const auto split = split_scenario(series);
    const HoldoutPair* hold = nullptr;
    for (const auto& h : split.holdout)
        if (h.country == country) hold = &h;
    if (!hold)
        throw InsufficientDataError("country '" + std::string(country) + "' has a date gap before its final record");

    const auto train = build_supervised(split.training, spec.task, map, sel);
    const auto model = fit(spec, train, opt);

    ProjectionResult r;
    r.country = cs->country;
    r.task = spec.task;
    r.model_name = spec.name();
    r.training_rows = train.rows();
    const RowKey holdout_key{cs->country, hold->features.date};
    r.holdout_excluded_from_training =
        std::find(train.row_keys.begin(), train.row_keys.end(), holdout_key) == train.row_keys.end();

    auto predict_row = [&](const CleanRecord& rec) { return model.predict_one(feature_row(rec, spec.task, map, sel)); };
    auto actual_of = [&](const CleanRecord& rec) {
        return spec.task == Task::regression ? static_cast<double>(rec.aqi())
                                             : static_cast<double>(band_of(rec.aqi(), map).cls);
    };

    r.holdout_feature_date = hold->features.date;
    r.holdout_date = hold->target.date;
    r.holdout_prediction = predict_row(hold->features);
    r.holdout_actual = actual_of(hold->target);
    r.holdout_predicted_band = band_for_prediction(r.holdout_prediction, spec.task, map);
    r.holdout_actual_band = band_of(hold->target.aqi(), map).name;

    const auto& last = cs->records.back();
    r.scenario_feature_date = last.date;
    r.scenario_date = last.date + 1;
    r.scenario_prediction = predict_row(last);
    r.scenario_band = band_for_prediction(r.scenario_prediction, spec.task, map);

    for (const auto& rec : cs->records) ++r.class_counts[band_of(rec.aqi(), map).cls];

    for (std::size_t i = 0; i + 2 < cs->records.size(); ++i) {
        const auto& a = cs->records[i];
        const auto& b = cs->records[i + 1];
        if (b.date - a.date != 1) continue;
        r.series.push_back({b.date, actual_of(b), predict_row(a), "train"});
    }
    r.series.push_back({r.holdout_date, r.holdout_actual, r.holdout_prediction, "holdout"});
    r.series.push_back({r.scenario_date, std::nullopt, r.scenario_prediction, "scenario"});
    return r;
}

}  // namespace aqf
