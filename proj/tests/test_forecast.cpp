#include <gtest/gtest.h>

#include "aqf/forecast.hpp"
#include "support/synthetic.hpp"

using namespace aqf;

namespace {

std::vector<CountrySeries> synthetic_series(std::size_t countries = 8, std::size_t days = 25) {
    synth::Options o;
    o.countries = countries;
    o.days = days;
    return group_by_country(clean(parse_csv_text(synth::csv(o))).first);
}

LeaderboardRow cls_row(std::string name, double cv, double f1, double acc) {
    LeaderboardRow r;
    r.name = std::move(name);
    r.cv.mean = cv;
    ClassificationScores s;
    s.f1 = f1;
    s.accuracy = acc;
    r.classification = s;
    return r;
}

LeaderboardRow reg_row(std::string name, double cv, double mse, double r2) {
    LeaderboardRow r;
    r.name = std::move(name);
    r.cv.mean = cv;
    r.regression = RegressionScores{mse, r2, 0.0, false};
    return r;
}

}  // namespace

TEST(Round1, IdenticalSpecsGiveIdenticalRows) {
    const auto data = build_supervised(synthetic_series(), Task::regression);
    const auto spec = ModelSpec::make(Family::random_forest, Task::regression, 3, {{"n_trees", 8}});
    const auto rows = round1(data, {spec, spec}, kfold(data.rows(), 5, 1));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].cv.fold_scores, rows[1].cv.fold_scores);
    EXPECT_EQ(rows[0].regression->mse, rows[1].regression->mse);
    const auto again = round1(data, {spec, spec}, kfold(data.rows(), 5, 1), {3});
    EXPECT_EQ(again[0].cv.fold_scores, rows[0].cv.fold_scores);
}

TEST(Round1, FailingSpecIsAnnotatedAndSortedLast) {
    auto data = build_supervised(synthetic_series(), Task::regression);
    for (std::size_t i = 0; i < data.rows(); ++i) data.x(i, 1) = 2 * data.x(i, 0);  // collinear
    const auto rows = round1(data,
                             {ModelSpec::make(Family::ols, Task::regression), ModelSpec::make(Family::cart, Task::regression),
                              ModelSpec::make(Family::ridge, Task::regression)},
                             kfold(data.rows(), 5, 2));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_TRUE(rows[0].ok());
    EXPECT_TRUE(rows[1].ok());
    EXPECT_FALSE(rows[2].ok());
    EXPECT_EQ(rows[2].spec.family, Family::ols);
    EXPECT_GE(rows[0].cv.mean, rows[1].cv.mean);
    EXPECT_EQ(rows[select_best(rows)].name, rows[0].name);
    EXPECT_THROW(round1(data, {ModelSpec::make(Family::cart, Task::regression)}, kfold(data.rows(), 5, 2)), SchemaError);
}

TEST(Round1, CartOverfitsOnTrainingData) {
    const auto data = build_supervised(synthetic_series(12, 30), Task::regression);
    const auto rows = round1(data, {ModelSpec::make(Family::cart, Task::regression), ModelSpec::make(Family::ols, Task::regression)},
                             kfold(data.rows(), 5, 3));
    for (const auto& r : rows)
        if (r.spec.family == Family::cart) {
            EXPECT_GT(r.regression->r2, 0.999);
            EXPECT_LT(r.cv.mean, r.regression->r2 - 0.1);
        }
}

TEST(SelectBest, TieBreaks) {
    // within 0.005 of the best cv counts as a tie; higher F1 wins
    std::vector<LeaderboardRow> c{cls_row("svc", 0.892, 0.86, 0.90), cls_row("rf", 0.889, 1.0, 1.0),
                                  cls_row("knn", 0.85, 1.0, 1.0)};
    EXPECT_EQ(select_best(c), 1u);
    c[1].cv.mean = 0.88;
    EXPECT_EQ(select_best(c), 0u);
    std::vector<LeaderboardRow> f{cls_row("a", 0.9, 0.8, 0.7), cls_row("b", 0.9, 0.8, 0.75)};
    EXPECT_EQ(select_best(f), 1u);
    std::vector<LeaderboardRow> same{cls_row("a", 0.9, 0.8, 0.7), cls_row("b", 0.9, 0.8, 0.7)};
    EXPECT_EQ(select_best(same), 0u);

    std::vector<LeaderboardRow> r{reg_row("gbt", 0.39, 0.02, 0.8), reg_row("rf", 0.38, 0.0067, 0.91),
                                  reg_row("cart", -0.25, 0.0, 1.0)};
    EXPECT_EQ(select_best(r), 0u);  // cv first
    r[1].cv.mean = 0.387;
    EXPECT_EQ(select_best(r), 1u);
    std::vector<LeaderboardRow> m{reg_row("a", 0.5, 0.1, 0.6), reg_row("b", 0.5, 0.1, 0.7)};
    EXPECT_EQ(select_best(m), 1u);
}

TEST(SelectBest, SingleAndFailedRows) {
    std::vector<LeaderboardRow> one{reg_row("only", -3.0, 1.0, 0.0)};
    EXPECT_EQ(select_best(one), 0u);
    std::vector<LeaderboardRow> rows{reg_row("broken", 0.9, 0.0, 1.0), reg_row("fine", 0.1, 1.0, 0.1)};
    rows[0].error = "singular";
    EXPECT_EQ(select_best(rows), 1u);
    rows[1].error = "singular";
    EXPECT_THROW(select_best(rows), InsufficientDataError);
}

TEST(Round2, ExactModelGivesZeroNrmseAndPerfectMcc) {
    const auto series = synthetic_series();
    const auto reg = build_supervised(series, Task::regression);
    const auto r = round2(fit(ModelSpec::make(Family::cart, Task::regression), reg), reg);
    ASSERT_TRUE(r.nrmse);
    EXPECT_EQ(r.nrmse->countries.size(), 8u);
    for (const auto& c : r.nrmse->countries) EXPECT_EQ(c.nrmse, 0.0);
    EXPECT_EQ(r.nrmse->above_count, 0u);

    const auto cls = build_supervised(series, Task::classification);
    const auto c = round2(fit(ModelSpec::make(Family::cart, Task::classification), cls), cls);
    ASSERT_TRUE(c.mcc);
    EXPECT_TRUE(c.classification->confusion.is_diagonal());
    EXPECT_DOUBLE_EQ(c.mcc->value, 1.0);
    EXPECT_FALSE(c.nrmse);
}

TEST(CompareBoards, SameFamilyAndSelectedBest) {
    std::vector<LeaderboardRow> reg{reg_row("gbt", 0.39, 0.02, 0.8), reg_row("rf", 0.38, 0.0067, 0.91)};
    reg[0].spec = ModelSpec::make(Family::gbt_preset_b, Task::regression);
    reg[1].spec = ModelSpec::make(Family::random_forest, Task::regression);
    std::vector<LeaderboardRow> cls{cls_row("rf", 0.89, 1.0, 1.0)};
    cls[0].spec = ModelSpec::make(Family::random_forest, Task::classification);
    const auto cmp = compare_boards(reg, cls);
    ASSERT_EQ(cmp.size(), 2u);
    EXPECT_EQ(cmp[0].framing, "same_family");
    EXPECT_NEAR(cmp[0].absolute_delta, 0.51, 1e-12);
    EXPECT_NEAR(cmp[0].relative_delta, 0.51 / 0.38, 1e-12);
    EXPECT_EQ(cmp[1].framing, "selected_best");
    EXPECT_EQ(cmp[1].regression_model, "gbt");
    EXPECT_NEAR(cmp[1].absolute_delta, 0.5, 1e-12);
}

TEST(Projection, HoldoutWithheldAndScenarioDates) {
    const auto series = synthetic_series();
    const std::string country = synth::country_name(2);
    for (auto task : {Task::regression, Task::classification}) {
        const auto spec = ModelSpec::make(Family::random_forest, task, 5, {{"n_trees", 10}});
        const auto p = project_next_day(spec, series, country);
        const auto* cs = find_country(series, country);
        EXPECT_TRUE(p.holdout_excluded_from_training);
        EXPECT_EQ(p.holdout_date, cs->last_date());
        EXPECT_EQ(p.holdout_feature_date, cs->last_date() + (-1));
        EXPECT_EQ(p.scenario_feature_date, cs->last_date());
        EXPECT_EQ(p.scenario_date, cs->last_date() + 1);
        // every country loses exactly its final pair
        EXPECT_EQ(p.training_rows, build_supervised(series, task).rows() - series.size());
        ASSERT_GE(p.series.size(), 3u);
        EXPECT_EQ(p.series[p.series.size() - 2].kind, "holdout");
        EXPECT_EQ(p.series.back().kind, "scenario");
        EXPECT_FALSE(p.series.back().actual);
        std::size_t total = 0;
        for (auto [cls, n] : p.class_counts) total += n;
        EXPECT_EQ(total, cs->records.size());
        if (task == Task::classification) {
            EXPECT_EQ(p.holdout_predicted_band, BandMap{}.decode(static_cast<int>(p.holdout_prediction)));
        }
    }
}

TEST(Projection, ConstantCountryPredictsConstant) {
    auto series = synthetic_series(1, 10);
    for (auto& r : series[0].records) r[Feature::aqi] = 4;
    for (auto f : {Family::cart, Family::random_forest, Family::gbt_preset_a}) {
        const auto p = project_next_day(ModelSpec::make(f, Task::regression, 1, f == Family::random_forest ? Hyperparameters{{"n_trees", 5}} : Hyperparameters{}),
                                        series, series[0].country);
        EXPECT_NEAR(p.scenario_prediction, 4.0, 1e-9) << family_name(f);
        EXPECT_NEAR(p.holdout_prediction, 4.0, 1e-9) << family_name(f);
        EXPECT_EQ(p.scenario_band, "Moderate");
    }
}

TEST(Projection, InsufficientRecords) {
    auto series = synthetic_series(3, 10);
    series[1].records.resize(2);
    const auto spec = ModelSpec::make(Family::cart, Task::regression);
    EXPECT_THROW(project_next_day(spec, series, series[1].country), InsufficientDataError);
    EXPECT_THROW(project_next_day(spec, series, "Atlantis"), InsufficientDataError);
    series[2].records.erase(series[2].records.end() - 2);  // gap before the final day
    EXPECT_THROW(project_next_day(spec, series, series[2].country), InsufficientDataError);
    EXPECT_NO_THROW(project_next_day(spec, series, series[0].country));
}
