#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "aqf/metrics.hpp"
#include "support/oracles.hpp"

using namespace aqf;

namespace {

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::vector<RowKey> keys_for(const std::vector<std::string>& countries) {
    std::vector<RowKey> k;
    for (std::size_t i = 0; i < countries.size(); ++i) k.push_back({countries[i], Date(static_cast<std::int64_t>(i))});
    return k;
}

}  // namespace

TEST(RegressionScores, HandExamples) {
    const std::vector<double> y{1, 2, 3}, flat{2, 2, 2};
    auto s = regression_scores(y, flat);
    EXPECT_NEAR(s.mse, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.r2, 0.0, 1e-15);
    EXPECT_NEAR(s.mean_residual, 0.0, 1e-15);
    s = regression_scores(y, y);
    EXPECT_EQ(s.mse, 0.0);
    EXPECT_EQ(s.r2, 1.0);
    EXPECT_EQ(s.mean_residual, 0.0);
    s = regression_scores(flat, y);
    EXPECT_TRUE(s.r2_undefined);
    EXPECT_EQ(s.r2, 0.0);
    EXPECT_THROW(regression_scores(y, std::vector<double>{1, 2}), SchemaError);
    EXPECT_THROW(regression_scores(std::vector<double>{}, std::vector<double>{}), InsufficientDataError);
}

TEST(ClassificationScores, HandExample) {
    const auto s = classification_scores(std::vector<double>{0, 0, 1}, std::vector<double>{0, 1, 1}, 2);
    EXPECT_DOUBLE_EQ(s.per_class[0].precision, 1.0);
    EXPECT_DOUBLE_EQ(s.per_class[0].recall, 0.5);
    EXPECT_DOUBLE_EQ(s.per_class[1].precision, 0.5);
    EXPECT_DOUBLE_EQ(s.per_class[1].recall, 1.0);
    EXPECT_DOUBLE_EQ(s.accuracy, 2.0 / 3.0);
    EXPECT_EQ(s.confusion.at(1, 0), 1u);
}

TEST(ClassificationScores, AbsentClassIsFlagged) {
    const auto s = classification_scores(std::vector<double>{0, 0, 0}, std::vector<double>{0, 1, 0}, 3);
    EXPECT_EQ(s.per_class[1].precision, 0.0);
    EXPECT_TRUE(s.per_class[1].recall_undefined);
    EXPECT_FALSE(s.per_class[1].precision_undefined);
    EXPECT_TRUE(s.per_class[2].precision_undefined);
    EXPECT_EQ(s.per_class[2].precision, 0.0);
    EXPECT_THROW(classification_scores(std::vector<double>{0, 3}, std::vector<double>{0, 0}, 3), SchemaError);
}

TEST(ClassificationScores, MatchesOracleAndIdentities) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        const int k = 2 + t % 4;
        const std::size_t n = 1 + rng() % 12;
        std::vector<int> truth(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng() % k);
            pred[i] = rng() % 3 ? truth[i] : static_cast<int>(rng() % k);
        }
        const auto s = classification_scores(as_double(truth), as_double(pred), k);
        const auto o = oracle::per_class(truth, pred, k);
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += truth[i] == pred[i];
        acc /= static_cast<double>(n);
        EXPECT_NEAR(s.accuracy, acc, 1e-12);
        EXPECT_NEAR(s.recall, s.accuracy, 1e-12);
        EXPECT_EQ(s.confusion.total(), n);
        for (int c = 0; c < k; ++c) {
            EXPECT_NEAR(s.per_class[c].precision, o[c].precision, 1e-9);
            EXPECT_NEAR(s.per_class[c].recall, o[c].recall, 1e-9);
            EXPECT_NEAR(s.per_class[c].f1, o[c].f1, 1e-9);
            EXPECT_EQ(s.per_class[c].support, static_cast<std::size_t>(o[c].support));
            EXPECT_EQ(s.confusion.support(c), static_cast<std::size_t>(o[c].support));
        }
    }
}

TEST(Mcc, HandExamples) {
    ConfusionMatrix diag(3);
    diag.at(0, 0) = 4;
    diag.at(1, 1) = 2;
    diag.at(2, 2) = 7;
    EXPECT_DOUBLE_EQ(mcc(diag).value, 1.0);
    ConfusionMatrix bin(2);  // class 1 positive
    bin.at(1, 1) = 2;
    bin.at(0, 0) = 2;
    bin.at(1, 0) = 1;
    bin.at(0, 1) = 1;
    EXPECT_NEAR(mcc(bin).value, 1.0 / 3.0, 1e-15);
    ConfusionMatrix one(2);
    one.at(0, 0) = 5;
    EXPECT_TRUE(mcc(one).undefined);
    EXPECT_EQ(mcc(one).value, 0.0);
    EXPECT_THROW(mcc(ConfusionMatrix(2)), InsufficientDataError);
}

TEST(Mcc, MatchesOracle) {
    std::mt19937_64 rng(5);
    int checked = 0;
    for (int t = 0; t < 300; ++t) {
        const int k = 2 + t % 4;
        const std::size_t n = 2 + rng() % 11;
        std::vector<int> truth(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng() % k);
            pred[i] = rng() % 2 ? truth[i] : static_cast<int>(rng() % k);
        }
        const auto cm = ConfusionMatrix::build(as_double(truth), as_double(pred), k);
        EXPECT_NEAR(mcc(cm).value, oracle::mcc(truth, pred, k), 1e-9);
        checked += !mcc(cm).undefined;
    }
    EXPECT_GE(checked, 100);
}

TEST(Mcc, PermutationInvariant) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 50; ++t) {
        const std::size_t k = 4;
        ConfusionMatrix cm(k), permuted(k);
        for (auto& c : cm.counts) c = rng() % 20;
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t q = 0; q < k; ++q) permuted.at(perm[p], perm[q]) = cm.at(p, q);
        EXPECT_NEAR(mcc(cm).value, mcc(permuted).value, 1e-12);
    }
}

TEST(Mcc, RandomPredictionsNearZero) {
    std::mt19937_64 rng(21);
    std::vector<double> truth(10000), pred(10000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = static_cast<double>(i % 4);
        pred[i] = static_cast<double>(rng() % 4);
    }
    EXPECT_LT(std::abs(mcc(ConfusionMatrix::build(truth, pred, 4)).value), 0.1);
}

TEST(Nrmse, HandExample) {
    const std::vector<double> y{2, 2}, yhat{3, 1};
    const auto keys = keys_for({"A", "A"});
    const auto s = nrmse_by_country(y, yhat, keys);
    ASSERT_EQ(s.countries.size(), 1u);
    EXPECT_DOUBLE_EQ(s.countries[0].rmse, 1.0);
    EXPECT_DOUBLE_EQ(s.countries[0].normalizer, 2.0);
    EXPECT_DOUBLE_EQ(s.countries[0].nrmse, 0.5);
    EXPECT_TRUE(s.countries[0].above_threshold);
    EXPECT_EQ(s.above_count, 1u);
}

TEST(Nrmse, ExactPredictionsAndFallbacks) {
    const std::vector<double> y{1, 4, 0, 0, 5, 5};
    const auto keys = keys_for({"A", "A", "B", "B", "C", "C"});
    auto s = nrmse_by_country(y, y, keys);
    for (const auto& c : s.countries) EXPECT_EQ(c.nrmse, 0.0);
    EXPECT_EQ(s.mean_nrmse, 0.0);
    s = nrmse_by_country(y, std::vector<double>{1, 4, 1, 1, 5, 5}, keys);
    EXPECT_TRUE(s.countries[1].degenerate);
    EXPECT_EQ(s.countries[1].nrmse, 0.0);
    EXPECT_EQ(s.countries[2].nrmse_range, 0.0);
}

TEST(Nrmse, MatchesDirectComputation) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.5, 10);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng() % 11;
        std::vector<double> y(n), yhat(n);
        std::vector<std::string> c(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = u(rng);
            yhat[i] = y[i] + u(rng) - 5;
            c[i] = std::string(1, static_cast<char>('A' + rng() % 3));
        }
        const auto s = nrmse_by_country(y, yhat, keys_for(c), 0.1);
        double total = 0;
        for (const auto& cs : s.countries) {
            double se = 0, sum = 0;
            int m = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (c[i] == cs.country) {
                    se += (y[i] - yhat[i]) * (y[i] - yhat[i]);
                    sum += y[i];
                    ++m;
                }
            const double expect = std::sqrt(se / m) / (sum / m);
            EXPECT_NEAR(cs.nrmse, expect, 1e-9);
            EXPECT_EQ(cs.above_threshold, cs.nrmse > 0.1);
            total += expect;
        }
        EXPECT_NEAR(s.mean_nrmse, total / s.countries.size(), 1e-9);
    }
}

TEST(CrossVal, MeanPredictorScoresNearZero) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z(0, 1);
    SupervisedDataset d;
    d.task = Task::regression;
    d.x = Matrix(500, 1);
    d.feature_names = {"f0"};
    for (std::size_t i = 0; i < 500; ++i) {
        d.x(i, 0) = z(rng);
        d.y.push_back(z(rng));
        d.row_keys.push_back({"A", Date(static_cast<std::int64_t>(i))});
    }
    const auto plan = kfold(500, 5, 3);
    const auto cv = cross_val_with(d, plan, [](const SupervisedDataset& train, const Matrix& test_x) {
        return std::vector<double>(test_x.rows(), mean(train.y));
    });
    ASSERT_EQ(cv.fold_scores.size(), 5u);
    EXPECT_LT(cv.mean, 0.0);
    EXPECT_GT(cv.mean, -0.05);
}

TEST(CrossVal, ReproducibleWithSameSeed) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z(0, 1);
    SupervisedDataset d;
    d.task = Task::regression;
    d.x = Matrix(100, 3);
    d.feature_names = {"a", "b", "c"};
    for (std::size_t i = 0; i < 100; ++i) {
        for (std::size_t j = 0; j < 3; ++j) d.x(i, j) = z(rng);
        d.y.push_back(d.x(i, 0) + 0.1 * z(rng));
        d.row_keys.push_back({"A", Date(static_cast<std::int64_t>(i))});
    }
    const auto spec = ModelSpec::make(Family::random_forest, Task::regression, 4, {{"n_trees", 10}});
    const auto a = cross_val(spec, d, kfold(100, 5, 1), {1});
    const auto b = cross_val(spec, d, kfold(100, 5, 1), {3});
    EXPECT_EQ(a.fold_scores, b.fold_scores);
    EXPECT_GT(a.mean, 0.5);
    FoldPlan bad = kfold(100, 5, 1);
    bad.fold_of.pop_back();
    EXPECT_THROW(cross_val(spec, d, bad), SchemaError);
}
