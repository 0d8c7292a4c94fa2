#include <gtest/gtest.h>

#include <random>

#include "aqf/eda.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace aqf;

namespace {

std::vector<CleanRecord> synthetic_records(std::size_t countries = 10, std::size_t days = 20, std::uint64_t seed = 5) {
    synth::Options o;
    o.countries = countries;
    o.days = days;
    o.seed = seed;
    return clean(parse_csv_text(synth::csv(o))).first;
}

}  // namespace

TEST(Standardize, TwoPointColumn) {
    const auto s = standardize(Matrix::from_rows({{1.0}, {3.0}}));
    EXPECT_DOUBLE_EQ(s.matrix(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(s.matrix(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(s.params.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(s.params.std[0], 1.0);
}

TEST(Standardize, ConstantColumnPassesThrough) {
    const auto s = standardize(Matrix::from_rows({{5, 1}, {5, 2}, {5, 3}}));
    EXPECT_TRUE(s.params.constant[0]);
    EXPECT_FALSE(s.params.constant[1]);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(s.matrix(r, 0), 5.0);
}

TEST(Standardize, RandomMatrixHasZeroMeanUnitStd) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(3.0, 7.0);
    Matrix x(100, 19);
    for (std::size_t r = 0; r < 100; ++r)
        for (std::size_t c = 0; c < 19; ++c) x(r, c) = z(rng) * (c + 1);
    const auto s = standardize(x);
    for (std::size_t c = 0; c < 19; ++c) {
        const auto col = s.matrix.column(c);
        EXPECT_LT(std::abs(mean(col)), 1e-9);
        EXPECT_NEAR(stddev(col), 1.0, 1e-9);
    }
    EXPECT_THROW(standardize(Matrix(1, 3)), InsufficientDataError);
}

TEST(KMeans, WellSeparatedPairs) {
    const Matrix x = Matrix::from_rows({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
    const auto r = kmeans(x, 2);
    EXPECT_EQ(r.assignments[0], r.assignments[1]);
    EXPECT_EQ(r.assignments[2], r.assignments[3]);
    EXPECT_NE(r.assignments[0], r.assignments[2]);
    EXPECT_DOUBLE_EQ(r.inertia, 1.0);
}

TEST(KMeans, SingleClusterIsTheMean) {
    const Matrix x = Matrix::from_rows({{0, 0}, {2, 4}, {4, 2}});
    const auto r = kmeans(x, 1);
    EXPECT_DOUBLE_EQ(r.centres(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(r.centres(0, 1), 2.0);
    EXPECT_THROW(kmeans(x, 4), InsufficientDataError);
}

// Independent Lloyd loop from the same seeding; inertia must never rise and
// must match the library's per-iteration history.
TEST(KMeans, InertiaMonotoneAgainstStepOracle) {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> z(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 30 + trial, d = 3, k = 2 + trial % 3;
        Matrix x(n, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) x(i, j) = z(gen) + (i % k) * 2.0;
        const std::uint64_t seed = 100 + trial;
        const auto lib = kmeans_single(x, k, seed);

        std::mt19937_64 rng(seed);
        Matrix centres = kmeanspp_init(x, k, rng);
        std::vector<std::size_t> assign(n);
        auto reassign = [&] {
            std::vector<std::size_t> a(n);
            for (std::size_t i = 0; i < n; ++i) {
                double best = 1e300;
                for (std::size_t c = 0; c < k; ++c) {
                    double s = 0;
                    for (std::size_t j = 0; j < d; ++j) s += (x(i, j) - centres(c, j)) * (x(i, j) - centres(c, j));
                    if (s < best) best = s, a[i] = c;
                }
            }
            return a;
        };
        assign = reassign();
        double previous = 1e300;
        for (std::size_t it = 0; it < lib.inertia_history.size(); ++it) {
            for (std::size_t c = 0; c < k; ++c) {
                std::vector<double> sum(d, 0.0);
                std::size_t cnt = 0;
                for (std::size_t i = 0; i < n; ++i)
                    if (assign[i] == c) {
                        ++cnt;
                        for (std::size_t j = 0; j < d; ++j) sum[j] += x(i, j);
                    }
                if (cnt)
                    for (std::size_t j = 0; j < d; ++j) centres(c, j) = sum[j] / cnt;
            }
            double sse = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) sse += std::pow(x(i, j) - centres(assign[i], j), 2);
            EXPECT_NEAR(sse, lib.inertia_history[it], 1e-9 * std::max(1.0, sse));
            EXPECT_LE(sse, previous + 1e-9);
            previous = sse;
            assign = reassign();
        }
    }
}

TEST(KMeans, DeterministicGivenSeed) {
    const auto recs = synthetic_records();
    const auto s = standardize(recs);
    KMeansOptions o;
    o.workers = 3;
    const auto a = kmeans(s.matrix, 2, o);
    o.workers = 1;
    const auto b = kmeans(s.matrix, 2, o);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_EQ(a.inertia, b.inertia);
    EXPECT_EQ(a.centres, b.centres);
}

TEST(SummarizeClusters, SameCountryInBothClusters) {
    auto recs = synthetic_records(1, 2);
    const auto s = summarize_clusters({0, 1}, recs);
    EXPECT_EQ(s.countries[0].size(), 1u);
    EXPECT_EQ(s.countries[1].size(), 1u);
    EXPECT_TRUE(s.difference_countries.empty());
}

TEST(SummarizeClusters, AccountingIdentities) {
    const auto recs = synthetic_records(15, 25);
    const auto km = kmeans(standardize(recs).matrix, 2);
    const auto s = summarize_clusters(km.assignments, recs);
    for (std::size_t c = 0; c < 2; ++c) {
        std::size_t sum = 0;
        for (auto f : s.aqi_frequency[c]) sum += f;
        EXPECT_EQ(sum, s.record_counts[c]);  // synthetic indices are all in 1..10
    }
    std::set<std::string> all(s.countries[0]);
    all.insert(s.countries[1].begin(), s.countries[1].end());
    EXPECT_EQ(all.size(), s.distinct_countries);
    for (const auto& c : s.difference_countries) EXPECT_EQ(s.countries[0].count(c) + s.countries[1].count(c), 1u);
    EXPECT_GE(s.feature_means[0][index_of(Feature::pm2_5)], s.feature_means[1][index_of(Feature::pm2_5)]);
}

TEST(Pearson, HandValues) {
    EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 1, 2}), -0.5, 1e-12);
    std::vector<double> x{1, 2, 3, 4, 5}, y;
    for (double v : x) y.push_back(2 * v + 1);
    EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
}

TEST(Pearson, MatrixSymmetricUnitDiagonalAndConstantFlag) {
    auto recs = synthetic_records();
    for (auto& r : recs) r[Feature::uv_index] = 4;
    const auto m = pearson_matrix(recs);
    ASSERT_EQ(m.labels.size(), kFeatureCount);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        EXPECT_EQ(m.values(i, i), 1.0);
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            EXPECT_EQ(m.values(i, j), m.values(j, i));
            EXPECT_LE(std::abs(m.values(i, j)), 1.0);
        }
    }
    EXPECT_EQ(m.constant_columns, std::vector<std::string>{"uv_index"});
    EXPECT_EQ(m.at("uv_index", "pressure_mb"), 0.0);
    EXPECT_GT(m.at("air_quality_gb-defra-index", "air_quality_PM2.5"), 0.8);
}

TEST(Pearson, MatchesTextbookOracle) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z(0, 1);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 3 + t % 10;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = z(rng);
            y[i] = 0.5 * x[i] + z(rng);
        }
        EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-9);
    }
}
