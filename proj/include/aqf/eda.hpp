#pragma once

// Exploratory analysis: record clustering, per-cluster index frequency and
// the feature correlation matrix.

#include <array>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "aqf/core.hpp"
#include "aqf/ingest.hpp"
#include "aqf/scaler.hpp"

namespace aqf {

inline Matrix feature_matrix(const std::vector<CleanRecord>& records) {
    Matrix m(records.size(), kFeatureCount);
    for (std::size_t r = 0; r < records.size(); ++r)
        std::copy(records[r].values.begin(), records[r].values.end(), m.row(r).begin());
    return m;
}

struct Standardized {
    Matrix matrix;
    ScalerParams params;
};

inline Standardized standardize(const Matrix& x) {
    if (x.rows() < 2) throw InsufficientDataError("standardize needs at least 2 rows");
    auto params = ScalerParams::fit(x);
    return {params.transform(x), std::move(params)};
}

inline Standardized standardize(const std::vector<CleanRecord>& records) {
    return standardize(feature_matrix(records));
}

// ---------------------------------------------------------------- k-means

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// k-means++ seeding: first centre uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen centre.
inline Matrix kmeanspp_init(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = x.rows();
    Matrix centres(k, x.cols());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    auto first = pick(rng);
    std::copy(x.row(first).begin(), x.row(first).end(), centres.row(0).begin());
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(x.row(i), centres.row(c - 1)));
            total += nearest[i];
        }
        std::size_t chosen = 0;
        if (total <= 0.0) {
            chosen = pick(rng);  // all points coincide with a centre
        } else {
            double target = unit(rng) * total;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= nearest[i];
                if (target < 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        std::copy(x.row(chosen).begin(), x.row(chosen).end(), centres.row(c).begin());
    }
    return centres;
}

/// Nearest centre per row (ties to the lower centre index).
inline std::vector<std::size_t> assign_clusters(const Matrix& x, const Matrix& centres) {
    std::vector<std::size_t> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centres.rows(); ++c) {
            const double d = squared_distance(x.row(i), centres.row(c));
            if (d < best) {
                best = d;
                out[i] = c;
            }
        }
    }
    return out;
}

/// Centroid update; an empty cluster keeps its previous centre.
inline Matrix update_centres(const Matrix& x, const std::vector<std::size_t>& assignment, const Matrix& previous) {
    Matrix sums(previous.rows(), x.cols());
    std::vector<std::size_t> counts(previous.rows(), 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        ++counts[assignment[i]];
        for (std::size_t j = 0; j < x.cols(); ++j) sums(assignment[i], j) += x(i, j);
    }
    Matrix out = previous;
    for (std::size_t c = 0; c < previous.rows(); ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t j = 0; j < x.cols(); ++j) out(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
    return out;
}

inline double inertia(const Matrix& x, const std::vector<std::size_t>& assignment, const Matrix& centres) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) s += squared_distance(x.row(i), centres.row(assignment[i]));
    return s;
}

struct KMeansOptions {
    std::size_t restarts = 10;
    std::size_t max_iterations = 300;
    std::uint64_t seed = 42;
    unsigned workers = 1;
};

struct KMeansResult {
    std::vector<std::size_t> assignments;
    Matrix centres;
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::size_t best_restart = 0;
    /// Inertia after every Lloyd iteration of the winning restart.
    std::vector<double> inertia_history;
};

/// One Lloyd run from k-means++ seeding. Stops when assignments are stable.
inline KMeansResult kmeans_single(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t max_iterations = 300) {
    std::mt19937_64 rng(seed);
    KMeansResult res;
    res.centres = kmeanspp_init(x, k, rng);
    res.assignments = assign_clusters(x, res.centres);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        res.centres = update_centres(x, res.assignments, res.centres);
        res.inertia_history.push_back(inertia(x, res.assignments, res.centres));
        ++res.iterations;
        auto next = assign_clusters(x, res.centres);
        if (next == res.assignments) break;
        res.assignments = std::move(next);
    }
    res.inertia = inertia(x, res.assignments, res.centres);
    return res;
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by inertia
/// (lowest restart index on ties). Restart r uses seed + r.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, const KMeansOptions& opt = {}) {
    if (k < 1) throw SchemaError("kmeans: k must be >= 1");
    if (x.rows() < k) throw InsufficientDataError("kmeans: fewer rows than clusters");
    const std::size_t runs = std::max<std::size_t>(1, opt.restarts);
    std::vector<KMeansResult> results(runs);
    parallel_for(runs, opt.workers, [&](std::size_t r) {
        results[r] = kmeans_single(x, k, opt.seed + r, opt.max_iterations);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs; ++r)
        if (results[r].inertia < results[best].inertia) best = r;
    results[best].best_restart = best;
    return std::move(results[best]);
}

// ----------------------------------------------------- cluster summaries

struct ClusterSummary {
    std::vector<std::size_t> assignments;
    std::array<std::set<std::string>, 2> countries;
    std::set<std::string> difference_countries;
    /// counts[cluster][aqi - 1] for index values 1..10
    std::array<std::array<std::size_t, 10>, 2> aqi_frequency{};
    /// frequency of the index over records of difference countries
    std::array<std::size_t, 10> difference_frequency{};
    std::array<std::array<double, kFeatureCount>, 2> feature_means{};
    std::array<std::size_t, 2> record_counts{};
    std::size_t distinct_countries = 0;
};

/// Relabels a 2-cluster assignment so that the second cluster (id 1) holds
/// the lower mean pm2_5 (cleaner air) and builds the country sets and
/// frequency tables.
/// "Difference" countries are those present in only one cluster.
inline ClusterSummary summarize_clusters(const std::vector<std::size_t>& assignments,
                                         const std::vector<CleanRecord>& records) {
    if (assignments.size() != records.size())
        throw SchemaError("summarize_clusters: assignment count does not match records");
    std::array<double, 2> pm_sum{};
    std::array<std::size_t, 2> count{};
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (assignments[i] > 1) throw SchemaError("summarize_clusters: expects cluster ids 0 and 1");
        pm_sum[assignments[i]] += records[i][Feature::pm2_5];
        ++count[assignments[i]];
    }
    auto mean_pm = [&](std::size_t c) { return count[c] ? pm_sum[c] / static_cast<double>(count[c]) : 0.0; };
    const bool swap = mean_pm(0) < mean_pm(1);  // id 0 must be the more polluted cluster

    ClusterSummary s;
    s.assignments.resize(assignments.size());
    std::set<std::string> all;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::size_t c = swap ? 1 - assignments[i] : assignments[i];
        s.assignments[i] = c;
        s.countries[c].insert(records[i].country);
        all.insert(records[i].country);
        ++s.record_counts[c];
        for (std::size_t f = 0; f < kFeatureCount; ++f) s.feature_means[c][f] += records[i].values[f];
        const int aqi = records[i].aqi();
        if (aqi >= 1 && aqi <= 10) ++s.aqi_frequency[c][static_cast<std::size_t>(aqi - 1)];
    }
    for (std::size_t c = 0; c < 2; ++c)
        for (auto& m : s.feature_means[c])
            if (s.record_counts[c]) m /= static_cast<double>(s.record_counts[c]);
    for (const auto& name : all)
        if (s.countries[0].count(name) + s.countries[1].count(name) == 1) s.difference_countries.insert(name);
    for (const auto& r : records) {
        const int aqi = r.aqi();
        if (aqi >= 1 && aqi <= 10 && s.difference_countries.count(r.country))
            ++s.difference_frequency[static_cast<std::size_t>(aqi - 1)];
    }
    s.distinct_countries = all.size();
    return s;
}

// ------------------------------------------------------------ correlation

struct CorrMatrix {
    std::vector<std::string> labels;
    Matrix values;
    /// Columns with zero variance; their off-diagonal correlations are 0.
    std::vector<std::string> constant_columns;

    double at(std::string_view a, std::string_view b) const {
        std::size_t ia = labels.size(), ib = labels.size();
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == a) ia = i;
            if (labels[i] == b) ib = i;
        }
        if (ia == labels.size() || ib == labels.size()) throw SchemaError("unknown correlation label");
        return values(ia, ib);
    }
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline CorrMatrix pearson_matrix(const Matrix& x, std::vector<std::string> labels) {
    if (x.rows() < 2) throw InsufficientDataError("pearson_matrix needs at least 2 rows");
    const std::size_t d = x.cols();
    CorrMatrix out{std::move(labels), Matrix(d, d), {}};
    std::vector<std::vector<double>> cols(d);
    std::vector<bool> constant(d);
    for (std::size_t c = 0; c < d; ++c) {
        cols[c] = x.column(c);
        auto [lo, hi] = std::minmax_element(cols[c].begin(), cols[c].end());
        constant[c] = *lo == *hi;
        if (constant[c]) out.constant_columns.push_back(out.labels[c]);
    }
    for (std::size_t a = 0; a < d; ++a) {
        out.values(a, a) = 1.0;
        for (std::size_t b = a + 1; b < d; ++b) {
            const double r = (constant[a] || constant[b]) ? 0.0 : pearson(cols[a], cols[b]);
            out.values(a, b) = out.values(b, a) = r;
        }
    }
    return out;
}

/// Correlations over the 19 record fields. The index column doubles as the
/// target, so target-vs-feature coefficients are read off its row.
inline CorrMatrix pearson_matrix(const std::vector<CleanRecord>& records) {
    std::vector<std::string> labels(kFeatureColumns.begin(), kFeatureColumns.end());
    return pearson_matrix(feature_matrix(records), std::move(labels));
}

}  // namespace aqf
