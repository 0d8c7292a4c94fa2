#pragma once

// Model-agnostic explanations: permutation importance, LIME local
// surrogates and one-way partial dependence.
//
// The generic entry points take a response function (const Matrix&) ->
// outputs, so any callable can be explained; the TrainedModel overloads
// pick the response and scorer that suit the model's task.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aqf/core.hpp"
#include "aqf/linalg.hpp"
#include "aqf/metrics.hpp"
#include "aqf/models.hpp"

namespace aqf {

// ------------------------------------------------- permutation importance

struct ImportanceEntry {
    std::size_t feature = 0;
    std::string name;
    double mean = 0.0;  // mean score drop over repeats
    double std = 0.0;   // population std of the drop
    std::vector<double> drops;
};

struct ImportanceTable {
    double baseline = 0.0;
    std::size_t repeats = 0;
    std::uint64_t seed = 0;
    std::string scorer;
    std::vector<ImportanceEntry> entries;  // descending mean, ties by feature index
};

/// For every feature and repeat: shuffle that column with a seeded
/// permutation, rescore, and record baseline - permuted score.
template <class Predict, class Score>
ImportanceTable permutation_importance(Predict&& predict, const Matrix& x, std::span<const double> y, Score&& score,
                                       std::size_t repeats, std::uint64_t seed,
                                       const std::vector<std::string>& names = {}, unsigned workers = 1) {
    if (repeats < 2) throw SchemaError("permutation importance needs repeats >= 2");
    if (y.size() != x.rows()) throw SchemaError("permutation importance: y does not match X");
    ImportanceTable out;
    out.repeats = repeats;
    out.seed = seed;
    out.baseline = score(y, predict(x));
    const std::size_t d = x.cols();
    out.entries.resize(d);
    parallel_for(d, workers, [&](std::size_t f) {
        ImportanceEntry e;
        e.feature = f;
        e.name = f < names.size() ? names[f] : "f" + std::to_string(f);
        Matrix shuffled = x;
        auto column = x.column(f);
        for (std::size_t r = 0; r < repeats; ++r) {
            std::mt19937_64 rng(derive_seed(seed, f, r));
            auto perm = column;
            std::shuffle(perm.begin(), perm.end(), rng);
            shuffled.set_column(f, perm);
            e.drops.push_back(out.baseline - score(y, predict(shuffled)));
        }
        e.mean = mean(e.drops);
        e.std = stddev(e.drops);
        out.entries[f] = std::move(e);
    });
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.mean > b.mean; });
    return out;
}

enum class Scorer { r2, neg_mse, accuracy, weighted_f1 };

inline std::string_view scorer_name(Scorer s) {
    switch (s) {
        case Scorer::r2: return "r2";
        case Scorer::neg_mse: return "neg_mse";
        case Scorer::accuracy: return "accuracy";
        case Scorer::weighted_f1: return "weighted_f1";
    }
    return "?";
}

inline ImportanceTable permutation_importance(const TrainedModel& model, const Matrix& x, std::span<const double> y,
                                              Scorer scorer, std::size_t repeats = 5, std::uint64_t seed = 42,
                                              unsigned workers = 1) {
    const bool reg_scorer = scorer == Scorer::r2 || scorer == Scorer::neg_mse;
    if (reg_scorer != (model.task() == Task::regression))
        throw SchemaError("scorer '" + std::string(scorer_name(scorer)) + "' is incompatible with a " +
                          std::string(task_name(model.task())) + " model");
    const std::size_t k = model.class_count();
    auto score = [&](std::span<const double> yt, const std::vector<double>& yp) {
        switch (scorer) {
            case Scorer::r2: return regression_scores(yt, yp).r2;
            case Scorer::neg_mse: return -regression_scores(yt, yp).mse;
            case Scorer::accuracy: return classification_scores(yt, yp, k).accuracy;
            case Scorer::weighted_f1: return classification_scores(yt, yp, k).f1;
        }
        return 0.0;
    };
    auto table = permutation_importance([&](const Matrix& m) { return model.predict(m); }, x, y, score, repeats, seed,
                                        model.feature_names, workers);
    table.scorer = scorer_name(scorer);
    return table;
}

// ------------------------------------------------------------------- LIME

struct LimeOptions {
    std::size_t n_samples = 5000;
    std::optional<double> kernel_width;  // default 0.75 * sqrt(d)
    double ridge_lambda = 1.0;
    std::uint64_t seed = 42;
    bool keep_samples = false;
};

struct LimeExplanation {
    std::vector<double> instance;
    std::size_t n_samples = 0;
    double kernel_width = 0.0;
    std::vector<double> weights;
    double intercept = 0.0;
    double local_prediction = 0.0;  // surrogate evaluated at the instance
    double model_output = 0.0;      // explained output at the instance
    int target_class = -1;          // -1 for regression
    bool degenerate = false;        // constant outputs over the neighbourhood
    std::vector<std::string> feature_names;

    // populated only with LimeOptions::keep_samples
    Matrix samples;
    std::vector<double> sample_outputs;
    std::vector<double> sample_weights;
};

/// Perturbs the instance with per-feature Gaussian noise scaled by
/// `feature_scale`, weights each sample by exp(-d^2 / w^2) with d the
/// distance in scaled units, and fits a weighted ridge surrogate on the raw
/// perturbed features. Features with zero scale are held fixed.
template <class Response>
LimeExplanation lime_explain(Response&& response, std::span<const double> instance,
                             std::span<const double> feature_scale, const LimeOptions& opt = {}) {
    const std::size_t d = instance.size();
    if (feature_scale.size() != d) throw SchemaError("LIME: feature scale length does not match the instance");
    if (opt.n_samples < 2) throw SchemaError("LIME needs at least 2 samples");
    LimeExplanation ex;
    ex.instance.assign(instance.begin(), instance.end());
    ex.n_samples = opt.n_samples;
    ex.kernel_width = opt.kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(d)));
    if (!(ex.kernel_width > 0)) throw SchemaError("LIME kernel width must be positive");

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix samples(opt.n_samples, d);
    std::vector<double> kernel(opt.n_samples);
    const double w2 = ex.kernel_width * ex.kernel_width;
    for (std::size_t i = 0; i < opt.n_samples; ++i) {
        double dist2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double z = gauss(rng);
            if (feature_scale[j] > 0) {
                samples(i, j) = instance[j] + z * feature_scale[j];
                dist2 += z * z;
            } else {
                samples(i, j) = instance[j];
            }
        }
        kernel[i] = std::exp(-dist2 / w2);
    }
    const std::vector<double> outputs = response(samples);
    {
        Matrix one(1, d, std::vector<double>(instance.begin(), instance.end()));
        ex.model_output = response(one).front();
    }

    const auto [lo, hi] = std::minmax_element(outputs.begin(), outputs.end());
    if (*lo == *hi) {
        ex.degenerate = true;
        ex.weights.assign(d, 0.0);
        ex.intercept = *lo;
    } else {
        auto lf = ridge_normal_equations(samples, outputs, opt.ridge_lambda, std::span<const double>(kernel));
        ex.weights = std::move(lf.coef);
        ex.intercept = lf.intercept;
    }
    ex.local_prediction = ex.intercept;
    for (std::size_t j = 0; j < d; ++j) ex.local_prediction += ex.weights[j] * instance[j];
    if (opt.keep_samples) {
        ex.samples = std::move(samples);
        ex.sample_outputs = outputs;
        ex.sample_weights = std::move(kernel);
    }
    return ex;
}

/// Explains a model's prediction for one row. Classification targets the
/// predicted class unless `target_class` is given; the surrogate then fits
/// that class's probability.
inline LimeExplanation lime_explain(const TrainedModel& model, std::span<const double> instance,
                                    std::span<const double> feature_scale, const LimeOptions& opt = {},
                                    std::optional<int> target_class = std::nullopt) {
    if (instance.size() != model.feature_count()) throw SchemaError("LIME: instance length does not match the model");
    LimeExplanation ex;
    if (model.task() == Task::regression) {
        ex = lime_explain([&](const Matrix& m) { return model.predict(m); }, instance, feature_scale, opt);
    } else {
        Matrix one(1, instance.size(), std::vector<double>(instance.begin(), instance.end()));
        const int cls = target_class.value_or(static_cast<int>(model.predict(one).front()));
        if (cls < 0 || static_cast<std::size_t>(cls) >= model.class_count()) throw SchemaError("LIME: bad target class");
        ex = lime_explain(
            [&](const Matrix& m) {
                const Matrix p = model.predict_proba(m);
                return p.column(static_cast<std::size_t>(cls));
            },
            instance, feature_scale, opt);
        ex.target_class = cls;
    }
    ex.feature_names = model.feature_names;
    return ex;
}

// -------------------------------------------------------------------- PDP

struct PdpCurve {
    std::size_t feature = 0;
    std::string name;
    std::vector<double> grid;  // strictly increasing
    Matrix values;             // grid points x outputs (one column per class)
    bool constant_feature = false;
};

/// Grid of n_grid quantiles evenly spaced between the lo and hi quantile
/// levels, collapsed to strictly increasing values.
inline std::vector<double> pdp_grid(std::span<const double> column, std::size_t n_grid, double lo_q = 0.05,
                                    double hi_q = 0.95) {
    if (n_grid < 2) throw SchemaError("PDP needs n_grid >= 2");
    std::vector<double> sorted(column.begin(), column.end());
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double level) {
        const double pos = level * static_cast<double>(sorted.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const auto j = std::min(i + 1, sorted.size() - 1);
        return sorted[i] + (sorted[j] - sorted[i]) * (pos - static_cast<double>(i));
    };
    std::vector<double> grid;
    for (std::size_t i = 0; i < n_grid; ++i) {
        const double level = lo_q + (hi_q - lo_q) * static_cast<double>(i) / static_cast<double>(n_grid - 1);
        const double g = q(level);
        if (grid.empty() || g > grid.back()) grid.push_back(g);
    }
    return grid;
}

/// Response returns an (n x outputs) matrix for an input matrix.
template <class MultiResponse>
PdpCurve pdp(MultiResponse&& response, const Matrix& x, std::size_t feature, std::size_t n_grid = 20,
             unsigned workers = 1, double lo_q = 0.05, double hi_q = 0.95) {
    if (feature >= x.cols()) throw SchemaError("PDP: feature index out of range");
    if (x.rows() == 0) throw InsufficientDataError("PDP: empty data");
    PdpCurve c;
    c.feature = feature;
    c.grid = pdp_grid(x.column(feature), n_grid, lo_q, hi_q);
    c.constant_feature = c.grid.size() == 1;
    std::vector<std::vector<double>> rows(c.grid.size());
    parallel_for(c.grid.size(), workers, [&](std::size_t g) {
        Matrix probe = x;
        for (std::size_t r = 0; r < probe.rows(); ++r) probe(r, feature) = c.grid[g];
        const Matrix out = response(probe);
        std::vector<double> avg(out.cols(), 0.0);
        for (std::size_t r = 0; r < out.rows(); ++r)
            for (std::size_t k = 0; k < out.cols(); ++k) avg[k] += out(r, k);
        for (auto& a : avg) a /= static_cast<double>(out.rows());
        rows[g] = std::move(avg);
    });
    c.values = Matrix::from_rows(rows);
    return c;
}

/// Regression: mean prediction. Classification: mean probability per class.
inline PdpCurve pdp(const TrainedModel& model, const Matrix& x, std::size_t feature, std::size_t n_grid = 20,
                    unsigned workers = 1) {
    if (x.cols() != model.feature_count()) throw SchemaError("PDP: column count does not match the model");
    PdpCurve c;
    if (model.task() == Task::regression) {
        c = pdp(
            [&](const Matrix& m) {
                auto p = model.predict(m);
                const std::size_t n = p.size();
                return Matrix(n, 1, std::move(p));
            },
            x, feature, n_grid, workers);
    } else {
        c = pdp([&](const Matrix& m) { return model.predict_proba(m); }, x, feature, n_grid, workers);
    }
    c.name = model.feature_names[feature];
    return c;
}

}  // namespace aqf
