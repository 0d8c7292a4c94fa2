#pragma once

// Regression and classification scores, per-country nRMSE, MCC and k-fold
// cross-validation.

#include <map>
#include <string>
#include <vector>

#include "aqf/core.hpp"
#include "aqf/dataset.hpp"
#include "aqf/models.hpp"

namespace aqf {

struct RegressionScores {
    double mse = 0.0;
    double r2 = 0.0;
    double mean_residual = 0.0;
    bool r2_undefined = false;  // constant y_true: r2 reported as 0
};

inline void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw SchemaError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
    if (a == 0) throw InsufficientDataError("cannot score an empty prediction set");
}

/// mse = mean (y - yhat)^2, r2 = 1 - SSres/SStot, mean residual = mean (y - yhat).
inline RegressionScores regression_scores(std::span<const double> y_true, std::span<const double> y_pred) {
    check_lengths(y_true.size(), y_pred.size());
    const double n = static_cast<double>(y_true.size());
    const double ym = mean(y_true);
    double ss_res = 0.0, ss_tot = 0.0, resid = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double r = y_true[i] - y_pred[i];
        ss_res += r * r;
        resid += r;
        ss_tot += (y_true[i] - ym) * (y_true[i] - ym);
    }
    RegressionScores s;
    s.mse = ss_res / n;
    s.mean_residual = resid / n;
    if (ss_tot > 0) {
        s.r2 = 1.0 - ss_res / ss_tot;
    } else {
        s.r2 = 0.0;
        s.r2_undefined = true;
    }
    return s;
}

/// counts(predicted, true): rows are predictions, columns the true class.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::size_t> counts;

    explicit ConfusionMatrix(std::size_t k = 0) : classes(k), counts(k * k, 0) {}

    std::size_t& at(std::size_t predicted, std::size_t truth) { return counts[predicted * classes + truth]; }
    std::size_t at(std::size_t predicted, std::size_t truth) const { return counts[predicted * classes + truth]; }

    std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

    std::size_t predicted_count(std::size_t k) const {
        std::size_t s = 0;
        for (std::size_t t = 0; t < classes; ++t) s += at(k, t);
        return s;
    }

    /// Column sum: rows whose true class is k.
    std::size_t support(std::size_t k) const {
        std::size_t s = 0;
        for (std::size_t p = 0; p < classes; ++p) s += at(p, k);
        return s;
    }

    bool is_diagonal() const {
        for (std::size_t p = 0; p < classes; ++p)
            for (std::size_t t = 0; t < classes; ++t)
                if (p != t && at(p, t) != 0) return false;
        return true;
    }

    static ConfusionMatrix build(std::span<const double> y_true, std::span<const double> y_pred, std::size_t classes) {
        check_lengths(y_true.size(), y_pred.size());
        ConfusionMatrix cm(classes);
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            const auto t = static_cast<std::size_t>(y_true[i]);
            const auto p = static_cast<std::size_t>(y_pred[i]);
            if (t >= classes || p >= classes || y_true[i] < 0 || y_pred[i] < 0)
                throw SchemaError("class label outside 0.." + std::to_string(classes - 1));
            ++cm.at(p, t);
        }
        return cm;
    }
};

struct ClassReportRow {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    bool precision_undefined = false;  // class never predicted
    bool recall_undefined = false;     // class absent from y_true
};

struct ClassificationScores {
    double accuracy = 0.0;
    double precision = 0.0;  // weighted by true-class support
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<ClassReportRow> per_class;
    ConfusionMatrix confusion;
};

/// Per-class precision/recall/F1 (0 when undefined, with a flag) and
/// support-weighted aggregates.
inline ClassificationScores classification_scores(std::span<const double> y_true, std::span<const double> y_pred,
                                                  std::size_t classes) {
    ClassificationScores s;
    s.confusion = ConfusionMatrix::build(y_true, y_pred, classes);
    const auto& cm = s.confusion;
    const double n = static_cast<double>(cm.total());
    std::size_t correct = 0;
    for (std::size_t k = 0; k < classes; ++k) correct += cm.at(k, k);
    s.accuracy = static_cast<double>(correct) / n;
    for (std::size_t k = 0; k < classes; ++k) {
        ClassReportRow row;
        const double tp = static_cast<double>(cm.at(k, k));
        const std::size_t predicted = cm.predicted_count(k);
        row.support = cm.support(k);
        row.precision_undefined = predicted == 0;
        row.recall_undefined = row.support == 0;
        row.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
        row.recall = row.support ? tp / static_cast<double>(row.support) : 0.0;
        row.f1 = row.precision + row.recall > 0 ? 2 * row.precision * row.recall / (row.precision + row.recall) : 0.0;
        const double w = static_cast<double>(row.support) / n;
        s.precision += w * row.precision;
        s.recall += w * row.recall;
        s.f1 += w * row.f1;
        s.per_class.push_back(row);
    }
    return s;
}

struct MccResult {
    double value = 0.0;
    bool undefined = false;  // zero denominator, value reported as 0
};

/// Multiclass Matthews correlation from a confusion matrix:
/// (c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2)).
inline MccResult mcc(const ConfusionMatrix& cm) {
    const double s = static_cast<double>(cm.total());
    if (cm.classes == 0 || s == 0) throw InsufficientDataError("mcc of an empty confusion matrix");
    double c = 0, pt = 0, pp = 0, tt = 0;
    for (std::size_t k = 0; k < cm.classes; ++k) {
        c += static_cast<double>(cm.at(k, k));
        const double p = static_cast<double>(cm.predicted_count(k));
        const double t = static_cast<double>(cm.support(k));
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    const double den = std::sqrt((s * s - pp) * (s * s - tt));
    if (!(den > 0)) return {0.0, true};
    return {std::clamp((c * s - pt) / den, -1.0, 1.0), false};
}

struct CountryNRMSE {
    std::string country;
    std::size_t rows = 0;
    double rmse = 0.0;
    double mean_observed = 0.0;
    double range_observed = 0.0;
    double normalizer = 0.0;   // mean, or range when the mean is 0
    double nrmse = 0.0;        // rmse / normalizer
    double nrmse_range = 0.0;  // rmse / range (0 when the range is 0)
    bool degenerate = false;   // mean and range both 0
    bool above_threshold = false;
};

struct NrmseSummary {
    std::vector<CountryNRMSE> countries;
    double mean_nrmse = 0.0;
    std::size_t above_count = 0;
    double threshold = 0.10;
};

/// Per-country RMSE normalized by the country's mean observed target.
inline NrmseSummary nrmse_by_country(std::span<const double> y_true, std::span<const double> y_pred,
                                     std::span<const RowKey> keys, double threshold = 0.10) {
    check_lengths(y_true.size(), y_pred.size());
    if (keys.size() != y_true.size()) throw SchemaError("row keys do not match predictions");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < keys.size(); ++i) groups[keys[i].country].push_back(i);
    NrmseSummary out;
    out.threshold = threshold;
    for (const auto& [country, idx] : groups) {
        CountryNRMSE c;
        c.country = country;
        c.rows = idx.size();
        double se = 0.0, sum = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (auto i : idx) {
            se += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
            sum += y_true[i];
            lo = std::min(lo, y_true[i]);
            hi = std::max(hi, y_true[i]);
        }
        const double n = static_cast<double>(idx.size());
        c.rmse = std::sqrt(se / n);
        c.mean_observed = sum / n;
        c.range_observed = hi - lo;
        c.normalizer = c.mean_observed != 0 ? std::abs(c.mean_observed) : c.range_observed;
        c.degenerate = c.normalizer == 0;
        c.nrmse = c.degenerate ? 0.0 : c.rmse / c.normalizer;
        c.nrmse_range = c.range_observed > 0 ? c.rmse / c.range_observed : 0.0;
        c.above_threshold = c.nrmse > threshold;
        out.above_count += c.above_threshold;
        out.mean_nrmse += c.nrmse;
        out.countries.push_back(std::move(c));
    }
    if (!out.countries.empty()) out.mean_nrmse /= static_cast<double>(out.countries.size());
    return out;
}

/// R^2 for regression, accuracy for classification.
inline double default_score(Task task, std::span<const double> y_true, std::span<const double> y_pred,
                            std::size_t classes) {
    if (task == Task::regression) return regression_scores(y_true, y_pred).r2;
    return classification_scores(y_true, y_pred, classes).accuracy;
}

struct CvResult {
    std::vector<double> fold_scores;
    double mean = 0.0;
};

/// Cross-validation over an arbitrary learner: fit_predict(train, test_x)
/// returns predictions for test_x. Folds are scored in index order.
template <class FitPredict>
CvResult cross_val_with(const SupervisedDataset& data, const FoldPlan& plan, FitPredict&& fit_predict) {
    if (plan.fold_of.size() != data.rows()) throw SchemaError("fold plan does not cover the dataset");
    CvResult out;
    for (std::size_t f = 0; f < plan.k; ++f) {
        const auto train_idx = plan.train_indices(f);
        const auto test_idx = plan.test_indices(f);
        if (train_idx.size() < 2) throw InsufficientDataError("fold " + std::to_string(f) + " has < 2 training rows");
        if (test_idx.empty()) throw InsufficientDataError("fold " + std::to_string(f) + " is empty");
        const auto train = data.subset(train_idx);
        const auto test = data.subset(test_idx);
        const std::vector<double> pred = fit_predict(train, test.x);
        out.fold_scores.push_back(default_score(data.task, test.y, pred, data.class_count()));
    }
    out.mean = mean(out.fold_scores);
    return out;
}

inline CvResult cross_val(const ModelSpec& spec, const SupervisedDataset& data, const FoldPlan& plan,
                          const FitOptions& opt = {}) {
    return cross_val_with(data, plan, [&](const SupervisedDataset& train, const Matrix& test_x) {
        return fit(spec, train, opt).predict(test_x, opt.workers);
    });
}

}  // namespace aqf
