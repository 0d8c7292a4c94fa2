#pragma once

// Model zoo behind one fit / predict / predict_proba interface.

#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aqf/core.hpp"
#include "aqf/dataset.hpp"
#include "aqf/linalg.hpp"
#include "aqf/scaler.hpp"
#include "aqf/tree.hpp"

namespace aqf {

enum class Family { ols, ridge, logistic, knn, cart, random_forest, gbt_preset_a, gbt_preset_b, linear_margin };

inline constexpr std::array<Family, 9> kAllFamilies = {
    Family::ols,           Family::ridge,        Family::logistic,     Family::knn,           Family::cart,
    Family::random_forest, Family::gbt_preset_a, Family::gbt_preset_b, Family::linear_margin,
};

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::ols: return "ols";
        case Family::ridge: return "ridge";
        case Family::logistic: return "logistic";
        case Family::knn: return "knn";
        case Family::cart: return "cart";
        case Family::random_forest: return "random_forest";
        case Family::gbt_preset_a: return "gbt_preset_a";
        case Family::gbt_preset_b: return "gbt_preset_b";
        case Family::linear_margin: return "linear_margin";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    for (auto f : kAllFamilies)
        if (family_name(f) == s) return f;
    throw SchemaError("unknown model family '" + std::string(s) + "'");
}

/// Leaderboard label for a family/task row.
inline std::string display_name(Family f, Task t) {
    const bool reg = t == Task::regression;
    switch (f) {
        case Family::ols: return "Linear Regression";
        case Family::ridge: return "Ridge";
        case Family::logistic: return "Logistic Regression";
        case Family::knn: return "KNeighbors";
        case Family::cart: return "Decision Tree";
        case Family::random_forest: return "Random Forest";
        case Family::gbt_preset_a: return "Gradient Boosting A (XGBoost-style)";
        case Family::gbt_preset_b: return "Gradient Boosting B (LightGBM-style)";
        case Family::linear_margin: return reg ? "Linear SVR" : "Linear SVC";
    }
    return "?";
}

/// Whether a family/task pair is one of the fourteen zoo rows.
inline bool family_supports(Family f, Task t) {
    switch (f) {
        case Family::ols:
        case Family::ridge: return t == Task::regression;
        case Family::logistic:
        case Family::knn: return t == Task::classification;
        default: return true;
    }
}

using Hyperparameters = std::map<std::string, double>;

inline Hyperparameters default_hyperparameters(Family f) {
    switch (f) {
        case Family::ols: return {};
        case Family::ridge: return {{"lambda", 1.0}};
        case Family::logistic: return {{"iterations", 500}, {"step", 0.1}, {"l2", 1e-4}};
        case Family::knn: return {{"k", 5}};
        case Family::cart: return {{"max_depth", 0}, {"min_samples_split", 2}, {"min_samples_leaf", 1}};
        case Family::random_forest:
            return {{"n_trees", 100}, {"max_features", 0}, {"bootstrap", 1},
                    {"max_depth", 0}, {"min_samples_split", 2}, {"min_samples_leaf", 1}};
        case Family::gbt_preset_a:
            return {{"n_rounds", 100}, {"learning_rate", 0.1}, {"max_depth", 3}, {"max_leaves", 0}, {"min_samples_leaf", 1}};
        case Family::gbt_preset_b:
            return {{"n_rounds", 100}, {"learning_rate", 0.1}, {"max_depth", 0}, {"max_leaves", 31}, {"min_samples_leaf", 20}};
        case Family::linear_margin: return {{"C", 1.0}, {"epsilon", 0.1}, {"epochs", 1000}, {"learning_rate", 0.5}};
    }
    return {};
}

namespace detail {

struct HpRule {
    double lo;
    bool lo_strict;
    bool integer;
};

inline HpRule hp_rule(const std::string& key) {
    static const std::map<std::string, HpRule> rules = {
        {"lambda", {0, false, false}},        {"iterations", {1, false, true}},
        {"step", {0, true, false}},           {"l2", {0, false, false}},
        {"k", {1, false, true}},              {"max_depth", {0, false, true}},
        {"min_samples_split", {2, false, true}}, {"min_samples_leaf", {1, false, true}},
        {"n_trees", {1, false, true}},        {"max_features", {0, false, true}},
        {"bootstrap", {0, false, true}},      {"n_rounds", {1, false, true}},
        {"learning_rate", {0, true, false}},  {"max_leaves", {0, false, true}},
        {"C", {0, true, false}},              {"epsilon", {0, false, false}},
        {"epochs", {1, false, true}},
    };
    return rules.at(key);
}

}  // namespace detail

struct ModelSpec {
    Family family = Family::ols;
    Task task = Task::regression;
    Hyperparameters hp;
    std::uint64_t seed = 42;

    std::string name() const { return display_name(family, task); }

    double get(const std::string& key) const { return hp.at(key); }
    std::size_t get_size(const std::string& key) const { return static_cast<std::size_t>(hp.at(key)); }

    /// Throws SchemaError for an unsupported family/task pair, an unknown
    /// key, or an out-of-range value.
    void validate() const {
        if (!family_supports(family, task))
            throw SchemaError(std::string(family_name(family)) + " does not support " + std::string(task_name(task)));
        const auto defaults = default_hyperparameters(family);
        for (const auto& [key, value] : hp) {
            if (!defaults.count(key))
                throw SchemaError("hyperparameter '" + key + "' not valid for " + std::string(family_name(family)));
            const auto rule = detail::hp_rule(key);
            const bool bad_lo = rule.lo_strict ? !(value > rule.lo) : !(value >= rule.lo);
            if (!std::isfinite(value) || bad_lo || (rule.integer && value != std::floor(value)))
                throw SchemaError("hyperparameter " + std::string(family_name(family)) + "." + key + " = " +
                                  format_double(value) + " out of range");
            if (key == "bootstrap" && value > 1) throw SchemaError("bootstrap must be 0 or 1");
        }
        for (const auto& [key, value] : defaults)
            if (!hp.count(key)) throw SchemaError("hyperparameter '" + key + "' missing");
    }

    static ModelSpec make(Family f, Task t, std::uint64_t seed = 42, const Hyperparameters& overrides = {}) {
        ModelSpec s{f, t, default_hyperparameters(f), seed};
        for (const auto& [k, v] : overrides) s.hp[k] = v;
        s.validate();
        return s;
    }
};

/// The seven rows of one task's leaderboard, in table order.
inline std::vector<ModelSpec> model_zoo(Task t, std::uint64_t seed = 42,
                                        const std::map<Family, Hyperparameters>& overrides = {}) {
    const std::vector<Family> order =
        t == Task::regression
            ? std::vector<Family>{Family::ols, Family::ridge, Family::cart, Family::random_forest,
                                  Family::gbt_preset_a, Family::gbt_preset_b, Family::linear_margin}
            : std::vector<Family>{Family::logistic, Family::knn, Family::cart, Family::random_forest,
                                  Family::gbt_preset_a, Family::gbt_preset_b, Family::linear_margin};
    std::vector<ModelSpec> specs;
    for (auto f : order) {
        auto it = overrides.find(f);
        specs.push_back(ModelSpec::make(f, t, seed, it == overrides.end() ? Hyperparameters{} : it->second));
    }
    return specs;
}

// ------------------------------------------------------------ fitted state

struct LinearState {
    std::vector<double> coef;
    double intercept = 0.0;
};

struct LogisticState {
    ScalerParams scaler;
    Matrix weights;  // classes x features
    std::vector<double> bias;
};

struct KnnState {
    ScalerParams scaler;
    Matrix x;  // standardized training rows
    std::vector<double> y;
    std::size_t k = 5;
};

struct TreeState {
    Tree tree;
};

struct ForestState {
    std::vector<Tree> trees;
};

struct GbtState {
    std::vector<double> init;               // one per output (1 for regression)
    std::vector<std::vector<Tree>> rounds;  // rounds x outputs
    double learning_rate = 0.1;
    std::vector<double> train_loss;         // after 0..M rounds
};

struct MarginState {
    ScalerParams scaler;
    Matrix weights;  // outputs x features (1 output for regression)
    std::vector<double> bias;
    double target_offset = 0.0;
};

using ModelState = std::variant<LinearState, LogisticState, KnnState, TreeState, ForestState, GbtState, MarginState>;

struct FitOptions {
    unsigned workers = 1;
};

class TrainedModel {
public:
    ModelSpec spec;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;  // classification only
    ModelState state;

    std::size_t feature_count() const { return feature_names.size(); }
    std::size_t class_count() const { return class_names.size(); }
    Task task() const { return spec.task; }

    std::vector<double> predict(const Matrix& x, unsigned workers = 1) const;
    Matrix predict_proba(const Matrix& x, unsigned workers = 1) const;

    double predict_one(std::span<const double> row) const {
        Matrix m(1, row.size(), std::vector<double>(row.begin(), row.end()));
        return predict(m).front();
    }

private:
    void check_columns(const Matrix& x) const {
        if (x.cols() != feature_count())
            throw SchemaError("model expects " + std::to_string(feature_count()) + " features, got " +
                              std::to_string(x.cols()));
    }
    Matrix class_scores(const Matrix& x, unsigned workers) const;
};

namespace detail {

inline void softmax_inplace(std::span<double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (auto& a : v) {
        a = std::exp(a - mx);
        s += a;
    }
    for (auto& a : v) a /= s;
}

inline std::vector<std::uint32_t> ones(std::size_t n) { return std::vector<std::uint32_t>(n, 1); }

}  // namespace detail

// ---------------------------------------------------------------- logistic

struct LogisticObjective {
    double loss = 0.0;
    Matrix grad_weights;
    std::vector<double> grad_bias;
};

/// Mean multinomial cross-entropy + (l2/2)|W|^2 (bias unpenalized) and its
/// gradient.
inline LogisticObjective logistic_objective(const Matrix& xs, std::span<const double> y, std::size_t classes,
                                            const Matrix& w, std::span<const double> b, double l2) {
    const std::size_t n = xs.rows(), d = xs.cols();
    LogisticObjective out{0.0, Matrix(classes, d), std::vector<double>(classes, 0.0)};
    std::vector<double> z(classes);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < classes; ++k) {
            double s = b[k];
            for (std::size_t j = 0; j < d; ++j) s += w(k, j) * xs(i, j);
            z[k] = s;
        }
        const double mx = *std::max_element(z.begin(), z.end());
        double se = 0.0;
        for (double v : z) se += std::exp(v - mx);
        const auto yi = static_cast<std::size_t>(y[i]);
        out.loss -= z[yi] - mx - std::log(se);
        for (std::size_t k = 0; k < classes; ++k) {
            const double g = std::exp(z[k] - mx) / se - (k == yi ? 1.0 : 0.0);
            out.grad_bias[k] += g;
            for (std::size_t j = 0; j < d; ++j) out.grad_weights(k, j) += g * xs(i, j);
        }
    }
    const double inv = 1.0 / static_cast<double>(n);
    out.loss *= inv;
    for (std::size_t k = 0; k < classes; ++k) {
        out.grad_bias[k] *= inv;
        for (std::size_t j = 0; j < d; ++j) {
            out.loss += 0.5 * l2 * w(k, j) * w(k, j);
            out.grad_weights(k, j) = out.grad_weights(k, j) * inv + l2 * w(k, j);
        }
    }
    return out;
}

namespace detail {

inline LogisticState fit_logistic(const ModelSpec& spec, const SupervisedDataset& data) {
    LogisticState st;
    st.scaler = ScalerParams::fit(data.x);
    const Matrix xs = st.scaler.transform(data.x);
    const std::size_t k = data.class_count();
    st.weights = Matrix(k, xs.cols());
    st.bias.assign(k, 0.0);
    const auto iters = spec.get_size("iterations");
    const double step = spec.get("step"), l2 = spec.get("l2");
    for (std::size_t it = 0; it < iters; ++it) {
        auto obj = logistic_objective(xs, data.y, k, st.weights, st.bias, l2);
        for (std::size_t c = 0; c < k; ++c) {
            st.bias[c] -= step * obj.grad_bias[c];
            for (std::size_t j = 0; j < xs.cols(); ++j) st.weights(c, j) -= step * obj.grad_weights(c, j);
        }
    }
    return st;
}

// --------------------------------------------------------------- ensembles

inline TreeOptions tree_options(const ModelSpec& spec, const SupervisedDataset& data) {
    TreeOptions o;
    if (spec.task == Task::classification) {
        o.criterion = Criterion::gini;
        o.n_classes = data.class_count();
    }
    o.max_depth = spec.get_size("max_depth");
    o.min_samples_leaf = spec.get_size("min_samples_leaf");
    if (spec.hp.count("min_samples_split")) o.min_samples_split = spec.get_size("min_samples_split");
    return o;
}

inline ForestState fit_forest(const ModelSpec& spec, const SupervisedDataset& data, unsigned workers) {
    auto opt = tree_options(spec, data);
    const std::size_t d = data.x.cols(), n = data.rows();
    std::size_t mtry = spec.get_size("max_features");
    if (mtry == 0) {
        mtry = spec.task == Task::classification ? static_cast<std::size_t>(std::sqrt(static_cast<double>(d)))
                                                 : d / 3;
        mtry = std::max<std::size_t>(1, mtry);
    }
    opt.max_features = mtry >= d ? 0 : mtry;
    const bool bootstrap = spec.get("bootstrap") != 0;
    const auto sorted = SortedColumns::build(data.x);
    ForestState st;
    st.trees.resize(spec.get_size("n_trees"));
    parallel_for(st.trees.size(), workers, [&](std::size_t t) {
        std::mt19937_64 rng(spec.seed + t);
        std::vector<std::uint32_t> counts(n, bootstrap ? 0 : 1);
        if (bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (std::size_t i = 0; i < n; ++i) ++counts[pick(rng)];
        }
        st.trees[t] = grow_tree(data.x, data.y, counts, opt, sorted, &rng);
    });
    return st;
}

inline double mean_cross_entropy(const Matrix& scores, std::span<const double> y) {
    double loss = 0.0;
    std::vector<double> p(scores.cols());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        std::copy(scores.row(i).begin(), scores.row(i).end(), p.begin());
        softmax_inplace(p);
        loss -= std::log(std::max(p[static_cast<std::size_t>(y[i])], 1e-300));
    }
    return loss / static_cast<double>(scores.rows());
}

/// Stagewise boosting. Regression: squared loss, leaves hold the mean
/// residual. Classification: one tree per class per round on the softmax
/// negative gradient, leaves set by a single Newton step.
inline GbtState fit_gbt(const ModelSpec& spec, const SupervisedDataset& data, unsigned workers) {
    TreeOptions opt;
    opt.criterion = Criterion::variance;
    opt.max_depth = spec.get_size("max_depth");
    opt.max_leaves = spec.get_size("max_leaves");
    opt.min_samples_leaf = spec.get_size("min_samples_leaf");
    const std::size_t n = data.rows();
    const auto sorted = SortedColumns::build(data.x);
    const auto counts = ones(n);
    GbtState st;
    st.learning_rate = spec.get("learning_rate");
    const std::size_t rounds = spec.get_size("n_rounds");

    if (spec.task == Task::regression) {
        st.init = {mean(data.y)};
        std::vector<double> f(n, st.init[0]), resid(n);
        auto mse = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += (data.y[i] - f[i]) * (data.y[i] - f[i]);
            return s / static_cast<double>(n);
        };
        st.train_loss.push_back(mse());
        for (std::size_t m = 0; m < rounds; ++m) {
            for (std::size_t i = 0; i < n; ++i) resid[i] = data.y[i] - f[i];
            Tree t = grow_tree(data.x, resid, counts, opt, sorted);
            for (std::size_t i = 0; i < n; ++i) f[i] += st.learning_rate * t.predict_value(data.x.row(i));
            st.rounds.push_back({std::move(t)});
            st.train_loss.push_back(mse());
        }
        return st;
    }

    const std::size_t k = data.class_count();
    std::vector<double> prior(k, 0.0);
    for (double y : data.y) prior[static_cast<std::size_t>(y)] += 1.0;
    for (auto& p : prior) p = std::log(std::max(p / static_cast<double>(n), 1e-12));
    st.init = prior;
    Matrix scores(n, k);
    for (std::size_t i = 0; i < n; ++i) std::copy(prior.begin(), prior.end(), scores.row(i).begin());
    st.train_loss.push_back(mean_cross_entropy(scores, data.y));
    Matrix prob(n, k);
    for (std::size_t m = 0; m < rounds; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(scores.row(i).begin(), scores.row(i).end(), prob.row(i).begin());
            softmax_inplace(prob.row(i));
        }
        std::vector<Tree> trees(k);
        parallel_for(k, workers, [&](std::size_t c) {
            std::vector<double> resid(n);
            for (std::size_t i = 0; i < n; ++i)
                resid[i] = (static_cast<std::size_t>(data.y[i]) == c ? 1.0 : 0.0) - prob(i, c);
            Tree t = grow_tree(data.x, resid, counts, opt, sorted);
            std::vector<double> num(t.node_count(), 0.0), den(t.node_count(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto leaf = t.leaf_index(data.x.row(i));
                const double r = resid[i];
                num[leaf] += r;
                den[leaf] += std::abs(r) * (1.0 - std::abs(r));
            }
            const double factor = static_cast<double>(k - 1) / static_cast<double>(k);
            for (std::size_t node = 0; node < t.node_count(); ++node)
                if (t.is_leaf(node)) t.values[node] = std::abs(den[node]) < 1e-150 ? 0.0 : factor * num[node] / den[node];
            trees[c] = std::move(t);
        });
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c) scores(i, c) += st.learning_rate * trees[c].predict_value(data.x.row(i));
        st.rounds.push_back(std::move(trees));
        st.train_loss.push_back(mean_cross_entropy(scores, data.y));
    }
    return st;
}

// ----------------------------------------------------------- linear margin

/// Hinge (one-vs-rest) or epsilon-insensitive loss + (1/(2Cn))|w|^2,
/// minimized by full-batch subgradient descent with step eta0/sqrt(t).
/// The iterate with the lowest objective is kept.
inline MarginState fit_margin(const ModelSpec& spec, const SupervisedDataset& data, unsigned workers) {
    MarginState st;
    st.scaler = ScalerParams::fit(data.x);
    const Matrix xs = st.scaler.transform(data.x);
    const std::size_t n = xs.rows(), d = xs.cols();
    const double lambda = 1.0 / (spec.get("C") * static_cast<double>(n));
    const double eps = spec.get("epsilon"), eta0 = spec.get("learning_rate");
    const std::size_t epochs = spec.get_size("epochs");
    const bool regression = spec.task == Task::regression;
    const std::size_t outputs = regression ? 1 : data.class_count();
    if (regression) st.target_offset = mean(data.y);
    st.weights = Matrix(outputs, d);
    st.bias.assign(outputs, 0.0);

    parallel_for(outputs, workers, [&](std::size_t c) {
        std::vector<double> target(n);
        for (std::size_t i = 0; i < n; ++i)
            target[i] = regression ? data.y[i] - st.target_offset
                                   : (static_cast<std::size_t>(data.y[i]) == c ? 1.0 : -1.0);
        std::vector<double> w(d, 0.0), gw(d), best_w(d, 0.0);
        double b = 0.0, best_b = 0.0, best_obj = std::numeric_limits<double>::infinity();
        for (std::size_t t = 1; t <= epochs + 1; ++t) {
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0, loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double f = b;
                for (std::size_t j = 0; j < d; ++j) f += w[j] * xs(i, j);
                double g = 0.0;
                if (regression) {
                    const double r = target[i] - f;
                    if (std::abs(r) > eps) {
                        loss += std::abs(r) - eps;
                        g = r > 0 ? -1.0 : 1.0;
                    }
                } else {
                    const double m = target[i] * f;
                    if (m < 1.0) {
                        loss += 1.0 - m;
                        g = -target[i];
                    }
                }
                if (g != 0.0) {
                    gb += g;
                    for (std::size_t j = 0; j < d; ++j) gw[j] += g * xs(i, j);
                }
            }
            double wn = 0.0;
            for (double v : w) wn += v * v;
            const double obj = 0.5 * lambda * wn + loss / static_cast<double>(n);
            if (obj < best_obj) {
                best_obj = obj;
                best_w = w;
                best_b = b;
            }
            if (t > epochs) break;  // last pass only scores the final iterate
            const double eta = eta0 / std::sqrt(static_cast<double>(t));
            for (std::size_t j = 0; j < d; ++j) w[j] -= eta * (lambda * w[j] + gw[j] / static_cast<double>(n));
            b -= eta * gb / static_cast<double>(n);
        }
        for (std::size_t j = 0; j < d; ++j) st.weights(c, j) = best_w[j];
        st.bias[c] = best_b;
    });
    return st;
}

inline KnnState fit_knn(const ModelSpec& spec, const SupervisedDataset& data) {
    KnnState st;
    st.scaler = ScalerParams::fit(data.x);
    st.x = st.scaler.transform(data.x);
    st.y = data.y;
    st.k = std::min(spec.get_size("k"), data.rows());
    return st;
}

/// Indices of the k nearest training rows (distance, then index).
inline std::vector<std::size_t> nearest_rows(const KnnState& st, std::span<const double> q) {
    std::vector<std::pair<double, std::size_t>> dist(st.x.rows());
    for (std::size_t i = 0; i < st.x.rows(); ++i) {
        double s = 0.0;
        auto row = st.x.row(i);
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double dv = row[j] - q[j];
            s += dv * dv;
        }
        dist[i] = {s, i};
    }
    const auto k = static_cast<std::ptrdiff_t>(st.k);
    std::nth_element(dist.begin(), dist.begin() + k - 1, dist.end());
    std::sort(dist.begin(), dist.begin() + k);
    std::vector<std::size_t> out;
    for (std::ptrdiff_t i = 0; i < k; ++i) out.push_back(dist[static_cast<std::size_t>(i)].second);
    return out;
}

}  // namespace detail

/// Fits `spec` on `data`. Deterministic given spec.seed; the worker count
/// never changes results.
inline TrainedModel fit(const ModelSpec& spec, const SupervisedDataset& data, const FitOptions& opt = {}) {
    spec.validate();
    if (spec.task != data.task) throw SchemaError("model task does not match dataset task");
    if (data.rows() < 2) throw InsufficientDataError("fit needs at least 2 rows");
    if (spec.task == Task::classification && data.class_count() < 2)
        throw SchemaError("classification dataset needs at least 2 classes");
    TrainedModel m;
    m.spec = spec;
    m.feature_names = data.feature_names;
    m.class_names = data.class_names;
    switch (spec.family) {
        case Family::ols:
        case Family::ridge: {
            const double lambda = spec.family == Family::ols ? 0.0 : spec.get("lambda");
            auto lf = ridge_normal_equations(data.x, data.y, lambda);
            m.state = LinearState{std::move(lf.coef), lf.intercept};
            break;
        }
        case Family::logistic: m.state = detail::fit_logistic(spec, data); break;
        case Family::knn: m.state = detail::fit_knn(spec, data); break;
        case Family::cart: {
            auto o = detail::tree_options(spec, data);
            m.state = TreeState{grow_tree(data.x, data.y, o)};
            break;
        }
        case Family::random_forest: m.state = detail::fit_forest(spec, data, opt.workers); break;
        case Family::gbt_preset_a:
        case Family::gbt_preset_b: m.state = detail::fit_gbt(spec, data, opt.workers); break;
        case Family::linear_margin: m.state = detail::fit_margin(spec, data, opt.workers); break;
    }
    return m;
}

// Raw per-class scores (classification) used by both predict paths.
inline Matrix TrainedModel::class_scores(const Matrix& x, unsigned workers) const {
    const std::size_t n = x.rows(), k = class_count();
    Matrix out(n, k);
    std::visit(
        [&](const auto& st) {
            using S = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<S, LogisticState> || std::is_same_v<S, MarginState>) {
                for (std::size_t i = 0; i < n; ++i) {
                    auto z = st.scaler.transform_row(x.row(i));
                    for (std::size_t c = 0; c < k; ++c) {
                        double s = st.bias[c];
                        for (std::size_t j = 0; j < z.size(); ++j) s += st.weights(c, j) * z[j];
                        out(i, c) = s;
                    }
                }
            } else if constexpr (std::is_same_v<S, KnnState>) {
                parallel_for(n, workers, [&](std::size_t i) {
                    auto z = st.scaler.transform_row(x.row(i));
                    for (auto r : detail::nearest_rows(st, z)) out(i, static_cast<std::size_t>(st.y[r])) += 1.0;
                });
            } else if constexpr (std::is_same_v<S, TreeState>) {
                for (std::size_t i = 0; i < n; ++i) {
                    auto dist = st.tree.predict_distribution(x.row(i));
                    std::copy(dist.begin(), dist.end(), out.row(i).begin());
                }
            } else if constexpr (std::is_same_v<S, ForestState>) {
                for (std::size_t i = 0; i < n; ++i)
                    for (const auto& t : st.trees) out(i, static_cast<std::size_t>(t.predict_class(x.row(i)))) += 1.0;
            } else if constexpr (std::is_same_v<S, GbtState>) {
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t c = 0; c < k; ++c) out(i, c) = st.init[c];
                    for (const auto& round : st.rounds)
                        for (std::size_t c = 0; c < k; ++c)
                            out(i, c) += st.learning_rate * round[c].predict_value(x.row(i));
                }
            } else {
                throw SchemaError("model state has no class scores");
            }
        },
        state);
    return out;
}

inline std::vector<double> TrainedModel::predict(const Matrix& x, unsigned workers) const {
    check_columns(x);
    const std::size_t n = x.rows();
    std::vector<double> out(n);
    if (task() == Task::classification) {
        const Matrix s = class_scores(x, workers);
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(argmax(s.row(i)));
        return out;
    }
    std::visit(
        [&](const auto& st) {
            using S = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<S, LinearState>) {
                for (std::size_t i = 0; i < n; ++i) {
                    double s = st.intercept;
                    for (std::size_t j = 0; j < st.coef.size(); ++j) s += st.coef[j] * x(i, j);
                    out[i] = s;
                }
            } else if constexpr (std::is_same_v<S, TreeState>) {
                for (std::size_t i = 0; i < n; ++i) out[i] = st.tree.predict_value(x.row(i));
            } else if constexpr (std::is_same_v<S, ForestState>) {
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (const auto& t : st.trees) s += t.predict_value(x.row(i));
                    out[i] = s / static_cast<double>(st.trees.size());
                }
            } else if constexpr (std::is_same_v<S, GbtState>) {
                for (std::size_t i = 0; i < n; ++i) {
                    double s = st.init[0];
                    for (const auto& round : st.rounds) s += st.learning_rate * round[0].predict_value(x.row(i));
                    out[i] = s;
                }
            } else if constexpr (std::is_same_v<S, MarginState>) {
                for (std::size_t i = 0; i < n; ++i) {
                    auto z = st.scaler.transform_row(x.row(i));
                    double s = st.bias[0] + st.target_offset;
                    for (std::size_t j = 0; j < z.size(); ++j) s += st.weights(0, j) * z[j];
                    out[i] = s;
                }
            } else {
                throw SchemaError("model state cannot predict a regression target");
            }
        },
        state);
    return out;
}

/// Class probabilities: vote fractions (forest, knn), leaf distribution
/// (cart), softmax of scores (logistic, gbt) and softmax of margins for the
/// linear margin model (not calibrated). Argmax always equals predict().
inline Matrix TrainedModel::predict_proba(const Matrix& x, unsigned workers) const {
    if (task() != Task::classification) throw SchemaError("predict_proba called on a regression model");
    check_columns(x);
    Matrix s = class_scores(x, workers);
    const bool softmax = std::holds_alternative<LogisticState>(state) || std::holds_alternative<GbtState>(state) ||
                         std::holds_alternative<MarginState>(state);
    for (std::size_t i = 0; i < s.rows(); ++i) {
        auto row = s.row(i);
        if (softmax) {
            detail::softmax_inplace(row);
        } else {
            double total = 0.0;
            for (double v : row) total += v;
            for (auto& v : row) v /= total;
        }
    }
    return s;
}

// ----------------------------------------------------------- serialization

inline constexpr int kModelFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline json to_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

inline Matrix matrix_from_json(const json& j) {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), j.at("data").get<std::vector<double>>());
}

inline json to_json(const ScalerParams& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"constant", s.constant}};
}

inline ScalerParams scaler_from_json(const json& j) {
    ScalerParams s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
    s.constant = j.at("constant").get<std::vector<bool>>();
    return s;
}

inline json to_json(const Tree& t) {
    return {{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left},
            {"right", t.right},     {"values", t.values},       {"value_width", t.value_width}};
}

inline Tree tree_from_json(const json& j) {
    Tree t;
    t.feature = j.at("feature").get<std::vector<int>>();
    t.threshold = j.at("threshold").get<std::vector<double>>();
    t.left = j.at("left").get<std::vector<int>>();
    t.right = j.at("right").get<std::vector<int>>();
    t.values = j.at("values").get<std::vector<double>>();
    t.value_width = j.at("value_width").get<std::size_t>();
    return t;
}

}  // namespace detail

inline nlohmann::json model_to_json(const TrainedModel& m) {
    using detail::json;
    using detail::to_json;
    json j;
    j["format_version"] = kModelFormatVersion;
    j["family"] = family_name(m.spec.family);
    j["task"] = task_name(m.spec.task);
    j["name"] = m.spec.name();
    j["seed"] = m.spec.seed;
    j["hyperparameters"] = m.spec.hp;
    j["feature_names"] = m.feature_names;
    j["class_names"] = m.class_names;
    if (m.spec.family == Family::linear_margin)
        j["approximation"] = "linear kernel trained by subgradient descent in place of a kernel SVM";
    if (m.spec.family == Family::gbt_preset_a || m.spec.family == Family::gbt_preset_b)
        j["approximation"] = "generic gradient-boosted trees preset standing in for a dedicated boosting library";
    json st;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, LinearState>) {
                st = {{"coef", s.coef}, {"intercept", s.intercept}};
            } else if constexpr (std::is_same_v<S, LogisticState>) {
                st = {{"scaler", to_json(s.scaler)}, {"weights", to_json(s.weights)}, {"bias", s.bias}};
            } else if constexpr (std::is_same_v<S, KnnState>) {
                st = {{"scaler", to_json(s.scaler)}, {"x", to_json(s.x)}, {"y", s.y}, {"k", s.k}};
            } else if constexpr (std::is_same_v<S, TreeState>) {
                st = {{"tree", to_json(s.tree)}};
            } else if constexpr (std::is_same_v<S, ForestState>) {
                json trees = json::array();
                for (const auto& t : s.trees) trees.push_back(to_json(t));
                st = {{"trees", trees}};
            } else if constexpr (std::is_same_v<S, GbtState>) {
                json rounds = json::array();
                for (const auto& r : s.rounds) {
                    json row = json::array();
                    for (const auto& t : r) row.push_back(to_json(t));
                    rounds.push_back(row);
                }
                st = {{"init", s.init}, {"rounds", rounds}, {"learning_rate", s.learning_rate}, {"train_loss", s.train_loss}};
            } else if constexpr (std::is_same_v<S, MarginState>) {
                st = {{"scaler", to_json(s.scaler)}, {"weights", to_json(s.weights)}, {"bias", s.bias},
                      {"target_offset", s.target_offset}};
            }
        },
        m.state);
    j["state"] = st;
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kModelFormatVersion)
            throw SchemaError("unsupported model format version");
        TrainedModel m;
        m.spec.family = parse_family(j.at("family").get<std::string>());
        m.spec.task = parse_task(j.at("task").get<std::string>());
        m.spec.seed = j.at("seed").get<std::uint64_t>();
        m.spec.hp = j.at("hyperparameters").get<Hyperparameters>();
        m.spec.validate();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        const auto& s = j.at("state");
        switch (m.spec.family) {
            case Family::ols:
            case Family::ridge:
                m.state = LinearState{s.at("coef").get<std::vector<double>>(), s.at("intercept").get<double>()};
                break;
            case Family::logistic:
                m.state = LogisticState{detail::scaler_from_json(s.at("scaler")), detail::matrix_from_json(s.at("weights")),
                                        s.at("bias").get<std::vector<double>>()};
                break;
            case Family::knn:
                m.state = KnnState{detail::scaler_from_json(s.at("scaler")), detail::matrix_from_json(s.at("x")),
                                   s.at("y").get<std::vector<double>>(), s.at("k").get<std::size_t>()};
                break;
            case Family::cart: m.state = TreeState{detail::tree_from_json(s.at("tree"))}; break;
            case Family::random_forest: {
                ForestState f;
                for (const auto& t : s.at("trees")) f.trees.push_back(detail::tree_from_json(t));
                m.state = std::move(f);
                break;
            }
            case Family::gbt_preset_a:
            case Family::gbt_preset_b: {
                GbtState g;
                g.init = s.at("init").get<std::vector<double>>();
                g.learning_rate = s.at("learning_rate").get<double>();
                g.train_loss = s.at("train_loss").get<std::vector<double>>();
                for (const auto& r : s.at("rounds")) {
                    std::vector<Tree> row;
                    for (const auto& t : r) row.push_back(detail::tree_from_json(t));
                    g.rounds.push_back(std::move(row));
                }
                m.state = std::move(g);
                break;
            }
            case Family::linear_margin:
                m.state = MarginState{detail::scaler_from_json(s.at("scaler")), detail::matrix_from_json(s.at("weights")),
                                      s.at("bias").get<std::vector<double>>(), s.at("target_offset").get<double>()};
                break;
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed model document: ") + e.what());
    }
}

}  // namespace aqf
