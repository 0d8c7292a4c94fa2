#pragma once

// CART trees: exhaustive midpoint split search over presorted columns,
// variance (regression) or Gini (classification) impurity.

#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "aqf/core.hpp"

namespace aqf {

enum class Criterion { variance, gini };

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;  // impurity decrease per sample of the parent
};

/// Flattened binary tree. Rows with x[feature] <= threshold go left.
/// Leaves carry a mean (width 1) or a class distribution (width = classes).
struct Tree {
    std::vector<int> feature;  // -1 marks a leaf
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> values;
    std::size_t value_width = 1;

    std::size_t node_count() const { return feature.size(); }
    bool is_leaf(std::size_t node) const { return feature[node] < 0; }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count(feature.begin(), feature.end(), -1));
    }

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [n, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (!is_leaf(n)) {
                stack.emplace_back(static_cast<std::size_t>(left[n]), d + 1);
                stack.emplace_back(static_cast<std::size_t>(right[n]), d + 1);
            }
        }
        return best;
    }

    std::size_t leaf_index(std::span<const double> x) const {
        std::size_t n = 0;
        while (feature[n] >= 0)
            n = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n]);
        return n;
    }

    std::span<const double> node_value(std::size_t node) const {
        return {values.data() + node * value_width, value_width};
    }
    std::span<double> node_value(std::size_t node) { return {values.data() + node * value_width, value_width}; }

    double predict_value(std::span<const double> x) const { return values[leaf_index(x) * value_width]; }
    std::span<const double> predict_distribution(std::span<const double> x) const { return node_value(leaf_index(x)); }
    int predict_class(std::span<const double> x) const { return static_cast<int>(argmax(predict_distribution(x))); }

    /// Features used by at least one internal node.
    std::vector<bool> used_features(std::size_t d) const {
        std::vector<bool> used(d, false);
        for (int f : feature)
            if (f >= 0) used[static_cast<std::size_t>(f)] = true;
        return used;
    }
};

struct TreeOptions {
    Criterion criterion = Criterion::variance;
    std::size_t n_classes = 0;          // gini only
    std::size_t max_depth = 0;          // 0 = unlimited
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    std::size_t max_leaves = 0;         // 0 = unlimited, otherwise best-first growth
    std::size_t max_features = 0;       // 0 = every feature at every node
};

/// Row order per column, ascending by value (row index breaks ties).
struct SortedColumns {
    std::vector<std::vector<std::uint32_t>> order;

    static SortedColumns build(const Matrix& x) {
        SortedColumns s;
        s.order.resize(x.cols());
        for (std::size_t f = 0; f < x.cols(); ++f) {
            auto& o = s.order[f];
            o.resize(x.rows());
            std::iota(o.begin(), o.end(), 0u);
            std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
        }
        return s;
    }
};

namespace detail {

class TreeGrower {
public:
    TreeGrower(const Matrix& x, std::span<const double> targets, std::span<const std::uint32_t> counts,
               const TreeOptions& opt, const SortedColumns& sorted, std::mt19937_64* rng)
        : x_(x), y_(targets), opt_(opt), rng_(rng), d_(x.cols()) {
        if (opt_.criterion == Criterion::gini && opt_.n_classes == 0)
            throw std::invalid_argument("gini criterion needs n_classes");
        // entries: one per (row, multiplicity), grouped by row
        std::vector<std::uint32_t> first(x.rows() + 1, 0);
        for (std::size_t r = 0; r < x.rows(); ++r) first[r + 1] = first[r] + counts[r];
        const std::size_t m = first.back();
        entry_row_.resize(m);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::uint32_t c = first[r]; c < first[r + 1]; ++c) entry_row_[c] = static_cast<std::uint32_t>(r);
        order_.assign(d_, std::vector<std::uint32_t>(m));
        for (std::size_t f = 0; f < d_; ++f) {
            auto out = order_[f].begin();
            for (auto r : sorted.order[f])
                for (std::uint32_t c = first[r]; c < first[r + 1]; ++c) *out++ = c;
        }
        goes_left_.assign(m, 0);
        buffer_.resize(m);
        entry_target_.resize(m);
        for (std::size_t e = 0; e < m; ++e) entry_target_[e] = y_[entry_row_[e]];
    }

    Tree grow() {
        const std::size_t m = entry_row_.size();
        if (m == 0) throw InsufficientDataError("tree: no training rows");
        Tree t;
        t.value_width = opt_.criterion == Criterion::gini ? opt_.n_classes : 1;

        struct Pending {
            std::size_t node, begin, end, depth;
            std::optional<Split> split;
        };
        auto cmp = [](const Pending& a, const Pending& b) {
            if (!a.split || !b.split) return !a.split && b.split.has_value();
            if (a.split->gain != b.split->gain) return a.split->gain < b.split->gain;
            return a.node > b.node;
        };
        std::priority_queue<Pending, std::vector<Pending>, decltype(cmp)> queue(cmp);

        auto make_node = [&](std::size_t begin, std::size_t end, std::size_t depth) {
            const std::size_t id = t.node_count();
            t.feature.push_back(-1);
            t.threshold.push_back(0.0);
            t.left.push_back(-1);
            t.right.push_back(-1);
            auto v = leaf_value(begin, end);
            t.values.insert(t.values.end(), v.begin(), v.end());
            std::optional<Split> s;
            const std::size_t n = end - begin;
            const bool depth_ok = opt_.max_depth == 0 || depth < opt_.max_depth;
            if (depth_ok && n >= std::max<std::size_t>(2, opt_.min_samples_split) && n >= 2 * opt_.min_samples_leaf)
                s = search(begin, end);
            if (s) queue.push({id, begin, end, depth, s});
        };

        make_node(0, m, 0);
        std::size_t leaves = 1;
        while (!queue.empty()) {
            if (opt_.max_leaves > 0 && leaves >= opt_.max_leaves) break;
            Pending p = queue.top();
            queue.pop();
            const std::size_t mid = partition(p.begin, p.end, *p.split);
            t.feature[p.node] = static_cast<int>(p.split->feature);
            t.threshold[p.node] = p.split->threshold;
            t.left[p.node] = static_cast<int>(t.node_count());
            make_node(p.begin, mid, p.depth + 1);
            t.right[p.node] = static_cast<int>(t.node_count());
            make_node(mid, p.end, p.depth + 1);
            ++leaves;
        }
        return t;
    }

    /// Best split of the whole sample over the given features (no sampling).
    std::optional<Split> search_all(std::span<const std::size_t> features) {
        return search_features(0, entry_row_.size(), features);
    }

private:
    std::vector<double> leaf_value(std::size_t begin, std::size_t end) const {
        const auto& list = order_[0];
        const double n = static_cast<double>(end - begin);
        if (opt_.criterion == Criterion::gini) {
            std::vector<double> dist(opt_.n_classes, 0.0);
            for (std::size_t i = begin; i < end; ++i) dist[static_cast<std::size_t>(entry_target_[list[i]])] += 1.0;
            for (auto& v : dist) v /= n;
            return dist;
        }
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += entry_target_[list[i]];
        return {s / n};
    }

    std::optional<Split> search(std::size_t begin, std::size_t end) {
        if (opt_.max_features == 0 || opt_.max_features >= d_ || rng_ == nullptr) {
            std::vector<std::size_t> all(d_);
            std::iota(all.begin(), all.end(), 0);
            return search_features(begin, end, all);
        }
        // random subset first; if it yields nothing, keep drawing one
        // feature at a time from the rest
        std::vector<std::size_t> feats(d_);
        std::iota(feats.begin(), feats.end(), 0);
        for (std::size_t i = 0; i < d_ - 1; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, d_ - 1);
            std::swap(feats[i], feats[pick(*rng_)]);
        }
        std::vector<std::size_t> subset(feats.begin(), feats.begin() + static_cast<std::ptrdiff_t>(opt_.max_features));
        std::sort(subset.begin(), subset.end());
        if (auto s = search_features(begin, end, subset)) return s;
        for (std::size_t i = opt_.max_features; i < d_; ++i) {
            std::size_t one[1] = {feats[i]};
            if (auto s = search_features(begin, end, one)) return s;
        }
        return std::nullopt;
    }

    std::optional<Split> search_features(std::size_t begin, std::size_t end, std::span<const std::size_t> features) {
        const std::size_t n = end - begin;
        if (n < 2) return std::nullopt;
        const double nd = static_cast<double>(n);
        const std::size_t min_leaf = std::max<std::size_t>(1, opt_.min_samples_leaf);
        std::optional<Split> best;
        double best_gain = 0.0;

        if (opt_.criterion == Criterion::variance) {
            // shift by one target value to limit cancellation in sum of squares
            const double shift = entry_target_[order_[0][begin]];
            double sum = 0.0, sumsq = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                const double t = entry_target_[order_[0][i]] - shift;
                sum += t;
                sumsq += t * t;
            }
            const double parent_sse = std::max(0.0, sumsq - sum * sum / nd);
            if (parent_sse <= 0.0) return std::nullopt;
            const double floor_gain = 1e-12 * parent_sse / nd;
            for (auto f : features) {
                const auto& list = order_[f];
                double ls = 0.0, lss = 0.0;
                for (std::size_t i = begin; i + 1 < end; ++i) {
                    const double t = entry_target_[list[i]] - shift;
                    ls += t;
                    lss += t * t;
                    const std::size_t nl = i + 1 - begin;
                    const double v = x_(entry_row_[list[i]], f);
                    const double vn = x_(entry_row_[list[i + 1]], f);
                    if (!(v < vn) || nl < min_leaf || n - nl < min_leaf) continue;
                    const double nld = static_cast<double>(nl), nrd = nd - nld;
                    const double rs = sum - ls, rss = sumsq - lss;
                    const double child = (lss - ls * ls / nld) + (rss - rs * rs / nrd);
                    const double gain = (parent_sse - child) / nd;
                    consider(best, best_gain, floor_gain, f, v, vn, gain);
                }
            }
            return best;
        }

        const std::size_t k = opt_.n_classes;
        std::vector<double> total(k, 0.0);
        for (std::size_t i = begin; i < end; ++i) total[static_cast<std::size_t>(entry_target_[order_[0][i]])] += 1.0;
        double total_sq = 0.0;
        for (double c : total) total_sq += c * c;
        const double parent_gini = 1.0 - total_sq / (nd * nd);
        if (parent_gini <= 1e-15) return std::nullopt;
        const double floor_gain = 1e-12 * parent_gini;
        std::vector<double> left(k);
        for (auto f : features) {
            const auto& list = order_[f];
            std::fill(left.begin(), left.end(), 0.0);
            double lsq = 0.0, rsq = total_sq;
            for (std::size_t i = begin; i + 1 < end; ++i) {
                const auto c = static_cast<std::size_t>(entry_target_[list[i]]);
                const double right_c = total[c] - left[c];
                lsq += 2.0 * left[c] + 1.0;
                rsq -= 2.0 * right_c - 1.0;
                left[c] += 1.0;
                const std::size_t nl = i + 1 - begin;
                const double v = x_(entry_row_[list[i]], f);
                const double vn = x_(entry_row_[list[i + 1]], f);
                if (!(v < vn) || nl < min_leaf || n - nl < min_leaf) continue;
                const double nld = static_cast<double>(nl), nrd = nd - nld;
                const double gain = (lsq / nld + rsq / nrd - total_sq / nd) / nd;
                consider(best, best_gain, floor_gain, f, v, vn, gain);
            }
        }
        return best;
    }

    static void consider(std::optional<Split>& best, double& best_gain, double floor_gain, std::size_t f, double v,
                         double vn, double gain) {
        if (!(gain > floor_gain)) return;
        if (best && !(gain > best_gain * (1.0 + 1e-12))) return;
        double thr = v + (vn - v) / 2.0;
        if (!(thr < vn)) thr = v;
        best = Split{f, thr, gain};
        best_gain = gain;
    }

    std::size_t partition(std::size_t begin, std::size_t end, const Split& s) {
        const auto& split_list = order_[s.feature];
        std::size_t nl = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const auto e = split_list[i];
            const bool l = x_(entry_row_[e], s.feature) <= s.threshold;
            goes_left_[e] = l;
            nl += l;
        }
        for (std::size_t f = 0; f < d_; ++f) {
            auto& list = order_[f];
            std::size_t li = begin, ri = 0;
            for (std::size_t i = begin; i < end; ++i) {
                const auto e = list[i];
                if (goes_left_[e])
                    list[li++] = e;
                else
                    buffer_[ri++] = e;
            }
            std::copy_n(buffer_.begin(), ri, list.begin() + static_cast<std::ptrdiff_t>(li));
        }
        return begin + nl;
    }

    const Matrix& x_;
    std::span<const double> y_;
    TreeOptions opt_;
    std::mt19937_64* rng_;
    std::size_t d_;
    std::vector<std::uint32_t> entry_row_;
    std::vector<double> entry_target_;
    std::vector<std::vector<std::uint32_t>> order_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> buffer_;
};

}  // namespace detail

/// Grows one tree. `counts[r]` is the multiplicity of row r in the sample
/// (bootstrap); pass all ones for the plain training set.
inline Tree grow_tree(const Matrix& x, std::span<const double> targets, std::span<const std::uint32_t> counts,
                      const TreeOptions& opt, const SortedColumns& sorted, std::mt19937_64* rng = nullptr) {
    if (targets.size() != x.rows() || counts.size() != x.rows()) throw std::invalid_argument("grow_tree: size mismatch");
    return detail::TreeGrower(x, targets, counts, opt, sorted, rng).grow();
}

inline Tree grow_tree(const Matrix& x, std::span<const double> targets, const TreeOptions& opt) {
    std::vector<std::uint32_t> ones(x.rows(), 1);
    return grow_tree(x, targets, ones, opt, SortedColumns::build(x));
}

/// Exhaustive best split: every midpoint between consecutive distinct
/// values of each candidate feature. Ties resolve to the lowest feature
/// index, then the lowest threshold. None when no split has positive gain.
inline std::optional<Split> best_split(const Matrix& x, std::span<const double> targets, Criterion criterion,
                                      std::span<const std::size_t> features, std::size_t n_classes = 0) {
    if (x.rows() < 2) return std::nullopt;
    TreeOptions opt;
    opt.criterion = criterion;
    if (criterion == Criterion::gini) {
        n_classes = std::max<std::size_t>(n_classes, 1);
        for (double t : targets) n_classes = std::max(n_classes, static_cast<std::size_t>(t) + 1);
        opt.n_classes = n_classes;
    }
    std::vector<std::size_t> sorted_features(features.begin(), features.end());
    std::sort(sorted_features.begin(), sorted_features.end());
    std::vector<std::uint32_t> ones(x.rows(), 1);
    auto sorted = SortedColumns::build(x);
    return detail::TreeGrower(x, targets, ones, opt, sorted, nullptr).search_all(sorted_features);
}

}  // namespace aqf
