#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lal/parallel.hpp"
#include "lal/random.hpp"

namespace lal {

enum class ForestMode { classification, regression };
enum class SplitCriterion { gini, variance };

inline const char* to_string(ForestMode mode) {
    return mode == ForestMode::classification ? "classification" : "regression";
}

inline ForestMode forest_mode_from_string(const std::string& s) {
    if (s == "classification") return ForestMode::classification;
    if (s == "regression") return ForestMode::regression;
    throw std::invalid_argument("unknown forest mode '" + s + "'");
}

struct ForestConfig {
    std::size_t n_trees = 50;
    std::size_t max_depth = 0;           // 0 = unbounded
    std::size_t min_leaf_size = 1;
    std::size_t features_per_split = 0;  // 0 = ceil(sqrt(D))
    ForestMode mode = ForestMode::classification;

    static ForestConfig classifier() { return {}; }

    static ForestConfig regressor() {
        ForestConfig c;
        c.n_trees = 100;
        c.min_leaf_size = 5;
        c.mode = ForestMode::regression;
        return c;
    }

    std::size_t split_features(std::size_t dim) const {
        if (features_per_split != 0) return std::min(features_per_split, dim);
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim)))));
    }

    void validate() const {
        if (n_trees < 1) throw std::invalid_argument("forest: n_trees must be >= 1");
        if (n_trees > 500 && mode == ForestMode::regression)
            throw std::invalid_argument("forest: regressor n_trees is capped at 500");
        if (min_leaf_size < 1) throw std::invalid_argument("forest: min_leaf_size must be >= 1");
    }

    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// Flattened tree node. Internal nodes send x left iff x[feature] <= threshold.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    /// Class-0 frequency (classification) or mean target (regression) of the
    /// training entries that reached this node.
    double value = 0.0;
    std::size_t sample_count = 0;
    /// Unweighted impurity decrease of the split (internal nodes only).
    double impurity_decrease = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& leaf_for(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            const TreeNode& n = nodes[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes[i];
    }

    double predict(std::span<const double> x) const { return leaf_for(x).value; }

    /// Maximum leaf depth; a single leaf has depth 0.
    std::size_t depth() const {
        if (nodes.empty()) return 0;
        std::size_t best = 0;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            if (nodes[i].is_leaf()) {
                best = std::max(best, d);
            } else {
                stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
                stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
            }
        }
        return best;
    }
};

/// Bagged ensemble of trees; immutable once built.
class ForestModel {
public:
    ForestModel() = default;

    ForestModel(ForestConfig config, std::size_t feature_count, std::vector<Tree> trees,
                std::vector<std::vector<std::uint32_t>> bags = {}, std::uint64_t seed = 0)
        : config_(config), feature_count_(feature_count), trees_(std::move(trees)),
          bags_(std::move(bags)), seed_(seed) {
        if (trees_.empty()) throw std::invalid_argument("forest: needs at least one tree");
        if (!bags_.empty() && bags_.size() != trees_.size())
            throw std::invalid_argument("forest: one bootstrap sample per tree expected");
        config_.n_trees = trees_.size();
    }

    ForestMode mode() const noexcept { return config_.mode; }
    const ForestConfig& config() const noexcept { return config_; }
    std::size_t feature_count() const noexcept { return feature_count_; }
    std::size_t n_trees() const noexcept { return trees_.size(); }
    const std::vector<Tree>& trees() const noexcept { return trees_; }
    /// Sorted bootstrap multiset (row indices into the training set) per tree.
    const std::vector<std::vector<std::uint32_t>>& bags() const noexcept { return bags_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    ForestConfig config_;
    std::size_t feature_count_ = 0;
    std::vector<Tree> trees_;
    std::vector<std::vector<std::uint32_t>> bags_;
    std::uint64_t seed_ = 0;
};

struct SplitResult {
    double threshold = 0.0;
    double impurity_decrease = 0.0;
};

/// Decreases closer than this are treated as equal when choosing splits.
inline constexpr double kSplitTieTolerance = 1e-12;

inline double gini_impurity(double ones, double n) {
    if (n <= 0.0) return 0.0;
    const double p = ones / n;
    return 2.0 * p * (1.0 - p);
}

inline double variance_impurity(double sum, double sum_sq, double n) {
    if (n <= 0.0) return 0.0;
    const double mean = sum / n;
    return std::max(0.0, sum_sq / n - mean * mean);
}

namespace detail {

struct SplitEntry {
    double x;
    double y;
};

inline double node_impurity(SplitCriterion c, double sum, double sum_sq, double n) {
    return c == SplitCriterion::gini ? gini_impurity(sum, n) : variance_impurity(sum, sum_sq, n);
}

/// Best split of entries already sorted by x. Only positions between
/// distinct x values are candidates; the first (smallest) threshold wins ties.
inline std::optional<SplitResult> scan_sorted(std::span<const SplitEntry> e, SplitCriterion c,
                                              std::size_t min_leaf) {
    const std::size_t n = e.size();
    if (n < 2 || e.front().x == e.back().x) return std::nullopt;
    double total = 0.0, total_sq = 0.0;
    for (const auto& s : e) {
        total += s.y;
        total_sq += s.y * s.y;
    }
    const double nd = static_cast<double>(n);
    const double parent = node_impurity(c, total, total_sq, nd);

    std::optional<SplitResult> best;
    double left = 0.0, left_sq = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left += e[i].y;
        left_sq += e[i].y * e[i].y;
        if (e[i].x == e[i + 1].x) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double l = static_cast<double>(nl), r = static_cast<double>(nr);
        const double decrease = parent - (l / nd) * node_impurity(c, left, left_sq, l) -
                                (r / nd) * node_impurity(c, total - left, total_sq - left_sq, r);
        if (!best || decrease > best->impurity_decrease + kSplitTieTolerance) {
            double threshold = e[i].x + (e[i + 1].x - e[i].x) / 2.0;
            if (!(threshold < e[i + 1].x)) threshold = e[i].x;
            best = SplitResult{threshold, decrease};
        }
    }
    return best;
}

}  // namespace detail

/// Threshold maximising the impurity decrease over midpoints of consecutive
/// distinct sorted values, each side keeping at least `min_leaf` samples.
/// Returns nullopt ("no split") for a constant column or when no position
/// satisfies `min_leaf`.
inline std::optional<SplitResult> best_split(std::span<const double> column, std::span<const double> targets,
                                             SplitCriterion criterion, std::size_t min_leaf = 1) {
    if (column.size() != targets.size()) throw std::invalid_argument("best_split: length mismatch");
    if (column.size() < 2) throw std::invalid_argument("best_split: needs at least 2 samples");
    std::vector<detail::SplitEntry> entries(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) entries[i] = {column[i], targets[i]};
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
    return detail::scan_sorted(entries, criterion, std::max<std::size_t>(1, min_leaf));
}

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(std::span<const double> features, std::size_t dim, std::span<const double> targets,
                const ForestConfig& config, Rng& rng)
        : x_(features), dim_(dim), y_(targets), config_(config), rng_(rng),
          criterion_(config.mode == ForestMode::classification ? SplitCriterion::gini : SplitCriterion::variance),
          split_features_(config.split_features(dim)), feature_order_(dim) {
        std::iota(feature_order_.begin(), feature_order_.end(), 0);
    }

    Tree build(std::vector<std::size_t> rows) {
        nodes_.clear();
        grow(rows, 0);
        return Tree{std::move(nodes_)};
    }

private:
    struct Choice {
        int feature = -1;
        SplitResult split;
    };

    std::int32_t grow(std::span<std::size_t> rows, std::size_t depth) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();
        double sum = 0.0;
        bool pure = true;
        const double first = y_[rows[0]];
        for (std::size_t r : rows) {
            sum += y_[r];
            pure = pure && y_[r] == first;
        }
        const double mean = sum / static_cast<double>(rows.size());
        nodes_[id].value = criterion_ == SplitCriterion::gini ? 1.0 - mean : mean;
        nodes_[id].sample_count = rows.size();

        const bool depth_capped = config_.max_depth != 0 && depth >= config_.max_depth;
        if (pure || depth_capped || rows.size() < 2 * config_.min_leaf_size) return id;

        const Choice choice = choose(rows);
        if (choice.feature < 0 || choice.split.impurity_decrease <= kSplitTieTolerance) return id;

        const auto f = static_cast<std::size_t>(choice.feature);
        const double t = choice.split.threshold;
        auto mid = std::stable_partition(rows.begin(), rows.end(),
                                         [&](std::size_t r) { return x_[r * dim_ + f] <= t; });
        const auto n_left = static_cast<std::size_t>(mid - rows.begin());
        const auto left = grow(rows.first(n_left), depth + 1);
        const auto right = grow(rows.subspan(n_left), depth + 1);
        TreeNode& node = nodes_[id];
        node.feature = choice.feature;
        node.threshold = t;
        node.left = left;
        node.right = right;
        node.impurity_decrease = choice.split.impurity_decrease;
        return id;
    }

    // Visits features in a random order until `split_features_` non-constant
    // ones have been scored. Ties: smaller threshold, then smaller feature.
    Choice choose(std::span<const std::size_t> rows) {
        std::shuffle(feature_order_.begin(), feature_order_.end(), rng_);
        Choice best;
        std::size_t scored = 0;
        entries_.resize(rows.size());
        for (std::size_t f : feature_order_) {
            for (std::size_t k = 0; k < rows.size(); ++k) entries_[k] = {x_[rows[k] * dim_ + f], y_[rows[k]]};
            std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
            if (entries_.front().x == entries_.back().x) continue;
            ++scored;
            if (auto s = scan_sorted(entries_, criterion_, config_.min_leaf_size)) {
                const int fi = static_cast<int>(f);
                const double d = s->impurity_decrease, bd = best.split.impurity_decrease;
                const bool better =
                    best.feature < 0 || d > bd + kSplitTieTolerance ||
                    (d >= bd - kSplitTieTolerance &&
                     (s->threshold < best.split.threshold ||
                      (s->threshold == best.split.threshold && fi < best.feature)));
                if (better) best = {fi, *s};
            }
            if (scored == split_features_) break;
        }
        return best;
    }

    std::span<const double> x_;
    std::size_t dim_;
    std::span<const double> y_;
    const ForestConfig& config_;
    Rng& rng_;
    SplitCriterion criterion_;
    std::size_t split_features_;
    std::vector<std::size_t> feature_order_;
    std::vector<SplitEntry> entries_;
    std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// Trains `config.n_trees` trees, each on an N-row bootstrap drawn from a seed
/// derived from (seed, tree index). The result does not depend on `workers`.
inline ForestModel train_forest(std::span<const double> features, std::size_t dim, std::span<const double> targets,
                                const ForestConfig& config, std::uint64_t seed, unsigned workers = 1) {
    config.validate();
    const std::size_t n = targets.size();
    if (n == 0) throw std::invalid_argument("train_forest: empty training set");
    if (dim == 0 || features.size() != n * dim) throw std::invalid_argument("train_forest: feature shape mismatch");
    if (config.mode == ForestMode::classification)
        for (double t : targets)
            if (t != 0.0 && t != 1.0) throw std::invalid_argument("train_forest: classification targets must be 0 or 1");
    for (double v : features)
        if (!std::isfinite(v)) throw std::invalid_argument("train_forest: non-finite feature value");
    for (double t : targets)
        if (!std::isfinite(t)) throw std::invalid_argument("train_forest: non-finite target");

    std::vector<Tree> trees(config.n_trees);
    std::vector<std::vector<std::uint32_t>> bags(config.n_trees);
    parallel_for(config.n_trees, workers, [&](std::size_t t) {
        Rng rng(derive_seed(seed, "tree", t));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) r = pick(rng);
        std::sort(rows.begin(), rows.end());
        bags[t].assign(rows.begin(), rows.end());
        detail::TreeBuilder builder(features, dim, targets, config, rng);
        trees[t] = builder.build(std::move(rows));
    });
    return ForestModel(config, dim, std::move(trees), std::move(bags), seed);
}

namespace detail {
inline void check_input(const ForestModel& model, std::span<const double> x) {
    if (x.size() != model.feature_count())
        throw std::invalid_argument("forest: input has " + std::to_string(x.size()) + " features, model expects " +
                                    std::to_string(model.feature_count()));
}

inline double mean_prediction(const ForestModel& model, std::span<const double> x) {
    double sum = 0.0;
    for (const Tree& t : model.trees()) sum += t.predict(x);
    return sum / static_cast<double>(model.n_trees());
}
}  // namespace detail

/// Per-tree leaf values at x, in tree order.
inline std::vector<double> tree_predictions(const ForestModel& model, std::span<const double> x) {
    detail::check_input(model, x);
    std::vector<double> out;
    out.reserve(model.n_trees());
    for (const Tree& t : model.trees()) out.push_back(t.predict(x));
    return out;
}

/// Probability of class 0: mean over trees of the leaf class-0 frequency.
inline double predict_proba(const ForestModel& model, std::span<const double> x) {
    if (model.mode() != ForestMode::classification)
        throw std::invalid_argument("predict_proba: model is not a classifier");
    detail::check_input(model, x);
    return detail::mean_prediction(model, x);
}

inline double predict_regression(const ForestModel& model, std::span<const double> x) {
    if (model.mode() != ForestMode::regression)
        throw std::invalid_argument("predict_regression: model is not a regressor");
    detail::check_input(model, x);
    return detail::mean_prediction(model, x);
}

/// Hard label for a class-0 probability; an exact 0.5 resolves to class 0.
inline int label_from_probability(double p0) noexcept { return p0 >= 0.5 ? 0 : 1; }

inline constexpr double kOobFallback = 1.0;

/// Out-of-bag accuracy: each training row is classified by majority vote of
/// the trees whose bootstrap excludes it (a tied vote goes to class 0). Rows
/// that every tree saw are skipped; if all are skipped, `fallback` is returned.
inline double oob_accuracy(const ForestModel& model, std::span<const double> features, std::span<const double> targets,
                           double fallback = kOobFallback) {
    if (model.mode() != ForestMode::classification) throw std::invalid_argument("oob_accuracy: needs a classifier");
    const std::size_t n = targets.size();
    const std::size_t dim = model.feature_count();
    if (model.bags().size() != model.n_trees())
        throw std::invalid_argument("oob_accuracy: model carries no bootstrap samples");
    if (features.size() != n * dim) throw std::invalid_argument("oob_accuracy: feature shape mismatch");

    std::vector<int> votes0(n, 0), votes1(n, 0);
    std::vector<char> in_bag(n);
    for (std::size_t t = 0; t < model.n_trees(); ++t) {
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (std::uint32_t r : model.bags()[t]) {
            if (r >= n) throw std::invalid_argument("oob_accuracy: bootstrap index outside training set");
            in_bag[r] = 1;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (in_bag[i]) continue;
            const double p0 = model.trees()[t].predict(features.subspan(i * dim, dim));
            (label_from_probability(p0) == 0 ? votes0 : votes1)[i]++;
        }
    }
    std::size_t covered = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (votes0[i] + votes1[i] == 0) continue;
        ++covered;
        const int predicted = votes0[i] >= votes1[i] ? 0 : 1;
        if (static_cast<double>(predicted) == targets[i]) ++correct;
    }
    return covered == 0 ? fallback : static_cast<double>(correct) / static_cast<double>(covered);
}

/// Mean decrease in impurity per feature, weighted by node sample counts and
/// summed over every split of every tree, then normalised to sum to 1.
/// All zeros when the forest has no split.
inline std::vector<double> feature_importances(const ForestModel& model) {
    std::vector<double> imp(model.feature_count(), 0.0);
    for (const Tree& t : model.trees())
        for (const TreeNode& node : t.nodes)
            if (!node.is_leaf())
                imp[static_cast<std::size_t>(node.feature)] +=
                    static_cast<double>(node.sample_count) * std::max(0.0, node.impurity_decrease);
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0)
        for (double& v : imp) v /= total;
    return imp;
}

inline double avg_tree_depth(const ForestModel& model) {
    double sum = 0.0;
    for (const Tree& t : model.trees()) sum += static_cast<double>(t.depth());
    return sum / static_cast<double>(model.n_trees());
}

// JSON ---------------------------------------------------------------------

inline constexpr int kForestFormat = 1;

inline nlohmann::json to_json(const ForestConfig& c) {
    return {{"n_trees", c.n_trees},
            {"max_depth", c.max_depth},
            {"min_leaf_size", c.min_leaf_size},
            {"features_per_split", c.features_per_split},
            {"mode", to_string(c.mode)}};
}

/// Missing keys keep the values of `defaults`.
inline ForestConfig forest_config_from_json(const nlohmann::json& j, ForestConfig defaults) {
    if (!j.is_object()) throw std::invalid_argument("forest config must be a JSON object");
    ForestConfig c = defaults;
    for (const auto& [key, value] : j.items()) {
        if (key == "n_trees") c.n_trees = value.get<std::size_t>();
        else if (key == "max_depth") c.max_depth = value.get<std::size_t>();
        else if (key == "min_leaf_size") c.min_leaf_size = value.get<std::size_t>();
        else if (key == "features_per_split") c.features_per_split = value.get<std::size_t>();
        else if (key == "mode") c.mode = forest_mode_from_string(value.get<std::string>());
        else throw std::invalid_argument("unknown forest config key '" + key + "'");
    }
    c.validate();
    return c;
}

namespace detail {

inline nlohmann::json node_to_json(const Tree& tree, std::size_t i) {
    const TreeNode& n = tree.nodes[i];
    nlohmann::json j = {{"value", n.value}, {"count", n.sample_count}};
    if (!n.is_leaf()) {
        j["feature"] = n.feature;
        j["threshold"] = n.threshold;
        j["decrease"] = n.impurity_decrease;
        j["left"] = node_to_json(tree, static_cast<std::size_t>(n.left));
        j["right"] = node_to_json(tree, static_cast<std::size_t>(n.right));
    }
    return j;
}

inline std::int32_t node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes, std::size_t dim) {
    const auto id = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    TreeNode n;
    n.value = j.at("value").get<double>();
    n.sample_count = j.at("count").get<std::size_t>();
    if (j.contains("feature")) {
        n.feature = j.at("feature").get<int>();
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= dim)
            throw std::invalid_argument("forest json: split feature out of range");
        n.threshold = j.at("threshold").get<double>();
        n.impurity_decrease = j.at("decrease").get<double>();
        n.left = node_from_json(j.at("left"), nodes, dim);
        n.right = node_from_json(j.at("right"), nodes, dim);
    }
    nodes[static_cast<std::size_t>(id)] = n;
    return id;
}

}  // namespace detail

/// `{format, mode, config, feature_count, seed, trees:[nested nodes]}`.
/// Bootstrap samples are not stored; a reloaded model has no OOB estimate.
inline nlohmann::json to_json(const ForestModel& model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : model.trees()) trees.push_back(detail::node_to_json(t, 0));
    return {{"format", kForestFormat},
            {"mode", to_string(model.mode())},
            {"config", to_json(model.config())},
            {"feature_count", model.feature_count()},
            {"seed", model.seed()},
            {"trees", std::move(trees)}};
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<int>() != kForestFormat)
            throw std::invalid_argument("forest json: unsupported format " + j.at("format").dump());
        ForestConfig config = forest_config_from_json(j.at("config"), {});
        if (forest_mode_from_string(j.at("mode").get<std::string>()) != config.mode)
            throw std::invalid_argument("forest json: mode disagrees with config");
        const auto dim = j.at("feature_count").get<std::size_t>();
        std::vector<Tree> trees;
        for (const auto& root : j.at("trees")) {
            Tree t;
            detail::node_from_json(root, t.nodes, dim);
            trees.push_back(std::move(t));
        }
        return ForestModel(config, dim, std::move(trees), {}, j.at("seed").get<std::uint64_t>());
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("forest json: ") + e.what());
    }
}

}  // namespace lal
