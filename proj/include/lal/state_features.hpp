#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lal/dataset.hpp"
#include "lal/forest.hpp"

namespace lal {

inline constexpr std::size_t kClassifierStateSize = 6;
inline constexpr std::size_t kDatapointStateSize = 1;
inline constexpr std::size_t kStateSize = kClassifierStateSize + kDatapointStateSize;

/// Classifier state, in order: class-0 proportion of L_t, OOB accuracy,
/// variance of feature importances, forest variance on U_t, average tree
/// depth, labeled-set size.
using ClassifierState = std::array<double, kClassifierStateSize>;
/// Datapoint state: predicted class-0 probability of the candidate.
using DatapointState = std::array<double, kDatapointStateSize>;
/// Classifier state followed by datapoint state.
using LearningState = std::array<double, kStateSize>;

struct StateOptions {
    /// Report |L_t| / N instead of |L_t|.
    bool normalize_labeled_size = false;
    /// OOB accuracy reported when no labeled row is out of bag for any tree.
    double oob_fallback = kOobFallback;
};

/// Ordered feature names. A regressor trained on one schema must not be
/// queried with another.
inline std::vector<std::string> feature_schema(const StateOptions& options = {}) {
    return {"proportion_class0", "oob_accuracy",   "importance_variance",
            "forest_variance",   "avg_tree_depth", options.normalize_labeled_size ? "labeled_fraction" : "labeled_size",
            "predicted_probability"};
}

/// Labeled rows (ascending index order) as a standalone training set.
inline Dataset training_set(const Dataset& data, const PoolState& pool) {
    const auto rows = pool.sorted_labeled();
    return data.subset(rows);
}

inline std::vector<double> as_targets(const Dataset& data) {
    return {data.labels.begin(), data.labels.end()};
}

/// The classifier f_t for the current labeled set.
inline ForestModel train_classifier(const Dataset& data, const PoolState& pool, const ForestConfig& config,
                                    std::uint64_t seed, unsigned workers = 1) {
    const Dataset train = training_set(data, pool);
    const auto targets = as_targets(train);
    return train_forest(train.features, train.dim, targets, config, seed, workers);
}

/// Classifier outputs over the unlabeled pool, computed once per iteration
/// and shared by the classifier state and every candidate's datapoint state.
struct PoolPredictions {
    std::vector<std::size_t> indices;    // same order as pool.unlabeled
    std::vector<double> probability;     // class-0 probability
    std::vector<double> tree_variance;   // population variance across trees
};

inline PoolPredictions predict_pool(const ForestModel& model, const PoolState& pool, const Dataset& data) {
    if (model.mode() != ForestMode::classification) throw std::invalid_argument("predict_pool: needs a classifier");
    if (model.feature_count() != data.dim) throw std::invalid_argument("predict_pool: dimension mismatch");
    PoolPredictions out;
    out.indices = pool.unlabeled;
    out.probability.reserve(pool.unlabeled.size());
    out.tree_variance.reserve(pool.unlabeled.size());
    const auto n_trees = static_cast<double>(model.n_trees());
    std::vector<double> per_tree(model.n_trees());
    for (std::size_t i : pool.unlabeled) {
        const auto x = data.row(i);
        double sum = 0.0;
        for (std::size_t t = 0; t < per_tree.size(); ++t) {
            per_tree[t] = model.trees()[t].predict(x);
            sum += per_tree[t];
        }
        const double mean = sum / n_trees;
        double ss = 0.0;
        for (double v : per_tree) ss += (v - mean) * (v - mean);
        out.probability.push_back(mean);
        out.tree_variance.push_back(ss / n_trees);
    }
    return out;
}

inline double population_variance(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size());
}

/// `model` must have been trained on training_set(data, pool).
inline ClassifierState classifier_state(const ForestModel& model, const PoolState& pool, const Dataset& data,
                                        const PoolPredictions& predictions, const StateOptions& options = {}) {
    if (pool.unlabeled.empty())
        throw std::invalid_argument("classifier_state: unlabeled pool is empty (forest variance undefined); stop the AL loop");
    if (pool.labeled.empty()) throw std::invalid_argument("classifier_state: labeled set is empty");
    if (predictions.indices != pool.unlabeled)
        throw std::invalid_argument("classifier_state: pool predictions do not match the pool");

    const Dataset train = training_set(data, pool);
    const auto targets = as_targets(train);

    double forest_variance = 0.0;
    for (double v : predictions.tree_variance) forest_variance += v;
    forest_variance /= static_cast<double>(predictions.tree_variance.size());

    const double labeled = static_cast<double>(pool.labeled.size());
    return {static_cast<double>(train.count_label(0)) / labeled,
            oob_accuracy(model, train.features, targets, options.oob_fallback),
            population_variance(feature_importances(model)),
            forest_variance,
            avg_tree_depth(model),
            options.normalize_labeled_size ? labeled / static_cast<double>(data.size()) : labeled};
}

inline ClassifierState classifier_state(const ForestModel& model, const PoolState& pool, const Dataset& data,
                                        const StateOptions& options = {}) {
    return classifier_state(model, pool, data, predict_pool(model, pool, data), options);
}

inline DatapointState datapoint_features(const ForestModel& model, std::span<const double> x) {
    return {predict_proba(model, x)};
}

inline LearningState assemble_state(const ClassifierState& phi, const DatapointState& psi) {
    LearningState xi{};
    for (std::size_t k = 0; k < kClassifierStateSize; ++k) xi[k] = phi[k];
    for (std::size_t r = 0; r < kDatapointStateSize; ++r) xi[kClassifierStateSize + r] = psi[r];
    return xi;
}

}  // namespace lal
