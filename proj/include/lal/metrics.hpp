#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lal {

/// Counts for the positive class 1.
struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }

    static ConfusionCounts from_predictions(std::span<const int> truth, std::span<const int> predicted) {
        if (truth.size() != predicted.size()) throw std::invalid_argument("confusion counts: length mismatch");
        ConfusionCounts c;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == 1) (predicted[i] == 1 ? c.tp : c.fn)++;
            else (predicted[i] == 1 ? c.fp : c.tn)++;
        }
        return c;
    }
};

inline double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("accuracy: no samples");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline double zero_one_loss(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("zero_one_loss: no samples");
    return static_cast<double>(c.fp + c.fn) / static_cast<double>(c.total());
}

/// tp / (tp + fp + fn); 1 when nothing was positive on either side.
inline double iou(const ConfusionCounts& c) {
    const std::size_t denom = c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// 2tp / (2tp + fp + fn); 1 when nothing was positive on either side.
inline double dice(const ConfusionCounts& c) {
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

/// Mann-Whitney area under the ROC curve; higher scores should indicate
/// class 1. Tied positive/negative pairs count one half.
inline double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    const std::size_t n = scores.size();
    if (labels.size() != n) throw std::invalid_argument("auc_roc: length mismatch");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of mid-ranks of the positives.
    double rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) {
                rank_sum += mid_rank;
                ++positives;
            }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw std::invalid_argument("auc_roc: undefined for a single-class label vector");
    const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

enum class Metric { accuracy, zero_one, iou, dice, auc };

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::accuracy: return "accuracy";
        case Metric::zero_one: return "zero_one";
        case Metric::iou: return "iou";
        case Metric::dice: return "dice";
        case Metric::auc: return "auc";
    }
    return "?";
}

inline Metric metric_from_string(const std::string& id) {
    if (id == "accuracy") return Metric::accuracy;
    if (id == "zero_one") return Metric::zero_one;
    if (id == "iou") return Metric::iou;
    if (id == "dice") return Metric::dice;
    if (id == "auc") return Metric::auc;
    throw std::invalid_argument("unknown metric '" + id + "' (expected accuracy|zero_one|iou|dice|auc)");
}

inline bool lower_is_better(Metric m) noexcept { return m == Metric::zero_one; }

/// Scores class-0 probabilities `p0` against `labels`. Hard predictions use
/// the p0 >= 0.5 -> class 0 rule; AUC scores by the class-1 probability 1 - p0.
inline double evaluate(Metric m, std::span<const double> p0, std::span<const int> labels) {
    if (p0.size() != labels.size()) throw std::invalid_argument("evaluate: length mismatch");
    if (m == Metric::auc) {
        std::vector<double> scores(p0.size());
        for (std::size_t i = 0; i < p0.size(); ++i) scores[i] = 1.0 - p0[i];
        return auc_roc(scores, labels);
    }
    std::vector<int> predicted(p0.size());
    for (std::size_t i = 0; i < p0.size(); ++i) predicted[i] = p0[i] >= 0.5 ? 0 : 1;
    const auto c = ConfusionCounts::from_predictions(labels, predicted);
    switch (m) {
        case Metric::accuracy: return accuracy(c);
        case Metric::zero_one: return zero_one_loss(c);
        case Metric::iou: return iou(c);
        case Metric::dice: return dice(c);
        case Metric::auc: break;
    }
    return 0.0;
}

/// The metric turned into a loss: itself for zero_one, 1 - value otherwise.
inline double evaluate_loss(Metric m, std::span<const double> p0, std::span<const int> labels) {
    const double v = evaluate(m, p0, labels);
    return lower_is_better(m) ? v : 1.0 - v;
}

}  // namespace lal
