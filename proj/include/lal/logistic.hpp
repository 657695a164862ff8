#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace lal {

/// Linear logit model; `weights` holds D coefficients followed by the bias.
struct LogisticModel {
    std::vector<double> weights;

    std::size_t dim() const noexcept { return weights.empty() ? 0 : weights.size() - 1; }

    double logit(std::span<const double> x) const noexcept {
        double z = weights.back();
        for (std::size_t d = 0; d < x.size(); ++d) z += weights[d] * x[d];
        return z;
    }
};

inline double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// P(y = 1 | x).
inline double predict_logistic(const LogisticModel& model, std::span<const double> x) {
    if (x.size() != model.dim()) throw std::invalid_argument("predict_logistic: dimension mismatch");
    return sigmoid(model.logit(x));
}

/// Mean negative log-likelihood over the rows of `features` (row-major).
inline double logistic_loss(const LogisticModel& model, std::span<const double> features,
                            std::span<const double> targets) {
    const std::size_t dim = model.dim();
    double loss = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double z = model.logit(features.subspan(i * dim, dim));
        // log(1 + e^z) - y z, evaluated without overflow
        const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        loss += softplus - targets[i] * z;
    }
    return loss / static_cast<double>(targets.size());
}

/// Gradient of logistic_loss with respect to the weights (bias last).
inline std::vector<double> logistic_gradient(const LogisticModel& model, std::span<const double> features,
                                             std::span<const double> targets) {
    const std::size_t dim = model.dim();
    std::vector<double> grad(dim + 1, 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto x = features.subspan(i * dim, dim);
        const double r = sigmoid(model.logit(x)) - targets[i];
        for (std::size_t d = 0; d < dim; ++d) grad[d] += r * x[d];
        grad[dim] += r;
    }
    for (double& g : grad) g /= static_cast<double>(targets.size());
    return grad;
}

/// Full-batch gradient descent from zero weights.
inline LogisticModel train_logistic(std::span<const double> features, std::size_t dim, std::span<const double> targets,
                                    double learn_rate, std::size_t iterations) {
    if (targets.empty()) throw std::invalid_argument("train_logistic: empty training set");
    if (dim == 0 || features.size() != targets.size() * dim)
        throw std::invalid_argument("train_logistic: feature shape mismatch");
    if (!(learn_rate > 0.0)) throw std::invalid_argument("train_logistic: learn_rate must be > 0");
    LogisticModel model{std::vector<double>(dim + 1, 0.0)};
    for (std::size_t it = 0; it < iterations; ++it) {
        const auto grad = logistic_gradient(model, features, targets);
        for (std::size_t d = 0; d <= dim; ++d) model.weights[d] -= learn_rate * grad[d];
    }
    return model;
}

}  // namespace lal
