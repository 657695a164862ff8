#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "lal/dataset.hpp"
#include "lal/forest.hpp"
#include "lal/random.hpp"
#include "lal/state_features.hpp"

namespace lal {

enum class Provenance { independent, iterative };

inline const char* to_string(Provenance p) { return p == Provenance::independent ? "independent" : "iterative"; }

inline Provenance provenance_from_string(const std::string& s) {
    if (s == "independent") return Provenance::independent;
    if (s == "iterative") return Provenance::iterative;
    throw std::invalid_argument("unknown provenance '" + s + "'");
}

struct RandomStrategy {};
struct UncertaintyStrategy {};

/// Queries the candidate with the largest regressed error reduction.
struct LalStrategy {
    ForestModel regressor;
    std::vector<std::string> feature_schema = lal::feature_schema();
    Provenance provenance = Provenance::independent;
    nlohmann::json training_metadata = nlohmann::json::object();

    StateOptions state_options() const {
        return {.normalize_labeled_size = feature_schema.size() == kStateSize &&
                                          feature_schema[kClassifierStateSize - 1] == "labeled_fraction",
                .oob_fallback = training_metadata.is_object() ? training_metadata.value("oob_fallback", kOobFallback)
                                                              : kOobFallback};
    }
};

using Strategy = std::variant<RandomStrategy, UncertaintyStrategy, LalStrategy>;

inline std::string strategy_kind(const Strategy& s) {
    if (std::holds_alternative<RandomStrategy>(s)) return "random";
    if (std::holds_alternative<UncertaintyStrategy>(s)) return "uncertainty";
    return "lal";
}

struct SelectOptions {
    /// Break argmax ties uniformly at random instead of by smallest index.
    bool random_ties = false;
};

/// Work counters for one or more select calls.
struct SelectionStats {
    std::size_t classifier_state_computations = 0;
    std::size_t regressor_evaluations = 0;
};

/// Binary entropy in bits, with 0 log 0 = 0.
inline double entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("entropy: probability outside [0, 1]");
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

/// Entropies this close are treated as tied (H(p) and H(1-p) may differ in
/// the last bit).
inline constexpr double kEntropyTieTolerance = 1e-12;

namespace detail {

inline void require_candidates(const PoolState& pool) {
    if (pool.unlabeled.empty()) throw std::invalid_argument("select: unlabeled pool is empty");
}

/// Index of the best score; candidates are visited in ascending dataset
/// index order so the first maximum is the smallest index.
template <class Score>
std::size_t argmax_candidate(const std::vector<std::size_t>& candidates, double tolerance, Score&& score,
                             const SelectOptions& options, Rng* rng) {
    std::vector<double> scores(candidates.size());
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_pos = 0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        scores[k] = score(k);
        if (scores[k] > best + tolerance) {
            best = scores[k];
            best_pos = k;
        }
    }
    if (!options.random_ties || rng == nullptr) return candidates[best_pos];
    std::vector<std::size_t> tied;
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (scores[k] >= best - tolerance && scores[k] <= best + tolerance) tied.push_back(candidates[k]);
    return tied[draw_index(tied.size(), *rng)];
}

}  // namespace detail

/// Argmax of predictive entropy over U_t (equivalently argmin |p - 0.5|).
inline std::size_t select_uncertainty(const PoolPredictions& predictions, const SelectOptions& options = {},
                                      Rng* rng = nullptr) {
    if (predictions.indices.empty()) throw std::invalid_argument("select: unlabeled pool is empty");
    return detail::argmax_candidate(
        predictions.indices, kEntropyTieTolerance, [&](std::size_t k) { return entropy(predictions.probability[k]); },
        options, rng);
}

inline std::size_t select_uncertainty(const ForestModel& model, const PoolState& pool, const Dataset& data) {
    detail::require_candidates(pool);
    return select_uncertainty(predict_pool(model, pool, data));
}

inline void check_schema(const LalStrategy& s) {
    if (s.regressor.mode() != ForestMode::regression)
        throw std::invalid_argument("LAL strategy: embedded forest is not a regressor");
    if (s.regressor.feature_count() != kStateSize)
        throw std::invalid_argument("LAL strategy: regressor expects " + std::to_string(s.regressor.feature_count()) +
                                    " features, state has " + std::to_string(kStateSize));
    if (s.feature_schema != feature_schema(s.state_options()))
        throw std::invalid_argument("LAL strategy: feature schema does not match this build's learning state");
}

/// Argmax over U_t of g(phi_t, psi_x). phi_t is computed once per call.
inline std::size_t select_lal(const LalStrategy& strategy, const ForestModel& model, const PoolState& pool,
                              const Dataset& data, const PoolPredictions& predictions,
                              SelectionStats* stats = nullptr, const SelectOptions& options = {},
                              Rng* rng = nullptr) {
    check_schema(strategy);
    detail::require_candidates(pool);
    const ClassifierState phi = classifier_state(model, pool, data, predictions, strategy.state_options());
    if (stats) ++stats->classifier_state_computations;
    return detail::argmax_candidate(
        predictions.indices, 0.0,
        [&](std::size_t k) {
            if (stats) ++stats->regressor_evaluations;
            const LearningState xi = assemble_state(phi, {predictions.probability[k]});
            return predict_regression(strategy.regressor, xi);
        },
        options, rng);
}

inline std::size_t select_lal(const LalStrategy& strategy, const ForestModel& model, const PoolState& pool,
                              const Dataset& data, SelectionStats* stats = nullptr) {
    detail::require_candidates(pool);
    return select_lal(strategy, model, pool, data, predict_pool(model, pool, data), stats);
}

/// One unlabeled index chosen by `strategy`. `model` is f_t trained on
/// training_set(data, pool). Random draws consume `rng`; the other
/// strategies only touch it for randomized tie-breaking.
inline std::size_t select(const Strategy& strategy, const ForestModel& model, const PoolState& pool,
                          const Dataset& data, Rng& rng, const SelectOptions& options = {},
                          SelectionStats* stats = nullptr) {
    detail::require_candidates(pool);
    if (std::holds_alternative<RandomStrategy>(strategy))
        return pool.unlabeled[detail::draw_index(pool.unlabeled.size(), rng)];
    const PoolPredictions predictions = predict_pool(model, pool, data);
    if (std::holds_alternative<UncertaintyStrategy>(strategy)) return select_uncertainty(predictions, options, &rng);
    return select_lal(std::get<LalStrategy>(strategy), model, pool, data, predictions, stats, options, &rng);
}

// Files ---------------------------------------------------------------------

inline constexpr int kStrategyFormat = 1;

class StrategyFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const Strategy& s) {
    nlohmann::json j = {{"format", kStrategyFormat}, {"kind", strategy_kind(s)}};
    if (const auto* lal = std::get_if<LalStrategy>(&s)) {
        j["feature_schema"] = lal->feature_schema;
        j["provenance"] = to_string(lal->provenance);
        j["training_metadata"] = lal->training_metadata;
        j["regressor"] = to_json(lal->regressor);
    }
    return j;
}

inline Strategy strategy_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw StrategyFileError("strategy: not a JSON object");
        const int format = j.at("format").get<int>();
        if (format != kStrategyFormat)
            throw StrategyFileError("strategy: unsupported format version " + std::to_string(format));
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "random") return RandomStrategy{};
        if (kind == "uncertainty") return UncertaintyStrategy{};
        if (kind != "lal") throw StrategyFileError("strategy: unknown kind '" + kind + "'");
        LalStrategy lal;
        lal.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
        lal.provenance = provenance_from_string(j.at("provenance").get<std::string>());
        lal.training_metadata = j.value("training_metadata", nlohmann::json::object());
        lal.regressor = forest_from_json(j.at("regressor"));
        check_schema(lal);
        return lal;
    } catch (const nlohmann::json::exception& e) {
        throw StrategyFileError(std::string("strategy: malformed record: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw StrategyFileError(e.what());
    }
}

/// Writes the strategy as a single-line JSON record.
inline void save_strategy(const Strategy& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << to_json(s).dump() << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline Strategy load_strategy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StrategyFileError("cannot open strategy file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw StrategyFileError("corrupt strategy file '" + path + "': " + e.what());
    }
    return strategy_from_json(j);
}

}  // namespace lal
