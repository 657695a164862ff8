#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "lal/dataset.hpp"
#include "lal/forest.hpp"
#include "lal/metrics.hpp"
#include "lal/parallel.hpp"
#include "lal/random.hpp"
#include "lal/state_features.hpp"
#include "lal/strategy.hpp"

namespace lal {

/// Parameters of the Monte-Carlo simulation that produces regressor data.
struct MonteCarloConfig {
    std::size_t tau_min = 2;           // smallest labeled-set size
    std::size_t tau_max = 32;          // largest labeled-set size
    std::size_t initializations = 10;  // labeled sets drawn per size (Q)
    std::size_t candidates = 10;       // candidate points tried per labeled set (M)
    ForestConfig classifier = ForestConfig::classifier();
    ForestConfig regressor = ForestConfig::regressor();
    Metric test_loss = Metric::zero_one;
    StateOptions state;
    std::uint64_t seed = 0;
    unsigned workers = 1;

    std::size_t size_count() const noexcept { return tau_max - tau_min + 1; }

    void validate() const {
        if (tau_min < 2) throw std::invalid_argument("monte carlo: tau_min must be >= 2");
        if (tau_max < tau_min) throw std::invalid_argument("monte carlo: tau_max must be >= tau_min");
        if (initializations < 1) throw std::invalid_argument("monte carlo: initializations (Q) must be >= 1");
        if (candidates < 1) throw std::invalid_argument("monte carlo: candidates (M) must be >= 1");
        if (classifier.mode != ForestMode::classification)
            throw std::invalid_argument("monte carlo: classifier config must be in classification mode");
        if (regressor.mode != ForestMode::regression)
            throw std::invalid_argument("monte carlo: regressor config must be in regression mode");
        classifier.validate();
        regressor.validate();
    }
};

/// One observation: learning state, observed loss reduction, and the
/// (tau, q, m) cell that produced it.
struct RegressionRow {
    LearningState xi{};
    double delta = 0.0;
    std::size_t tau = 0;
    std::size_t q = 0;
    std::size_t m = 0;
};

struct RegressionSet {
    std::vector<RegressionRow> rows;

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }

    void append(const RegressionSet& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

    /// Orders rows by (tau, q, m).
    void sort_canonical() {
        std::sort(rows.begin(), rows.end(), [](const RegressionRow& a, const RegressionRow& b) {
            return std::tie(a.tau, a.q, a.m) < std::tie(b.tau, b.q, b.m);
        });
    }

    std::vector<double> feature_matrix() const {
        std::vector<double> out;
        out.reserve(rows.size() * kStateSize);
        for (const auto& r : rows) out.insert(out.end(), r.xi.begin(), r.xi.end());
        return out;
    }

    std::vector<double> deltas() const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.delta);
        return out;
    }
};

/// Produces (L_tau, U_tau) with |L_tau| = tau from the training set.
using SplitFn = std::function<PoolState(const Dataset& train, std::size_t tau, Rng& rng)>;

/// tau rows drawn uniformly without replacement, redrawn (up to 16 times)
/// until both classes are present.
inline PoolState random_split(const Dataset& train, std::size_t tau, Rng& rng) {
    const std::size_t n = train.size();
    if (tau < 2 || tau >= n)
        throw std::invalid_argument("split: tau=" + std::to_string(tau) + " must satisfy 2 <= tau < N=" +
                                    std::to_string(n));
    std::vector<std::size_t> order(n);
    for (int attempt = 0; attempt < kWarmStartAttempts; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        bool seen[2] = {false, false};
        for (std::size_t k = 0; k < tau; ++k) seen[train.labels[order[k]]] = true;
        if (seen[0] && seen[1])
            return PoolState::from_labeled({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tau)}, n);
    }
    throw std::runtime_error("split: no two-class labeled set of size " + std::to_string(tau) + " after " +
                             std::to_string(kWarmStartAttempts) + " attempts");
}

/// Class-0 probabilities of `model` on every row of `data`.
inline std::vector<double> predict_all(const ForestModel& model, const Dataset& data) {
    std::vector<double> p0(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) p0[i] = predict_proba(model, data.row(i));
    return p0;
}

inline double test_loss(const ForestModel& model, const Dataset& test, Metric metric) {
    return evaluate_loss(metric, predict_all(model, test), test.labels);
}

/// Simulates one labeled set of size tau: trains f_tau, then for up to M
/// candidates x drawn without replacement from U_tau retrains on
/// L_tau + {x} and records (xi, loss(f_tau) - loss(f_x)). f_tau and every
/// f_x share one classifier seed. Rows are tagged (tau, q, m).
inline RegressionSet data_monte_carlo(const Dataset& train, const Dataset& test, const ForestConfig& classifier,
                                      const SplitFn& split_fn, std::size_t tau, std::size_t candidates,
                                      std::uint64_t seed, Metric loss = Metric::zero_one,
                                      const StateOptions& state = {}, std::size_t q = 0) {
    if (!train.has_both_classes()) throw std::invalid_argument("monte carlo: training set needs both classes");
    if (tau >= train.size())
        throw std::invalid_argument("monte carlo: tau=" + std::to_string(tau) + " exceeds the available samples");
    if (loss == Metric::auc && !test.has_both_classes())
        throw std::invalid_argument("monte carlo: AUC loss needs both classes in the test set");

    Rng split_rng(derive_seed(seed, "split"));
    const PoolState pool = split_fn(train, tau, split_rng);
    if (pool.labeled.size() != tau || !pool.is_partition_of(train.size()))
        throw std::logic_error("monte carlo: split function returned a malformed partition");
    bool seen[2] = {false, false};
    for (std::size_t i : pool.labeled) seen[train.labels[i]] = true;
    if (!seen[0] || !seen[1]) throw std::runtime_error("monte carlo: split produced a single-class labeled set");

    const std::uint64_t classifier_seed = derive_seed(seed, "classifier");
    const ForestModel f_tau = train_classifier(train, pool, classifier, classifier_seed);
    const double loss_tau = test_loss(f_tau, test, loss);
    const PoolPredictions predictions = predict_pool(f_tau, pool, train);
    const ClassifierState phi = classifier_state(f_tau, pool, train, predictions, state);

    std::vector<std::size_t> order(predictions.indices.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng draw_rng(derive_seed(seed, "candidates"));
    std::shuffle(order.begin(), order.end(), draw_rng);
    const std::size_t draws = std::min(candidates, order.size());

    RegressionSet out;
    out.rows.reserve(draws);
    for (std::size_t m = 0; m < draws; ++m) {
        const std::size_t pos = order[m];
        PoolState with_x = pool;
        with_x.label(predictions.indices[pos]);
        const ForestModel f_x = train_classifier(train, with_x, classifier, classifier_seed);
        const double loss_x = test_loss(f_x, test, loss);
        out.rows.push_back({assemble_state(phi, {predictions.probability[pos]}), loss_tau - loss_x, tau, q, m});
    }
    return out;
}

/// A split that starts from `start_size` random rows and grows to tau by
/// repeatedly querying `strategy` with a classifier retrained on the
/// current labeled set.
inline SplitFn growing_split(LalStrategy strategy, std::size_t start_size, ForestConfig classifier) {
    return [strategy = std::move(strategy), start_size, classifier](const Dataset& train, std::size_t tau,
                                                                    Rng& rng) {
        if (tau < start_size) throw std::invalid_argument("growing split: tau below the random start size");
        PoolState pool = random_split(train, start_size, rng);
        while (pool.labeled.size() < tau) {
            const ForestModel f = train_classifier(train, pool, classifier, rng());
            pool.label(select_lal(strategy, f, pool, train));
        }
        return pool;
    };
}

/// A trained LAL strategy together with the data it was fitted on.
struct LalBuild {
    LalStrategy strategy;
    RegressionSet regression_set;
};

namespace detail {

inline std::uint64_t cell_seed(const MonteCarloConfig& config, std::size_t tau, std::size_t q) {
    return derive_seed(config.seed, "cell", tau, q);
}

/// Runs the Q cells of one labeled-set size and returns their rows in (q, m) order.
inline RegressionSet collect_size(const MonteCarloConfig& config, const Dataset& train, const Dataset& test,
                                  const SplitFn& split_fn, std::size_t tau) {
    std::vector<RegressionSet> cells(config.initializations);
    parallel_for(config.initializations, config.workers, [&](std::size_t q) {
        cells[q] = data_monte_carlo(train, test, config.classifier, split_fn, tau, config.candidates,
                                    cell_seed(config, tau, q), config.test_loss, config.state, q);
    });
    RegressionSet out;
    for (const auto& c : cells) out.append(c);
    return out;
}

inline ForestModel fit_regressor(const MonteCarloConfig& config, const RegressionSet& data, std::uint64_t seed) {
    if (data.empty()) throw std::runtime_error("regressor: the pooled regression set is empty");
    const auto x = data.feature_matrix();
    const auto y = data.deltas();
    return train_forest(x, kStateSize, y, config.regressor, seed, config.workers);
}

inline nlohmann::json build_metadata(const MonteCarloConfig& config, const RegressionSet& data,
                                     const Dataset& train) {
    return {{"rows", data.size()},
            {"tau_min", config.tau_min},
            {"tau_max", config.tau_max},
            {"initializations", config.initializations},
            {"candidates", config.candidates},
            {"test_loss", to_string(config.test_loss)},
            {"oob_fallback", config.state.oob_fallback},
            {"seed", config.seed},
            {"classifier", to_json(config.classifier)},
            {"representative", train.name},
            {"representative_size", train.size()}};
}

inline void check_inputs(const MonteCarloConfig& config, const Dataset& train, const Dataset& test) {
    config.validate();
    train.validate();
    test.validate();
    if (train.dim != test.dim) throw std::invalid_argument("monte carlo: train and test dimensions differ");
    if (!train.has_both_classes()) throw std::invalid_argument("monte carlo: training set needs both classes");
    if (config.tau_max >= train.size())
        throw std::invalid_argument("monte carlo: tau_max=" + std::to_string(config.tau_max) +
                                    " must be below the training-set size " + std::to_string(train.size()));
}

}  // namespace detail

/// Random labeled sets for every (tau, q), pooled and sorted by (tau, q, m).
inline RegressionSet collect_independent(const MonteCarloConfig& config, const Dataset& train, const Dataset& test) {
    detail::check_inputs(config, train, test);
    const SplitFn split = random_split;
    RegressionSet all;
    for (std::size_t tau = config.tau_min; tau <= config.tau_max; ++tau)
        all.append(detail::collect_size(config, train, test, split, tau));
    all.sort_canonical();
    return all;
}

inline LalBuild build_lal_independent(const MonteCarloConfig& config, const Dataset& representative,
                                      const Dataset& test) {
    RegressionSet data = collect_independent(config, representative, test);
    LalStrategy strategy;
    strategy.regressor = detail::fit_regressor(config, data, derive_seed(config.seed, "regressor"));
    strategy.feature_schema = feature_schema(config.state);
    strategy.provenance = Provenance::independent;
    strategy.training_metadata = detail::build_metadata(config, data, representative);
    return {std::move(strategy), std::move(data)};
}

/// The first size uses random labeled sets; every later size tau grows its
/// labeled sets from tau_min random rows with the strategy whose regressor
/// was fitted on all rows gathered for sizes below tau. The final regressor
/// is fitted on every row.
inline LalBuild build_lal_iterative(const MonteCarloConfig& config, const Dataset& representative,
                                    const Dataset& test) {
    detail::check_inputs(config, representative, test);
    RegressionSet all;
    std::optional<LalStrategy> current;
    for (std::size_t tau = config.tau_min; tau <= config.tau_max; ++tau) {
        const SplitFn split = current ? growing_split(*current, config.tau_min, config.classifier)
                                      : SplitFn(random_split);
        all.append(detail::collect_size(config, representative, test, split, tau));
        if (tau < config.tau_max) {
            LalStrategy next;
            next.regressor = detail::fit_regressor(config, all, derive_seed(config.seed, "intermediate", tau));
            next.feature_schema = feature_schema(config.state);
            next.provenance = Provenance::iterative;
            current = std::move(next);
        }
    }
    all.sort_canonical();
    LalStrategy strategy;
    strategy.regressor = detail::fit_regressor(config, all, derive_seed(config.seed, "regressor"));
    strategy.feature_schema = feature_schema(config.state);
    strategy.provenance = Provenance::iterative;
    strategy.training_metadata = detail::build_metadata(config, all, representative);
    return {std::move(strategy), std::move(all)};
}

inline LalBuild build_lal(Provenance provenance, const MonteCarloConfig& config, const Dataset& representative,
                          const Dataset& test) {
    return provenance == Provenance::independent ? build_lal_independent(config, representative, test)
                                                 : build_lal_iterative(config, representative, test);
}

/// Synthetic representative data for cold-start strategies: 2-D Gaussian clouds.
struct ColdStartConfig {
    MonteCarloConfig monte_carlo;
    Provenance provenance = Provenance::independent;
    std::size_t train_size = 1000;
    std::size_t test_size = 1000;
    double class0_fraction = 0.5;
    double separation = 2.0;
};

inline std::pair<Dataset, Dataset> cold_start_representative(const ColdStartConfig& config) {
    const std::uint64_t seed = config.monte_carlo.seed;
    return {gen_gaussian_clouds(config.train_size, config.class0_fraction, config.separation, 2,
                                derive_seed(seed, "representative-train")),
            gen_gaussian_clouds(config.test_size, config.class0_fraction, config.separation, 2,
                                derive_seed(seed, "representative-test"))};
}

inline LalBuild build_cold_start_strategy(const ColdStartConfig& config) {
    const auto [train, test] = cold_start_representative(config);
    LalBuild build = build_lal(config.provenance, config.monte_carlo, train, test);
    build.strategy.training_metadata["start"] = "cold";
    build.strategy.training_metadata["class0_fraction"] = config.class0_fraction;
    build.strategy.training_metadata["separation"] = config.separation;
    return build;
}

/// Application-specific strategy: `n0` labeled rows of the user's data are
/// drawn (both classes required), then split into simulation train/test parts.
inline LalBuild build_warm_start_strategy(const MonteCarloConfig& config, Provenance provenance, const Dataset& data,
                                          std::size_t n0, double test_fraction) {
    data.validate();
    const PoolState initial = init_warm_start(data, n0, derive_seed(config.seed, "warm-sample"));
    Dataset labeled = data.subset(initial.sorted_labeled());
    auto [train, test] = split(labeled, test_fraction, derive_seed(config.seed, "warm-split"));
    LalBuild build = build_lal(provenance, config, train, test);
    build.strategy.training_metadata["start"] = "warm";
    build.strategy.training_metadata["warm_start_size"] = n0;
    return build;
}

/// Regressor fit on its own training rows: in-sample and out-of-bag MSE.
struct RegressorFit {
    std::size_t rows = 0;
    double mean_delta = 0.0;
    double train_mse = 0.0;
    double oob_mse = 0.0;  // NaN when no row is out of bag for any tree
};

inline RegressorFit regressor_fit(const ForestModel& g, const RegressionSet& data) {
    RegressorFit fit;
    fit.rows = data.size();
    if (data.empty()) return fit;
    const auto n = data.size();
    std::vector<double> oob_sum(n, 0.0);
    std::vector<std::size_t> oob_count(n, 0);
    std::vector<char> in_bag(n);
    for (std::size_t t = 0; t < g.n_trees() && g.bags().size() == g.n_trees(); ++t) {
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (auto r : g.bags()[t]) in_bag[r] = 1;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_bag[i]) {
                oob_sum[i] += g.trees()[t].predict(data.rows[i].xi);
                ++oob_count[i];
            }
    }
    double se = 0.0, oob_se = 0.0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = data.rows[i].delta;
        fit.mean_delta += d;
        const double e = predict_regression(g, data.rows[i].xi) - d;
        se += e * e;
        if (oob_count[i] > 0) {
            const double o = oob_sum[i] / static_cast<double>(oob_count[i]) - d;
            oob_se += o * o;
            ++covered;
        }
    }
    fit.mean_delta /= static_cast<double>(n);
    fit.train_mse = se / static_cast<double>(n);
    fit.oob_mse = covered ? oob_se / static_cast<double>(covered) : std::numeric_limits<double>::quiet_NaN();
    return fit;
}

inline void write_regression_set_csv(const RegressionSet& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    for (std::size_t k = 0; k < kStateSize; ++k) out << "xi_" << k << ',';
    out << "delta,tau,q,m\n";
    char buf[32];
    auto put = [&](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, ptr - buf);
    };
    for (const auto& r : data.rows) {
        for (double v : r.xi) {
            put(v);
            out << ',';
        }
        put(r.delta);
        out << ',' << r.tau << ',' << r.q << ',' << r.m << '\n';
    }
}

}  // namespace lal
