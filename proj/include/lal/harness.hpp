#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lal/dataset.hpp"
#include "lal/forest.hpp"
#include "lal/lal_training.hpp"
#include "lal/logistic.hpp"
#include "lal/metrics.hpp"
#include "lal/parallel.hpp"
#include "lal/random.hpp"
#include "lal/state_features.hpp"
#include "lal/strategy.hpp"

namespace lal {

enum class InitKind { cold, warm };

struct InitConfig {
    InitKind kind = InitKind::cold;
    std::size_t warm_size = 0;  // n0 for warm starts
};

inline PoolState initial_pool(const Dataset& train, const InitConfig& init, std::uint64_t seed) {
    return init.kind == InitKind::cold ? init_cold_start(train, seed) : init_warm_start(train, init.warm_size, seed);
}

struct AlConfig {
    ForestConfig classifier = ForestConfig::classifier();
    Metric metric = Metric::accuracy;
    std::size_t budget = 0;  // number of queries
    InitConfig init;
    SelectOptions select;
};

struct SelectionRecord {
    std::size_t iteration = 0;
    std::size_t index = 0;
    double probability = 0.0;  // class-0 probability of the chosen row under f_t
};

using SelectionTrace = std::vector<SelectionRecord>;

struct AlRun {
    std::vector<double> trace;  // metric after 0..budget queries
    SelectionTrace selections;
    PoolState final_pool;
    SelectionStats stats;
};

namespace detail {
inline std::uint64_t classifier_seed(std::uint64_t seed, std::size_t labeled) {
    return derive_seed(seed, "classifier", labeled);
}
}  // namespace detail

/// The pool-based loop from a given initial partition: train f_t on L_t,
/// score it on `test`, query one row, reveal its true label, repeat. The
/// classifier seed depends only on (seed, |L_t|), so runs that share a seed
/// see the same forest randomness at each labeled-set size.
inline AlRun run_al(const Dataset& train, const Dataset& test, const Strategy& strategy, PoolState pool,
                    const AlConfig& config, std::uint64_t seed) {
    if (config.budget > pool.unlabeled.size())
        throw std::invalid_argument("run_al: budget " + std::to_string(config.budget) + " exceeds the pool size " +
                                    std::to_string(pool.unlabeled.size()));
    if (config.metric == Metric::auc && !test.has_both_classes())
        throw std::invalid_argument("run_al: AUC is undefined on a single-class test set");
    if (!pool.is_partition_of(train.size())) throw std::invalid_argument("run_al: malformed initial pool");

    Rng select_rng(derive_seed(seed, "select"));
    AlRun run;
    run.trace.reserve(config.budget + 1);
    for (std::size_t t = 0;; ++t) {
        const ForestModel f = train_classifier(train, pool, config.classifier,
                                               detail::classifier_seed(seed, pool.labeled.size()));
        run.trace.push_back(evaluate(config.metric, predict_all(f, test), test.labels));
        if (t == config.budget) break;
        const std::size_t chosen = select(strategy, f, pool, train, select_rng, config.select, &run.stats);
        run.selections.push_back({t, chosen, predict_proba(f, train.row(chosen))});
        pool.label(chosen);  // the simulated oracle reveals train.labels[chosen]
    }
    run.final_pool = std::move(pool);
    return run;
}

inline AlRun run_al(const Dataset& train, const Dataset& test, const Strategy& strategy, const AlConfig& config,
                    std::uint64_t seed) {
    return run_al(train, test, strategy, initial_pool(train, config.init, derive_seed(seed, "init")), config, seed);
}

struct NamedStrategy {
    std::string name;
    Strategy strategy;
};

/// Fresh (train, test) pair for a repetition seed.
using DatasetSource = std::function<std::pair<Dataset, Dataset>(std::uint64_t seed)>;

/// Re-splits one dataset per repetition.
inline DatasetSource resplit_source(Dataset data, double test_fraction) {
    return [data = std::move(data), test_fraction](std::uint64_t seed) { return split(data, test_fraction, seed); };
}

/// Draws independent train and test sets from a generator per repetition.
inline DatasetSource generated_source(std::function<Dataset(std::size_t n, std::uint64_t seed)> generate,
                                      std::size_t train_size, std::size_t test_size) {
    return [generate = std::move(generate), train_size, test_size](std::uint64_t seed) {
        return std::pair{generate(train_size, derive_seed(seed, "train")), generate(test_size, derive_seed(seed, "test"))};
    };
}

struct LearningCurve {
    std::string strategy;
    std::string dataset;
    std::string metric;
    std::uint64_t master_seed = 0;
    std::vector<std::size_t> budgets;
    std::vector<std::vector<double>> traces;  // one per repetition
    std::vector<double> mean;
    std::vector<double> std;                  // sample standard deviation; 0 for one repetition
    std::vector<SelectionTrace> selections;   // one per repetition

    /// Recomputes mean and std from the stored traces.
    void aggregate() {
        const std::size_t points = budgets.size();
        mean.assign(points, 0.0);
        std.assign(points, 0.0);
        if (traces.empty()) return;
        const auto reps = static_cast<double>(traces.size());
        for (std::size_t b = 0; b < points; ++b) {
            double sum = 0.0;
            for (const auto& t : traces) sum += t.at(b);
            mean[b] = sum / reps;
            if (traces.size() > 1) {
                double ss = 0.0;
                for (const auto& t : traces) ss += (t[b] - mean[b]) * (t[b] - mean[b]);
                std[b] = std::sqrt(ss / (reps - 1.0));
            }
        }
    }

    /// Mean at a given number of queries.
    double mean_at(std::size_t budget) const {
        auto it = std::find(budgets.begin(), budgets.end(), budget);
        if (it == budgets.end()) throw std::out_of_range("learning curve: no point at budget " + std::to_string(budget));
        return mean[static_cast<std::size_t>(it - budgets.begin())];
    }
};

struct RepeatedConfig {
    AlConfig al;
    std::size_t repetitions = 50;
    std::uint64_t master_seed = 0;
    unsigned workers = 1;
};

inline std::uint64_t repetition_seed(std::uint64_t master_seed, std::size_t rep) {
    return derive_seed(master_seed, "repetition", rep);
}

/// Every strategy runs on the same data and the same initial labeled set
/// within a repetition. Repetitions run in parallel; curves are assembled
/// in repetition order.
inline std::vector<LearningCurve> run_repeated(const DatasetSource& source, const std::vector<NamedStrategy>& strategies,
                                               const RepeatedConfig& config, const std::string& dataset_name = "") {
    if (config.repetitions < 1) throw std::invalid_argument("run_repeated: repetitions must be >= 1");
    if (strategies.empty()) throw std::invalid_argument("run_repeated: no strategies");
    std::vector<std::vector<AlRun>> results(config.repetitions);
    parallel_for(config.repetitions, config.workers, [&](std::size_t r) {
        const std::uint64_t seed = repetition_seed(config.master_seed, r);
        const auto [train, test] = source(derive_seed(seed, "data"));
        const PoolState start = initial_pool(train, config.al.init, derive_seed(seed, "init"));
        for (const auto& s : strategies)
            results[r].push_back(run_al(train, test, s.strategy, start, config.al, derive_seed(seed, "al")));
    });

    std::vector<LearningCurve> curves;
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        LearningCurve c;
        c.strategy = strategies[s].name;
        c.dataset = dataset_name;
        c.metric = to_string(config.al.metric);
        c.master_seed = config.master_seed;
        for (std::size_t b = 0; b <= config.al.budget; ++b) c.budgets.push_back(b);
        for (auto& rep : results) {
            c.traces.push_back(rep[s].trace);
            c.selections.push_back(rep[s].selections);
        }
        c.aggregate();
        curves.push_back(std::move(c));
    }
    return curves;
}

// Error reduction versus predicted probability -----------------------------

struct MotivationConfig {
    bool balanced = true;            // false: class 0 twice as large as class 1
    std::size_t repetitions = 10000;
    std::size_t n_bins = 20;
    std::size_t pool_size = 100;
    std::size_t test_size = 5000;
    double separation = 2.0;
    double learn_rate = 0.1;
    std::size_t iterations = 100;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct MotivationBin {
    double center = 0.0;
    double mean_delta = 0.0;  // NaN for an empty bin
    std::size_t count = 0;
};

struct MotivationResult {
    std::vector<MotivationBin> bins;

    /// Non-empty bin with the largest mean error reduction.
    std::size_t argmax_bin() const {
        std::size_t best = bins.size();
        for (std::size_t b = 0; b < bins.size(); ++b)
            if (bins[b].count > 0 && (best == bins.size() || bins[b].mean_delta > bins[best].mean_delta)) best = b;
        if (best == bins.size()) throw std::runtime_error("motivation: all bins are empty");
        return best;
    }
};

inline std::size_t probability_bin(double p, std::size_t n_bins) {
    const auto b = static_cast<std::size_t>(std::floor(p * static_cast<double>(n_bins)));
    return std::min(b, n_bins - 1);
}

namespace detail {

inline std::size_t linear_errors(const LogisticModel& model, const Dataset& test) {
    std::size_t errors = 0;
    if (test.dim == 2) {
        const double w0 = model.weights[0], w1 = model.weights[1], bias = model.weights[2];
        for (std::size_t i = 0; i < test.size(); ++i) {
            const double z = bias + w0 * test.features[2 * i] + w1 * test.features[2 * i + 1];
            // P(y = 1) >= 0.5 <=> z >= 0 <=> p0 <= 0.5; an exact tie predicts class 0
            const int predicted = z > 0.0 ? 1 : 0;
            errors += predicted != test.labels[i];
        }
        return errors;
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int predicted = model.logit(test.row(i)) > 0.0 ? 1 : 0;
        errors += predicted != test.labels[i];
    }
    return errors;
}

}  // namespace detail

/// For each repetition: two Gaussian clouds, one labeled point per class, a
/// logistic classifier f_0; every remaining pool point x is added in turn and
/// the 0/1 test-loss reduction of the retrained classifier is recorded
/// against p0(x) = P(y = 0 | x) under f_0. Results are averaged per bin.
inline MotivationResult motivation_experiment(const MotivationConfig& config) {
    if (config.repetitions < 1 || config.n_bins < 1) throw std::invalid_argument("motivation: bad repetitions or bins");
    const double fraction = config.balanced ? 0.5 : 2.0 / 3.0;
    struct Partial {
        std::vector<double> sum;
        std::vector<std::size_t> count;
    };
    std::vector<Partial> partials(config.repetitions);
    parallel_for(config.repetitions, config.workers, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(config.seed, "motivation", r);
        const Dataset pool_data =
            gen_gaussian_clouds(config.pool_size, fraction, config.separation, 2, derive_seed(seed, "pool"));
        const Dataset test =
            gen_gaussian_clouds(config.test_size, fraction, config.separation, 2, derive_seed(seed, "test"));
        const PoolState start = init_cold_start(pool_data, derive_seed(seed, "init"));
        const auto n_test = static_cast<double>(test.size());

        std::vector<double> x;
        std::vector<double> y;
        for (std::size_t i : start.labeled) {
            const auto row = pool_data.row(i);
            x.insert(x.end(), row.begin(), row.end());
            y.push_back(pool_data.labels[i]);
        }
        const LogisticModel f0 = train_logistic(x, 2, y, config.learn_rate, config.iterations);
        const double loss0 = static_cast<double>(detail::linear_errors(f0, test)) / n_test;

        Partial& part = partials[r];
        part.sum.assign(config.n_bins, 0.0);
        part.count.assign(config.n_bins, 0);
        x.resize(x.size() + 2);
        y.push_back(0.0);
        for (std::size_t i : start.unlabeled) {
            const auto row = pool_data.row(i);
            const double p0 = 1.0 - predict_logistic(f0, row);
            x[x.size() - 2] = row[0];
            x[x.size() - 1] = row[1];
            y.back() = pool_data.labels[i];
            const LogisticModel fx = train_logistic(x, 2, y, config.learn_rate, config.iterations);
            const double loss_x = static_cast<double>(detail::linear_errors(fx, test)) / n_test;
            const std::size_t b = probability_bin(p0, config.n_bins);
            part.sum[b] += loss0 - loss_x;
            ++part.count[b];
        }
    });

    MotivationResult result;
    result.bins.resize(config.n_bins);
    std::vector<double> sum(config.n_bins, 0.0);
    for (const auto& p : partials)
        for (std::size_t b = 0; b < config.n_bins; ++b) {
            sum[b] += p.sum[b];
            result.bins[b].count += p.count[b];
        }
    for (std::size_t b = 0; b < config.n_bins; ++b) {
        auto& bin = result.bins[b];
        bin.center = (static_cast<double>(b) + 0.5) / static_cast<double>(config.n_bins);
        bin.mean_delta = bin.count ? sum[b] / static_cast<double>(bin.count) : std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

// Analysis -----------------------------------------------------------------

struct Histogram {
    std::vector<std::size_t> counts;  // bin b covers [b/n, (b+1)/n); the last bin includes 1

    std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }

    /// Lowest-index bin with the largest count.
    std::size_t mode_bin() const {
        return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    bool bin_contains(std::size_t bin, double p) const { return probability_bin(p, counts.size()) == bin; }

    double bin_lower(std::size_t bin) const { return static_cast<double>(bin) / static_cast<double>(counts.size()); }
};

/// Chosen-point probabilities pooled over all traces.
inline std::vector<double> selected_probabilities(const std::vector<SelectionTrace>& traces) {
    std::vector<double> out;
    for (const auto& t : traces)
        for (const auto& rec : t) out.push_back(rec.probability);
    return out;
}

inline Histogram probability_histogram(const std::vector<SelectionTrace>& traces, std::size_t n_bins) {
    if (n_bins < 1) throw std::invalid_argument("histogram: n_bins must be >= 1");
    Histogram h;
    h.counts.assign(n_bins, 0);
    for (double p : selected_probabilities(traces)) ++h.counts[probability_bin(p, n_bins)];
    return h;
}

/// Importances of the strategy's regressor paired with the feature names.
inline std::vector<std::pair<std::string, double>> regressor_importance_report(const LalStrategy& strategy) {
    check_schema(strategy);
    const auto imp = feature_importances(strategy.regressor);
    std::vector<std::pair<std::string, double>> report;
    for (std::size_t k = 0; k < imp.size(); ++k) report.emplace_back(strategy.feature_schema[k], imp[k]);
    return report;
}

}  // namespace lal
