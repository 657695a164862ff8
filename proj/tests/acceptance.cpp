// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is 0 only if all criteria pass.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lal/config.hpp"
#include "lal/dataset.hpp"
#include "lal/forest.hpp"
#include "lal/harness.hpp"
#include "lal/lal_training.hpp"
#include "lal/logistic.hpp"
#include "lal/metrics.hpp"
#include "lal/parallel.hpp"
#include "lal/report.hpp"
#include "lal/strategy.hpp"
#include "oracles.hpp"

using namespace lal;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr std::size_t kMotivationReps = 10000;
constexpr double kBalancedLow = 0.4, kBalancedHigh = 0.6;
constexpr double kUnbalancedLow = 0.45, kUnbalancedHigh = 0.55;
constexpr std::size_t kBenchmarkReps = 50;
constexpr double kNonInferiority = -0.005;
constexpr std::size_t kCheckerboardBudget = 50;
constexpr std::size_t kHistogramRuns = 10;
constexpr std::size_t kHistogramBins = 11;  // odd, so 0.5 sits inside the middle bin
constexpr std::size_t kOracleTrials = 200;
constexpr double kGradientRelTol = 1e-5;
constexpr double kDiceTol = 1e-12;
constexpr std::uint64_t kBuildSeed = 2018;
constexpr std::uint64_t kGaussianSeed = 1;
constexpr std::uint64_t kCheckerboardSeed = 2;
constexpr std::uint64_t kHistogramSeed = 3;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void report(int n, const std::string& name, Outcome& o, double seconds) {
    std::printf("criterion %d %s: %s | %s (%.0fs)\n", n, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str(),
                seconds);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

template <class F>
void criterion(int n, const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    report(n, name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

unsigned workers() { return default_workers(); }

// Cold-start strategies as configured in configs/build_cold_*.json.
struct Built {
    LalBuild independent;
    LalBuild iterative;
};

const Built& built_strategies() {
    static const Built b = [] {
        ColdStartConfig c;
        c.monte_carlo.seed = kBuildSeed;
        c.monte_carlo.workers = workers();
        c.provenance = Provenance::independent;
        Built out{build_cold_start_strategy(c), {}};
        c.provenance = Provenance::iterative;
        out.iterative = build_cold_start_strategy(c);
        return out;
    }();
    return b;
}

std::vector<NamedStrategy> four_strategies() {
    return {{"random", RandomStrategy{}},
            {"uncertainty", UncertaintyStrategy{}},
            {"lal-independent", built_strategies().independent.strategy},
            {"lal-iterative", built_strategies().iterative.strategy}};
}

DatasetSource gaussian_source() {
    return generated_source([](std::size_t n, std::uint64_t s) { return gen_gaussian_clouds(n, 0.5, 2.0, 2, s); }, 500,
                            1000);
}

const std::vector<LearningCurve>& gaussian_curves() {
    static const auto curves = [] {
        RepeatedConfig cfg;
        cfg.al.budget = 60;
        cfg.repetitions = kBenchmarkReps;
        cfg.master_seed = kGaussianSeed;
        cfg.workers = workers();
        return run_repeated(gaussian_source(), four_strategies(), cfg, "gaussian");
    }();
    return curves;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = "'" LAL_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) { return read_text(p.string()); }

double motivation_argmax_center(bool balanced, const fs::path& dir) {
    const std::string flag = balanced ? "--balanced" : "--unbalanced";
    const fs::path log = dir / (balanced ? "motivate_balanced.log" : "motivate_unbalanced.log");
    const int code = run_cli("motivate " + flag + " --reps " + std::to_string(kMotivationReps) + " --force --output-dir '" +
                                 dir.string() + "'",
                             log);
    if (code != 0) throw std::runtime_error("motivate exited with " + std::to_string(code) + ": " + read_file(log));
    std::istringstream in(read_file(dir / (balanced ? "motivation_balanced.csv" : "motivation_unbalanced.csv")));
    std::string line;
    std::getline(in, line);
    double best = -INFINITY, center = NAN;
    while (std::getline(in, line)) {
        const auto cells = detail::split_csv_line(line);
        const double c = std::stod(cells.at(0)), m = std::stod(cells.at(1));
        if (std::stoul(cells.at(2)) > 0 && m > best) {
            best = m;
            center = c;
        }
    }
    return center;
}

double sample_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / "lal_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    std::printf("acceptance: %u worker(s)\n", workers());

    criterion(1, "motivation balanced, argmax bin center in [0.4, 0.6]", [&](Outcome& o) {
        const double c = motivation_argmax_center(true, work);
        o.detail << "center=" << fmt(c, 3);
        o.require(c >= kBalancedLow && c <= kBalancedHigh, "center outside [0.4, 0.6]");
    });

    criterion(2, "motivation unbalanced 2:1, argmax bin center outside [0.45, 0.55]", [&](Outcome& o) {
        const double c = motivation_argmax_center(false, work);
        o.detail << "center=" << fmt(c, 3);
        o.require(c < kUnbalancedLow || c > kUnbalancedHigh, "center inside [0.45, 0.55]");
    });

    criterion(3, "gaussian clouds, LAL non-inferior to random at 20/40/60 and to uncertainty at 20", [&](Outcome& o) {
        const auto& curves = gaussian_curves();
        const auto& rs = curves[0];
        const auto& us = curves[1];
        o.detail << "reps=" << rs.traces.size() << " random@20/40/60=" << fmt(rs.mean_at(20)) << '/' << fmt(rs.mean_at(40))
                 << '/' << fmt(rs.mean_at(60)) << " us@20=" << fmt(us.mean_at(20));
        for (std::size_t s = 2; s < 4; ++s) {
            const auto& lal = curves[s];
            o.detail << ' ' << lal.strategy << "@20/40/60=" << fmt(lal.mean_at(20)) << '/' << fmt(lal.mean_at(40)) << '/'
                     << fmt(lal.mean_at(60));
            for (std::size_t b : {20, 40, 60})
                o.require(lal.mean_at(b) - rs.mean_at(b) >= kNonInferiority,
                          lal.strategy + " vs random at " + std::to_string(b) + " margin " +
                              fmt(lal.mean_at(b) - rs.mean_at(b)));
            o.require(lal.mean_at(20) - us.mean_at(20) >= kNonInferiority,
                      lal.strategy + " vs uncertainty at 20 margin " + fmt(lal.mean_at(20) - us.mean_at(20)));
        }
    });

    criterion(4, "checkerboard 2x2 at budget 50, US < random < LAL-iterative", [&](Outcome& o) {
        RepeatedConfig cfg;
        cfg.al.budget = kCheckerboardBudget;
        cfg.repetitions = kBenchmarkReps;
        cfg.master_seed = kCheckerboardSeed;
        cfg.workers = workers();
        const auto source =
            generated_source([](std::size_t n, std::uint64_t s) { return gen_checkerboard(2, n, s); }, 1000, 1000);
        const auto curves = run_repeated(source, four_strategies(), cfg, "checkerboard2x2");
        const double rs = curves[0].mean_at(kCheckerboardBudget), us = curves[1].mean_at(kCheckerboardBudget),
                     li = curves[2].mean_at(kCheckerboardBudget), lt = curves[3].mean_at(kCheckerboardBudget);
        o.detail << "random=" << fmt(rs) << " us=" << fmt(us) << " lal-independent=" << fmt(li)
                 << " lal-iterative=" << fmt(lt);
        o.require(us < rs, "uncertainty not below random");
        o.require(lt > rs, "lal-iterative not above random");
    });

    criterion(5, "selection histograms: US mode holds 0.5, a LAL mode does not, LAL spread exceeds US", [&](Outcome& o) {
        RepeatedConfig cfg;
        cfg.al.budget = 60;
        cfg.repetitions = kHistogramRuns;
        cfg.master_seed = kHistogramSeed;
        cfg.workers = workers();
        const auto curves = run_repeated(gaussian_source(), four_strategies(), cfg, "gaussian");
        const auto us_hist = probability_histogram(curves[1].selections, kHistogramBins);
        const double us_std = sample_std(selected_probabilities(curves[1].selections));
        o.detail << "bins=" << kHistogramBins << " us mode=[" << fmt(us_hist.bin_lower(us_hist.mode_bin()), 3) << ", "
                 << fmt(us_hist.bin_lower(us_hist.mode_bin() + 1), 3) << ") std=" << fmt(us_std);
        o.require(us_hist.bin_contains(us_hist.mode_bin(), 0.5), "uncertainty mode bin does not contain 0.5");
        bool some_lal_off_center = false;
        for (std::size_t s = 2; s < 4; ++s) {
            const auto h = probability_histogram(curves[s].selections, kHistogramBins);
            const double sd = sample_std(selected_probabilities(curves[s].selections));
            o.detail << ' ' << curves[s].strategy << " mode=[" << fmt(h.bin_lower(h.mode_bin()), 3) << ", "
                     << fmt(h.bin_lower(h.mode_bin() + 1), 3) << ") std=" << fmt(sd);
            some_lal_off_center = some_lal_off_center || !h.bin_contains(h.mode_bin(), 0.5);
            o.require(sd > us_std, curves[s].strategy + " spread not above uncertainty");
        }
        o.require(some_lal_off_center, "every LAL mode bin contains 0.5");
    });

    criterion(6, "oracle equivalences (split search, AUC, logistic gradient, dice)", [&](Outcome& o) {
        std::mt19937_64 rng(6);
        std::size_t split_bad = 0, auc_bad = 0, grad_bad = 0, dice_bad = 0;
        for (std::size_t trial = 0; trial < kOracleTrials; ++trial) {
            const std::size_t n = 2 + rng() % 49;
            const bool gini = trial % 2 == 0;
            std::vector<double> x(n), y(n);
            std::normal_distribution<double> g(0.0, 1.0);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = static_cast<double>(rng() % (trial % 3 ? 1000 : 6));
                y[i] = gini ? static_cast<double>(rng() % 2) : g(rng);
            }
            const auto got = best_split(x, y, gini ? SplitCriterion::gini : SplitCriterion::variance);
            const auto want = oracle::exhaustive_split(x, y, gini);
            if (got.has_value() != want.has_value() ||
                (got && (got->threshold != want->threshold || std::abs(got->impurity_decrease - want->decrease) > 1e-9)))
                ++split_bad;
        }
        for (std::size_t trial = 0; trial < kOracleTrials; ++trial) {
            std::vector<double> s(20);
            std::vector<int> y(20);
            for (std::size_t i = 0; i < 20; ++i) {
                s[i] = static_cast<double>(rng() % 10);
                y[i] = static_cast<int>(rng() % 2);
            }
            y[0] = 0;
            y[1] = 1;
            if (std::abs(auc_roc(s, y) - oracle::pairwise_auc(s, y)) > 1e-12) ++auc_bad;
        }
        double worst = 0.0;
        for (std::size_t trial = 0; trial < kOracleTrials; ++trial) {
            std::normal_distribution<double> g(0.0, 1.0);
            const std::size_t dim = 1 + trial % 4, n = 5 + trial % 16;
            std::vector<double> x(n * dim), y(n);
            for (auto& v : x) v = g(rng);
            for (auto& v : y) v = static_cast<double>(rng() % 2);
            LogisticModel m{std::vector<double>(dim + 1)};
            for (auto& w : m.weights) w = g(rng);
            const auto analytic = logistic_gradient(m, x, y);
            const auto numeric = oracle::numeric_gradient(
                [&](const std::vector<double>& w) { return logistic_loss(LogisticModel{w}, x, y); }, m.weights);
            for (std::size_t k = 0; k <= dim; ++k) {
                const double rel = std::abs(analytic[k] - numeric[k]) / std::max(std::abs(analytic[k]), 1e-3);
                worst = std::max(worst, rel);
                if (rel > kGradientRelTol) ++grad_bad;
            }
        }
        for (int trial = 0; trial < 100; ++trial) {
            const ConfusionCounts c{rng() % 40, rng() % 40, rng() % 40, rng() % 40};
            const double j = iou(c);
            if (std::abs(dice(c) - 2.0 * j / (1.0 + j)) > kDiceTol) ++dice_bad;
        }
        o.detail << "split mismatches=" << split_bad << " auc mismatches=" << auc_bad << " gradient worst rel err="
                 << worst << " dice mismatches=" << dice_bad;
        o.require(split_bad == 0, "best_split");
        o.require(auc_bad == 0, "auc_roc");
        o.require(grad_bad == 0, "logistic gradient");
        o.require(dice_bad == 0, "dice identity");
    });

    criterion(7, "pipeline byte-identical across --workers", [&](Outcome& o) {
        const nlohmann::json build = {{"config_format", 1},
                                      {"seed", 7},
                                      {"provenance", "iterative"},
                                      {"monte_carlo", {{"tau_min", 2}, {"tau_max", 12}, {"initializations", 5}, {"candidates", 5}}},
                                      {"cold_start", {{"train_size", 500}, {"test_size", 500}}},
                                      {"strategy_file", "lal.json"}};
        write_text((work / "build.json").string(), build.dump(2));
        const nlohmann::json run = {{"config_format", 1},
                                    {"seed", 8},
                                    {"dataset", {{"generator", "checkerboard"}, {"k", 2}, {"train_size", 300}, {"test_size", 300}}},
                                    {"strategies", {"random", "uncertainty", {{"name", "lal"}, {"file", "lal.json"}}}},
                                    {"budget", 20},
                                    {"repetitions", 5}};
        std::vector<std::string> strategy_bytes, curve_bytes;
        for (unsigned w : {1u, 3u}) {
            const fs::path out = work / ("workers" + std::to_string(w));
            fs::create_directories(out);
            write_text((out / "run.json").string(), run.dump(2));
            const auto log = out / "log.txt";
            const auto ws = " --workers " + std::to_string(w) + " --force --output-dir '" + out.string() + "'";
            if (run_cli("build-strategy '" + (work / "build.json").string() + "'" + ws, log) != 0)
                throw std::runtime_error("build-strategy failed: " + read_file(log));
            if (run_cli("run '" + (out / "run.json").string() + "'" + ws, log) != 0)
                throw std::runtime_error("run failed: " + read_file(log));
            strategy_bytes.push_back(read_file(out / "lal.json"));
            std::string curves;
            for (const char* s : {"random", "uncertainty", "lal"})
                curves += read_file(out / (std::string("curve_") + s + ".csv"));
            curve_bytes.push_back(curves);
        }
        o.detail << "strategy bytes=" << strategy_bytes[0].size() << " curve bytes=" << curve_bytes[0].size();
        o.require(strategy_bytes[0] == strategy_bytes[1], "strategy files differ");
        o.require(curve_bytes[0] == curve_bytes[1], "curve CSVs differ");
    });

    criterion(8, "bookkeeping: Q*M*T rows, |L| grows by one without repeats, delta in [-1, 1]", [&](Outcome& o) {
        const auto& b = built_strategies();
        const std::size_t qmt = 10 * 10 * 31;
        o.detail << "rows independent=" << b.independent.regression_set.size()
                 << " iterative=" << b.iterative.regression_set.size() << " (Q*M*T=" << qmt << ")";
        o.require(b.independent.regression_set.size() == qmt, "independent row count");
        o.require(b.iterative.regression_set.size() == qmt, "iterative row count");
        std::size_t out_of_range = 0;
        for (const auto* set : {&b.independent.regression_set, &b.iterative.regression_set})
            for (const auto& r : set->rows) out_of_range += !(r.delta >= -1.0 && r.delta <= 1.0);
        o.detail << " delta out of range=" << out_of_range;
        o.require(out_of_range == 0, "delta outside [-1, 1]");
        std::size_t bad_runs = 0, runs = 0;
        for (const auto& c : gaussian_curves())
            for (const auto& trace : c.selections) {
                ++runs;
                std::set<std::size_t> seen;
                bool ok = trace.size() == 60;
                for (std::size_t t = 0; t < trace.size(); ++t) ok = ok && trace[t].iteration == t && seen.insert(trace[t].index).second;
                bad_runs += !ok;
            }
        const auto [train, test] = gaussian_source()(99);
        AlConfig al;
        al.budget = 30;
        const auto one = run_al(train, test, built_strategies().iterative.strategy, al, 99);
        const bool grew = one.final_pool.labeled.size() == 32 && one.final_pool.is_partition_of(train.size());
        o.detail << " runs checked=" << runs << " bad=" << bad_runs;
        o.require(bad_runs == 0, "selection trace with repeats or wrong length");
        o.require(grew, "final labeled set size");
    });

    fs::remove_all(work);
    std::printf("acceptance: %d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
