// Command-line front end: build-strategy, run, motivate, analyze.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lal/config.hpp"
#include "lal/harness.hpp"
#include "lal/lal_training.hpp"
#include "lal/report.hpp"
#include "lal/strategy.hpp"

namespace fs = std::filesystem;
using namespace lal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// One line per error on stderr: `lal: error[<kind>]: <message>`.
void report_error(const char* kind, std::string message) {
    for (char& c : message)
        if (c == '\n' || c == '\r') c = ' ';
    std::cerr << "lal: error[" << kind << "]: " << message << '\n';
}

// Flag beats LAL_OUTPUT_DIR, which beats the config file.
fs::path output_dir(const std::string& from_config, const std::optional<std::string>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("LAL_OUTPUT_DIR"); env && *env) return env;
    return from_config;
}

// Refuses to clobber existing files unless forced; checked before any work.
void claim_outputs(const std::vector<fs::path>& paths, bool force) {
    if (force) return;
    for (const auto& p : paths)
        if (fs::exists(p)) throw ConfigError("output '" + p.string() + "' exists; pass --force to overwrite");
}

void ensure_dir(const fs::path& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());
}

fs::path config_base(const std::string& config_path) {
    auto base = fs::path(config_path).parent_path();
    return base.empty() ? fs::path(".") : base;
}

struct Common {
    unsigned workers = 0;
    bool force = false;
    std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--workers", c.workers, "Worker threads (0 = all cores); results do not depend on it");
    cmd->add_flag("--force", c.force, "Overwrite existing output files");
    cmd->add_option("--output-dir", c.output_dir, "Output directory (overrides LAL_OUTPUT_DIR and the config)");
}

// build-strategy ---------------------------------------------------------------

struct BuildArgs {
    Common common;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> provenance;
};

int cmd_build(const BuildArgs& a) {
    BuildConfig c = parse_build_config(read_config_file(a.config), config_base(a.config));
    if (a.seed) c.monte_carlo().seed = *a.seed;
    if (a.provenance) {
        try {
            c.provenance = provenance_from_string(*a.provenance);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("--provenance: ") + e.what());
        }
    }
    c.monte_carlo().workers = a.common.workers;
    validate_build_config(c);

    const fs::path dir = output_dir(c.output_dir, a.common.output_dir);
    const fs::path strategy_path = dir / c.strategy_file;
    const fs::path rows_path = dir / (fs::path(c.strategy_file).stem().string() + "_regression_set.csv");
    std::vector<fs::path> outputs{strategy_path};
    if (c.write_regression_set) outputs.push_back(rows_path);
    claim_outputs(outputs, a.common.force);

    const auto& mc = c.monte_carlo();
    std::cout << "building " << to_string(c.provenance) << " strategy (" << (c.warm ? "warm" : "cold")
              << " start): tau " << mc.tau_min << ".." << mc.tau_max << ", Q=" << mc.initializations
              << ", M=" << mc.candidates << '\n';
    LalBuild build;
    if (c.warm) {
        build = build_warm_start_strategy(mc, c.provenance, *c.warm_data.csv, c.warm_size, c.warm_test_fraction);
    } else {
        ColdStartConfig cold = c.cold;
        cold.provenance = c.provenance;
        build = build_cold_start_strategy(cold);
    }

    ensure_dir(dir);
    save_strategy(build.strategy, strategy_path.string());
    if (c.write_regression_set) write_regression_set_csv(build.regression_set, rows_path.string());

    const auto fit = regressor_fit(build.strategy.regressor, build.regression_set);
    std::cout << "rows: " << fit.rows << " (Q*M*T = " << mc.initializations * mc.candidates * mc.size_count()
              << ")\n";
    std::cout << "regressor: trees=" << build.strategy.regressor.n_trees() << " mean_delta=" << fit.mean_delta
              << " train_mse=" << fit.train_mse << " oob_mse=" << fit.oob_mse << '\n';
    std::cout << "wrote " << strategy_path.string() << '\n';
    return kExitOk;
}

// run ------------------------------------------------------------------------------

struct RunArgs {
    Common common;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> repetitions;
    std::optional<std::string> metric;
    bool svg = false;
};

int cmd_run(const RunArgs& a) {
    RunConfig c = parse_run_config(read_config_file(a.config), config_base(a.config));
    if (a.seed) c.seed = *a.seed;
    if (a.budget) c.budget = *a.budget;
    if (a.repetitions) c.repetitions = *a.repetitions;
    if (a.metric) c.metric = parse_metric(*a.metric);
    validate_run_config(c);

    std::vector<NamedStrategy> strategies;
    for (const auto& ref : c.strategies) {
        try {
            strategies.push_back({ref.name, load_strategy_ref(ref)});
        } catch (const std::exception& e) {
            throw ConfigError("strategy '" + ref.name + "': " + e.what());
        }
    }

    const fs::path dir = output_dir(c.output_dir, a.common.output_dir);
    std::vector<fs::path> outputs{dir / "summary.csv", dir / "summary.json"};
    for (const auto& s : strategies) {
        outputs.push_back(dir / ("curve_" + s.name + ".csv"));
        outputs.push_back(dir / ("curve_" + s.name + ".json"));
        outputs.push_back(dir / ("trace_" + s.name + ".csv"));
    }
    if (a.svg) outputs.push_back(dir / "curves.svg");
    claim_outputs(outputs, a.common.force);

    RepeatedConfig rc;
    rc.al.classifier = c.classifier;
    rc.al.metric = c.metric;
    rc.al.budget = c.budget;
    rc.al.init = c.init;
    rc.al.select.random_ties = c.random_ties;
    rc.repetitions = c.repetitions;
    rc.master_seed = c.seed;
    rc.workers = a.common.workers;
    std::cout << "running " << strategies.size() << " strategies on " << c.dataset.name() << ": budget " << c.budget
              << ", " << c.repetitions << " repetitions, metric " << to_string(c.metric) << '\n';
    const auto curves = run_repeated(c.dataset.source(), strategies, rc, c.dataset.name());

    ensure_dir(dir);
    nlohmann::json summary = {{"dataset", c.dataset.name()},
                              {"metric", to_string(c.metric)},
                              {"budget", c.budget},
                              {"repetitions", c.repetitions},
                              {"master_seed", c.seed},
                              {"strategies", nlohmann::json::array()}};
    std::string summary_csv = "budget";
    for (const auto& curve : curves) summary_csv += ',' + curve.strategy + "_mean," + curve.strategy + "_std";
    summary_csv += '\n';
    for (std::size_t b = 0; b <= c.budget; ++b) {
        summary_csv += std::to_string(b);
        for (const auto& curve : curves) summary_csv += ',' + format_number(curve.mean[b]) + ',' + format_number(curve.std[b]);
        summary_csv += '\n';
    }
    std::vector<PlotSeries> series;
    for (std::size_t s = 0; s < curves.size(); ++s) {
        const auto& curve = curves[s];
        write_text((dir / ("curve_" + curve.strategy + ".csv")).string(), curve_csv(curve));
        write_text((dir / ("curve_" + curve.strategy + ".json")).string(), curve_json(curve).dump(1) + '\n');
        write_text((dir / ("trace_" + curve.strategy + ".csv")).string(), traces_csv(curve.selections));
        summary["strategies"].push_back({{"name", curve.strategy},
                                         {"source", c.strategies[s].id},
                                         {"final_mean", curve.mean.back()},
                                         {"final_std", curve.std.back()}});
        std::vector<double> x(curve.budgets.begin(), curve.budgets.end());
        series.push_back({curve.strategy, x, curve.mean});
        std::cout << "  " << curve.strategy << ": " << to_string(c.metric) << " at budget " << c.budget << " = "
                  << curve.mean.back() << " +- " << curve.std.back() << '\n';
    }
    write_text((dir / "summary.csv").string(), summary_csv);
    write_text((dir / "summary.json").string(), summary.dump(1) + '\n');
    if (a.svg)
        write_text((dir / "curves.svg").string(),
                   svg_line_plot(series, c.dataset.name(), "labeled queries", to_string(c.metric)));
    std::cout << "wrote " << outputs.size() << " files to " << dir.string() << '\n';
    return kExitOk;
}

// motivate -------------------------------------------------------------------------

struct MotivateArgs {
    Common common;
    bool balanced = false;
    bool unbalanced = false;
    std::size_t reps = 10000;
    std::uint64_t seed = 0;
    std::size_t bins = 20;
    std::optional<std::string> output;
    std::optional<std::string> svg;
};

int cmd_motivate(const MotivateArgs& a) {
    if (a.balanced == a.unbalanced) throw ConfigError("motivate: pass exactly one of --balanced or --unbalanced");
    if (a.reps < 1) throw ConfigError("motivate: --reps must be >= 1");
    if (a.bins < 2) throw ConfigError("motivate: --bins must be >= 2");
    MotivationConfig mc;
    mc.balanced = a.balanced;
    mc.repetitions = a.reps;
    mc.seed = a.seed;
    mc.n_bins = a.bins;
    mc.workers = a.common.workers;

    const fs::path dir = output_dir(".", a.common.output_dir);
    const fs::path csv = dir / a.output.value_or(a.balanced ? "motivation_balanced.csv" : "motivation_unbalanced.csv");
    std::vector<fs::path> outputs{csv};
    if (a.svg) outputs.push_back(dir / *a.svg);
    claim_outputs(outputs, a.common.force);

    std::cout << "motivation experiment (" << (a.balanced ? "balanced" : "unbalanced 2:1") << "), " << a.reps
              << " repetitions, " << a.bins << " bins\n";
    const auto result = motivation_experiment(mc);
    ensure_dir(csv.parent_path());
    write_text(csv.string(), motivation_csv(result));
    if (a.svg) {
        PlotSeries s{"mean delta", {}, {}};
        for (const auto& b : result.bins) {
            s.x.push_back(b.center);
            s.y.push_back(b.mean_delta);
        }
        ensure_dir((dir / *a.svg).parent_path());
        write_text((dir / *a.svg).string(), svg_line_plot({s}, "error reduction vs p0", "p0", "mean delta"));
    }
    std::cout << "argmax bin center: " << result.bins[result.argmax_bin()].center << '\n';
    std::cout << "wrote " << csv.string() << '\n';
    return kExitOk;
}

// analyze ----------------------------------------------------------------------------

struct AnalyzeArgs {
    Common common;
    std::vector<std::string> strategies;
    std::vector<std::string> traces;
    std::size_t bins = 10;
    bool svg = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
    if (a.strategies.empty() && a.traces.empty())
        throw ConfigError("analyze: give at least one --strategy or --trace file");
    if (a.bins < 1) throw ConfigError("analyze: --bins must be >= 1");
    for (const auto& p : a.strategies)
        if (!fs::exists(p)) throw ConfigError("analyze: strategy file not found '" + p + "'");
    for (const auto& p : a.traces)
        if (!fs::exists(p)) throw ConfigError("analyze: trace file not found '" + p + "'");

    const fs::path dir = output_dir(".", a.common.output_dir);
    auto stem = [](const std::string& p) { return fs::path(p).stem().string(); };
    std::vector<fs::path> outputs;
    for (const auto& p : a.strategies) outputs.push_back(dir / ("importance_" + stem(p) + ".csv"));
    for (const auto& p : a.traces) {
        outputs.push_back(dir / ("histogram_" + stem(p) + ".csv"));
        if (a.svg) outputs.push_back(dir / ("histogram_" + stem(p) + ".svg"));
    }
    claim_outputs(outputs, a.common.force);

    std::vector<std::vector<std::pair<std::string, double>>> reports;
    for (const auto& p : a.strategies) {
        Strategy s;
        try {
            s = load_strategy(p);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        const auto* lal = std::get_if<LalStrategy>(&s);
        if (!lal) throw ConfigError("analyze: '" + p + "' is a " + strategy_kind(s) + " strategy without a regressor");
        reports.push_back(regressor_importance_report(*lal));
    }
    std::vector<std::vector<SelectionTrace>> traces;
    for (const auto& p : a.traces) {
        try {
            traces.push_back(load_traces_csv(p));
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }

    ensure_dir(dir);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::cout << "feature importances of " << a.strategies[i] << ":\n";
        for (const auto& [name, v] : reports[i]) std::cout << "  " << name << ' ' << v << '\n';
        write_text((dir / ("importance_" + stem(a.strategies[i]) + ".csv")).string(), importance_csv(reports[i]));
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const Histogram h = probability_histogram(traces[i], a.bins);
        std::cout << "selection histogram of " << a.traces[i] << ": " << h.total() << " selections, mode bin ["
                  << h.bin_lower(h.mode_bin()) << ", " << h.bin_lower(h.mode_bin() + 1) << ")\n";
        write_text((dir / ("histogram_" + stem(a.traces[i]) + ".csv")).string(), histogram_csv(h));
        if (a.svg)
            write_text((dir / ("histogram_" + stem(a.traces[i]) + ".svg")).string(),
                       svg_histogram(h, stem(a.traces[i])));
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning active learning: build query strategies from simulated data and benchmark them"};
    app.require_subcommand(1);

    BuildArgs build;
    auto* b = app.add_subcommand("build-strategy", "Train a LAL strategy from Monte-Carlo simulations");
    b->add_option("config", build.config, "JSON config file")->required();
    b->add_option("--seed", build.seed, "Override the master seed");
    b->add_option("--provenance", build.provenance, "independent | iterative");
    add_common(b, build.common);

    RunArgs run;
    auto* r = app.add_subcommand("run", "Run repeated active-learning experiments and write learning curves");
    r->add_option("config", run.config, "JSON config file")->required();
    r->add_option("--seed", run.seed, "Override the master seed");
    r->add_option("--budget", run.budget, "Override the number of queries");
    r->add_option("--repetitions", run.repetitions, "Override the repetition count");
    r->add_option("--metric", run.metric, "accuracy | zero_one | iou | dice | auc");
    r->add_flag("--svg", run.svg, "Also write curves.svg");
    add_common(r, run.common);

    MotivateArgs mot;
    auto* m = app.add_subcommand("motivate", "Mean error reduction against predicted probability (logistic regression)");
    m->add_flag("--balanced", mot.balanced, "Equal class sizes");
    m->add_flag("--unbalanced", mot.unbalanced, "Class 0 twice as large as class 1");
    m->add_option("--reps", mot.reps, "Repetitions")->capture_default_str();
    m->add_option("--seed", mot.seed, "Master seed")->capture_default_str();
    m->add_option("--bins", mot.bins, "Probability bins")->capture_default_str();
    m->add_option("--output", mot.output, "CSV file name inside the output directory");
    m->add_option("--svg", mot.svg, "Also write an SVG plot with this file name");
    add_common(m, mot.common);

    AnalyzeArgs an;
    auto* z = app.add_subcommand("analyze", "Regressor feature importances and selection histograms");
    z->add_option("--strategy", an.strategies, "LAL strategy file (repeatable)");
    z->add_option("--trace", an.traces, "Selection trace CSV written by `run` (repeatable)");
    z->add_option("--bins", an.bins, "Histogram bins")->capture_default_str();
    z->add_flag("--svg", an.svg, "Also write SVG histograms");
    add_common(z, an.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("validation", e.what());
        return kExitValidation;
    }

    try {
        if (*b) return cmd_build(build);
        if (*r) return cmd_run(run);
        if (*m) return cmd_motivate(mot);
        return cmd_analyze(an);
    } catch (const ConfigError& e) {
        report_error("validation", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        report_error("runtime", e.what());
        return kExitRuntime;
    }
}
