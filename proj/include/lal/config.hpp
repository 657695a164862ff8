#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lal/dataset.hpp"
#include "lal/harness.hpp"
#include "lal/lal_training.hpp"
#include "lal/strategy.hpp"

namespace lal {

inline constexpr int kConfigFormat = 1;

/// A configuration problem detected before any computation starts.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <class T>
T get_required(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
    return get_or<T>(j, key, T{}, where);
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline void check_format(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    if (!j.contains("config_format")) throw ConfigError("config: missing 'config_format'");
    if (!j["config_format"].is_number_integer() || j["config_format"].get<int>() != kConfigFormat)
        throw ConfigError("config: unsupported config_format " + j["config_format"].dump() + " (expected " +
                          std::to_string(kConfigFormat) + ")");
}

inline ForestConfig forest_section(const nlohmann::json& j, const char* key, ForestConfig defaults,
                                   const std::string& where) {
    if (!j.contains(key)) return defaults;
    try {
        ForestConfig c = forest_config_from_json(j.at(key), defaults);
        if (c.mode != defaults.mode) throw ConfigError(where + "." + key + ": wrong forest mode");
        return c;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

inline nlohmann::json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }
}

/// Where experiment data comes from: a synthetic generator or a CSV file.
struct DatasetSpec {
    std::string generator = "gaussian";  // gaussian | checkerboard | banana | csv
    std::size_t train_size = 500;
    std::size_t test_size = 1000;
    double class0_fraction = 0.5;
    double separation = 2.0;
    std::size_t dim = 2;
    int k = 2;
    double label_noise = 0.0;
    double noise = 0.2;
    std::string csv_path;
    std::string label_column = "label";
    double test_fraction = 0.5;
    std::optional<Dataset> csv;  // loaded during validation

    std::string name() const {
        if (generator == "checkerboard") return "checkerboard" + std::to_string(k) + "x" + std::to_string(k);
        if (generator == "csv") return std::filesystem::path(csv_path).stem().string();
        return generator;
    }

    std::size_t training_rows() const {
        if (generator != "csv") return train_size;
        const std::size_t n = csv->size();
        return n - static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    }

    DatasetSource source() const {
        if (generator == "csv") return resplit_source(*csv, test_fraction);
        if (generator == "gaussian") {
            const double f = class0_fraction, s = separation;
            const std::size_t d = dim;
            return generated_source([=](std::size_t n, std::uint64_t seed) { return gen_gaussian_clouds(n, f, s, d, seed); },
                                    train_size, test_size);
        }
        if (generator == "checkerboard") {
            const int kk = k;
            const double flip = label_noise;
            return generated_source([=](std::size_t n, std::uint64_t seed) { return gen_checkerboard(kk, n, seed, flip); },
                                    train_size, test_size);
        }
        const double nz = noise;
        return generated_source([=](std::size_t n, std::uint64_t seed) { return gen_banana(n, nz, seed); }, train_size,
                                test_size);
    }
};

inline DatasetSpec parse_dataset_spec(const nlohmann::json& j, const std::filesystem::path& base,
                                      const std::string& where = "dataset") {
    using detail::get_or;
    DatasetSpec d;
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    d.generator = get_or<std::string>(j, "generator", "", where);
    if (d.generator.empty()) d.generator = j.contains("csv") ? "csv" : "gaussian";
    if (d.generator == "csv") {
        detail::check_keys(j, {"generator", "csv", "label_column", "test_fraction"}, where);
        const auto rel = detail::get_required<std::string>(j, "csv", where);
        d.csv_path = detail::resolve(base, rel).string();
        d.label_column = get_or<std::string>(j, "label_column", d.label_column, where);
        d.test_fraction = get_or<double>(j, "test_fraction", d.test_fraction, where);
        if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0))
            throw ConfigError(where + ".test_fraction: must lie in (0, 1)");
        if (!std::filesystem::exists(d.csv_path)) throw ConfigError(where + ".csv: file not found '" + d.csv_path + "'");
        try {
            d.csv = load_csv(d.csv_path, d.label_column);
            d.csv->validate();
        } catch (const std::exception& e) {
            throw ConfigError(where + ".csv: " + e.what());
        }
        return d;
    }
    detail::check_keys(j, {"generator", "train_size", "test_size", "class0_fraction", "separation", "dim", "k", "label_noise",
                        "noise"},
                       where);
    d.train_size = get_or<std::size_t>(j, "train_size", d.train_size, where);
    d.test_size = get_or<std::size_t>(j, "test_size", d.test_size, where);
    if (d.train_size < 3) throw ConfigError(where + ".train_size: must be >= 3");
    if (d.test_size < 2) throw ConfigError(where + ".test_size: must be >= 2");
    if (d.generator == "gaussian") {
        d.class0_fraction = get_or<double>(j, "class0_fraction", d.class0_fraction, where);
        d.separation = get_or<double>(j, "separation", d.separation, where);
        d.dim = get_or<std::size_t>(j, "dim", d.dim, where);
        if (!(d.class0_fraction > 0.0 && d.class0_fraction < 1.0))
            throw ConfigError(where + ".class0_fraction: must lie in (0, 1)");
        if (!(d.separation > 0.0)) throw ConfigError(where + ".separation: must be > 0");
        if (d.dim < 1) throw ConfigError(where + ".dim: must be >= 1");
    } else if (d.generator == "checkerboard") {
        d.k = get_or<int>(j, "k", d.k, where);
        if (d.k != 2 && d.k != 4) throw ConfigError(where + ".k: must be 2 or 4");
        d.label_noise = get_or<double>(j, "label_noise", d.label_noise, where);
        if (!(d.label_noise >= 0.0 && d.label_noise <= 0.5)) throw ConfigError(where + ".label_noise: must lie in [0, 0.5]");
    } else if (d.generator == "banana") {
        d.noise = get_or<double>(j, "noise", d.noise, where);
        if (!(d.noise >= 0.0)) throw ConfigError(where + ".noise: must be >= 0");
    } else {
        throw ConfigError(where + ".generator: unknown generator '" + d.generator +
                          "' (expected gaussian, checkerboard, banana or csv)");
    }
    return d;
}

// run --------------------------------------------------------------------------

struct StrategyRef {
    std::string name;
    std::string id;  // "random", "uncertainty" or a strategy file path
};

struct RunConfig {
    DatasetSpec dataset;
    std::vector<StrategyRef> strategies;
    std::size_t budget = 0;
    Metric metric = Metric::accuracy;
    std::size_t repetitions = 50;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    InitConfig init;
    ForestConfig classifier = ForestConfig::classifier();
    bool random_ties = false;
};

inline bool is_builtin_strategy(const std::string& id) { return id == "random" || id == "uncertainty"; }

inline std::vector<StrategyRef> parse_strategy_list(const nlohmann::json& j, const std::filesystem::path& base) {
    if (!j.is_array() || j.empty()) throw ConfigError("strategies: expected a non-empty array");
    std::vector<StrategyRef> out;
    for (const auto& item : j) {
        StrategyRef ref;
        if (item.is_string()) {
            ref.id = item.get<std::string>();
        } else if (item.is_object()) {
            detail::check_keys(item, {"name", "id", "file"}, "strategies[]");
            ref.name = detail::get_or<std::string>(item, "name", "", "strategies[]");
            ref.id = item.contains("file") ? detail::get_or<std::string>(item, "file", "", "strategies[]")
                                           : detail::get_required<std::string>(item, "id", "strategies[]");
        } else {
            throw ConfigError("strategies: entries must be strings or objects");
        }
        if (!is_builtin_strategy(ref.id)) {
            ref.id = detail::resolve(base, ref.id).string();
            if (!std::filesystem::exists(ref.id)) throw ConfigError("strategies: file not found '" + ref.id + "'");
        }
        if (ref.name.empty())
            ref.name = is_builtin_strategy(ref.id) ? ref.id : std::filesystem::path(ref.id).stem().string();
        for (const auto& prev : out)
            if (prev.name == ref.name) throw ConfigError("strategies: duplicate name '" + ref.name + "'");
        out.push_back(std::move(ref));
    }
    return out;
}

inline InitConfig parse_init(const nlohmann::json& j) {
    detail::check_keys(j, {"kind", "size"}, "init");
    InitConfig init;
    const auto kind = detail::get_or<std::string>(j, "kind", "cold", "init");
    if (kind == "cold") {
        init.kind = InitKind::cold;
    } else if (kind == "warm") {
        init.kind = InitKind::warm;
        init.warm_size = detail::get_required<std::size_t>(j, "size", "init");
        if (init.warm_size < 2) throw ConfigError("init.size: must be >= 2");
    } else {
        throw ConfigError("init.kind: expected 'cold' or 'warm'");
    }
    return init;
}

inline Metric parse_metric(const std::string& id) {
    try {
        return metric_from_string(id);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("metric: ") + e.what());
    }
}

/// Relative input paths are resolved against `base` (normally the config
/// file's directory).
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base) {
    detail::check_format(j);
    detail::check_keys(j,
                       {"config_format", "dataset", "strategies", "budget", "metric", "repetitions", "seed",
                        "output_dir", "init", "classifier", "random_ties"},
                       "run");
    RunConfig c;
    c.seed = detail::get_required<std::uint64_t>(j, "seed", "run");
    if (!j.contains("dataset")) throw ConfigError("run: missing required key 'dataset'");
    c.dataset = parse_dataset_spec(j["dataset"], base);
    if (!j.contains("strategies")) throw ConfigError("run: missing required key 'strategies'");
    c.strategies = parse_strategy_list(j["strategies"], base);
    c.budget = detail::get_required<std::size_t>(j, "budget", "run");
    c.metric = parse_metric(detail::get_or<std::string>(j, "metric", "accuracy", "run"));
    c.repetitions = detail::get_or<std::size_t>(j, "repetitions", c.repetitions, "run");
    c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir, "run");
    if (j.contains("init")) c.init = parse_init(j["init"]);
    c.classifier = detail::forest_section(j, "classifier", c.classifier, "run");
    c.random_ties = detail::get_or<bool>(j, "random_ties", false, "run");
    return c;
}

/// Checks that need the fully merged config (file plus command-line overrides).
inline void validate_run_config(const RunConfig& c) {
    if (c.repetitions < 1) throw ConfigError("run.repetitions: must be >= 1");
    const std::size_t rows = c.dataset.training_rows();
    const std::size_t initial = c.init.kind == InitKind::cold ? 2 : c.init.warm_size;
    if (initial >= rows)
        throw ConfigError("init: initial labeled set (" + std::to_string(initial) + ") must be smaller than the " +
                          std::to_string(rows) + " training rows");
    const std::size_t pool = rows - initial;
    if (c.budget > pool)
        throw ConfigError("run.budget: " + std::to_string(c.budget) + " exceeds the unlabeled pool of " +
                          std::to_string(pool) + " rows");
    if (c.metric == Metric::auc && c.dataset.generator != "csv" && c.dataset.test_size < 2)
        throw ConfigError("metric: auc needs a two-class test set");
}

inline Strategy load_strategy_ref(const StrategyRef& ref) {
    if (ref.id == "random") return RandomStrategy{};
    if (ref.id == "uncertainty") return UncertaintyStrategy{};
    return load_strategy(ref.id);
}

// build-strategy -------------------------------------------------------------

struct BuildConfig {
    Provenance provenance = Provenance::independent;
    bool warm = false;
    ColdStartConfig cold;  // cold.monte_carlo carries the simulation settings
    DatasetSpec warm_data;
    std::size_t warm_size = 100;
    double warm_test_fraction = 0.5;
    std::string output_dir = ".";
    std::string strategy_file = "strategy.json";
    bool write_regression_set = false;

    MonteCarloConfig& monte_carlo() { return cold.monte_carlo; }
    const MonteCarloConfig& monte_carlo() const { return cold.monte_carlo; }
};

inline MonteCarloConfig parse_monte_carlo(const nlohmann::json& j, MonteCarloConfig c) {
    const std::string w = "monte_carlo";
    detail::check_keys(j,
                       {"tau_min", "tau_max", "initializations", "candidates", "test_loss", "normalize_labeled_size",
                        "oob_fallback", "classifier", "regressor"},
                       w);
    c.tau_min = detail::get_or<std::size_t>(j, "tau_min", c.tau_min, w);
    c.tau_max = detail::get_or<std::size_t>(j, "tau_max", c.tau_max, w);
    c.initializations = detail::get_or<std::size_t>(j, "initializations", c.initializations, w);
    c.candidates = detail::get_or<std::size_t>(j, "candidates", c.candidates, w);
    c.test_loss = parse_metric(detail::get_or<std::string>(j, "test_loss", to_string(c.test_loss), w));
    c.state.normalize_labeled_size = detail::get_or<bool>(j, "normalize_labeled_size", false, w);
    c.state.oob_fallback = detail::get_or<double>(j, "oob_fallback", c.state.oob_fallback, w);
    if (!(c.state.oob_fallback >= 0.0 && c.state.oob_fallback <= 1.0))
        throw ConfigError(w + ".oob_fallback: must lie in [0, 1]");
    c.classifier = detail::forest_section(j, "classifier", c.classifier, w);
    c.regressor = detail::forest_section(j, "regressor", c.regressor, w);
    return c;
}

inline BuildConfig parse_build_config(const nlohmann::json& j, const std::filesystem::path& base) {
    detail::check_format(j);
    detail::check_keys(j,
                       {"config_format", "provenance", "start", "seed", "monte_carlo", "cold_start", "warm_start",
                        "output_dir", "strategy_file", "write_regression_set"},
                       "build");
    BuildConfig c;
    c.monte_carlo().seed = detail::get_required<std::uint64_t>(j, "seed", "build");
    try {
        c.provenance = provenance_from_string(detail::get_or<std::string>(j, "provenance", "independent", "build"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("build.provenance: ") + e.what());
    }
    const auto start = detail::get_or<std::string>(j, "start", "cold", "build");
    if (start != "cold" && start != "warm") throw ConfigError("build.start: expected 'cold' or 'warm'");
    c.warm = start == "warm";
    if (j.contains("monte_carlo")) c.monte_carlo() = parse_monte_carlo(j["monte_carlo"], c.monte_carlo());
    if (j.contains("cold_start")) {
        const auto& cs = j["cold_start"];
        detail::check_keys(cs, {"train_size", "test_size", "class0_fraction", "separation"}, "cold_start");
        c.cold.train_size = detail::get_or<std::size_t>(cs, "train_size", c.cold.train_size, "cold_start");
        c.cold.test_size = detail::get_or<std::size_t>(cs, "test_size", c.cold.test_size, "cold_start");
        c.cold.class0_fraction = detail::get_or<double>(cs, "class0_fraction", c.cold.class0_fraction, "cold_start");
        c.cold.separation = detail::get_or<double>(cs, "separation", c.cold.separation, "cold_start");
    }
    if (c.warm) {
        if (!j.contains("warm_start")) throw ConfigError("build: start 'warm' needs a 'warm_start' section");
        const auto& ws = j["warm_start"];
        detail::check_keys(ws, {"dataset", "size", "test_fraction"}, "warm_start");
        if (!ws.contains("dataset")) throw ConfigError("warm_start: missing required key 'dataset'");
        c.warm_data = parse_dataset_spec(ws["dataset"], base, "warm_start.dataset");
        if (c.warm_data.generator != "csv") throw ConfigError("warm_start.dataset: expected a csv dataset");
        c.warm_size = detail::get_or<std::size_t>(ws, "size", c.warm_size, "warm_start");
        c.warm_test_fraction = detail::get_or<double>(ws, "test_fraction", c.warm_test_fraction, "warm_start");
    } else if (j.contains("warm_start")) {
        throw ConfigError("build: 'warm_start' section given but start is 'cold'");
    }
    c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir, "build");
    c.strategy_file = detail::get_or<std::string>(j, "strategy_file", c.strategy_file, "build");
    c.write_regression_set = detail::get_or<bool>(j, "write_regression_set", false, "build");
    return c;
}

inline void validate_build_config(const BuildConfig& c) {
    try {
        c.monte_carlo().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (c.strategy_file.empty()) throw ConfigError("build.strategy_file: must not be empty");
    if (!c.warm) {
        if (!(c.cold.class0_fraction > 0.0 && c.cold.class0_fraction < 1.0))
            throw ConfigError("cold_start.class0_fraction: must lie in (0, 1)");
        if (!(c.cold.separation > 0.0)) throw ConfigError("cold_start.separation: must be > 0");
        if (c.cold.test_size < 2) throw ConfigError("cold_start.test_size: must be >= 2");
        if (c.monte_carlo().tau_max >= c.cold.train_size)
            throw ConfigError("monte_carlo.tau_max: must be below cold_start.train_size");
        return;
    }
    if (!(c.warm_test_fraction > 0.0 && c.warm_test_fraction < 1.0))
        throw ConfigError("warm_start.test_fraction: must lie in (0, 1)");
    if (c.warm_size < 4 || c.warm_size >= c.warm_data.csv->size())
        throw ConfigError("warm_start.size: must satisfy 4 <= size < dataset rows");
    const auto train_rows =
        c.warm_size - static_cast<std::size_t>(std::llround(static_cast<double>(c.warm_size) * c.warm_test_fraction));
    if (c.monte_carlo().tau_max >= train_rows)
        throw ConfigError("monte_carlo.tau_max: must be below the " + std::to_string(train_rows) +
                          " simulation training rows of the warm-start sample");
}

}  // namespace lal
