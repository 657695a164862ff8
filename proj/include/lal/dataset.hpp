#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lal/random.hpp"

namespace lal {

/// Binary-labelled samples stored row-major.
struct Dataset {
    std::size_t dim = 0;
    std::vector<double> features;  // size() * dim values
    std::vector<int> labels;       // each 0 or 1
    std::string name;

    std::size_t size() const noexcept { return labels.size(); }

    std::span<const double> row(std::size_t i) const noexcept {
        return {features.data() + i * dim, dim};
    }

    std::size_t count_label(int label) const noexcept {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
    }

    bool has_both_classes() const noexcept {
        return count_label(0) > 0 && count_label(1) > 0;
    }

    /// Rows `indices` in the given order.
    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out;
        out.dim = dim;
        out.name = name;
        out.features.reserve(indices.size() * dim);
        out.labels.reserve(indices.size());
        for (std::size_t i : indices) {
            auto r = row(i);
            out.features.insert(out.features.end(), r.begin(), r.end());
            out.labels.push_back(labels[i]);
        }
        return out;
    }

    /// Throws std::invalid_argument if the shape, labels, or values are malformed.
    void validate() const {
        if (dim == 0) throw std::invalid_argument("dataset '" + name + "': dimension must be >= 1");
        if (features.size() != labels.size() * dim)
            throw std::invalid_argument("dataset '" + name + "': feature matrix does not match label count");
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] != 0 && labels[i] != 1)
                throw std::invalid_argument("dataset '" + name + "': label at row " + std::to_string(i) +
                                            " is not 0 or 1");
        for (std::size_t i = 0; i < features.size(); ++i)
            if (!std::isfinite(features[i]))
                throw std::invalid_argument("dataset '" + name + "': non-finite feature at row " +
                                            std::to_string(i / dim) + ", column " + std::to_string(i % dim));
    }
};

/// Partition of a dataset's rows into the labeled set and the unlabeled pool.
/// `unlabeled` is kept sorted ascending so candidate sweeps visit rows in a
/// fixed order.
struct PoolState {
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;
    std::size_t iteration = 0;

    /// Moves `index` from the pool into the labeled set and advances t.
    void label(std::size_t index) {
        auto it = std::lower_bound(unlabeled.begin(), unlabeled.end(), index);
        if (it == unlabeled.end() || *it != index)
            throw std::invalid_argument("index " + std::to_string(index) + " is not in the unlabeled pool");
        unlabeled.erase(it);
        labeled.push_back(index);
        ++iteration;
    }

    bool is_partition_of(std::size_t n) const {
        if (labeled.size() + unlabeled.size() != n) return false;
        std::vector<char> seen(n, 0);
        for (auto* part : {&labeled, &unlabeled})
            for (std::size_t i : *part) {
                if (i >= n || seen[i]) return false;
                seen[i] = 1;
            }
        return true;
    }

    /// Labeled rows in ascending order; classifiers are always trained on
    /// this ordering so that the model depends on L_t as a set.
    std::vector<std::size_t> sorted_labeled() const {
        std::vector<std::size_t> out = labeled;
        std::sort(out.begin(), out.end());
        return out;
    }

    static PoolState from_labeled(std::vector<std::size_t> labeled, std::size_t n) {
        PoolState pool;
        std::vector<char> taken(n, 0);
        for (std::size_t i : labeled) {
            if (i >= n) throw std::invalid_argument("labeled index out of range");
            if (taken[i]) throw std::invalid_argument("labeled index repeated");
            taken[i] = 1;
        }
        pool.labeled = std::move(labeled);
        pool.unlabeled.reserve(n - pool.labeled.size());
        for (std::size_t i = 0; i < n; ++i)
            if (!taken[i]) pool.unlabeled.push_back(i);
        return pool;
    }
};

namespace detail {

inline void shuffle_rows(Dataset& data, Rng& rng) {
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::string name = std::move(data.name);
    data = data.subset(order);
    data.name = std::move(name);
}

inline std::size_t draw_index(std::size_t n, Rng& rng) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace detail

/// Two unit-variance Gaussian classes centred at -sep/2 and +sep/2 along the
/// first axis. round(n * class0_fraction) rows belong to class 0; row order
/// is shuffled.
inline Dataset gen_gaussian_clouds(std::size_t n, double class0_fraction, double separation,
                                   std::size_t dim, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("gaussian clouds: n must be >= 2");
    if (dim < 1) throw std::invalid_argument("gaussian clouds: dim must be >= 1");
    if (!(class0_fraction > 0.0 && class0_fraction < 1.0))
        throw std::invalid_argument("gaussian clouds: class0_fraction must lie in (0, 1)");
    if (!(separation > 0.0)) throw std::invalid_argument("gaussian clouds: separation must be > 0");
    const auto n0 = static_cast<std::size_t>(std::llround(static_cast<double>(n) * class0_fraction));
    if (n0 == 0 || n0 >= n)
        throw std::invalid_argument("gaussian clouds: class0_fraction leaves one class empty");

    Rng rng(derive_seed(seed, "gaussian-clouds"));
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset data;
    data.dim = dim;
    data.name = "gaussian";
    data.features.reserve(n * dim);
    data.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < n0 ? 0 : 1;
        const double centre = (label == 0 ? -0.5 : 0.5) * separation;
        for (std::size_t d = 0; d < dim; ++d) data.features.push_back(normal(rng) + (d == 0 ? centre : 0.0));
        data.labels.push_back(label);
    }
    detail::shuffle_rows(data, rng);
    return data;
}

/// Parity label of the k x k checkerboard cell containing (x1, x2).
inline int checkerboard_label(int k, double x1, double x2) {
    const auto c1 = static_cast<long>(std::floor(k * x1));
    const auto c2 = static_cast<long>(std::floor(k * x2));
    return static_cast<int>(((c1 + c2) % 2 + 2) % 2);
}

/// Uniform points on the unit square labelled by k x k checkerboard parity.
/// With label_noise > 0 each label is flipped with that probability.
inline Dataset gen_checkerboard(int k, std::size_t n, std::uint64_t seed, double label_noise = 0.0) {
    if (k != 2 && k != 4) throw std::invalid_argument("checkerboard: k must be 2 or 4");
    if (n < 2) throw std::invalid_argument("checkerboard: n must be >= 2");
    if (!(label_noise >= 0.0 && label_noise <= 0.5))
        throw std::invalid_argument("checkerboard: label_noise must lie in [0, 0.5]");
    Rng rng(derive_seed(seed, "checkerboard", k));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Dataset data;
    data.dim = 2;
    data.name = "checkerboard" + std::to_string(k) + "x" + std::to_string(k);
    data.features.reserve(2 * n);
    data.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = unit(rng);
        const double x2 = unit(rng);
        data.features.push_back(x1);
        data.features.push_back(x2);
        int label = checkerboard_label(k, x1, x2);
        if (label_noise > 0.0 && unit(rng) < label_noise) label = 1 - label;
        data.labels.push_back(label);
    }
    return data;
}

/// Two interleaved crescents. Class 0 sits on the upper unit arc
/// (cos t, sin t), class 1 on the shifted lower arc (1 - cos t, 0.5 - sin t),
/// t ~ U[0, pi], each perturbed by isotropic Gaussian noise of scale `noise`.
inline Dataset gen_banana(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("banana: n must be >= 2");
    if (!(noise >= 0.0)) throw std::invalid_argument("banana: noise must be >= 0");
    Rng rng(derive_seed(seed, "banana"));
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, 1.0);
    const std::size_t n0 = (n + 1) / 2;
    Dataset data;
    data.dim = 2;
    data.name = "banana";
    data.features.reserve(2 * n);
    data.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = angle(rng);
        double x, y;
        int label;
        if (i < n0) {
            x = std::cos(t);
            y = std::sin(t);
            label = 0;
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
            label = 1;
        }
        if (noise > 0.0) {
            x += noise * jitter(rng);
            y += noise * jitter(rng);
        }
        data.features.push_back(x);
        data.features.push_back(y);
        data.labels.push_back(label);
    }
    detail::shuffle_rows(data, rng);
    return data;
}

/// Error raised while reading a CSV dataset. Messages name the data row
/// (1-based, header excluded) and column where applicable.
class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline bool parse_double(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && first != last;
}

}  // namespace detail

/// Reads a CSV file with one header row. The column named `label_column`
/// supplies the labels; every other column becomes a feature, in header order.
inline Dataset load_csv(const std::string& path, const std::string& label_column = "label") {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw CsvError("'" + path + "': missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_csv_line(line);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end())
        throw CsvError("'" + path + "': no column named '" + label_column + "'");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());

    Dataset data;
    data.dim = header.size() - 1;
    data.name = path;
    if (data.dim == 0) throw CsvError("'" + path + "': no feature columns");
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        const std::string where = "'" + path + "' row " + std::to_string(row) + " (line " + std::to_string(row + 1) + ")";
        if (cells.size() != header.size())
            throw CsvError(where + ": expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double value = 0.0;
            if (!detail::parse_double(cells[c], value) || !std::isfinite(value))
                throw CsvError(where + ", column '" + header[c] + "': not a finite number: '" + cells[c] + "'");
            if (c == label_col) {
                if (value != 0.0 && value != 1.0)
                    throw CsvError(where + ", column '" + header[c] + "': label must be 0 or 1, found '" +
                                   cells[c] + "'");
                data.labels.push_back(static_cast<int>(value));
            } else {
                data.features.push_back(value);
            }
        }
    }
    if (row < 2) throw CsvError("'" + path + "': need at least 2 data rows, found " + std::to_string(row));
    return data;
}

/// Writes `f0,...,f{D-1},label` with enough digits for an exact reload.
inline void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    for (std::size_t d = 0; d < data.dim; ++d) out << 'f' << d << ',';
    out << "label\n";
    char buf[32];
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.row(i)) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out.write(buf, ptr - buf);
            out << ',';
        }
        out << data.labels[i] << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Shuffled train/test partition; round(N * test_fraction) rows go to test.
/// Both parts must contain both classes.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
    const std::size_t n = data.size();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n_test == 0 || n_test >= n) throw std::invalid_argument("split: a part would be empty");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split"));
    std::shuffle(order.begin(), order.end(), rng);
    const std::span<const std::size_t> all(order);
    Dataset test = data.subset(all.first(n_test));
    Dataset train = data.subset(all.subspan(n_test));
    if (!train.has_both_classes() || !test.has_both_classes())
        throw std::invalid_argument("split: a part would contain a single class");
    return {std::move(train), std::move(test)};
}

/// One random row of each class, labeled in the order (class 0, class 1).
inline PoolState init_cold_start(const Dataset& train, std::uint64_t seed) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < train.size(); ++i) by_class[train.labels[i]].push_back(i);
    if (by_class[0].empty() || by_class[1].empty())
        throw std::invalid_argument("cold start needs both classes in the training set");
    Rng rng(derive_seed(seed, "cold-start"));
    std::vector<std::size_t> labeled;
    for (auto& members : by_class) labeled.push_back(members[detail::draw_index(members.size(), rng)]);
    return PoolState::from_labeled(std::move(labeled), train.size());
}

inline constexpr int kWarmStartAttempts = 16;

/// `n0` rows drawn without replacement; redrawn up to 16 times until both
/// classes are present.
inline PoolState init_warm_start(const Dataset& train, std::size_t n0, std::uint64_t seed) {
    const std::size_t n = train.size();
    if (n0 < 2 || n0 >= n)
        throw std::invalid_argument("warm start: n0 must satisfy 2 <= n0 < N (n0=" + std::to_string(n0) +
                                    ", N=" + std::to_string(n) + ")");
    Rng rng(derive_seed(seed, "warm-start"));
    std::vector<std::size_t> order(n);
    for (int attempt = 0; attempt < kWarmStartAttempts; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        bool seen[2] = {false, false};
        for (std::size_t k = 0; k < n0; ++k) seen[train.labels[order[k]]] = true;
        if (seen[0] && seen[1])
            return PoolState::from_labeled({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n0)}, n);
    }
    throw std::runtime_error("warm start: could not draw a two-class initial set in " +
                             std::to_string(kWarmStartAttempts) + " attempts");
}

}  // namespace lal
