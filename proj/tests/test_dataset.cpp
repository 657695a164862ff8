#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>

#include <gtest/gtest.h>

#include "lal/dataset.hpp"
#include "lal/forest.hpp"
#include "lal/logistic.hpp"

using namespace lal;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "lal_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

bool same(const Dataset& a, const Dataset& b) {
    return a.dim == b.dim && a.features == b.features && a.labels == b.labels;
}

}  // namespace

TEST(GaussianClouds, BalancedCounts) {
    const auto d = gen_gaussian_clouds(1000, 0.5, 2.0, 2, 7);
    EXPECT_EQ(d.size(), 1000u);
    EXPECT_EQ(d.dim, 2u);
    EXPECT_EQ(d.count_label(0), 500u);
    EXPECT_EQ(d.count_label(1), 500u);
    EXPECT_NO_THROW(d.validate());
}

TEST(GaussianClouds, TwoToOneCounts) {
    const auto d = gen_gaussian_clouds(900, 2.0 / 3.0, 2.0, 2, 7);
    EXPECT_EQ(d.count_label(0), 600u);
    EXPECT_EQ(d.count_label(1), 300u);
}

TEST(GaussianClouds, Deterministic) {
    EXPECT_TRUE(same(gen_gaussian_clouds(300, 0.5, 2.0, 3, 9), gen_gaussian_clouds(300, 0.5, 2.0, 3, 9)));
    EXPECT_FALSE(same(gen_gaussian_clouds(300, 0.5, 2.0, 3, 9), gen_gaussian_clouds(300, 0.5, 2.0, 3, 10)));
}

TEST(GaussianClouds, RejectsEmptyClass) {
    EXPECT_THROW(gen_gaussian_clouds(10, 0.01, 2.0, 2, 1), std::invalid_argument);
    EXPECT_THROW(gen_gaussian_clouds(10, 0.99, 2.0, 2, 1), std::invalid_argument);
    EXPECT_THROW(gen_gaussian_clouds(1, 0.5, 2.0, 2, 1), std::invalid_argument);
    EXPECT_THROW(gen_gaussian_clouds(10, 0.5, 2.0, 0, 1), std::invalid_argument);
}

TEST(GaussianClouds, ClassMeansConverge) {
    const double sep = 3.0;
    const auto d = gen_gaussian_clouds(100000, 0.5, sep, 2, 11);
    double sum[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t k = 0; k < 2; ++k) sum[d.labels[i]][k] += d.row(i)[k];
    for (int c = 0; c < 2; ++c) {
        const double n = static_cast<double>(d.count_label(c));
        const double expected0 = (c == 0 ? -0.5 : 0.5) * sep;
        EXPECT_NEAR(sum[c][0] / n, expected0, 0.02);
        EXPECT_NEAR(sum[c][1] / n, 0.0, 0.02);
    }
}

TEST(Checkerboard, LabelFunction) {
    EXPECT_EQ(checkerboard_label(2, 0.25, 0.25), 0);
    EXPECT_EQ(checkerboard_label(2, 0.75, 0.25), 1);
    EXPECT_EQ(checkerboard_label(4, 0.30, 0.10), 1);
    EXPECT_EQ(checkerboard_label(4, 0.30, 0.30), 0);
}

TEST(Checkerboard, PointsFollowParityAndAreBalanced) {
    for (int k : {2, 4}) {
        const auto d = gen_checkerboard(k, 1000, 3);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto x = d.row(i);
            ASSERT_GE(x[0], 0.0);
            ASSERT_LT(x[0], 1.0);
            ASSERT_EQ(d.labels[i], (static_cast<int>(std::floor(k * x[0])) + static_cast<int>(std::floor(k * x[1]))) % 2);
        }
        EXPECT_LE(std::abs(static_cast<double>(d.count_label(0)) / 1000.0 - 0.5), 0.05);
    }
}

TEST(Checkerboard, RejectsUnsupportedGrid) {
    EXPECT_THROW(gen_checkerboard(3, 100, 1), std::invalid_argument);
    EXPECT_THROW(gen_checkerboard(2, 1, 1), std::invalid_argument);
}

TEST(Checkerboard, LabelNoiseFlipsSomeLabels) {
    const auto clean = gen_checkerboard(2, 2000, 5);
    const auto noisy = gen_checkerboard(2, 2000, 5, 0.1);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i)
        wrong += noisy.labels[i] != checkerboard_label(2, noisy.row(i)[0], noisy.row(i)[1]);
    EXPECT_NEAR(static_cast<double>(wrong) / 2000.0, 0.1, 0.03);
    for (std::size_t i = 0; i < clean.size(); ++i)
        ASSERT_EQ(clean.labels[i], checkerboard_label(2, clean.row(i)[0], clean.row(i)[1]));
}

TEST(Banana, ZeroNoiseGeometry) {
    const auto d = gen_banana(1000, 0.0, 4);
    EXPECT_EQ(d.count_label(0), 500u);
    EXPECT_EQ(d.count_label(1), 500u);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto x = d.row(i);
        if (d.labels[i] == 0) {
            EXPECT_NEAR(x[0] * x[0] + x[1] * x[1], 1.0, 1e-12);
            EXPECT_GE(x[1], -1e-12);
        } else {
            EXPECT_NEAR((1.0 - x[0]) * (1.0 - x[0]) + (0.5 - x[1]) * (0.5 - x[1]), 1.0, 1e-12);
        }
    }
}

TEST(Banana, LinearModelFailsWhereForestSucceeds) {
    const auto train = gen_banana(500, 0.1, 1);
    const auto test = gen_banana(2000, 0.1, 2);
    std::vector<double> y(train.labels.begin(), train.labels.end());
    const auto lin = train_logistic(train.features, 2, y, 0.5, 2000);
    const auto rf = train_forest(train.features, 2, y, ForestConfig::classifier(), 3);
    std::size_t lin_ok = 0, rf_ok = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        lin_ok += (predict_logistic(lin, test.row(i)) > 0.5 ? 1 : 0) == test.labels[i];
        rf_ok += label_from_probability(predict_proba(rf, test.row(i))) == test.labels[i];
    }
    EXPECT_LT(static_cast<double>(lin_ok) / 2000.0, 0.95);
    EXPECT_GT(static_cast<double>(rf_ok) / 2000.0, 0.95);
}

TEST(Csv, LoadsSmallFile) {
    const auto p = temp_file("small.csv");
    write_file(p, "f0,f1,label\n1,2,0\n3.5,-4,1\n0,0,1\n");
    const auto d = load_csv(p.string());
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.dim, 2u);
    EXPECT_DOUBLE_EQ(d.row(1)[0], 3.5);
    EXPECT_DOUBLE_EQ(d.row(1)[1], -4.0);
    EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 1}));
}

TEST(Csv, LabelColumnAnywhere) {
    const auto p = temp_file("labelfirst.csv");
    write_file(p, "y,a,b\n1,0.5,0.25\n0,1,2\n");
    const auto d = load_csv(p.string(), "y");
    EXPECT_EQ(d.dim, 2u);
    EXPECT_DOUBLE_EQ(d.row(0)[1], 0.25);
    EXPECT_EQ(d.labels[0], 1);
}

TEST(Csv, BadLabelNamesRow) {
    const auto p = temp_file("badlabel.csv");
    write_file(p, "f0,label\n1,0\n2,1\n3,0\n4,1\n5,2\n");
    try {
        load_csv(p.string());
        FAIL() << "expected CsvError";
    } catch (const CsvError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 5"), std::string::npos) << msg;
        EXPECT_NE(msg.find("label"), std::string::npos) << msg;
    }
}

TEST(Csv, NonNumericCellNamesRowAndColumn) {
    const auto p = temp_file("nonnumeric.csv");
    write_file(p, "f0,f1,label\n1,2,0\n3,abc,1\n");
    try {
        load_csv(p.string());
        FAIL() << "expected CsvError";
    } catch (const CsvError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("f1"), std::string::npos) << msg;
    }
}

TEST(Csv, Errors) {
    EXPECT_THROW(load_csv("/nonexistent/file.csv"), CsvError);
    const auto one = temp_file("onerow.csv");
    write_file(one, "f0,label\n1,0\n");
    EXPECT_THROW(load_csv(one.string()), CsvError);
    const auto nolabel = temp_file("nolabel.csv");
    write_file(nolabel, "f0,f1\n1,0\n2,1\n");
    EXPECT_THROW(load_csv(nolabel.string()), CsvError);
    const auto ragged = temp_file("ragged.csv");
    write_file(ragged, "f0,f1,label\n1,0,1\n2,1\n");
    EXPECT_THROW(load_csv(ragged.string()), CsvError);
}

TEST(Csv, RoundTrip) {
    const auto d = gen_gaussian_clouds(200, 0.5, 2.0, 3, 5);
    const auto p = temp_file("roundtrip.csv");
    write_csv(d, p.string());
    const auto back = load_csv(p.string());
    EXPECT_TRUE(same(d, back));
}

TEST(Split, SizesPartitionAndDeterminism) {
    const auto d = gen_gaussian_clouds(100, 0.5, 2.0, 2, 1);
    const auto [train, test] = split(d, 0.3, 9);
    EXPECT_EQ(train.size(), 70u);
    EXPECT_EQ(test.size(), 30u);
    // Union of rows equals the original multiset of rows.
    std::vector<std::vector<double>> all, parts;
    for (std::size_t i = 0; i < d.size(); ++i) all.emplace_back(d.row(i).begin(), d.row(i).end());
    for (const auto* part : {&train, &test})
        for (std::size_t i = 0; i < part->size(); ++i) parts.emplace_back(part->row(i).begin(), part->row(i).end());
    std::sort(all.begin(), all.end());
    std::sort(parts.begin(), parts.end());
    EXPECT_EQ(all, parts);
    const auto [train2, test2] = split(d, 0.3, 9);
    EXPECT_TRUE(same(train, train2));
    EXPECT_TRUE(same(test, test2));
}

TEST(Split, RejectsSingleClassPart) {
    Dataset d;
    d.dim = 1;
    for (int i = 0; i < 10; ++i) {
        d.features.push_back(i);
        d.labels.push_back(i == 0 ? 1 : 0);
    }
    EXPECT_THROW(split(d, 0.5, 1), std::invalid_argument);
    EXPECT_THROW(split(d, 0.0, 1), std::invalid_argument);
}

TEST(ColdStart, OnePerClass) {
    const auto d = gen_gaussian_clouds(50, 0.5, 2.0, 2, 3);
    const auto pool = init_cold_start(d, 4);
    ASSERT_EQ(pool.labeled.size(), 2u);
    EXPECT_EQ(pool.unlabeled.size(), 48u);
    EXPECT_EQ(pool.iteration, 0u);
    EXPECT_TRUE(pool.is_partition_of(50));
    EXPECT_EQ(d.labels[pool.labeled[0]] + d.labels[pool.labeled[1]], 1);
    EXPECT_EQ(init_cold_start(d, 4).labeled, pool.labeled);
}

TEST(ColdStart, SingleClassFails) {
    Dataset d;
    d.dim = 1;
    d.features = {1, 2, 3};
    d.labels = {0, 0, 0};
    EXPECT_THROW(init_cold_start(d, 1), std::invalid_argument);
}

TEST(WarmStart, SizeAndErrors) {
    const auto d = gen_gaussian_clouds(10000, 0.5, 2.0, 2, 3);
    const auto pool = init_warm_start(d, 100, 5);
    EXPECT_EQ(pool.labeled.size(), 100u);
    EXPECT_TRUE(pool.is_partition_of(d.size()));
    EXPECT_EQ(init_warm_start(d, 100, 5).labeled, pool.labeled);
    EXPECT_THROW(init_warm_start(d, d.size(), 5), std::invalid_argument);
    EXPECT_THROW(init_warm_start(d, 1, 5), std::invalid_argument);
}

TEST(WarmStart, GivesUpAfterBoundedRetries) {
    // One positive among 1000 rows: a 2-row sample almost never contains it.
    Dataset d;
    d.dim = 1;
    for (int i = 0; i < 1000; ++i) {
        d.features.push_back(i);
        d.labels.push_back(i == 0 ? 1 : 0);
    }
    EXPECT_THROW(init_warm_start(d, 2, 1), std::runtime_error);
}

TEST(PoolState, LabelMovesIndex) {
    auto pool = PoolState::from_labeled({3, 1}, 6);
    EXPECT_EQ(pool.unlabeled, (std::vector<std::size_t>{0, 2, 4, 5}));
    pool.label(4);
    EXPECT_EQ(pool.labeled.back(), 4u);
    EXPECT_EQ(pool.iteration, 1u);
    EXPECT_TRUE(pool.is_partition_of(6));
    EXPECT_THROW(pool.label(4), std::invalid_argument);
    EXPECT_EQ(pool.sorted_labeled(), (std::vector<std::size_t>{1, 3, 4}));
    EXPECT_THROW(PoolState::from_labeled({1, 1}, 3), std::invalid_argument);
}

TEST(Dataset, ValidateCatchesBadValues) {
    Dataset d;
    d.dim = 1;
    d.features = {1.0, NAN};
    d.labels = {0, 1};
    EXPECT_THROW(d.validate(), std::invalid_argument);
    d.features = {1.0, 2.0};
    d.labels = {0, 2};
    EXPECT_THROW(d.validate(), std::invalid_argument);
}
