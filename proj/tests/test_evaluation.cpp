#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "emoe/data_io.hpp"
#include "emoe/evaluation.hpp"

using namespace emoe;

TEST(Pearson, HandValue) {
  EXPECT_NEAR(pearson_r(Vector{1, 2, 3}, Vector{1, 2, 4}), 0.98198, 1e-5);
}

TEST(Pearson, SelfAndNegation) {
  const Vector x{0.3, -1.2, 4.0, 2.2, 0.0};
  Vector neg = x;
  for (double& v : neg) v = -v;
  EXPECT_DOUBLE_EQ(pearson_r(x, x), 1.0);
  EXPECT_DOUBLE_EQ(pearson_r(x, neg), -1.0);
}

TEST(Pearson, DegenerateInputsThrow) {
  EXPECT_THROW(pearson_r(Vector{1, 1, 1}, Vector{1, 2, 3}), DegenerateError);
  EXPECT_THROW(pearson_r(Vector{1, 2, 3}, Vector{5, 5, 5}), DegenerateError);
  EXPECT_THROW(pearson_r(Vector{1}, Vector{1}), ValidationError);
  EXPECT_THROW(pearson_r(Vector{1, 2}, Vector{1, 2, 3}), DimensionError);
}

TEST(Pearson, SymmetricAndAffineInvariant) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(30), y(30);
    for (auto& v : x) v = n01(gen);
    for (std::size_t i = 0; i < 30; ++i) y[i] = 0.4 * x[i] + n01(gen);
    const double r = pearson_r(x, y);
    EXPECT_NEAR(pearson_r(y, x), r, 1e-12);
    Vector xs = x, ys = y;
    for (auto& v : xs) v = 3.5 * v - 7.0;
    for (auto& v : ys) v = 0.01 * v + 100.0;
    EXPECT_NEAR(pearson_r(xs, y), r, 1e-10);
    EXPECT_NEAR(pearson_r(x, ys), r, 1e-10);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
  }
}

TEST(Accuracy, Counts) {
  const std::vector<std::size_t> gold{0, 1, 2, 3};
  EXPECT_EQ(accuracy(gold, gold), 1.0);
  EXPECT_EQ(accuracy(std::vector<std::size_t>{1, 2, 3, 0}, gold), 0.0);
  EXPECT_EQ(accuracy(std::vector<std::size_t>{0, 1, 0, 0}, gold), 0.5);
  EXPECT_THROW(accuracy({}, {}), ValidationError);
}

TEST(Accuracy, PermutationInvariant) {
  std::vector<std::size_t> p{0, 2, 2, 1, 0, 1}, g{0, 2, 1, 1, 1, 1};
  const double a = accuracy(p, g);
  std::vector<std::size_t> idx{5, 3, 0, 4, 1, 2};
  std::vector<std::size_t> pp, gg;
  for (auto i : idx) {
    pp.push_back(p[i]);
    gg.push_back(g[i]);
  }
  EXPECT_EQ(accuracy(pp, gg), a);
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(Vector{0.2, 0.4, 0.4}), 1u);
  EXPECT_EQ(argmax(Vector{0.5, 0.5}), 0u);
  EXPECT_THROW(argmax(Vector{}), ValidationError);
}

TEST(ScoreLabels, RegressionAggregateIsMeanOfVariables) {
  const LabelFormat vad = default_registry().find("VAD");
  Matrix gold(4, 3), pred(4, 3);
  const double g[4][3] = {{0, 1, 0.5}, {1, 0, 0.2}, {0.5, 0.5, 0.9}, {-1, 0.3, -0.4}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      gold(i, j) = g[i][j];
      pred(i, j) = j == 0 ? g[i][j] : (j == 1 ? -g[i][j] : 2 * g[i][j] + 1);
    }
  const auto r = score_labels(vad, pred, gold);
  EXPECT_EQ(r.metric, Metric::pearson_r);
  ASSERT_EQ(r.per_variable.size(), 3u);
  EXPECT_NEAR(r.per_variable[0], 1.0, 1e-12);
  EXPECT_NEAR(r.per_variable[1], -1.0, 1e-12);
  EXPECT_NEAR(r.aggregate, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(r.variables, (std::vector<std::string>{"Valence", "Arousal", "Dominance"}));
}

TEST(ScoreLabels, SingleLabelIsOneAccuracy) {
  const LabelFormat be7 = default_registry().find("BE7");
  Matrix gold(2, 7), pred(2, 7);
  gold(0, 1) = 1;
  gold(1, 4) = 1;
  pred(0, 1) = 0.9;
  pred(1, 2) = 0.7;
  const auto r = score_labels(be7, pred, gold);
  EXPECT_EQ(r.metric, Metric::accuracy);
  EXPECT_EQ(r.per_variable.size(), 1u);
  EXPECT_EQ(r.aggregate, 0.5);
  EXPECT_THROW(score_labels(be7, Matrix(2, 6), Matrix(2, 6)), DimensionError);
}

TEST(ScoreLabels, MultiLabelThresholdAccuracy) {
  const LabelFormat m("M", {"x", "y"}, ValueRange::binary_set(), Problem::multi_label);
  Matrix gold(2, 2), pred(2, 2);
  gold(0, 0) = 1;
  gold(1, 1) = 1;
  pred(0, 0) = 0.8;
  pred(1, 1) = 0.3;
  const auto r = score_labels(m, pred, gold);
  EXPECT_EQ(r.per_variable, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(r.aggregate, 0.75);
}

TEST(ResultsTable, TabSeparatedRows) {
  EvalReport r;
  r.dataset_id = "en1";
  r.scenario = Scenario::zero_shot;
  r.source = "en2";
  r.format_id = "VAD";
  r.variables = {"Valence", "Arousal"};
  r.per_variable = {0.123456789, 0.5};
  r.aggregate = 0.3117283945;
  r.n = 10;
  std::ostringstream os;
  write_results_table(os, std::span(&r, 1));
  EXPECT_EQ(os.str(), "dataset\tscenario\tsource\tformat\tmetric\tn\tper_variable\tmean\n"
                      "en1\tzero-shot\ten2\tVAD\tpearson_r\t10\tValence=0.123457;Arousal=0.5\t"
                      "0.311728\n");
}

TEST(Scenario, ParseRoundTrip) {
  for (auto s : {Scenario::supervised, Scenario::zero_shot, Scenario::mapping})
    EXPECT_EQ(parse_scenario(to_string(s)), s);
  EXPECT_THROW(parse_scenario("sideways"), ConfigError);
}

TEST(SuiteManifest, ParsesPairsRelativeToFile) {
  const auto dir = std::filesystem::temp_directory_path() / "emoe_suite_manifest";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "s.manifest") << "registry = reg.txt\npair = a.manifest b.manifest\n";
  const auto m = load_suite_manifest((dir / "s.manifest").string());
  EXPECT_EQ(m.registry_path, (dir / "reg.txt").string());
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].second, (dir / "b.manifest").string());
  std::ofstream(dir / "bad.manifest") << "pair = only_one\n";
  EXPECT_THROW(load_suite_manifest((dir / "bad.manifest").string()), ParseError);
  std::filesystem::remove_all(dir);
}

namespace {

SuiteConfig quick_suite() {
  SuiteConfig c;
  c.mapper.architecture = {16, {32, 32}};
  c.mapper.n_steps = 300;
  c.encoder.hidden = {32};
  c.encoder.n_epochs = 5;
  c.split_seed = 3;
  return c;
}

} // namespace

TEST(Suite, OneSyntheticPairYieldsSixReportsInOrder) {
  const auto syn = generate_synthetic_pair({.n = 300, .seed = 2});
  const DatasetPair pair{syn.first, syn.second};
  const auto res = run_suite(std::span(&pair, 1), syn.registry, quick_suite());
  ASSERT_EQ(res.reports.size(), 6u);
  const Scenario expected[] = {Scenario::supervised, Scenario::supervised, Scenario::zero_shot,
                               Scenario::zero_shot,  Scenario::mapping,    Scenario::mapping};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(res.reports[i].scenario, expected[i]) << i;
  EXPECT_EQ(res.reports[0].dataset_id, "synA");
  EXPECT_EQ(res.reports[1].dataset_id, "synB");
  EXPECT_EQ(res.reports[2].source, "synB");
  EXPECT_EQ(res.reports[3].source, "synA");
  EXPECT_EQ(res.reports[4].format_id, "SYNB");
  EXPECT_EQ(res.reports[5].format_id, "SYNA");
  EXPECT_EQ(res.encoders.size(), 2u);
}

TEST(Suite, DeterministicUnderSeed) {
  const auto syn = generate_synthetic_pair({.n = 200, .seed = 4});
  const DatasetPair pair{syn.first, syn.second};
  const auto a = run_suite(std::span(&pair, 1), syn.registry, quick_suite());
  const auto b = run_suite(std::span(&pair, 1), syn.registry, quick_suite());
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i)
    EXPECT_EQ(a.reports[i].per_variable, b.reports[i].per_variable) << i;
  EXPECT_TRUE(a.mapper == b.mapper);
}

TEST(Suite, EvaluationNeverTouchesTrainingItems) {
  const auto syn = generate_synthetic_pair({.n = 200, .seed = 4});
  const auto cfg = quick_suite();
  const auto [a, b] = split_pair(syn.first, syn.second, {8, 1, 1}, cfg.split_seed);
  std::set<std::string> train(a.train.ids.begin(), a.train.ids.end());
  train.insert(b.train.ids.begin(), b.train.ids.end());
  for (const auto* held : {&a.test, &b.test, &a.dev, &b.dev})
    for (const auto& id : held->ids) EXPECT_FALSE(train.count(id)) << id;

  const DatasetPair pair{syn.first, syn.second};
  const auto res = run_suite(std::span(&pair, 1), syn.registry, cfg);
  EXPECT_EQ(res.reports[0].n, a.test.size());
  EXPECT_EQ(res.reports[1].n, b.test.size());
}

TEST(Suite, RejectsInconsistentPairs) {
  const auto syn = generate_synthetic_pair({.n = 100, .seed = 4});
  DatasetPair same{syn.first, syn.first};
  EXPECT_THROW(run_suite(std::span(&same, 1), syn.registry, quick_suite()), ValidationError);
  DatasetPair other{syn.first, syn.second};
  other.second.domain = "elsewhere";
  try {
    run_suite(std::span(&other, 1), syn.registry, quick_suite());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("pair 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(run_suite({}, syn.registry, quick_suite()), ConfigError);
}
