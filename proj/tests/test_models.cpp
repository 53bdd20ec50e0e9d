#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "countertune/error.hpp"
#include "countertune/models.hpp"
#include "countertune/tuning_space.hpp"
#include "test_support.hpp"

using namespace countertune;

namespace {

Dataset ten_times_tp1() {
  const auto s = ct_test::grid_space({{"TP1", {1, 2, 4, 8}}, {"TP2", {0, 1, 2, 3, 4}}});
  return ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_F32, 10.0 * a[0]); },
      [](const std::vector<double>& a, const CounterValues&) { return 100.0 + a[0]; });
}

Dataset constant_seven() {
  const auto s = ct_test::grid_space({{"X", {1, 2, 3, 4}}, {"Y", {1, 2, 3}}});
  return ct_test::make_dataset(
      s, [](const std::vector<double>&, CounterValues& c) { c.set(Counter::INST_INT, 7.0); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
}

double coefficient(const RegressionModel& m, int first, int second, int power) {
  for (std::size_t t = 0; t < m.terms.size(); ++t)
    if (m.terms[t].first == first && m.terms[t].second == second && m.terms[t].power == power)
      return m.coefficients[t];
  ADD_FAILURE() << "term not found";
  return NAN;
}

}  // namespace

TEST(DecisionTree, RecoversStepFunctionExactly) {
  const auto d = ten_times_tp1();
  const auto tree = train_decision_tree(d, Counter::INST_F32, 3);
  EXPECT_EQ(tree.meta.train_size, 10u);
  EXPECT_EQ(tree.meta.test_size, 10u);
  // Every grid candidate that reaches depth 2 separates four values; the
  // oracle is the target function itself.
  for (const auto& r : d.records()) {
    const auto& x = d.space()[r.config_index].assignment;
    EXPECT_DOUBLE_EQ(tree.predict(x), 10.0 * x[0]);
  }
  EXPECT_DOUBLE_EQ(tree.meta.mae, 0.0);
  EXPECT_DOUBLE_EQ(tree.predict(std::vector<double>{4, 2}), 40.0);
}

TEST(DecisionTree, TrainingHalfIsSeededAndExact) {
  const auto d = ten_times_tp1();
  const auto half = tree_training_records(d.records().size(), 3);
  ASSERT_EQ(half.size(), 10u);
  EXPECT_EQ(half, tree_training_records(d.records().size(), 3));
  EXPECT_NE(half, tree_training_records(d.records().size(), 4));
  std::vector<std::size_t> sorted = half;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(tree_training_records(7, 1).size(), 4u);

  // Interaction target with min_leaf 1 only: exact on every training record.
  const auto s = ct_test::grid_space({{"A", {1, 2, 3, 4, 5}}, {"B", {1, 2, 3, 4, 5}}});
  const auto q = ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::DRAM_RT, a[0] * a[1]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  const auto tree = train_decision_tree(q, Counter::DRAM_RT, 9, TreeGrid{{10}, {1}});
  for (std::size_t pos : tree_training_records(q.records().size(), 9)) {
    const auto& x = s[q.records()[pos].config_index].assignment;
    EXPECT_DOUBLE_EQ(tree.predict(x), x[0] * x[1]);
  }
}

TEST(DecisionTree, ConstantTargetIsSingleLeaf) {
  const auto tree = train_decision_tree(constant_seven(), Counter::INST_INT, 0);
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_EQ(tree.depth(), 0);
  EXPECT_EQ(tree.predict(std::vector<double>{3, 1}), 7.0);
  EXPECT_EQ(tree.meta.mae, 0.0);
}

TEST(DecisionTree, SameSeedSameTree) {
  const auto d = load_dataset(DatasetPaths::in_directory(std::string(COUNTERTUNE_DATA_DIR) + "/coulomb_like"));
  const auto a = train_decision_tree(d, Counter::INST_F32, 99);
  const auto b = train_decision_tree(d, Counter::INST_F32, 99);
  EXPECT_EQ(a, b);
}

TEST(DecisionTree, PredictionsStayWithinTrainingRange) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> noise(-50.0, 50.0);
  const auto s = ct_test::grid_space({{"X", {1, 2, 3, 4, 5, 6, 7, 8}}, {"Y", {1, 2, 3, 4, 5}}});
  const auto d = ct_test::make_dataset(
      s,
      [&](const std::vector<double>& a, CounterValues& c) {
        c.set(Counter::DRAM_RT, 1000 + 30 * a[0] * a[1] + noise(gen));
      },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : d.records()) {
    lo = std::min(lo, r.counters[Counter::DRAM_RT]);
    hi = std::max(hi, r.counters[Counter::DRAM_RT]);
  }
  const auto tree = train_decision_tree(d, Counter::DRAM_RT, 17);
  for (double x = 0; x <= 9; x += 0.5)
    for (double y = 0; y <= 6; y += 0.5) {
      const double p = tree.predict(std::vector<double>{x, y});
      EXPECT_GE(p, lo);
      EXPECT_LE(p, hi);
    }
}

TEST(DecisionTree, TooFewRecords) {
  const auto s = ct_test::grid_space({{"X", {1, 2, 3}}});
  const auto d = ct_test::make_dataset(
      s, [](const std::vector<double>&, CounterValues&) {},
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  EXPECT_THROW(train_decision_tree(d, Counter::DRAM_RT, 0), ModelError);
}

TEST(Regression, RecoversPlantedQuadratic) {
  const auto s = ct_test::grid_space({{"TP1", {1, 2, 3}}, {"TP2", {2, 5, 7}}});
  const auto d = ct_test::make_dataset(
      s,
      [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_F32, 3 * a[0] * a[0] + 2 * a[1]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  const auto fam = train_regression(d, Counter::INST_F32);
  ASSERT_EQ(fam.by_subspace.size(), 1u);
  const auto& m = fam.by_subspace.at("");
  EXPECT_EQ(m.terms.size(), 6u);
  EXPECT_NEAR(coefficient(m, 0, -1, 2), 3.0, 1e-6);
  EXPECT_NEAR(coefficient(m, 1, -1, 1), 2.0, 1e-6);
  EXPECT_NEAR(coefficient(m, -1, -1, 1), 0.0, 1e-6);
  EXPECT_NEAR(coefficient(m, 0, -1, 1), 0.0, 1e-6);
  EXPECT_NEAR(coefficient(m, 1, -1, 2), 0.0, 1e-6);
  EXPECT_NEAR(coefficient(m, 0, 1, 1), 0.0, 1e-6);
}

TEST(Regression, OneModelPerBinarySubspace) {
  const auto s = ct_test::grid_space({{"X", {1, 2, 4, 8}}, {"F", {0, 1}}});
  const auto d = ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_INT, a[1] ? 5 * a[0] : 100 - a[0]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  const auto fam = train_regression(d, Counter::INST_INT);
  ASSERT_EQ(fam.by_subspace.size(), 2u);
  EXPECT_NEAR(fam.by_subspace.at("1").predict(std::vector<double>{8, 1}), 40.0, 1e-9);
  EXPECT_NEAR(fam.by_subspace.at("0").predict(std::vector<double>{1, 0}), 99.0, 1e-9);
}

TEST(Regression, AllBinaryGivesSubspaceMeans) {
  const auto s = ct_test::grid_space({{"F", {0, 1}}, {"G", {0, 1}}});
  const auto d = ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_MISC, 10 * a[0] + a[1]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  const auto fam = train_regression(d, Counter::INST_MISC);
  ASSERT_EQ(fam.by_subspace.size(), 4u);
  for (const auto& [key, m] : fam.by_subspace) {
    ASSERT_EQ(m.terms.size(), 1u);
    EXPECT_NEAR(m.coefficients[0], 10 * (key[0] - '0') + (key[1] - '0'), 1e-9);
  }
}

TEST(Regression, EmptySubspaceEmitsNothing) {
  // Key "11" never occurs.
  std::string text = "param:X,param:F,param:G\nbinary:0,binary:1,binary:1\n";
  for (const char* fg : {"0,0", "0,1", "1,0"})
    for (int x = 1; x <= 4; ++x) text += std::to_string(x) + "," + fg + "\n";
  const auto s = parse_space(text);
  const auto d = ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_INT, a[0] + 10 * a[1]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  const auto fam = train_regression(d, Counter::INST_INT);
  EXPECT_EQ(fam.by_subspace.size(), 3u);
  EXPECT_FALSE(fam.by_subspace.count("11"));
  EXPECT_TRUE(fam.by_subspace.count("10"));
}

TEST(Regression, UnderPopulatedSubspaceWarns) {
  const auto s = parse_space("param:X,param:F\nbinary:0,binary:1\n1,0\n2,0\n3,0\n4,0\n1,1\n2,1\n");
  const auto d = ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_INT, a[0]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  // Subspace "1" of s2 holds two records for four terms.
  const auto s2 = parse_space("param:X,param:Y,param:F\nbinary:0,binary:0,binary:1\n1,1,0\n2,1,0\n3,2,0\n4,3,0\n"
                              "1,2,0\n2,3,0\n3,1,0\n1,1,1\n2,2,1\n");
  const auto d2 = ct_test::make_dataset(
      s2, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_INT, a[0] + a[1]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  std::vector<std::string> warnings;
  const auto fam = train_regression(d2, Counter::INST_INT, {}, &warnings);
  EXPECT_FALSE(fam.by_subspace.count("1"));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("'1'"), std::string::npos);
  EXPECT_EQ(train_regression(d, Counter::INST_INT).by_subspace.size(), 2u);
}

TEST(Regression, RankDeficientDesignNamesSubspace) {
  const auto s = parse_space("param:X,param:Y\nbinary:0,binary:0\n1,1\n2,2\n3,3\n4,4\n5,5\n6,6\n7,7\n8,8\n");
  const auto d = ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_INT, a[0]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  try {
    train_regression(d, Counter::INST_INT);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("rank-deficient"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("subspace ''"), std::string::npos) << e.what();
  }
}

TEST(ModelSet, PredictionsClampAtZero) {
  const auto s = ct_test::grid_space({{"X", {1, 2, 3}}});
  const auto d = ct_test::make_dataset(
      s, [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_INT, 1.5 - 2 * a[0]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  ModelSet m;
  m.parameters = {{"X", false}};
  m.family = ModelFamily::Regression;
  m.models.emplace(Counter::INST_INT, train_regression(d, Counter::INST_INT));
  // 1.5 - 2*2 = -2.5 before clamping.
  EXPECT_EQ(predict(m, s, s[1]).get(Counter::INST_INT), 0.0);
}

TEST(ModelSet, ModeledCounters) {
  const auto d = ten_times_tp1();
  const auto counters = modeled_counters(d);
  EXPECT_NE(std::find(counters.begin(), counters.end(), Counter::GLOBAL_THREADS), counters.end());
  EXPECT_NE(std::find(counters.begin(), counters.end(), Counter::SM_E), counters.end());
  EXPECT_EQ(std::find(counters.begin(), counters.end(), Counter::DRAM_U), counters.end());
  EXPECT_NE(std::find(counters.begin(), counters.end(), Counter::INST_ISSUE_U), counters.end());
}

TEST(ModelSet, SerializationRoundTripIsBitwise) {
  const auto d = load_dataset(DatasetPaths::in_directory(std::string(COUNTERTUNE_DATA_DIR) + "/coulomb_like"));
  for (auto family : {ModelFamily::DecisionTree, ModelFamily::Regression, ModelFamily::Lookup}) {
    TrainOptions opts;
    opts.family = family;
    opts.seed = 4;
    const auto m = train_models(d, opts);
    const auto text = serialize_model(m);
    const auto back = parse_model(text);
    EXPECT_EQ(back, m) << to_string(family);
    EXPECT_EQ(serialize_model(back), text);
    std::mt19937_64 gen(1);
    for (int i = 0; i < 100; ++i) {
      const auto& c = d.space()[gen() % d.space().size()];
      EXPECT_EQ(back.predict(c.assignment), m.predict(c.assignment));
    }
  }
}

TEST(ModelSet, SameSeedSameBytes) {
  const auto d = load_dataset(DatasetPaths::in_directory(std::string(COUNTERTUNE_DATA_DIR) + "/coulomb_like"));
  TrainOptions opts;
  opts.seed = 12;
  const auto a = serialize_model(train_models(d, opts));
  opts.workers = 4;
  EXPECT_EQ(serialize_model(train_models(d, opts)), a);
}

TEST(ModelSet, FileErrors) {
  const auto d = ten_times_tp1();
  auto text = serialize_model(train_models(d));
  auto bumped = text;
  const auto pos = bumped.find("\"version\": 1");
  ASSERT_NE(pos, std::string::npos);
  bumped.replace(pos, 12, "\"version\": 7");
  EXPECT_THROW(parse_model(bumped), ModelError);
  EXPECT_THROW(parse_model(text.substr(0, text.size() / 2)), ModelError);
  EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}

TEST(ModelSet, ParameterMismatch) {
  const auto m = train_models(ten_times_tp1());
  const auto other = ct_test::grid_space({{"TP1", {1, 2}}, {"OTHER", {1, 2}}});
  try {
    predict(m, other, other[0]);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("parameter mismatch"), std::string::npos);
  }
}

TEST(ModelSet, SaveAndLoadFile) {
  const auto m = train_models(ten_times_tp1());
  const auto path = (std::filesystem::temp_directory_path() / "countertune_model.json").string();
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  std::filesystem::remove(path);
}
