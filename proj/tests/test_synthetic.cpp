#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "countertune/error.hpp"
#include "countertune/synthetic.hpp"

using namespace countertune;

namespace {

std::string data_file(const std::string& name) { return std::string(COUNTERTUNE_DATA_DIR) + "/" + name; }

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double eval(const std::string& text, std::vector<double> vars = {}, std::vector<std::string> names = {}) {
  return Expression::parse(text, names).evaluate(vars);
}

}  // namespace

TEST(Expression, Arithmetic) {
  EXPECT_DOUBLE_EQ(eval("1 + 2 * 3"), 7.0);
  EXPECT_DOUBLE_EQ(eval("(1 + 2) * 3"), 9.0);
  EXPECT_DOUBLE_EQ(eval("2 ^ 3 ^ 2"), 512.0);
  EXPECT_DOUBLE_EQ(eval("-2 ^ 2"), -4.0);
  EXPECT_DOUBLE_EQ(eval("10 / 4 - 1"), 1.5);
  EXPECT_DOUBLE_EQ(eval("1e3 + .5"), 1000.5);
}

TEST(Expression, Functions) {
  EXPECT_DOUBLE_EQ(eval("min(3, 1, 2)"), 1.0);
  EXPECT_DOUBLE_EQ(eval("max(3, 1, 2)"), 3.0);
  EXPECT_DOUBLE_EQ(eval("clamp(12, 0, 10)"), 10.0);
  EXPECT_DOUBLE_EQ(eval("abs(-4) + sqrt(9) + log2(8) + floor(2.7) + ceil(2.1)"), 15.0);
}

TEST(Expression, Variables) {
  EXPECT_DOUBLE_EQ(eval("3*A^2 + 2*B", {2, 5}, {"A", "B"}), 22.0);
}

TEST(Expression, Errors) {
  try {
    Expression::parse("1 + Q", {"A"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unknown parameter 'Q'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(Expression::parse("1 +", {}), Error);
  EXPECT_THROW(Expression::parse("(1", {}), Error);
  EXPECT_THROW(Expression::parse("clamp(1, 2)", {}), Error);
  EXPECT_THROW(Expression::parse("frobnicate(1)", {}), Error);
  EXPECT_THROW(Expression::parse("rnd()", {}).evaluate({}), Error);
}

TEST(Expression, SeededRandom) {
  const auto e = Expression::parse("rnd()", {});
  Rng a(4), b(4);
  const double x = e.evaluate({}, &a);
  EXPECT_GE(x, 0.0);
  EXPECT_LT(x, 1.0);
  EXPECT_EQ(x, e.evaluate({}, &b));
}

TEST(Synthetic, GradientSpaceWellPerformingAreLowestDramTraffic) {
  const auto d = generate_synthetic(load_synthetic_spec(data_file("gradient.json")));
  ASSERT_EQ(d.space().size(), 1000u);
  std::vector<std::pair<double, std::size_t>> by_dram;
  for (const auto& r : d.records()) {
    by_dram.emplace_back(r.counters[Counter::DRAM_RT], r.config_index);
  }
  std::sort(by_dram.begin(), by_dram.end());
  const auto well = well_performing_set(d);
  ASSERT_EQ(well.size(), 20u);
  std::vector<std::size_t> lowest;
  for (std::size_t i = 0; i < 20; ++i) lowest.push_back(by_dram[i].second);
  std::sort(lowest.begin(), lowest.end());
  EXPECT_EQ(well, lowest);
  // Runtime strictly increases with DRAM_RT.
  for (std::size_t i = 1; i < by_dram.size(); ++i)
    EXPECT_LT(d.record_for(by_dram[i - 1].second)->runtime_us, d.record_for(by_dram[i].second)->runtime_us);
}

TEST(Synthetic, ConstantSpaceIsAllWellPerforming) {
  const auto d = generate_synthetic(load_synthetic_spec(data_file("constant.json")));
  EXPECT_EQ(well_performing_set(d).size(), d.space().size());
}

TEST(Synthetic, SameSeedSameBytes) {
  const auto spec = load_synthetic_spec(data_file("coulomb_like.json"));
  const auto base = std::filesystem::temp_directory_path() / "countertune_synth";
  std::filesystem::remove_all(base);
  gen_synthetic(spec, {5, 1.0}, (base / "a").string());
  gen_synthetic(spec, {5, 1.0}, (base / "b").string());
  gen_synthetic(spec, {6, 1.0}, (base / "c").string());
  for (const char* f : {"space.csv", "measurements.csv", "arch.txt"})
    EXPECT_EQ(slurp(base / "a" / f), slurp(base / "b" / f)) << f;
  EXPECT_NE(slurp(base / "a" / "measurements.csv"), slurp(base / "c" / "measurements.csv"));
  std::filesystem::remove_all(base);
}

TEST(Synthetic, RuntimeScaleLeavesCountersAlone) {
  const auto spec = load_synthetic_spec(data_file("gradient.json"));
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec, {0, 3.0});
  for (std::size_t i = 0; i < a.records().size(); ++i) {
    EXPECT_EQ(a.records()[i].counters, b.records()[i].counters);
    EXPECT_DOUBLE_EQ(b.records()[i].runtime_us, 3.0 * a.records()[i].runtime_us);
  }
}

TEST(Synthetic, SpecErrors) {
  const std::string head = R"({"arch": {"name": "x", "cores": 10}, "parameters": [{"name": "A", "range": [1, 3]}],)";
  std::string counters = R"("counters": {)";
  for (std::size_t i = 0; i < kHardwareCounterCount; ++i)
    counters += std::string(i ? "," : "") + "\"" + std::string(abbreviation(counter_at(i))) + "\": \"1\"";
  counters += "},";
  const std::string tail = R"("global_threads": "64", "runtime_us": "A"})";
  EXPECT_NO_THROW(generate_synthetic(parse_synthetic_spec(head + counters + tail)));

  auto unknown = counters;
  unknown.replace(unknown.find("\"DRAM_RT\": \"1\""), 14, "\"DRAM_RT\": \"Z\"");
  try {
    generate_synthetic(parse_synthetic_spec(head + unknown + tail));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unknown parameter 'Z'"), std::string::npos) << e.what();
  }
  auto out_of_range = counters;
  out_of_range.replace(out_of_range.find("\"DRAM_U\": \"1\""), 13, "\"DRAM_U\": \"50\"");
  EXPECT_THROW(generate_synthetic(parse_synthetic_spec(head + out_of_range + tail)), Error);
  EXPECT_THROW(parse_synthetic_spec(head + R"("counters": {"DRAM_RT": "1"},)" + tail), Error);
  EXPECT_THROW(parse_synthetic_spec("{not json"), Error);
}
