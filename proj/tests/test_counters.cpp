#include <gtest/gtest.h>

#include <set>

#include "countertune/counters.hpp"
#include "countertune/error.hpp"
#include "test_support.hpp"

using namespace countertune;

namespace {

ArchProfile volta() {
  ArchProfile a;
  a.name = "test-volta";
  a.generation = Generation::VoltaPlus;
  a.cores = 5120;
  return a;
}

}  // namespace

TEST(Canonicalize, VoltaDramUtilizationDividesByTen) {
  const auto r = canonicalize("dram__throughput.avg.pct_of_peak_sustained_elapsed", 80.0, volta());
  EXPECT_EQ(r.counter, Counter::DRAM_U);
  EXPECT_DOUBLE_EQ(r.value, 8.0);
}

TEST(Canonicalize, PreVoltaIsIdentity) {
  const auto r = canonicalize("dram_utilization", 8.0, ct_test::pascal_arch());
  EXPECT_EQ(r.counter, Counter::DRAM_U);
  EXPECT_EQ(r.value, 8.0);
}

TEST(Canonicalize, VoltaWarpEfficiencyRatioToPercent) {
  const auto r = canonicalize("smsp__thread_inst_executed_per_inst_executed.ratio", 32.0, volta());
  EXPECT_EQ(r.counter, Counter::WARP_E);
  EXPECT_DOUBLE_EQ(r.value, 100.0);
}

TEST(Canonicalize, TexAndSharedVoltaUtilizationsDivideByTen) {
  EXPECT_DOUBLE_EQ(canonicalize(describe(Counter::TEX_U).volta_name, 45.0, volta()).value, 4.5);
  EXPECT_DOUBLE_EQ(canonicalize(describe(Counter::SHR_U).volta_name, 70.0, volta()).value, 7.0);
  EXPECT_DOUBLE_EQ(canonicalize(describe(Counter::L2_U).volta_name, 3.0, volta()).value, 3.0);
}

TEST(Canonicalize, AbbreviationsPassThroughUnconverted) {
  const auto r = canonicalize("DRAM_U", 8.0, volta());
  EXPECT_EQ(r.counter, Counter::DRAM_U);
  EXPECT_EQ(r.value, 8.0);
}

TEST(Canonicalize, UnknownNameThrows) {
  EXPECT_THROW(canonicalize("no_such_metric", 1.0, volta()), Error);
  // Volta names are not valid on a pre-Volta profile.
  EXPECT_THROW(canonicalize("dram__throughput.avg.pct_of_peak_sustained_elapsed", 1.0, ct_test::pascal_arch()),
               Error);
}

TEST(Canonicalize, OverridesWinOverTables) {
  auto a = volta();
  a.name_overrides.emplace("my_dram_util", Counter::DRAM_U);
  a.scale_overrides[Counter::DRAM_U] = 0.5;
  const auto r = canonicalize("my_dram_util", 8.0, a);
  EXPECT_EQ(r.counter, Counter::DRAM_U);
  EXPECT_DOUBLE_EQ(r.value, 4.0);
}

TEST(Canonicalize, TotalAndInjectivePerGeneration) {
  for (auto gen : {Generation::PreVolta, Generation::VoltaPlus}) {
    ArchProfile a = gen == Generation::PreVolta ? ct_test::pascal_arch() : volta();
    std::set<Counter> seen;
    for (const auto& d : counter_catalog()) {
      if (d.counter == Counter::GLOBAL_THREADS) continue;
      const auto name = gen == Generation::PreVolta ? d.pre_volta_name : d.volta_name;
      const auto r = canonicalize(name, 1.0, a);
      EXPECT_EQ(r.counter, d.counter) << name;
      EXPECT_TRUE(seen.insert(r.counter).second) << name;
    }
    EXPECT_EQ(seen.size(), kHardwareCounterCount);
  }
}

TEST(Canonicalize, PreVoltaValuesUnchanged) {
  const auto a = ct_test::pascal_arch();
  for (const auto& d : counter_catalog()) {
    if (d.counter == Counter::GLOBAL_THREADS) continue;
    for (double v : {0.0, 1.25, 7.0, 99.5}) EXPECT_EQ(canonicalize(d.pre_volta_name, v, a).value, v);
  }
}

TEST(Classify, TableKinds) {
  EXPECT_EQ(classify(Counter::DRAM_RT), CounterKind::Ops);
  EXPECT_EQ(classify(Counter::SM_E), CounterKind::Stress);
  EXPECT_EQ(classify(Counter::INST_ISSUE_U), CounterKind::Ops);
  EXPECT_EQ(classify(Counter::GLOBAL_THREADS), CounterKind::Ops);
  std::size_t stress = 0;
  for (const auto& d : counter_catalog()) stress += d.kind == CounterKind::Stress;
  EXPECT_EQ(stress, 7u);
}

TEST(Abbreviation, RoundTrip) {
  for (std::size_t i = 0; i < kCounterCount; ++i) {
    const auto c = counter_at(i);
    EXPECT_EQ(parse_abbreviation(abbreviation(c)), c);
  }
  EXPECT_FALSE(parse_abbreviation("DRAM"));
}

TEST(CounterValues, AbsentDiffersFromZero) {
  CounterValues v;
  EXPECT_FALSE(v.has(Counter::LOC_O));
  v.set(Counter::LOC_O, 0.0);
  EXPECT_TRUE(v.has(Counter::LOC_O));
  EXPECT_EQ(v.get(Counter::LOC_O), 0.0);
  EXPECT_EQ(v.value_or(Counter::DRAM_RT, -1.0), -1.0);
  v.erase(Counter::LOC_O);
  EXPECT_EQ(v.size(), 0u);
}

TEST(ArchFile, ParsesAllKeys) {
  const auto a = parse_arch(
      "# a card\nname = titan-v\ngeneration = volta_plus\ncores = 5120\n"
      "map.my_metric = DRAM_RT\nscale.DRAM_U = 0.2\n");
  EXPECT_EQ(a.name, "titan-v");
  EXPECT_EQ(a.generation, Generation::VoltaPlus);
  EXPECT_EQ(a.cores, 5120);
  EXPECT_EQ(resolve_counter_name("my_metric", a), Counter::DRAM_RT);
  EXPECT_EQ(a.scale_overrides.at(Counter::DRAM_U), 0.2);
  EXPECT_EQ(parse_arch(format_arch(a)), a);
}

TEST(ArchFile, ReportsLineOfError) {
  try {
    parse_arch("name = x\ngeneration = kepler\ncores = 1\n", "arch.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("arch.txt:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_arch("name = x\ngeneration = pre_volta\n"), ParseError);
  EXPECT_THROW(parse_arch("name = x\ngeneration = pre_volta\ncores = 0\n"), ParseError);
  EXPECT_THROW(parse_arch("name = x\ngeneration = pre_volta\ncores = 4\nmap.a = NOPE\n"), ParseError);
  EXPECT_THROW(parse_arch("name = x\ngeneration = pre_volta\ncores = 4\ncolour = red\n"), ParseError);
}
