#include "countertune/bottleneck.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>
#include <string>

#include "countertune/error.hpp"

namespace countertune {
namespace {

using enum Counter;

constexpr std::array<std::string_view, kBottleneckCount> kNames{
    "b_DRAM_read", "b_DRAM_write", "b_L2_read", "b_L2_write", "b_shared_read", "b_shared_write",
    "b_tex",       "b_local",      "b_fp32",    "b_fp64",     "b_int",         "b_misc",
    "b_ldst",      "b_control",    "b_bconv",   "b_issue",    "b_sm",          "b_paral"};

constexpr std::array<Counter, 24> kInputs{DRAM_RT,   DRAM_WT,   L2_RT,      L2_WT,    TEX_RWT,      LOC_O,
                                          SHR_LT,    SHR_WT,    INST_F32,   INST_F64, INST_INT,     INST_MISC,
                                          INST_LDST, INST_CONT, INST_BCONV, INST_EXE, INST_ISSUE_U, DRAM_U,
                                          L2_U,      TEX_U,     SHR_U,      SM_E,     WARP_E,       WARP_NP_E};

struct InstructionClass {
  Counter counter;
  Bottleneck bottleneck;
};

constexpr std::array<InstructionClass, 7> kInstructionClasses{{
    {INST_F32, Bottleneck::Fp32},
    {INST_F64, Bottleneck::Fp64},
    {INST_INT, Bottleneck::Int},
    {INST_MISC, Bottleneck::Misc},
    {INST_LDST, Bottleneck::LdSt},
    {INST_CONT, Bottleneck::Control},
    {INST_BCONV, Bottleneck::BitConvert},
}};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double need(const CounterValues& counters, Counter c) {
  auto v = counters.get(c);
  if (!v) throw Error("bottleneck analysis needs counter " + std::string(abbreviation(c)));
  return *v;
}

// Read/write split of one memory level's utilization. No traffic, no bottleneck.
std::pair<double, double> split_memory(double reads, double writes, double utilization) {
  const double total = reads + writes;
  if (!(total > 0.0)) return {0.0, 0.0};
  const double u = utilization / 10.0;
  return {clamp01(reads / total * u), clamp01(writes / total * u)};
}

}  // namespace

std::string_view bottleneck_name(Bottleneck b) { return kNames[static_cast<std::size_t>(b)]; }

std::span<const Counter> analysis_inputs() { return kInputs; }

BottleneckVector analyze(const CounterValues& counters, const ArchProfile& arch, std::int64_t threads) {
  if (threads < 1) throw Error("bottleneck analysis needs threads >= 1");
  for (auto c : analysis_inputs()) need(counters, c);

  BottleneckVector b;
  std::tie(b[Bottleneck::DramRead], b[Bottleneck::DramWrite]) =
      split_memory(counters[DRAM_RT], counters[DRAM_WT], counters[DRAM_U]);
  std::tie(b[Bottleneck::L2Read], b[Bottleneck::L2Write]) =
      split_memory(counters[L2_RT], counters[L2_WT], counters[L2_U]);
  std::tie(b[Bottleneck::SharedRead], b[Bottleneck::SharedWrite]) =
      split_memory(counters[SHR_LT], counters[SHR_WT], counters[SHR_U]);

  b[Bottleneck::Tex] = clamp01(counters[TEX_U] / 10.0);
  const double max_mem_util = std::max({counters[DRAM_U] / 10.0, counters[L2_U] / 10.0, counters[TEX_U] / 10.0});
  b[Bottleneck::Local] = clamp01(counters[LOC_O] / 100.0 * max_mem_util);

  const double warp_e = counters[WARP_E];
  const double warp_np_e = counters[WARP_NP_E];
  const double issue_u = counters[INST_ISSUE_U];
  const double ins_fitted =
      (warp_e > 0.0 && warp_np_e > 0.0) ? 32.0 * counters[INST_EXE] * (100.0 / warp_e) * (100.0 / warp_np_e) : 0.0;
  if (ins_fitted > 0.0) {
    const double ins_util =
        arch.generation == Generation::PreVolta ? issue_u / 100.0 : std::min(1.0, issue_u / 50.0);
    double util_max = 0.0;
    for (const auto& cls : kInstructionClasses) {
      const double share = counters[cls.counter] / ins_fitted;
      util_max = std::max(util_max, share);
      b[cls.bottleneck] = clamp01(share * ins_util);
    }
    b[Bottleneck::Issue] = clamp01(util_max * (100.0 - issue_u) / 100.0);
  } else {
    b.degenerate_instructions = true;
  }

  b[Bottleneck::Sm] = clamp01((100.0 - counters[SM_E]) / 100.0);
  const double wanted = static_cast<double>(arch.cores) * 5.0;
  b[Bottleneck::Parallelism] = clamp01(std::max(0.0, (wanted - static_cast<double>(threads)) / wanted));
  return b;
}

DeltaPC react(const BottleneckVector& b, const ReactOptions& options) {
  const double r = options.inst_reaction;
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("inst_reaction must lie in (0, 1)");
  // Adding 0.0 turns -0 into 0.
  auto clamp11 = [](double v) { return std::clamp(v, -1.0, 1.0) + 0.0; };
  auto instruction = [r](double bottleneck) { return bottleneck <= r ? 0.0 : -(bottleneck - r) / (1.0 - r); };

  DeltaPC d;
  d.set(DRAM_RT, clamp11(-b[Bottleneck::DramRead]));
  d.set(DRAM_WT, clamp11(-b[Bottleneck::DramWrite]));
  d.set(L2_RT, clamp11(-b[Bottleneck::L2Read]));
  d.set(L2_WT, clamp11(-b[Bottleneck::L2Write]));
  d.set(SHR_LT, clamp11(-b[Bottleneck::SharedRead]));
  d.set(SHR_WT, clamp11(-b[Bottleneck::SharedWrite]));
  d.set(TEX_RWT, clamp11(-b[Bottleneck::Tex]));
  d.set(LOC_O, clamp11(-b[Bottleneck::Local]));
  for (const auto& cls : kInstructionClasses) d.set(cls.counter, clamp11(instruction(b[cls.bottleneck])));
  d.set(INST_ISSUE_U, clamp11(options.issue_sign * -instruction(b[Bottleneck::Issue])));
  d.set(SM_E, clamp11(b[Bottleneck::Sm]));
  d.set(GLOBAL_THREADS, clamp11(b[Bottleneck::Parallelism]));
  return d;
}

}  // namespace countertune
