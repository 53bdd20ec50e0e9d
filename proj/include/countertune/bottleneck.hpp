#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "countertune/counters.hpp"

namespace countertune {

enum class Bottleneck : std::size_t {
  DramRead,
  DramWrite,
  L2Read,
  L2Write,
  SharedRead,
  SharedWrite,
  Tex,
  Local,
  Fp32,
  Fp64,
  Int,
  Misc,
  LdSt,
  Control,
  BitConvert,
  Issue,
  Sm,
  Parallelism,
};

inline constexpr std::size_t kBottleneckCount = 18;

std::string_view bottleneck_name(Bottleneck b);

// Subsystem stress levels, each in [0, 1].
struct BottleneckVector {
  std::array<double, kBottleneckCount> values{};
  // Set when WARP_E, WARP_NP_E or INST_EXE is zero; instruction and issue
  // bottlenecks are then reported as 0.
  bool degenerate_instructions = false;

  double operator[](Bottleneck b) const { return values[static_cast<std::size_t>(b)]; }
  double& operator[](Bottleneck b) { return values[static_cast<std::size_t>(b)]; }
};

// Required counter changes in [-1, 1]; absent key means 0.
class DeltaPC {
 public:
  double operator[](Counter c) const { return values_[index_of(c)]; }
  void set(Counter c, double v) { values_[index_of(c)] = v; }
  const std::array<double, kCounterCount>& values() const { return values_; }

  // Counters that can carry a non-zero change.
  static constexpr std::array<Counter, 18> kKeys{
      Counter::DRAM_RT,   Counter::DRAM_WT,  Counter::L2_RT,     Counter::L2_WT,     Counter::SHR_LT,
      Counter::SHR_WT,    Counter::TEX_RWT,  Counter::LOC_O,     Counter::INST_F32,  Counter::INST_F64,
      Counter::INST_INT,  Counter::INST_MISC, Counter::INST_LDST, Counter::INST_CONT, Counter::INST_BCONV,
      Counter::INST_ISSUE_U, Counter::SM_E,  Counter::GLOBAL_THREADS};

 private:
  std::array<double, kCounterCount> values_{};
};

inline constexpr double kDefaultInstReaction = 0.7;
inline constexpr double kInstructionBoundInstReaction = 0.5;

// Sign applied to the issue-slot reaction. The literal reading treats b_issue
// like every other instruction bottleneck (decrease); +1 requests an increase.
inline constexpr double kIssueReactionSign = -1.0;

// Counters the bottleneck equations read.
std::span<const Counter> analysis_inputs();

// Expert-system stage one: canonical counters -> bottlenecks.
// Throws Error if a required counter is absent or threads < 1.
BottleneckVector analyze(const CounterValues& counters, const ArchProfile& arch, std::int64_t threads);

struct ReactOptions {
  double inst_reaction = kDefaultInstReaction;
  double issue_sign = kIssueReactionSign;
};

// Expert-system stage two: bottlenecks -> required counter changes.
// Throws std::invalid_argument unless 0 < inst_reaction < 1.
DeltaPC react(const BottleneckVector& b, const ReactOptions& options = {});
inline DeltaPC react(const BottleneckVector& b, double inst_reaction) { return react(b, ReactOptions{inst_reaction}); }

}  // namespace countertune
