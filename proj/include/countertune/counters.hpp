#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace countertune {

// Canonical counter abbreviations. Order is the canonical column order used
// when datasets are written back out.
enum class Counter : std::size_t {
  DRAM_RT,
  DRAM_WT,
  L2_RT,
  L2_WT,
  TEX_RWT,
  LOC_O,
  SHR_LT,
  SHR_WT,
  INST_F32,
  INST_F64,
  INST_INT,
  INST_MISC,
  INST_LDST,
  INST_CONT,
  INST_BCONV,
  INST_EXE,
  INST_ISSUE_U,
  DRAM_U,
  L2_U,
  TEX_U,
  SHR_U,
  SM_E,
  WARP_E,
  WARP_NP_E,
  GLOBAL_THREADS,  // thread count reported by the launcher, not a hardware counter
};

inline constexpr std::size_t kCounterCount = 25;
// Counters read from hardware; GLOBAL_THREADS is excluded.
inline constexpr std::size_t kHardwareCounterCount = 24;

constexpr std::size_t index_of(Counter c) { return static_cast<std::size_t>(c); }
constexpr Counter counter_at(std::size_t i) { return static_cast<Counter>(i); }

enum class CounterKind { Ops, Stress };
enum class Generation { PreVolta, VoltaPlus };

struct CounterDescriptor {
  Counter counter;
  std::string_view abbreviation;
  CounterKind kind;
  std::string_view pre_volta_name;
  std::string_view volta_name;
  // Multiplier applied to readings of volta_name to reach pre-Volta units.
  double volta_scale;
};

std::span<const CounterDescriptor, kCounterCount> counter_catalog();
const CounterDescriptor& describe(Counter c);
std::string_view abbreviation(Counter c);
std::optional<Counter> parse_abbreviation(std::string_view text);

CounterKind classify(Counter c);

// Allowed range of a canonical Stress counter, if it is range-checked.
std::optional<std::pair<double, double>> canonical_range(Counter c);

// Sparse map of canonical counter values; absent entries are distinct from 0.
class CounterValues {
 public:
  bool has(Counter c) const { return present_.test(index_of(c)); }
  std::optional<double> get(Counter c) const {
    if (!has(c)) return std::nullopt;
    return values_[index_of(c)];
  }
  double value_or(Counter c, double fallback) const { return has(c) ? values_[index_of(c)] : fallback; }
  // Precondition: has(c).
  double operator[](Counter c) const { return values_[index_of(c)]; }

  void set(Counter c, double v) {
    values_[index_of(c)] = v;
    present_.set(index_of(c));
  }
  void erase(Counter c) {
    present_.reset(index_of(c));
    values_[index_of(c)] = 0.0;
  }
  std::size_t size() const { return present_.count(); }

  friend bool operator==(const CounterValues&, const CounterValues&) = default;

 private:
  std::array<double, kCounterCount> values_{};
  std::bitset<kCounterCount> present_;
};

struct ArchProfile {
  std::string name;
  Generation generation = Generation::PreVolta;
  int cores = 1;
  // Extra raw name -> abbreviation mappings, consulted before the tables.
  std::map<std::string, Counter, std::less<>> name_overrides;
  // Replaces the catalog scale for a counter when reading non-canonical names.
  std::map<Counter, double> scale_overrides;

  friend bool operator==(const ArchProfile&, const ArchProfile&) = default;
};

std::string_view to_string(Generation g);
std::optional<Generation> parse_generation(std::string_view text);

struct CanonicalReading {
  Counter counter;
  double value;
};

// Resolves a raw counter name for the given architecture and converts the
// reading into pre-Volta units. Canonical abbreviations are accepted as-is
// with no conversion. Throws Error on an unknown name.
CanonicalReading canonicalize(std::string_view raw_name, double raw_value, const ArchProfile& arch);

// Name resolution only; nullopt when unknown.
std::optional<Counter> resolve_counter_name(std::string_view raw_name, const ArchProfile& arch);

// Arch file: `key = value` lines, `#` comments. Keys: name, generation
// (pre_volta | volta_plus), cores, map.<raw_name> = <ABBR>, scale.<ABBR> = <factor>.
ArchProfile parse_arch(std::string_view text, const std::string& source_name = "<arch>");
ArchProfile load_arch(const std::string& path);
std::string format_arch(const ArchProfile& arch);

}  // namespace countertune
