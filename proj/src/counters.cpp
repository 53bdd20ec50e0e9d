#include "countertune/counters.hpp"

#include <fstream>
#include <sstream>

#include "countertune/error.hpp"
#include "text_util.hpp"

namespace countertune {
namespace {

using enum Counter;
using enum CounterKind;

constexpr std::array<CounterDescriptor, kCounterCount> kCatalog{{
    {DRAM_RT, "DRAM_RT", Ops, "dram_read_transactions", "dram__sectors_read.sum", 1.0},
    {DRAM_WT, "DRAM_WT", Ops, "dram_write_transactions", "dram__sectors_write.sum", 1.0},
    {L2_RT, "L2_RT", Ops, "l2_read_transactions", "lts__t_sectors_op_read.sum", 1.0},
    {L2_WT, "L2_WT", Ops, "l2_write_transactions", "lts__t_sectors_op_write.sum", 1.0},
    {TEX_RWT, "TEX_RWT", Ops, "tex_cache_transactions", "l1tex__t_requests_pipe_lsu_mem_global_op_ld.sum", 1.0},
    {LOC_O, "LOC_O", Ops, "local_memory_overhead", "l1tex__t_sectors_pipe_lsu_mem_local_op_st.sum", 1.0},
    {SHR_LT, "SHR_LT", Ops, "shared_load_transactions", "l1tex__data_pipe_lsu_wavefronts_mem_shared_op_ld.sum", 1.0},
    {SHR_WT, "SHR_WT", Ops, "shared_store_transactions", "l1tex__data_pipe_lsu_wavefronts_mem_shared_op_st.sum", 1.0},
    {INST_F32, "INST_F32", Ops, "inst_fp_32", "smsp__sass_thread_inst_executed_op_fp32_pred_on.sum", 1.0},
    {INST_F64, "INST_F64", Ops, "inst_fp_64", "smsp__sass_thread_inst_executed_op_fp64_pred_on.sum", 1.0},
    {INST_INT, "INST_INT", Ops, "inst_integer", "smsp__sass_thread_inst_executed_op_integer_pred_on.sum", 1.0},
    {INST_MISC, "INST_MISC", Ops, "inst_misc", "smsp__sass_thread_inst_executed_op_misc_pred_on.sum", 1.0},
    {INST_LDST, "INST_LDST", Ops, "inst_compute_ld_st", "smsp__sass_thread_inst_executed_op_memory_pred_on.sum", 1.0},
    {INST_CONT, "INST_CONT", Ops, "inst_control", "smsp__sass_thread_inst_executed_op_control_pred_on.sum", 1.0},
    {INST_BCONV, "INST_BCONV", Ops, "inst_bit_convert", "smsp__sass_thread_inst_executed_op_conversion_pred_on.sum", 1.0},
    {INST_EXE, "INST_EXE", Ops, "inst_executed", "smsp__inst_executed.sum", 1.0},
    {INST_ISSUE_U, "INST_ISSUE_U", Ops, "issue_slot_utilization", "smsp__issue_active.avg.pct_of_peak_sustained_active", 1.0},
    {DRAM_U, "DRAM_U", Stress, "dram_utilization", "dram__throughput.avg.pct_of_peak_sustained_elapsed", 0.1},
    {L2_U, "L2_U", Stress, "l2_utilization", "lts__t_sectors.avg.pct_of_peak_sustained_elapsed", 1.0},
    {TEX_U, "TEX_U", Stress, "tex_utilization", "l1tex__t_requests_pipe_lsu_mem_global_op_ld.avg.pct_of_peak_sustained_active", 0.1},
    {SHR_U, "SHR_U", Stress, "shared_utilization", "l1tex__data_pipe_lsu_wavefronts_mem_shared.avg.pct_of_peak_sustained_elapsed", 0.1},
    {SM_E, "SM_E", Stress, "sm_efficiency", "smsp__cycles_active.avg.pct_of_peak_sustained_elapsed", 1.0},
    {WARP_E, "WARP_E", Stress, "warp_execution_efficiency", "smsp__thread_inst_executed_per_inst_executed.ratio", 100.0 / 32.0},
    {WARP_NP_E, "WARP_NP_E", Stress, "warp_nonpred_execution_efficiency", "smsp__thread_inst_executed_per_inst_executed.pct", 1.0},
    {GLOBAL_THREADS, "GLOBAL_THREADS", Ops, "global_threads", "global_threads", 1.0},
}};

static_assert([] {
  for (std::size_t i = 0; i < kCatalog.size(); ++i)
    if (index_of(kCatalog[i].counter) != i) return false;
  return true;
}());

}  // namespace

std::span<const CounterDescriptor, kCounterCount> counter_catalog() { return kCatalog; }

const CounterDescriptor& describe(Counter c) { return kCatalog[index_of(c)]; }

std::string_view abbreviation(Counter c) { return describe(c).abbreviation; }

std::optional<Counter> parse_abbreviation(std::string_view text) {
  for (const auto& d : kCatalog)
    if (d.abbreviation == text) return d.counter;
  return std::nullopt;
}

CounterKind classify(Counter c) { return describe(c).kind; }

std::optional<std::pair<double, double>> canonical_range(Counter c) {
  switch (c) {
    case DRAM_U:
    case L2_U:
    case TEX_U:
    case SHR_U:
      return std::pair{0.0, 10.0};
    case SM_E:
    case WARP_E:
    case WARP_NP_E:
      return std::pair{0.0, 100.0};
    default:
      return std::nullopt;
  }
}

std::string_view to_string(Generation g) { return g == Generation::PreVolta ? "pre_volta" : "volta_plus"; }

std::optional<Generation> parse_generation(std::string_view text) {
  if (text == "pre_volta") return Generation::PreVolta;
  if (text == "volta_plus") return Generation::VoltaPlus;
  return std::nullopt;
}

std::optional<Counter> resolve_counter_name(std::string_view raw_name, const ArchProfile& arch) {
  if (auto it = arch.name_overrides.find(raw_name); it != arch.name_overrides.end()) return it->second;
  if (auto c = parse_abbreviation(raw_name)) return c;
  for (const auto& d : kCatalog) {
    const auto name = arch.generation == Generation::PreVolta ? d.pre_volta_name : d.volta_name;
    if (name == raw_name) return d.counter;
  }
  return std::nullopt;
}

CanonicalReading canonicalize(std::string_view raw_name, double raw_value, const ArchProfile& arch) {
  const auto counter = resolve_counter_name(raw_name, arch);
  if (!counter) throw Error("unknown counter name '" + std::string(raw_name) + "' for arch '" + arch.name + "'");
  // Canonical abbreviations are already in pre-Volta units.
  if (raw_name == abbreviation(*counter)) return {*counter, raw_value};
  double scale = 1.0;
  if (auto it = arch.scale_overrides.find(*counter); it != arch.scale_overrides.end()) {
    scale = it->second;
  } else if (arch.generation == Generation::VoltaPlus) {
    scale = describe(*counter).volta_scale;
  }
  return {*counter, raw_value * scale};
}

ArchProfile parse_arch(std::string_view text, const std::string& source_name) {
  ArchProfile arch;
  bool have_name = false, have_generation = false, have_cores = false;
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source_name, line_no, "expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key == "name") {
      arch.name = std::string(value);
      have_name = true;
    } else if (key == "generation") {
      auto g = parse_generation(value);
      if (!g) throw ParseError(source_name, line_no, "generation must be pre_volta or volta_plus");
      arch.generation = *g;
      have_generation = true;
    } else if (key == "cores") {
      auto v = detail::parse_int(value);
      if (!v || *v < 1) throw ParseError(source_name, line_no, "cores must be a positive integer");
      arch.cores = static_cast<int>(*v);
      have_cores = true;
    } else if (key.starts_with("map.")) {
      auto c = parse_abbreviation(value);
      if (!c) throw ParseError(source_name, line_no, "unknown abbreviation '" + std::string(value) + "'");
      arch.name_overrides.emplace(std::string(key.substr(4)), *c);
    } else if (key.starts_with("scale.")) {
      auto c = parse_abbreviation(key.substr(6));
      if (!c) throw ParseError(source_name, line_no, "unknown abbreviation '" + std::string(key.substr(6)) + "'");
      auto v = detail::parse_double(value);
      if (!v || !(*v > 0.0)) throw ParseError(source_name, line_no, "scale must be a positive number");
      arch.scale_overrides[*c] = *v;
    } else {
      throw ParseError(source_name, line_no, "unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_name) throw ParseError(source_name, line_no, "missing key 'name'");
  if (!have_generation) throw ParseError(source_name, line_no, "missing key 'generation'");
  if (!have_cores) throw ParseError(source_name, line_no, "missing key 'cores'");
  return arch;
}

ArchProfile load_arch(const std::string& path) { return parse_arch(detail::read_file(path), path); }

std::string format_arch(const ArchProfile& arch) {
  std::ostringstream out;
  out << "name = " << arch.name << '\n';
  out << "generation = " << to_string(arch.generation) << '\n';
  out << "cores = " << arch.cores << '\n';
  for (const auto& [raw, c] : arch.name_overrides) out << "map." << raw << " = " << abbreviation(c) << '\n';
  for (const auto& [c, s] : arch.scale_overrides) out << "scale." << abbreviation(c) << " = " << detail::format_double(s) << '\n';
  return out.str();
}

}  // namespace countertune
