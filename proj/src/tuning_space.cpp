#include "countertune/tuning_space.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "countertune/error.hpp"
#include "text_util.hpp"

namespace countertune {

TuningParameter TuningParameter::make(std::string name, std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const bool binary = values.size() == 2 && values[0] == 0.0 && values[1] == 1.0;
  return {std::move(name), std::move(values), binary};
}

TuningSpace::TuningSpace(std::vector<TuningParameter> parameters, std::vector<std::vector<double>> assignments)
    : parameters_(std::move(parameters)) {
  for (const auto& p : parameters_) {
    if (p.values.empty()) throw Error("parameter '" + p.name + "' has no values");
    if (!std::is_sorted(p.values.begin(), p.values.end()) ||
        std::adjacent_find(p.values.begin(), p.values.end()) != p.values.end())
      throw Error("parameter '" + p.name + "' values must be ascending and distinct");
    const bool binary = p.values.size() == 2 && p.values[0] == 0.0 && p.values[1] == 1.0;
    if (binary != p.is_binary) throw Error("parameter '" + p.name + "' binary flag inconsistent with its values");
  }
  configurations_.reserve(assignments.size());
  for (auto& a : assignments) {
    const auto idx = configurations_.size();
    if (a.size() != parameters_.size())
      throw Error("configuration " + std::to_string(idx) + " has " + std::to_string(a.size()) + " values, expected " +
                  std::to_string(parameters_.size()));
    for (std::size_t p = 0; p < a.size(); ++p) {
      const auto& vals = parameters_[p].values;
      if (!std::binary_search(vals.begin(), vals.end(), a[p]))
        throw Error("configuration " + std::to_string(idx) + ": value " + detail::format_double(a[p]) +
                    " outside domain of '" + parameters_[p].name + "'");
    }
    if (!lookup_.emplace(a, idx).second)
      throw Error("configuration " + std::to_string(idx) + " duplicates configuration " +
                  std::to_string(lookup_.at(a)));
    configurations_.push_back({std::move(a), idx});
  }
}

std::optional<std::size_t> TuningSpace::find(std::span<const double> assignment) const {
  auto it = lookup_.find(std::vector<double>(assignment.begin(), assignment.end()));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> TuningSpace::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& p : parameters_) names.push_back(p.name);
  return names;
}

std::vector<std::size_t> TuningSpace::binary_parameter_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < parameters_.size(); ++i)
    if (parameters_[i].is_binary) out.push_back(i);
  return out;
}

Dataset::Dataset(TuningSpace space, ArchProfile arch, std::string input_label, std::vector<MeasurementRecord> records)
    : space_(std::move(space)), arch_(std::move(arch)), input_label_(std::move(input_label)),
      records_(std::move(records)) {
  if (records_.empty()) throw Error("dataset has no records");
  if (arch_.cores < 1) throw Error("arch '" + arch_.name + "' must have cores >= 1");
  std::sort(records_.begin(), records_.end(),
            [](const auto& a, const auto& b) { return a.config_index < b.config_index; });
  by_config_.assign(space_.size(), -1);
  best_runtime_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.config_index >= space_.size())
      throw Error("record references config_index " + std::to_string(r.config_index) + " outside space of " +
                  std::to_string(space_.size()));
    if (by_config_[r.config_index] >= 0)
      throw Error("duplicate record for config_index " + std::to_string(r.config_index));
    if (!(r.runtime_us > 0.0) || !std::isfinite(r.runtime_us))
      throw Error("record for config_index " + std::to_string(r.config_index) + " has non-positive runtime");
    if (r.global_threads < 1)
      throw Error("record for config_index " + std::to_string(r.config_index) + " has global_threads < 1");
    by_config_[r.config_index] = static_cast<std::ptrdiff_t>(i);
    best_runtime_ = std::min(best_runtime_, r.runtime_us);
  }
}

const MeasurementRecord* Dataset::record_for(std::size_t config_index) const {
  if (config_index >= by_config_.size() || by_config_[config_index] < 0) return nullptr;
  return &records_[static_cast<std::size_t>(by_config_[config_index])];
}

Dataset Dataset::with_runtime_scale(double factor) const {
  if (!(factor > 0.0)) throw Error("runtime scale must be positive");
  auto records = records_;
  for (auto& r : records) r.runtime_us *= factor;
  return Dataset(space_, arch_, input_label_, std::move(records));
}

DatasetPaths DatasetPaths::in_directory(const std::string& dir) {
  const std::filesystem::path base(dir);
  return {(base / "space.csv").string(), (base / "measurements.csv").string(), (base / "arch.txt").string()};
}

TuningSpace parse_space(std::string_view text, const std::string& source_name) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(source_name, 1, "empty space file");
  const auto header = detail::split_csv(lines[0]);
  std::vector<std::string> names;
  for (const auto& cell : header) {
    if (!cell.starts_with("param:") || cell.size() == 6)
      throw ParseError(source_name, 1, "malformed header cell '" + std::string(cell) + "', expected param:<name>");
    std::string name(cell.substr(6));
    if (std::find(names.begin(), names.end(), name) != names.end())
      throw ParseError(source_name, 1, "duplicate parameter '" + name + "'");
    names.push_back(std::move(name));
  }
  if (lines.size() < 2) throw ParseError(source_name, 2, "missing binary flag row");
  const auto flags_cells = detail::split_csv(lines[1]);
  if (flags_cells.size() != names.size())
    throw ParseError(source_name, 2, "binary flag row has " + std::to_string(flags_cells.size()) +
                                         " cells, expected " + std::to_string(names.size()));
  std::vector<bool> flags;
  for (const auto& cell : flags_cells) {
    if (cell == "binary:0") flags.push_back(false);
    else if (cell == "binary:1") flags.push_back(true);
    else throw ParseError(source_name, 2, "malformed flag cell '" + std::string(cell) + "', expected binary:<0|1>");
  }

  std::vector<std::vector<double>> assignments;
  std::vector<std::vector<double>> domains(names.size());
  std::map<std::vector<double>, std::size_t> seen;
  for (std::size_t ln = 2; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto cells = detail::split_csv(lines[ln]);
    if (cells.size() != names.size())
      throw ParseError(source_name, ln + 1, "row has " + std::to_string(cells.size()) + " cells, expected " +
                                                std::to_string(names.size()));
    std::vector<double> a;
    for (std::size_t p = 0; p < cells.size(); ++p) {
      auto v = detail::parse_double(cells[p]);
      if (!v || !std::isfinite(*v))
        throw ParseError(source_name, ln + 1, "malformed value '" + std::string(cells[p]) + "'");
      if (flags[p] && *v != 0.0 && *v != 1.0)
        throw ParseError(source_name, ln + 1, "binary parameter '" + names[p] + "' has value " + std::string(cells[p]));
      a.push_back(*v);
      domains[p].push_back(*v);
    }
    if (auto [it, fresh] = seen.emplace(a, ln + 1); !fresh)
      throw ParseError(source_name, ln + 1, "duplicate configuration (first at line " + std::to_string(it->second) + ")");
    assignments.push_back(std::move(a));
  }
  if (assignments.empty()) throw ParseError(source_name, lines.size(), "no configurations");

  std::vector<TuningParameter> params;
  for (std::size_t p = 0; p < names.size(); ++p) {
    auto param = TuningParameter::make(names[p], std::move(domains[p]));
    if (param.is_binary != flags[p])
      throw ParseError(source_name, 2, "parameter '" + names[p] + "' flagged binary:" + (flags[p] ? "1" : "0") +
                                           " but its values " + (param.is_binary ? "are" : "are not") + " {0,1}");
    params.push_back(std::move(param));
  }
  return TuningSpace(std::move(params), std::move(assignments));
}

std::vector<MeasurementRecord> parse_measurements(std::string_view text, const TuningSpace& space,
                                                  const ArchProfile& arch, const std::string& source_name) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]).empty()) throw ParseError(source_name, 1, "empty measurements file");
  const auto header = detail::split_csv(lines[0]);
  if (header.size() < 3 || header[0] != "config_index" || header[1] != "runtime_us" || header[2] != "global_threads")
    throw ParseError(source_name, 1, "header must start with config_index,runtime_us,global_threads");

  std::vector<Counter> columns;
  std::vector<bool> seen_counter(kCounterCount, false);
  for (std::size_t i = 3; i < header.size(); ++i) {
    auto c = resolve_counter_name(header[i], arch);
    if (!c)
      throw ParseError(source_name, 1, "unknown counter name '" + std::string(header[i]) + "' for arch '" +
                                           arch.name + "'");
    if (*c == Counter::GLOBAL_THREADS)
      throw ParseError(source_name, 1, "GLOBAL_THREADS comes from the global_threads column");
    if (seen_counter[index_of(*c)])
      throw ParseError(source_name, 1, "counter " + std::string(abbreviation(*c)) + " appears twice");
    seen_counter[index_of(*c)] = true;
    columns.push_back(*c);
  }
  std::string missing;
  for (std::size_t i = 0; i < kHardwareCounterCount; ++i)
    if (!seen_counter[i]) missing += (missing.empty() ? "" : ",") + std::string(abbreviation(counter_at(i)));
  if (!missing.empty()) throw ParseError(source_name, 1, "missing counter columns: " + missing);

  std::vector<MeasurementRecord> records;
  std::vector<std::size_t> first_line(space.size(), 0);
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    const auto line_no = ln + 1;
    const auto cells = detail::split_csv(lines[ln]);
    if (cells.size() != header.size())
      throw ParseError(source_name, line_no, "row has " + std::to_string(cells.size()) + " cells, expected " +
                                                 std::to_string(header.size()));
    MeasurementRecord r;
    auto idx = detail::parse_int(cells[0]);
    if (!idx || *idx < 0) throw ParseError(source_name, line_no, "malformed config_index '" + std::string(cells[0]) + "'");
    if (static_cast<std::size_t>(*idx) >= space.size())
      throw ParseError(source_name, line_no, "config_index " + std::to_string(*idx) + " not in space of " +
                                                 std::to_string(space.size()) + " configurations");
    r.config_index = static_cast<std::size_t>(*idx);
    if (first_line[r.config_index] != 0)
      throw ParseError(source_name, line_no, "duplicate config_index " + std::to_string(*idx) + " (first at line " +
                                                 std::to_string(first_line[r.config_index]) + ")");
    first_line[r.config_index] = line_no;

    auto runtime = detail::parse_double(cells[1]);
    if (!runtime || !std::isfinite(*runtime) || !(*runtime > 0.0))
      throw ParseError(source_name, line_no, "runtime_us must be a positive number");
    r.runtime_us = *runtime;
    auto threads = detail::parse_int(cells[2]);
    if (!threads || *threads < 1) throw ParseError(source_name, line_no, "global_threads must be a positive integer");
    r.global_threads = *threads;
    r.counters.set(Counter::GLOBAL_THREADS, static_cast<double>(*threads));

    for (std::size_t i = 0; i < columns.size(); ++i) {
      auto raw = detail::parse_double(cells[i + 3]);
      if (!raw || !std::isfinite(*raw))
        throw ParseError(source_name, line_no, "malformed value for " + std::string(header[i + 3]));
      const auto reading = canonicalize(header[i + 3], *raw, arch);
      if (reading.value < 0.0)
        throw ParseError(source_name, line_no, std::string(abbreviation(reading.counter)) + " is negative");
      if (auto range = canonical_range(reading.counter);
          range && (reading.value < range->first || reading.value > range->second))
        throw ParseError(source_name, line_no,
                         std::string(abbreviation(reading.counter)) + " = " + detail::format_double(reading.value) +
                             " outside canonical range [" + detail::format_double(range->first) + "," +
                             detail::format_double(range->second) + "]; check the arch conversion scale");
      r.counters.set(reading.counter, reading.value);
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ParseError(source_name, lines.size(), "no records");
  return records;
}

namespace {

std::string default_label(const std::string& measurements_file) {
  const std::filesystem::path p(measurements_file);
  if (p.stem() == "measurements" && p.has_parent_path()) {
    auto parent = p.parent_path().filename().string();
    if (!parent.empty() && parent != ".") return parent;
  }
  return p.stem().string();
}

}  // namespace

Dataset load_dataset(const std::string& space_file, const std::string& measurements_file,
                     const std::string& arch_file, std::optional<std::string> input_label) {
  auto arch = load_arch(arch_file);
  auto space = parse_space(detail::read_file(space_file), space_file);
  auto records = parse_measurements(detail::read_file(measurements_file), space, arch, measurements_file);
  return Dataset(std::move(space), std::move(arch), input_label.value_or(default_label(measurements_file)),
                 std::move(records));
}

Dataset load_dataset(const DatasetPaths& paths, std::optional<std::string> input_label) {
  return load_dataset(paths.space, paths.measurements, paths.arch, std::move(input_label));
}

std::string format_space(const TuningSpace& space) {
  std::ostringstream out;
  const auto params = space.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) out << (p ? "," : "") << "param:" << params[p].name;
  out << '\n';
  for (std::size_t p = 0; p < params.size(); ++p) out << (p ? "," : "") << "binary:" << (params[p].is_binary ? 1 : 0);
  out << '\n';
  for (const auto& c : space.configurations()) {
    for (std::size_t p = 0; p < c.assignment.size(); ++p) out << (p ? "," : "") << detail::format_double(c.assignment[p]);
    out << '\n';
  }
  return out.str();
}

std::string format_measurements(const Dataset& d) {
  std::ostringstream out;
  out << "config_index,runtime_us,global_threads";
  for (std::size_t i = 0; i < kHardwareCounterCount; ++i) out << ',' << abbreviation(counter_at(i));
  out << '\n';
  for (const auto& r : d.records()) {
    out << r.config_index << ',' << detail::format_double(r.runtime_us) << ',' << r.global_threads;
    for (std::size_t i = 0; i < kHardwareCounterCount; ++i)
      out << ',' << detail::format_double(r.counters.value_or(counter_at(i), 0.0));
    out << '\n';
  }
  return out.str();
}

void save_dataset(const Dataset& d, const DatasetPaths& paths) {
  for (const auto* path : {&paths.space, &paths.measurements, &paths.arch}) {
    const auto parent = std::filesystem::path(*path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  detail::write_file(paths.space, format_space(d.space()));
  detail::write_file(paths.measurements, format_measurements(d));
  detail::write_file(paths.arch, format_arch(d.arch()));
}

std::vector<std::size_t> well_performing_set(const Dataset& d, double slack) {
  const double limit = slack * d.best_runtime();
  std::vector<std::size_t> out;
  for (const auto& r : d.records())
    if (r.runtime_us <= limit) out.push_back(r.config_index);
  return out;
}

std::string binary_subspace_key(const TuningSpace& space, const TuningConfiguration& c) {
  std::string key;
  const auto params = space.parameters();
  for (std::size_t p = 0; p < params.size(); ++p)
    if (params[p].is_binary) key.push_back(c.assignment[p] != 0.0 ? '1' : '0');
  return key;
}

}  // namespace countertune
