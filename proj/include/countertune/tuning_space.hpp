#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countertune/counters.hpp"

namespace countertune {

struct TuningParameter {
  std::string name;
  std::vector<double> values;  // ascending, distinct
  bool is_binary = false;      // exactly the two values {0, 1}

  // Sorts and deduplicates `values`, derives is_binary.
  static TuningParameter make(std::string name, std::vector<double> values);

  friend bool operator==(const TuningParameter&, const TuningParameter&) = default;
};

struct TuningConfiguration {
  std::vector<double> assignment;  // one value per parameter, declared order
  std::size_t index = 0;
};

// Post-constraint enumeration of configurations. Immutable once built.
class TuningSpace {
 public:
  TuningSpace() = default;
  // Throws Error when an assignment has the wrong arity, uses a value outside
  // its parameter's domain, or repeats an earlier assignment.
  TuningSpace(std::vector<TuningParameter> parameters, std::vector<std::vector<double>> assignments);

  std::span<const TuningParameter> parameters() const { return parameters_; }
  std::span<const TuningConfiguration> configurations() const { return configurations_; }
  const TuningConfiguration& operator[](std::size_t index) const { return configurations_[index]; }
  std::size_t size() const { return configurations_.size(); }

  std::optional<std::size_t> find(std::span<const double> assignment) const;
  std::vector<std::string> parameter_names() const;
  std::vector<std::size_t> binary_parameter_indices() const;

 private:
  std::vector<TuningParameter> parameters_;
  std::vector<TuningConfiguration> configurations_;
  std::map<std::vector<double>, std::size_t> lookup_;
};

struct MeasurementRecord {
  std::size_t config_index = 0;
  double runtime_us = 0.0;
  CounterValues counters;  // canonical units; includes GLOBAL_THREADS
  std::int64_t global_threads = 1;
};

class Dataset {
 public:
  // Validates referential integrity and recomputes best_runtime.
  Dataset(TuningSpace space, ArchProfile arch, std::string input_label, std::vector<MeasurementRecord> records);

  const TuningSpace& space() const { return space_; }
  const ArchProfile& arch() const { return arch_; }
  const std::string& input_label() const { return input_label_; }
  std::span<const MeasurementRecord> records() const { return records_; }
  double best_runtime() const { return best_runtime_; }

  // nullptr when the configuration was not measured.
  const MeasurementRecord* record_for(std::size_t config_index) const;

  // Same space, counters and labels with every runtime multiplied by `factor`.
  Dataset with_runtime_scale(double factor) const;

 private:
  TuningSpace space_;
  ArchProfile arch_;
  std::string input_label_;
  std::vector<MeasurementRecord> records_;  // sorted by config_index
  std::vector<std::ptrdiff_t> by_config_;
  double best_runtime_ = 0.0;
};

struct DatasetPaths {
  std::string space;
  std::string measurements;
  std::string arch;

  // <dir>/space.csv, <dir>/measurements.csv, <dir>/arch.txt
  static DatasetPaths in_directory(const std::string& dir);
};

TuningSpace parse_space(std::string_view text, const std::string& source_name = "<space>");

std::vector<MeasurementRecord> parse_measurements(std::string_view text, const TuningSpace& space,
                                                  const ArchProfile& arch,
                                                  const std::string& source_name = "<measurements>");

// Input label defaults to the directory (or file stem) the measurements live in.
Dataset load_dataset(const std::string& space_file, const std::string& measurements_file,
                     const std::string& arch_file, std::optional<std::string> input_label = std::nullopt);
Dataset load_dataset(const DatasetPaths& paths, std::optional<std::string> input_label = std::nullopt);

std::string format_space(const TuningSpace& space);
std::string format_measurements(const Dataset& d);
// Writes the three canonical files; creates the directory when missing.
void save_dataset(const Dataset& d, const DatasetPaths& paths);

// Configurations with runtime <= slack * best runtime, ascending index order.
std::vector<std::size_t> well_performing_set(const Dataset& d, double slack = 1.1);

// '0'/'1' per binary parameter in declared order; empty without binary parameters.
std::string binary_subspace_key(const TuningSpace& space, const TuningConfiguration& c);

}  // namespace countertune
