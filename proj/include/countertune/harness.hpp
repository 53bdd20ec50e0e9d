#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countertune/bottleneck.hpp"
#include "countertune/models.hpp"
#include "countertune/parallel.hpp"
#include "countertune/search.hpp"
#include "countertune/tuning_space.hpp"

namespace countertune {

enum class SearcherKind { Profile, Random };
std::string_view to_string(SearcherKind s);
SearcherKind parse_searcher(std::string_view text);

// Invented default: the slowdown of profiled runs is not quantified anywhere,
// so it is a knob.
inline constexpr double kDefaultProfilingOverhead = 3.0;
inline constexpr std::size_t kDefaultRepetitions = 1000;
inline constexpr std::size_t kDefaultTimeRepetitions = 100;
inline constexpr std::size_t kTimeCurvePoints = 200;

struct ExperimentSpec {
  std::string name = "experiment";
  SearcherKind searcher = SearcherKind::Profile;
  std::size_t repetitions = kDefaultRepetitions;
  // Repetitions (the first ones) that feed the simulated-time curve.
  std::size_t time_repetitions = kDefaultTimeRepetitions;
  std::size_t n = 5;
  // Profiling runs per repetition; 0 searches until a well-performing
  // configuration is evaluated or the space is exhausted.
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  double slack = 1.1;
  double profiling_overhead = kDefaultProfilingOverhead;
  ReactOptions react;
  ScoreOptions score;
  double gamma = kDefaultGamma;
  unsigned workers = default_worker_count();

  // Throws Error when repetitions < 1, slack < 1 or profiling_overhead < 1.
  void validate() const;
};

struct CurvePoint {
  double x = 0.0;  // step (1-based) or simulated microseconds
  double mean = 0.0;
  double stddev = 0.0;
};

struct ConvergenceReport {
  std::string name;
  std::string searcher;
  std::string dataset;
  std::size_t repetitions = 0;
  double profiling_overhead = 1.0;
  // Evaluations until the first well-performing configuration, per
  // repetition; 0 when the budget ran out first.
  std::vector<std::size_t> steps;
  std::vector<double> time_to_well_us;  // same convention, 0 when unreached
  std::size_t reached = 0;
  double mean_steps = 0.0;
  double median_steps = 0.0;
  double stddev_steps = 0.0;
  double mean_time_to_well_us = 0.0;
  std::vector<CurvePoint> step_curve;  // best-so-far runtime per step
  std::vector<CurvePoint> time_curve;  // best-so-far runtime over simulated time
  std::optional<double> improvement;   // baseline mean steps / this mean steps
};

// Replays `repetitions` independent searches over the dataset. `models` is
// required for the profile searcher and ignored by the random one.
ConvergenceReport simulate(const Dataset& d, const ModelSet* models, const ExperimentSpec& spec);

double improvement_factor(const ConvergenceReport& baseline, const ConvergenceReport& candidate);

// Random baseline and profile searcher over identical repetition seeds; the
// profile report carries the improvement factor.
struct Comparison {
  ConvergenceReport random;
  ConvergenceReport profile;
};
Comparison compare(const Dataset& d, const ModelSet& models, ExperimentSpec spec);

struct CounterError {
  Counter counter = Counter::DRAM_RT;
  std::size_t samples = 0;
  double mae = 0.0;
  double rmse = 0.0;
};

struct PortabilityReport {
  std::string model_source;
  std::string target;
  std::vector<CounterError> errors;
  Comparison comparison;
};

// Prediction error of a foreign model on another dataset plus a paired search
// comparison steered by that model.
PortabilityReport cross_evaluate(const ModelSet& models, const Dataset& other, const ExperimentSpec& spec);
std::vector<CounterError> prediction_errors(const ModelSet& models, const Dataset& d);

std::string format_summary(std::span<const ConvergenceReport> reports);
std::string format_step_curve(const ConvergenceReport& r);
std::string format_time_curve(const ConvergenceReport& r);
std::string format_errors(std::span<const CounterError> errors);

// summary.csv plus curve_<name>.csv and curve_<name>_time.csv per report.
void write_reports(std::span<const ConvergenceReport> reports, const std::string& out_dir);

}  // namespace countertune
