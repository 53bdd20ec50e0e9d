#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "countertune/bottleneck.hpp"
#include "countertune/counters.hpp"
#include "countertune/models.hpp"
#include "countertune/rng.hpp"
#include "countertune/tuning_space.hpp"

namespace countertune {

// ---------------------------------------------------------------------------
// Measurement sources
// ---------------------------------------------------------------------------

struct Measurement {
  double runtime_us = 0.0;
  std::optional<CounterValues> counters;  // set only for profiled runs
  std::int64_t global_threads = 1;
};

class MeasurementSource {
 public:
  virtual ~MeasurementSource() = default;
  virtual const TuningSpace& space() const = 0;
  virtual const ArchProfile& arch() const = 0;
  virtual bool available(std::size_t config_index) const = 0;
  virtual Measurement measure(std::size_t config_index, bool profile) = 0;
};

// Serves recorded runtimes and counters; unmeasured configurations are unavailable.
class ReplaySource final : public MeasurementSource {
 public:
  explicit ReplaySource(const Dataset& d) : dataset_(&d) {}
  const TuningSpace& space() const override { return dataset_->space(); }
  const ArchProfile& arch() const override { return dataset_->arch(); }
  bool available(std::size_t config_index) const override { return dataset_->record_for(config_index) != nullptr; }
  Measurement measure(std::size_t config_index, bool profile) override;

 private:
  const Dataset* dataset_;
};

// Talks to a live runner over stdin/stdout, one line per message:
//   runner, once at startup:  counters,<name>,<name>,...
//   request:                  <v1>,...,<vk>,<profile 0|1>
//   response, not profiled:   <runtime_us>
//   response, profiled:       <runtime_us>,<global_threads>,<c1>,<c2>,...
//   failure:                  error,<message>
// Counter names may be canonical abbreviations or raw names of `arch`.
class SubprocessSource final : public MeasurementSource {
 public:
  SubprocessSource(const std::string& command, TuningSpace space, ArchProfile arch);
  ~SubprocessSource() override;
  SubprocessSource(const SubprocessSource&) = delete;
  SubprocessSource& operator=(const SubprocessSource&) = delete;

  const TuningSpace& space() const override { return space_; }
  const ArchProfile& arch() const override { return arch_; }
  bool available(std::size_t config_index) const override { return config_index < space_.size(); }
  Measurement measure(std::size_t config_index, bool profile) override;

 private:
  std::string read_line();
  void start(int to_fd, int from_fd);
  void shutdown(bool kill_child);

  TuningSpace space_;
  ArchProfile arch_;
  std::vector<std::string> counter_names_;
  int pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
};

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// Model predictions for every configuration of a space, computed once.
class PredictionTable {
 public:
  PredictionTable(const ModelSet& models, const TuningSpace& space);
  const CounterValues& operator[](std::size_t config_index) const { return rows_[config_index]; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<CounterValues> rows_;
};

enum class ScoreSign {
  CandidateMinusProfile,  // desirable moves score positive
  ProfileMinusCandidate,  // numerator as printed, kept for comparison
};

struct ScoreOptions {
  ScoreSign sign = ScoreSign::CandidateMinusProfile;
  // When non-zero, only the K unexplored configurations nearest to the
  // profiled one (by value-index distance) are scored; the rest get 0.
  std::size_t neighborhood = 0;
};

inline constexpr double kDefaultGamma = -0.25;
inline constexpr double kMinNormalizedScore = 0.0001;
inline constexpr double kMaxNormalizedScore = 256.0;

struct ScoreVector {
  std::vector<double> raw;
  std::vector<double> normalized;
  std::vector<char> explored;
  std::vector<char> eligible;  // unexplored and scored this round
};

// Contribution of one counter to a candidate's score; zero when either
// prediction is zero.
double score_term(double delta, double profile_prediction, double candidate_prediction, ScoreSign sign);

ScoreVector score_configurations(const PredictionTable& predictions, std::size_t profile_index,
                                 const DeltaPC& delta, const TuningSpace& space, const std::vector<char>& explored,
                                 const ScoreOptions& options = {});
ScoreVector score_configurations(const ModelSet& models, const TuningConfiguration& profile, const DeltaPC& delta,
                                 const TuningSpace& space, const std::vector<char>& explored,
                                 const ScoreOptions& options = {});

// Maps raw scores of eligible configurations into [0.0001, 256]; others get 0.
ScoreVector normalize_scores(ScoreVector scores, double gamma = kDefaultGamma);
double normalize_score(double s, double s_min, double s_max, double gamma = kDefaultGamma);

// Draws an index with probability proportional to its normalized score.
// Throws SearchError("space exhausted") when no mass remains.
std::size_t weighted_select(const ScoreVector& scores, Rng& rng);

// ---------------------------------------------------------------------------
// Searchers
// ---------------------------------------------------------------------------

struct Evaluation {
  std::size_t step = 0;  // 0-based position in the trace
  std::size_t config_index = 0;
  double runtime_us = 0.0;
  bool profiled = false;
  bool revisit = false;  // profiling run of an already evaluated configuration
};

enum class SearchStatus { Completed, Exhausted, Stopped };
std::string_view to_string(SearchStatus s);

struct SearchTrace {
  std::vector<Evaluation> evaluations;
  std::vector<double> best_so_far;
  std::uint64_t seed = 0;
  SearchStatus status = SearchStatus::Completed;

  void push(Evaluation e);
};

// Called after each evaluation; returning true ends the search.
using StopPredicate = std::function<bool(const Evaluation&)>;

struct ProfileSearchOptions {
  std::size_t n = 5;           // runtime-only evaluations per profiling run
  std::size_t iterations = 1;  // profiling runs; 0 = until exhausted or stopped
  ReactOptions react;
  ScoreOptions score;
  double gamma = kDefaultGamma;
  StopPredicate stop;
};

SearchTrace run_profile_search(MeasurementSource& source, const PredictionTable& predictions,
                               const ProfileSearchOptions& options, std::uint64_t seed);
SearchTrace run_profile_search(MeasurementSource& source, const ModelSet& models,
                               const ProfileSearchOptions& options, std::uint64_t seed);

struct RandomSearchOptions {
  std::size_t max_evaluations = 0;  // 0 = whole space
  StopPredicate stop;
};

SearchTrace run_random_search(MeasurementSource& source, const RandomSearchOptions& options, std::uint64_t seed);

}  // namespace countertune
