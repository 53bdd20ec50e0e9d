#include "countertune/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "countertune/error.hpp"

namespace countertune {

Measurement ReplaySource::measure(std::size_t config_index, bool profile) {
  const auto* r = dataset_->record_for(config_index);
  if (!r) throw SearchError("configuration " + std::to_string(config_index) + " has no recorded measurement");
  Measurement m;
  m.runtime_us = r->runtime_us;
  m.global_threads = r->global_threads;
  if (profile) m.counters = r->counters;
  return m;
}

PredictionTable::PredictionTable(const ModelSet& models, const TuningSpace& space) {
  models.check_compatible(space);
  rows_.reserve(space.size());
  for (const auto& c : space.configurations()) rows_.push_back(models.predict(c.assignment));
}

double score_term(double delta, double profile_prediction, double candidate_prediction, ScoreSign sign) {
  if (delta == 0.0 || profile_prediction == 0.0 || candidate_prediction == 0.0) return 0.0;
  const double diff = sign == ScoreSign::CandidateMinusProfile ? candidate_prediction - profile_prediction
                                                               : profile_prediction - candidate_prediction;
  return delta * diff / (profile_prediction + candidate_prediction);
}

namespace {

std::vector<std::size_t> value_positions(const TuningSpace& space, std::size_t config) {
  const auto params = space.parameters();
  const auto& x = space[config].assignment;
  std::vector<std::size_t> pos(params.size());
  for (std::size_t p = 0; p < params.size(); ++p)
    pos[p] = static_cast<std::size_t>(
        std::lower_bound(params[p].values.begin(), params[p].values.end(), x[p]) - params[p].values.begin());
  return pos;
}

}  // namespace

ScoreVector score_configurations(const PredictionTable& predictions, std::size_t profile_index,
                                 const DeltaPC& delta, const TuningSpace& space, const std::vector<char>& explored,
                                 const ScoreOptions& options) {
  const std::size_t n = space.size();
  if (predictions.size() != n || explored.size() != n) throw SearchError("score inputs disagree on space size");
  ScoreVector sv;
  sv.raw.assign(n, 0.0);
  sv.normalized.assign(n, 0.0);
  sv.explored = explored;
  sv.eligible.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) sv.eligible[i] = explored[i] ? 0 : 1;

  if (options.neighborhood > 0) {
    const auto origin = value_positions(space, profile_index);
    std::vector<std::pair<double, std::size_t>> by_distance;
    for (std::size_t i = 0; i < n; ++i) {
      if (!sv.eligible[i]) continue;
      const auto pos = value_positions(space, i);
      double d2 = 0.0;
      for (std::size_t p = 0; p < pos.size(); ++p) {
        const double diff = static_cast<double>(pos[p]) - static_cast<double>(origin[p]);
        d2 += diff * diff;
      }
      by_distance.emplace_back(d2, i);
    }
    std::sort(by_distance.begin(), by_distance.end());
    std::fill(sv.eligible.begin(), sv.eligible.end(), 0);
    for (std::size_t k = 0; k < std::min(options.neighborhood, by_distance.size()); ++k)
      sv.eligible[by_distance[k].second] = 1;
  }

  std::vector<Counter> used;
  for (auto c : DeltaPC::kKeys)
    if (delta[c] != 0.0) used.push_back(c);
  const auto& profile = predictions[profile_index];
  for (std::size_t i = 0; i < n; ++i) {
    if (!sv.eligible[i]) continue;
    const auto& candidate = predictions[i];
    double s = 0.0;
    for (auto c : used) s += score_term(delta[c], profile.value_or(c, 0.0), candidate.value_or(c, 0.0), options.sign);
    sv.raw[i] = s;
  }
  return sv;
}

ScoreVector score_configurations(const ModelSet& models, const TuningConfiguration& profile, const DeltaPC& delta,
                                 const TuningSpace& space, const std::vector<char>& explored,
                                 const ScoreOptions& options) {
  const PredictionTable table(models, space);
  return score_configurations(table, profile.index, delta, space, explored, options);
}

double normalize_score(double s, double s_min, double s_max, double gamma) {
  if (s > 0.0) {
    const double ratio = s_max > 0.0 ? s / s_max : 0.0;
    return std::pow(1.0 + ratio, 8);
  }
  if (s > gamma) {
    const double ratio = s_min < 0.0 ? s / s_min : 0.0;
    return std::max(kMinNormalizedScore, std::pow(1.0 - ratio, 8));
  }
  return kMinNormalizedScore;
}

ScoreVector normalize_scores(ScoreVector scores, double gamma) {
  double s_min = std::numeric_limits<double>::infinity();
  double s_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.raw.size(); ++i) {
    if (!scores.eligible[i]) continue;
    s_min = std::min(s_min, scores.raw[i]);
    s_max = std::max(s_max, scores.raw[i]);
  }
  scores.normalized.assign(scores.raw.size(), 0.0);
  for (std::size_t i = 0; i < scores.raw.size(); ++i)
    if (scores.eligible[i]) scores.normalized[i] = normalize_score(scores.raw[i], s_min, s_max, gamma);
  return scores;
}

std::size_t weighted_select(const ScoreVector& scores, Rng& rng) {
  double total = 0.0;
  for (double w : scores.normalized) total += w;
  if (!(total > 0.0)) throw SearchError("space exhausted");
  const double r = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < scores.normalized.size(); ++i) {
    const double w = scores.normalized[i];
    if (w <= 0.0) continue;
    cumulative += w;
    last_positive = i;
    if (r < cumulative) return i;
  }
  return last_positive;  // rounding left r at the top of the range
}

std::string_view to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::Completed: return "completed";
    case SearchStatus::Exhausted: return "exhausted";
    case SearchStatus::Stopped: return "stopped";
  }
  return "completed";
}

void SearchTrace::push(Evaluation e) {
  e.step = evaluations.size();
  const double prev = best_so_far.empty() ? std::numeric_limits<double>::infinity() : best_so_far.back();
  best_so_far.push_back(std::min(prev, e.runtime_us));
  evaluations.push_back(e);
}

namespace {

std::vector<std::size_t> available_configs(const MeasurementSource& source) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < source.space().size(); ++i)
    if (source.available(i)) out.push_back(i);
  return out;
}

}  // namespace

SearchTrace run_profile_search(MeasurementSource& source, const PredictionTable& predictions,
                               const ProfileSearchOptions& options, std::uint64_t seed) {
  const auto& space = source.space();
  if (predictions.size() != space.size()) throw SearchError("predictions do not cover the search space");
  SearchTrace trace;
  trace.seed = seed;
  Rng rng(seed);

  // Unavailable configurations behave as already explored.
  std::vector<char> explored(space.size(), 1);
  const auto candidates = available_configs(source);
  if (candidates.empty()) {
    trace.status = SearchStatus::Exhausted;
    return trace;
  }
  for (auto i : candidates) explored[i] = 0;

  auto record = [&](std::size_t config, double runtime, bool profiled) {
    const bool revisit = explored[config] != 0;
    explored[config] = 1;
    trace.push({0, config, runtime, profiled, revisit});
    return options.stop && options.stop(trace.evaluations.back());
  };

  std::size_t profile_config = candidates[rng.below(candidates.size())];
  for (std::size_t iter = 0; options.iterations == 0 || iter < options.iterations; ++iter) {
    const auto measured = source.measure(profile_config, true);
    if (!measured.counters) throw SearchError("profiled measurement returned no counters");
    if (record(profile_config, measured.runtime_us, true)) {
      trace.status = SearchStatus::Stopped;
      return trace;
    }

    const auto bottlenecks = analyze(*measured.counters, source.arch(), measured.global_threads);
    const auto delta = react(bottlenecks, options.react);
    auto scores = normalize_scores(
        score_configurations(predictions, profile_config, delta, space, explored, options.score), options.gamma);

    if (options.n == 0) {
      // No runtime-only batch to pick a winner from: profile a fresh draw next.
      try {
        profile_config = weighted_select(scores, rng);
      } catch (const SearchError&) {
        trace.status = SearchStatus::Exhausted;
        return trace;
      }
      continue;
    }

    double best_batch = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < options.n; ++k) {
      std::size_t pick;
      try {
        pick = weighted_select(scores, rng);
      } catch (const SearchError&) {
        trace.status = SearchStatus::Exhausted;
        return trace;
      }
      scores.normalized[pick] = 0.0;
      const auto m = source.measure(pick, false);
      if (record(pick, m.runtime_us, false)) {
        trace.status = SearchStatus::Stopped;
        return trace;
      }
      if (m.runtime_us <= best_batch) {
        profile_config = pick;
        best_batch = m.runtime_us;
      }
    }
  }
  trace.status = SearchStatus::Completed;
  return trace;
}

SearchTrace run_profile_search(MeasurementSource& source, const ModelSet& models,
                               const ProfileSearchOptions& options, std::uint64_t seed) {
  const PredictionTable table(models, source.space());
  return run_profile_search(source, table, options, seed);
}

SearchTrace run_random_search(MeasurementSource& source, const RandomSearchOptions& options, std::uint64_t seed) {
  SearchTrace trace;
  trace.seed = seed;
  Rng rng(seed);
  auto order = available_configs(source);
  const std::size_t limit =
      options.max_evaluations == 0 ? order.size() : std::min(order.size(), options.max_evaluations);
  // Lazy Fisher-Yates: position k is drawn uniformly from the unvisited tail.
  for (std::size_t k = 0; k < limit; ++k) {
    std::swap(order[k], order[k + rng.below(order.size() - k)]);
    const auto m = source.measure(order[k], false);
    trace.push({0, order[k], m.runtime_us, false, false});
    if (options.stop && options.stop(trace.evaluations.back())) {
      trace.status = SearchStatus::Stopped;
      return trace;
    }
  }
  trace.status = limit == order.size() ? SearchStatus::Exhausted : SearchStatus::Completed;
  return trace;
}

}  // namespace countertune
