#include "countertune/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "countertune/error.hpp"
#include "text_util.hpp"

namespace countertune {

std::string_view to_string(SearcherKind s) { return s == SearcherKind::Profile ? "profile" : "random"; }

SearcherKind parse_searcher(std::string_view text) {
  if (text == "profile") return SearcherKind::Profile;
  if (text == "random") return SearcherKind::Random;
  throw Error("unknown searcher '" + std::string(text) + "' (profile, random)");
}

void ExperimentSpec::validate() const {
  if (repetitions < 1) throw Error("repetitions must be >= 1");
  if (!(slack >= 1.0)) throw Error("slack must be >= 1.0");
  if (!(profiling_overhead >= 1.0)) throw Error("profiling overhead must be >= 1.0");
}

namespace {

struct RepetitionResult {
  std::vector<double> best;   // best-so-far runtime after each evaluation
  std::vector<double> clock;  // simulated completion time of each evaluation
  std::size_t steps = 0;      // 0 when no well-performing configuration was seen
  double time_to_well = 0.0;
};

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

CurvePoint summarize(double x, std::span<const double> values) {
  const double m = mean_of(values);
  return {x, m, stddev_of(values, m)};
}

}  // namespace

ConvergenceReport simulate(const Dataset& d, const ModelSet* models, const ExperimentSpec& spec) {
  spec.validate();
  const auto well = well_performing_set(d, spec.slack);
  std::vector<char> is_well(d.space().size(), 0);
  for (auto i : well) is_well[i] = 1;

  std::optional<PredictionTable> predictions;
  if (spec.searcher == SearcherKind::Profile) {
    if (!models) throw Error("the profile searcher needs a model");
    predictions.emplace(*models, d.space());
  }

  std::vector<RepetitionResult> results(spec.repetitions);
  parallel_for(spec.repetitions, spec.workers, [&](std::size_t rep) {
    ReplaySource source(d);
    const auto seed = derive_seed(spec.seed, rep);
    const StopPredicate stop = [&](const Evaluation& e) { return is_well[e.config_index] != 0; };
    SearchTrace trace;
    if (spec.searcher == SearcherKind::Profile) {
      ProfileSearchOptions opts;
      opts.n = spec.n;
      opts.iterations = spec.iterations;
      opts.react = spec.react;
      opts.score = spec.score;
      opts.gamma = spec.gamma;
      opts.stop = stop;
      trace = run_profile_search(source, *predictions, opts, seed);
    } else {
      RandomSearchOptions opts;
      opts.max_evaluations = spec.iterations == 0 ? 0 : spec.iterations * (spec.n + 1);
      opts.stop = stop;
      trace = run_random_search(source, opts, seed);
    }
    auto& out = results[rep];
    out.best = trace.best_so_far;
    double clock = 0.0;
    for (const auto& e : trace.evaluations) {
      clock += e.runtime_us * (e.profiled ? spec.profiling_overhead : 1.0);
      out.clock.push_back(clock);
      if (out.steps == 0 && is_well[e.config_index]) {
        out.steps = e.step + 1;
        out.time_to_well = clock;
      }
    }
  });

  ConvergenceReport report;
  report.name = spec.name;
  report.searcher = std::string(to_string(spec.searcher));
  report.dataset = d.input_label();
  report.repetitions = spec.repetitions;
  report.profiling_overhead = spec.profiling_overhead;

  std::vector<double> reached_steps, reached_times;
  for (const auto& r : results) {
    report.steps.push_back(r.steps);
    report.time_to_well_us.push_back(r.time_to_well);
    if (r.steps > 0) {
      reached_steps.push_back(static_cast<double>(r.steps));
      reached_times.push_back(r.time_to_well);
    }
  }
  report.reached = reached_steps.size();
  report.mean_steps = mean_of(reached_steps);
  report.median_steps = median_of(reached_steps);
  report.stddev_steps = stddev_of(reached_steps, report.mean_steps);
  report.mean_time_to_well_us = mean_of(reached_times);

  // Finished repetitions hold their last best-so-far value.
  std::size_t max_len = 0;
  for (const auto& r : results) max_len = std::max(max_len, r.best.size());
  std::vector<double> column(results.size());
  for (std::size_t s = 0; s < max_len; ++s) {
    std::size_t k = 0;
    for (const auto& r : results) column[k++] = r.best.empty() ? 0.0 : r.best[std::min(s, r.best.size() - 1)];
    report.step_curve.push_back(summarize(static_cast<double>(s + 1), column));
  }

  // Time curve starts once every contributing repetition has finished one evaluation.
  const std::size_t time_reps = std::min(spec.time_repetitions, results.size());
  double start = 0.0, end = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < time_reps; ++i) {
    if (results[i].clock.empty()) continue;
    start = any ? std::max(start, results[i].clock.front()) : results[i].clock.front();
    end = any ? std::max(end, results[i].clock.back()) : results[i].clock.back();
    any = true;
  }
  if (any) {
    end = std::max(start, end);
    const std::size_t points = end > start ? kTimeCurvePoints : 1;
    std::vector<double> values;
    for (std::size_t p = 0; p < points; ++p) {
      const double t = points == 1 ? start
                                   : start + (end - start) * static_cast<double>(p) / static_cast<double>(points - 1);
      values.clear();
      for (std::size_t i = 0; i < time_reps; ++i) {
        const auto& r = results[i];
        if (r.clock.empty()) continue;
        const auto it = std::upper_bound(r.clock.begin(), r.clock.end(), t);
        const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - r.clock.begin()) - 1));
        values.push_back(r.best[idx]);
      }
      report.time_curve.push_back(summarize(t, values));
    }
  }
  return report;
}

double improvement_factor(const ConvergenceReport& baseline, const ConvergenceReport& candidate) {
  if (baseline.repetitions != candidate.repetitions)
    throw Error("improvement needs identical repetition counts");
  if (!(candidate.mean_steps > 0.0)) throw Error("candidate reached no well-performing configuration");
  return baseline.mean_steps / candidate.mean_steps;
}

Comparison compare(const Dataset& d, const ModelSet& models, ExperimentSpec spec) {
  const auto base_name = spec.name;
  Comparison out;
  spec.searcher = SearcherKind::Random;
  spec.name = base_name + "_random";
  out.random = simulate(d, nullptr, spec);
  spec.searcher = SearcherKind::Profile;
  spec.name = base_name + "_profile";
  out.profile = simulate(d, &models, spec);
  out.random.improvement = 1.0;
  out.profile.improvement = improvement_factor(out.random, out.profile);
  return out;
}

std::vector<CounterError> prediction_errors(const ModelSet& models, const Dataset& d) {
  models.check_compatible(d.space());
  std::vector<CounterError> out;
  for (const auto& [counter, model] : models.models) {
    CounterError e;
    e.counter = counter;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& r : d.records()) {
      const auto measured = r.counters.get(counter);
      if (!measured) continue;
      const auto predicted = models.predict(d.space()[r.config_index].assignment).value_or(counter, 0.0);
      const double err = predicted - *measured;
      abs_sum += std::abs(err);
      sq_sum += err * err;
      ++e.samples;
    }
    if (e.samples > 0) {
      e.mae = abs_sum / static_cast<double>(e.samples);
      e.rmse = std::sqrt(sq_sum / static_cast<double>(e.samples));
    }
    out.push_back(e);
  }
  return out;
}

PortabilityReport cross_evaluate(const ModelSet& models, const Dataset& other, const ExperimentSpec& spec) {
  PortabilityReport report;
  report.model_source = models.source_arch + "/" + models.source_input;
  report.target = other.arch().name + "/" + other.input_label();
  report.errors = prediction_errors(models, other);
  report.comparison = compare(other, models, spec);
  return report;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

std::string format_summary(std::span<const ConvergenceReport> reports) {
  using detail::format_double;
  std::ostringstream out;
  out << "name,searcher,dataset,repetitions,reached,mean_steps,median_steps,stddev_steps,improvement,"
         "mean_time_to_well_us,profiling_overhead,time_model\n";
  for (const auto& r : reports) {
    out << r.name << ',' << r.searcher << ',' << r.dataset << ',' << r.repetitions << ',' << r.reached << ','
        << format_double(r.mean_steps) << ',' << format_double(r.median_steps) << ','
        << format_double(r.stddev_steps) << ',' << (r.improvement ? format_double(*r.improvement) : "") << ','
        << format_double(r.mean_time_to_well_us) << ',' << format_double(r.profiling_overhead)
        << ",kernel_runtime_x_overhead\n";
  }
  return out.str();
}

namespace {

std::string format_curve(const std::vector<CurvePoint>& curve, const char* x_name) {
  std::ostringstream out;
  out << x_name << ",mean,stddev\n";
  for (const auto& p : curve)
    out << detail::format_double(p.x) << ',' << detail::format_double(p.mean) << ','
        << detail::format_double(p.stddev) << '\n';
  return out.str();
}

}  // namespace

std::string format_step_curve(const ConvergenceReport& r) { return format_curve(r.step_curve, "step"); }
std::string format_time_curve(const ConvergenceReport& r) { return format_curve(r.time_curve, "time_us"); }

std::string format_errors(std::span<const CounterError> errors) {
  std::ostringstream out;
  out << "counter,samples,mae,rmse\n";
  for (const auto& e : errors)
    out << abbreviation(e.counter) << ',' << e.samples << ',' << detail::format_double(e.mae) << ','
        << detail::format_double(e.rmse) << '\n';
  return out.str();
}

void write_reports(std::span<const ConvergenceReport> reports, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());
  const std::filesystem::path base(out_dir);
  detail::write_file((base / "summary.csv").string(), format_summary(reports));
  for (const auto& r : reports) {
    detail::write_file((base / ("curve_" + r.name + ".csv")).string(), format_step_curve(r));
    detail::write_file((base / ("curve_" + r.name + "_time.csv")).string(), format_time_curve(r));
  }
}

}  // namespace countertune
