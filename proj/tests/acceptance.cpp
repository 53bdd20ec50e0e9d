// Acceptance suite: one PASS/FAIL/SKIP line per criterion. AC1-AC7 gate the
// exit status; AC8 runs only when external GEMM datasets are supplied.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "countertune/bottleneck.hpp"
#include "countertune/harness.hpp"
#include "countertune/models.hpp"
#include "countertune/search.hpp"
#include "countertune/synthetic.hpp"
#include "countertune/tuning_space.hpp"
#include "expert_cases.hpp"
#include "test_support.hpp"

using namespace countertune;
namespace fs = std::filesystem;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Result {
  Outcome outcome = Outcome::Pass;
  std::string detail;
};

const std::string kData = COUNTERTUNE_DATA_DIR;

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result fail(std::string why) { return {Outcome::Fail, std::move(why)}; }

// AC1: analyze/react against the frozen hand-evaluated table, |err| <= 1e-9.
Result expert_exactness() {
  constexpr double tol = 1e-9;
  double worst = 0.0;
  std::size_t cases = 0;
  for (const auto& tc : ct_test::kExpertCases) {
    ++cases;
    const auto b = analyze(ct_test::counters_of(tc), ct_test::arch_of(tc), tc.threads);
    if (b.degenerate_instructions != tc.degenerate) return fail(std::string(tc.name) + ": degenerate flag");
    for (std::size_t i = 0; i < kBottleneckCount; ++i) worst = std::max(worst, std::abs(b.values[i] - tc.bottlenecks[i]));
    const auto d = react(b, ReactOptions{tc.inst_reaction});
    for (std::size_t i = 0; i < DeltaPC::kKeys.size(); ++i)
      worst = std::max(worst, std::abs(d[DeltaPC::kKeys[i]] - tc.deltas[i]));
  }
  const std::string detail = std::to_string(cases) + " cases, max |err| " + fmt(worst) + " (tol 1e-9)";
  if (cases != 20) return fail(detail + ", expected 20 cases");
  return {worst <= tol ? Outcome::Pass : Outcome::Fail, detail};
}

// AC2: randomized range and monotonicity properties over 1e4 cases.
Result range_invariants() {
  std::mt19937_64 gen(20260101);
  std::uniform_real_distribution<double> ops(0.0, 1e7), util(0.0, 10.0), pct(0.0, 100.0), reaction(0.01, 0.99);
  std::uniform_real_distribution<double> raw(-2.0, 2.0);
  std::uniform_int_distribution<int> coin(0, 9), cores(1, 10240), size(1, 64);
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    CounterValues c;
    for (std::size_t k = 0; k < kHardwareCounterCount; ++k) {
      const auto counter = counter_at(k);
      double v = ops(gen);
      if (auto r = canonical_range(counter)) v = r->second == 10.0 ? util(gen) : pct(gen);
      if (counter == Counter::INST_ISSUE_U) v = pct(gen);
      if (coin(gen) == 0) v = 0.0;
      c.set(counter, v);
    }
    ArchProfile arch = ct_test::pascal_arch();
    arch.generation = coin(gen) < 5 ? Generation::PreVolta : Generation::VoltaPlus;
    arch.cores = cores(gen);
    const auto b = analyze(c, arch, 1 + static_cast<std::int64_t>(ops(gen) / 100));
    for (double v : b.values) violations += !(v >= 0.0 && v <= 1.0);
    const auto d = react(b, reaction(gen));
    for (double v : d.values()) violations += !(v >= -1.0 && v <= 1.0);

    ScoreVector s;
    const int n = size(gen);
    for (int j = 0; j < n; ++j) s.raw.push_back(coin(gen) == 0 ? 0.0 : raw(gen));
    s.explored.assign(n, 0);
    s.eligible.assign(n, 1);
    s.normalized.assign(n, 0.0);
    const auto norm = normalize_scores(s);
    for (int j = 0; j < n; ++j) {
      violations += !(norm.normalized[j] >= kMinNormalizedScore && norm.normalized[j] <= kMaxNormalizedScore);
      for (int k = 0; k < n; ++k) violations += s.raw[j] > s.raw[k] && norm.normalized[j] < norm.normalized[k];
    }
  }
  return {violations == 0 ? Outcome::Pass : Outcome::Fail, "10000 cases, " + std::to_string(violations) + " violations"};
}

// AC3: random baseline on N=1000, k=20 within 5% of (N+1)/(k+1).
Result random_calibration() {
  const auto d = load_dataset(DatasetPaths::in_directory(kData + "/gradient"));
  const auto n = d.space().size();
  const auto k = well_performing_set(d).size();
  ExperimentSpec spec;
  spec.name = "random";
  spec.searcher = SearcherKind::Random;
  spec.repetitions = 10000;
  spec.seed = 3;
  const auto r = simulate(d, nullptr, spec);
  const double expected = double(n + 1) / double(k + 1);
  const double rel = std::abs(r.mean_steps - expected) / expected;
  const std::string detail = "N=" + std::to_string(n) + " k=" + std::to_string(k) + " mean " + fmt(r.mean_steps) +
                             " vs " + fmt(expected) + " (rel err " + fmt(rel, 3) + ", tol 0.05)";
  if (n != 1000 || k != 20) return fail(detail);
  return {rel <= 0.05 ? Outcome::Pass : Outcome::Fail, detail};
}

ModelSet exact_models(const Dataset& d) {
  TrainOptions opts;
  opts.family = ModelFamily::Lookup;
  return train_models(d, opts);
}

// AC4: bias efficacy with exact models; the literal score sign must lose it.
Result search_bias() {
  const auto d = load_dataset(DatasetPaths::in_directory(kData + "/gradient"));
  const auto m = exact_models(d);
  ExperimentSpec spec;
  spec.name = "gradient";
  spec.repetitions = 1000;
  spec.seed = 11;
  const auto c = compare(d, m, spec);
  spec.score.sign = ScoreSign::ProfileMinusCandidate;
  const auto lit = compare(d, m, spec);
  const double imp = *c.profile.improvement, imp_lit = *lit.profile.improvement;
  const std::string detail = "random " + fmt(c.random.mean_steps) + " steps, profile " + fmt(c.profile.mean_steps) +
                             " (x" + fmt(imp) + ", need >= 2), literal sign " + fmt(lit.profile.mean_steps) + " (x" +
                             fmt(imp_lit) + ", need < 1.2)";
  return {imp >= 2.0 && imp_lit < 1.2 ? Outcome::Pass : Outcome::Fail, detail};
}

// AC5: exact trees, planted regression coefficients, seed-stable serialization.
Result model_fidelity() {
  const auto space = ct_test::grid_space({{"TP1", {1, 2, 4, 8}}, {"TP2", {1, 2, 3, 4, 5}}});
  const auto d = ct_test::make_dataset(
      space,
      [](const std::vector<double>& a, CounterValues& c) {
        c.set(Counter::INST_F32, 10.0 * a[0]);
        c.set(Counter::INST_INT, 5.0 * a[0] + 100.0 * a[1]);
        c.set(Counter::DRAM_RT, a[0] * a[1]);
      },
      [](const std::vector<double>& a, const CounterValues&) { return 1.0 + a[0]; });
  TrainOptions opts;
  opts.seed = 5;
  const auto trees = train_models(d, opts);
  double worst_train = 0.0;
  const auto training = tree_training_records(d.records().size(), opts.seed);
  for (const auto& [counter, model] : trees.models) {
    const auto& t = std::get<DecisionTreeModel>(model);
    for (std::size_t pos : training) {
      const auto& r = d.records()[pos];
      worst_train = std::max(worst_train,
                             std::abs(t.predict(space[r.config_index].assignment) - r.counters[counter]));
    }
  }

  const auto qspace = ct_test::grid_space({{"TP1", {1, 2, 3}}, {"TP2", {2, 5, 7}}});
  const auto qd = ct_test::make_dataset(
      qspace,
      [](const std::vector<double>& a, CounterValues& c) { c.set(Counter::INST_F32, 3 * a[0] * a[0] + 2 * a[1]); },
      [](const std::vector<double>&, const CounterValues&) { return 1.0; });
  const auto fam = train_regression(qd, Counter::INST_F32);
  double worst_coef = 0.0;
  for (const auto& [key, model] : fam.by_subspace)
    for (std::size_t t = 0; t < model.terms.size(); ++t) {
      const auto& term = model.terms[t];
      double planted = 0.0;
      if (term.first == 0 && term.second < 0 && term.power == 2) planted = 3.0;
      if (term.first == 1 && term.second < 0 && term.power == 1) planted = 2.0;
      worst_coef = std::max(worst_coef, std::abs(model.coefficients[t] - planted));
    }

  const auto sample = load_dataset(DatasetPaths::in_directory(kData + "/coulomb_like"));
  bool identical = true;
  for (auto family : {ModelFamily::DecisionTree, ModelFamily::Regression}) {
    TrainOptions o;
    o.family = family;
    o.seed = 77;
    const auto a = serialize_model(train_models(sample, o));
    o.workers = 4;
    identical = identical && a == serialize_model(train_models(sample, o));
  }
  const std::string detail = "tree max train err " + fmt(worst_train) + ", regression max coef err " + fmt(worst_coef) +
                             " (tol 1e-6), serialization " + (identical ? "identical" : "differs");
  return {worst_train == 0.0 && worst_coef <= 1e-6 && identical && fam.by_subspace.size() == 1 ? Outcome::Pass
                                                                                               : Outcome::Fail,
          detail};
}

// AC6: model trained on A steers search on A' (runtimes x3).
Result portability() {
  const auto spec = load_synthetic_spec(kData + "/gradient.json");
  const auto a = generate_synthetic(spec);
  const auto a3 = generate_synthetic(spec, {0, 3.0});
  TrainOptions opts;
  opts.seed = 21;
  const auto m = train_models(a, opts);
  const auto ea = prediction_errors(m, a), e3 = prediction_errors(m, a3);
  bool same_errors = ea.size() == e3.size();
  for (std::size_t i = 0; same_errors && i < ea.size(); ++i) same_errors = ea[i].mae == e3[i].mae;
  ExperimentSpec exp;
  exp.name = "portability";
  exp.repetitions = 1000;
  exp.seed = 5;
  const auto r = cross_evaluate(m, a3, exp);
  const double imp = *r.comparison.profile.improvement;
  const std::string detail = "random " + fmt(r.comparison.random.mean_steps) + " steps, foreign-model profile " +
                             fmt(r.comparison.profile.mean_steps) + " (x" + fmt(imp) + ", need > 1.5), counter MAE " +
                             (same_errors ? "unchanged" : "changed");
  return {imp > 1.5 && same_errors ? Outcome::Pass : Outcome::Fail, detail};
}

// AC7: byte-identical reports and lossless dataset/model round trips.
Result determinism() {
  const auto base = fs::temp_directory_path() / "countertune_acceptance";
  fs::remove_all(base);
  const auto d = load_dataset(DatasetPaths::in_directory(kData + "/coulomb_like"));
  TrainOptions topts;
  topts.seed = 1;
  const auto m = train_models(d, topts);
  ExperimentSpec spec;
  spec.name = "det";
  spec.repetitions = 300;
  spec.seed = 99;
  unsigned workers[] = {1, 4};
  for (int run = 0; run < 2; ++run) {
    spec.workers = workers[run];
    const auto c = compare(d, m, spec);
    const std::vector<ConvergenceReport> reports{c.random, c.profile};
    write_reports(reports, (base / std::to_string(run)).string());
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(base / "0")) {
    ++files;
    differing += slurp(entry.path()) != slurp(base / "1" / entry.path().filename());
  }

  std::size_t dataset_mismatch = 0;
  for (const char* name : {"gradient", "coulomb_like", "constant"}) {
    const auto paths = DatasetPaths::in_directory(kData + "/" + name);
    const auto ds = load_dataset(paths);
    dataset_mismatch += format_space(ds.space()) != slurp(paths.space);
    dataset_mismatch += format_measurements(ds) != slurp(paths.measurements);
    dataset_mismatch += format_arch(ds.arch()) != slurp(paths.arch);
    const auto copy = (base / name).string();
    save_dataset(ds, DatasetPaths::in_directory(copy));
    const auto back = load_dataset(DatasetPaths::in_directory(copy), ds.input_label());
    for (std::size_t i = 0; i < ds.records().size(); ++i)
      dataset_mismatch += back.records()[i].counters != ds.records()[i].counters ||
                          back.records()[i].runtime_us != ds.records()[i].runtime_us;
  }

  std::size_t model_mismatch = 0;
  for (auto family : {ModelFamily::DecisionTree, ModelFamily::Regression, ModelFamily::Lookup}) {
    TrainOptions o;
    o.family = family;
    const auto model = train_models(d, o);
    const auto path = (base / ("model_" + std::string(to_string(family)) + ".json")).string();
    save_model(model, path);
    const auto back = load_model(path);
    model_mismatch += !(back == model) || serialize_model(back) != serialize_model(model);
    for (const auto& c : d.space().configurations()) model_mismatch += back.predict(c.assignment) != model.predict(c.assignment);
  }
  fs::remove_all(base);
  const std::string detail = std::to_string(files) + " report files, " + std::to_string(differing) +
                             " differ; dataset mismatches " + std::to_string(dataset_mismatch) + "; model mismatches " +
                             std::to_string(model_mismatch);
  return {files >= 5 && differing == 0 && dataset_mismatch == 0 && model_mismatch == 0 ? Outcome::Pass : Outcome::Fail,
          detail};
}

// AC8 (optional): published GEMM data in COUNTERTUNE_GEMM_DATA, one dataset
// directory per GPU. A model from the first GPU steers search on the others.
Result published_gemm() {
  const char* root = std::getenv("COUNTERTUNE_GEMM_DATA");
  if (!root || !fs::is_directory(root)) return {Outcome::Skip, "COUNTERTUNE_GEMM_DATA not set; published data absent"};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (fs::exists(e.path() / "measurements.csv")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.size() < 2) return {Outcome::Skip, "need at least two GPU datasets under " + std::string(root)};
  const auto source = load_dataset(DatasetPaths::in_directory(dirs[0].string()));
  const auto m = train_models(source, TrainOptions{});
  std::string detail;
  bool ok = true;
  for (std::size_t i = 1; i < dirs.size(); ++i) {
    const auto target = load_dataset(DatasetPaths::in_directory(dirs[i].string()));
    ExperimentSpec spec;
    spec.name = "gemm";
    spec.repetitions = 1000;
    const auto c = compare(target, m, spec);
    detail += dirs[0].filename().string() + "->" + dirs[i].filename().string() + " x" + fmt(*c.profile.improvement) + " ";
    ok = ok && *c.profile.improvement > 1.0;
  }
  return {ok ? Outcome::Pass : Outcome::Fail, detail};
}

struct Criterion {
  const char* id;
  const char* title;
  double limit_s;
  bool gating;
  std::function<Result()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1", "expert-system exactness", 1.0, true, expert_exactness},
      {"AC2", "range invariants", 10.0, true, range_invariants},
      {"AC3", "random-baseline calibration", 30.0, true, random_calibration},
      {"AC4", "search bias efficacy", 60.0, true, search_bias},
      {"AC5", "model fidelity", 10.0, true, model_fidelity},
      {"AC6", "model portability", 60.0, true, portability},
      {"AC7", "determinism and round-trip", 60.0, true, determinism},
      {"AC8", "published GEMM data (optional)", 600.0, false, published_gemm},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.outcome == Outcome::Pass && secs > c.limit_s) {
      r.outcome = Outcome::Fail;
      r.detail += "; over time limit";
    }
    const char* tag = r.outcome == Outcome::Pass ? "PASS" : r.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    std::cout << c.id << " " << tag << "  " << c.title << ": " << r.detail << " [" << fmt(secs, 3) << " s, limit "
              << c.limit_s << " s" << (c.gating ? "" : ", non-gating") << "]" << std::endl;
    if (r.outcome == Outcome::Fail && c.gating) ++failures;
  }
  std::cout << (failures == 0 ? "acceptance: all gating criteria passed" : "acceptance: gating failures present")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
