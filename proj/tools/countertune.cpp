// countertune command-line front end.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "countertune/bottleneck.hpp"
#include "countertune/error.hpp"
#include "countertune/harness.hpp"
#include "countertune/models.hpp"
#include "countertune/synthetic.hpp"
#include "countertune/tuning_space.hpp"

namespace ct = countertune;

namespace {

struct DatasetArgs {
  std::string dir;
  std::string label;

  ct::Dataset load() const {
    if (dir.empty()) throw ct::Error("--dataset is required");
    std::optional<std::string> l;
    if (!label.empty()) l = label;
    return ct::load_dataset(ct::DatasetPaths::in_directory(dir), l);
  }
};

struct SearchArgs {
  std::string searcher = "profile";
  std::string name;
  std::size_t reps = ct::kDefaultRepetitions;
  std::size_t time_reps = ct::kDefaultTimeRepetitions;
  std::size_t n = 5;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  double slack = 1.1;
  double overhead = ct::kDefaultProfilingOverhead;
  double inst_reaction = ct::kDefaultInstReaction;
  double gamma = ct::kDefaultGamma;
  std::size_t neighborhood = 0;
  std::string sign = "candidate-minus-profile";
  std::string issue = "decrease";
  unsigned workers = ct::default_worker_count();

  ct::ExperimentSpec spec(const std::string& default_name) const {
    ct::ExperimentSpec s;
    s.name = name.empty() ? default_name : name;
    s.searcher = ct::parse_searcher(searcher);
    s.repetitions = reps;
    s.time_repetitions = time_reps;
    s.n = n;
    s.iterations = iterations;
    s.seed = seed;
    s.slack = slack;
    s.profiling_overhead = overhead;
    s.react.inst_reaction = inst_reaction;
    if (issue == "decrease")
      s.react.issue_sign = ct::kIssueReactionSign;
    else if (issue == "increase")
      s.react.issue_sign = -ct::kIssueReactionSign;
    else
      throw ct::Error("--issue must be decrease or increase");
    if (sign == "candidate-minus-profile")
      s.score.sign = ct::ScoreSign::CandidateMinusProfile;
    else if (sign == "profile-minus-candidate")
      s.score.sign = ct::ScoreSign::ProfileMinusCandidate;
    else
      throw ct::Error("--sign must be candidate-minus-profile or profile-minus-candidate");
    s.score.neighborhood = neighborhood;
    s.gamma = gamma;
    s.workers = workers;
    s.validate();
    return s;
  }
};

struct ModelArgs {
  std::string path;
  std::string family = "tree";
  std::uint64_t seed = 0;

  ct::ModelSet obtain(const ct::Dataset& d, unsigned workers) const {
    if (!path.empty()) return ct::load_model(path);
    ct::TrainOptions opts;
    opts.family = ct::parse_model_family(family);
    opts.seed = seed;
    opts.workers = workers;
    std::vector<std::string> warnings;
    auto m = ct::train_models(d, opts, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return m;
  }
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& d) {
  cmd->add_option("--dataset", d.dir, "Directory holding space.csv, measurements.csv and arch.txt")->required();
  cmd->add_option("--label", d.label, "Input label (defaults to the dataset directory name)");
}

void add_search_options(CLI::App* cmd, SearchArgs& s) {
  cmd->add_option("--name", s.name, "Experiment name used in report file names");
  cmd->add_option("--reps", s.reps, "Repetitions");
  cmd->add_option("--time-reps", s.time_reps, "Repetitions feeding the simulated-time curve");
  cmd->add_option("--n", s.n, "Runtime-only evaluations per profiling run");
  cmd->add_option("--i", s.iterations, "Profiling runs per repetition (0: until well-performing)");
  cmd->add_option("--seed", s.seed, "Master seed");
  cmd->add_option("--slack", s.slack, "Well-performing threshold relative to the best runtime");
  cmd->add_option("--overhead", s.overhead, "Simulated-time multiplier for profiled evaluations");
  cmd->add_option("--inst-reaction", s.inst_reaction, "Instruction bottleneck threshold");
  cmd->add_option("--gamma", s.gamma, "Raw score at or below which selection weight is minimal");
  cmd->add_option("--neighborhood", s.neighborhood, "Score only the K nearest unexplored configurations (0: all)");
  cmd->add_option("--sign", s.sign, "Score numerator: candidate-minus-profile or profile-minus-candidate");
  cmd->add_option("--issue", s.issue, "Issue-slot reaction direction: decrease or increase");
  cmd->add_option("--workers", s.workers, "Worker threads (default from COUNTERTUNE_WORKERS)");
}

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--model", m.path, "Model file; trains on the dataset when omitted");
  cmd->add_option("--family", m.family, "Model family used when training: tree, regression, lookup");
  cmd->add_option("--train-seed", m.seed, "Seed for on-the-fly training");
}

void print_report_line(const ct::ConvergenceReport& r) {
  std::cout << r.name << ": searcher=" << r.searcher << " reps=" << r.repetitions << " reached=" << r.reached
            << " mean_steps=" << r.mean_steps << " median_steps=" << r.median_steps
            << " stddev_steps=" << r.stddev_steps;
  if (r.improvement) std::cout << " improvement=" << *r.improvement;
  std::cout << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ct::Error("cannot write '" + path + "'");
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw ct::Error("cannot write '" + path + "'");
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ct::ParseError*>(&e)) return "parse";
  if (dynamic_cast<const ct::ModelError*>(&e)) return "model";
  if (dynamic_cast<const ct::SearchError*>(&e)) return "search";
  if (dynamic_cast<const ct::Error*>(&e)) return "input";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profile-guided autotuning search over recorded tuning spaces"};
  app.require_subcommand(1);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset from a formula spec");
  std::string gen_spec, gen_out;
  std::uint64_t gen_seed = 0;
  double gen_scale = 1.0;
  gen->add_option("--spec", gen_spec, "Generator spec (JSON)")->required();
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--seed", gen_seed, "Seed for rnd() terms");
  gen->add_option("--runtime-scale", gen_scale, "Multiplier applied to every runtime");

  // train
  auto* train = app.add_subcommand("train", "Train parameter-to-counter models");
  DatasetArgs train_data;
  ModelArgs train_model;
  std::string train_out;
  unsigned train_workers = ct::default_worker_count();
  add_dataset_options(train, train_data);
  train->add_option("--family", train_model.family, "tree, regression or lookup");
  train->add_option("--seed", train_model.seed, "Train/test split seed");
  train->add_option("--out", train_out, "Model file to write")->required();
  train->add_option("--workers", train_workers, "Worker threads");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Replay repeated searches and write convergence reports");
  DatasetArgs sim_data;
  ModelArgs sim_model;
  SearchArgs sim_search;
  std::string sim_out;
  add_dataset_options(sim, sim_data);
  add_model_options(sim, sim_model);
  add_search_options(sim, sim_search);
  sim->add_option("--searcher", sim_search.searcher, "profile or random");
  sim->add_option("--out", sim_out, "Report directory")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "Profile searcher against the random baseline, paired seeds");
  DatasetArgs cmp_data;
  ModelArgs cmp_model;
  SearchArgs cmp_search;
  std::string cmp_out;
  add_dataset_options(cmp, cmp_data);
  add_model_options(cmp, cmp_model);
  add_search_options(cmp, cmp_search);
  cmp->add_option("--out", cmp_out, "Report directory")->required();

  // cross-eval
  auto* cross = app.add_subcommand("cross-eval", "Evaluate a model on another dataset");
  DatasetArgs cross_data;
  std::string cross_model_path;
  SearchArgs cross_search;
  std::string cross_out;
  add_dataset_options(cross, cross_data);
  cross->add_option("--model", cross_model_path, "Model file trained elsewhere")->required();
  add_search_options(cross, cross_search);
  cross->add_option("--out", cross_out, "Report directory")->required();

  // inspect
  auto* insp = app.add_subcommand("inspect", "Print bottlenecks and counter changes for one measurement");
  DatasetArgs insp_data;
  std::optional<std::size_t> insp_index;
  std::vector<double> insp_values;
  double insp_reaction = ct::kDefaultInstReaction;
  add_dataset_options(insp, insp_data);
  auto* index_opt = insp->add_option("--config", insp_index, "Configuration index");
  insp->add_option("--values", insp_values, "Parameter values in declared order")->delimiter(',')->excludes(index_opt);
  insp->add_option("--inst-reaction", insp_reaction, "Instruction bottleneck threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      const auto spec = ct::load_synthetic_spec(gen_spec);
      const auto d = ct::gen_synthetic(spec, {gen_seed, gen_scale}, gen_out);
      std::cout << "wrote " << d.records().size() << " configurations to " << gen_out
                << " (well-performing: " << ct::well_performing_set(d).size() << ")\n";
    } else if (train->parsed()) {
      const auto d = train_data.load();
      ct::TrainOptions opts;
      opts.family = ct::parse_model_family(train_model.family);
      opts.seed = train_model.seed;
      opts.workers = train_workers;
      std::vector<std::string> warnings;
      const auto m = ct::train_models(d, opts, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      ct::save_model(m, train_out);
      std::cout << "trained " << m.models.size() << " " << ct::to_string(m.family) << " models on "
                << d.records().size() << " records\n";
      for (const auto& [counter, model] : m.models)
        if (const auto* tree = std::get_if<ct::DecisionTreeModel>(&model))
          std::cout << "  " << ct::abbreviation(counter) << ": depth=" << tree->depth()
                    << " min_leaf=" << tree->meta.min_leaf << " test_mae=" << tree->meta.mae
                    << " test_rmse=" << tree->meta.rmse << "\n";
    } else if (sim->parsed()) {
      const auto d = sim_data.load();
      auto spec = sim_search.spec(std::string(ct::to_string(ct::parse_searcher(sim_search.searcher))));
      std::optional<ct::ModelSet> m;
      if (spec.searcher == ct::SearcherKind::Profile) m = sim_model.obtain(d, spec.workers);
      const auto report = ct::simulate(d, m ? &*m : nullptr, spec);
      ct::write_reports(std::span(&report, 1), sim_out);
      print_report_line(report);
    } else if (cmp->parsed()) {
      const auto d = cmp_data.load();
      const auto spec = cmp_search.spec("compare");
      const auto m = cmp_model.obtain(d, spec.workers);
      const auto c = ct::compare(d, m, spec);
      const std::vector<ct::ConvergenceReport> reports{c.random, c.profile};
      ct::write_reports(reports, cmp_out);
      for (const auto& r : reports) print_report_line(r);
    } else if (cross->parsed()) {
      const auto d = cross_data.load();
      const auto spec = cross_search.spec("cross");
      const auto m = ct::load_model(cross_model_path);
      const auto r = ct::cross_evaluate(m, d, spec);
      const std::vector<ct::ConvergenceReport> reports{r.comparison.random, r.comparison.profile};
      ct::write_reports(reports, cross_out);
      write_text((std::filesystem::path(cross_out) / "errors.csv").string(), ct::format_errors(r.errors));
      std::cout << "model " << r.model_source << " on " << r.target << "\n" << ct::format_errors(r.errors);
      for (const auto& rep : reports) print_report_line(rep);
    } else if (insp->parsed()) {
      const auto d = insp_data.load();
      std::size_t index = 0;
      if (insp_index) {
        index = *insp_index;
      } else if (!insp_values.empty()) {
        auto found = d.space().find(insp_values);
        if (!found) throw ct::Error("no configuration with the given --values");
        index = *found;
      } else {
        throw ct::Error("inspect needs --config or --values");
      }
      const auto* rec = index < d.space().size() ? d.record_for(index) : nullptr;
      if (!rec) throw ct::Error("configuration " + std::to_string(index) + " has no measurement");
      const auto b = ct::analyze(rec->counters, d.arch(), rec->global_threads);
      const auto delta = ct::react(b, ct::ReactOptions{insp_reaction});
      std::cout << "configuration " << index << ":";
      const auto names = d.space().parameter_names();
      for (std::size_t p = 0; p < names.size(); ++p)
        std::cout << " " << names[p] << "=" << d.space()[index].assignment[p];
      std::cout << "\nruntime_us " << rec->runtime_us << "\n"
                << (b.degenerate_instructions ? "instruction counters degenerate\n" : "") << "bottlenecks:\n";
      for (std::size_t i = 0; i < ct::kBottleneckCount; ++i) {
        const auto bn = static_cast<ct::Bottleneck>(i);
        std::cout << "  " << ct::bottleneck_name(bn) << " " << b[bn] << "\n";
      }
      std::cout << "counter changes:\n";
      for (auto c : ct::DeltaPC::kKeys) std::cout << "  " << ct::abbreviation(c) << " " << delta[c] << "\n";
    }
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", error_kind(e)}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
