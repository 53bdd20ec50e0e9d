// Thin pybind11 layer: datasets, models, expert system and search experiments.
// Counter maps cross the boundary as {abbreviation: value} dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "countertune/bottleneck.hpp"
#include "countertune/error.hpp"
#include "countertune/harness.hpp"
#include "countertune/models.hpp"
#include "countertune/synthetic.hpp"
#include "countertune/tuning_space.hpp"

namespace py = pybind11;
using namespace countertune;

namespace {

py::dict to_dict(const CounterValues& v) {
  py::dict out;
  for (std::size_t i = 0; i < kCounterCount; ++i) {
    const auto c = counter_at(i);
    if (v.has(c)) out[py::str(std::string(abbreviation(c)))] = v[c];
  }
  return out;
}

CounterValues from_dict(const py::dict& d) {
  CounterValues v;
  for (const auto& [key, value] : d) {
    const auto name = py::cast<std::string>(key);
    const auto c = parse_abbreviation(name);
    if (!c) throw Error("unknown counter '" + name + "'");
    v.set(*c, py::cast<double>(value));
  }
  return v;
}

py::dict report_dict(const ConvergenceReport& r) {
  py::dict out;
  out["name"] = r.name;
  out["searcher"] = r.searcher;
  out["dataset"] = r.dataset;
  out["repetitions"] = r.repetitions;
  out["reached"] = r.reached;
  out["mean_steps"] = r.mean_steps;
  out["median_steps"] = r.median_steps;
  out["stddev_steps"] = r.stddev_steps;
  out["mean_time_to_well_us"] = r.mean_time_to_well_us;
  out["steps"] = r.steps;
  py::list curve;
  for (const auto& p : r.step_curve) curve.append(py::make_tuple(p.x, p.mean, p.stddev));
  out["step_curve"] = curve;
  out["improvement"] = r.improvement ? py::cast(*r.improvement) : py::none();
  return out;
}

ExperimentSpec make_spec(const std::string& searcher, std::size_t reps, std::size_t n, std::size_t iterations,
                         std::uint64_t seed, double slack, double overhead, std::optional<unsigned> workers) {
  ExperimentSpec s;
  s.name = searcher.empty() ? "compare" : searcher;
  if (!searcher.empty()) s.searcher = parse_searcher(searcher);
  s.repetitions = reps;
  s.time_repetitions = std::min(reps, kDefaultTimeRepetitions);
  s.n = n;
  s.iterations = iterations;
  s.seed = seed;
  s.slack = slack;
  s.profiling_overhead = overhead;
  if (workers) s.workers = *workers;
  return s;
}

}  // namespace

PYBIND11_MODULE(_countertune, m) {
  m.doc() = "Profile-counter guided autotuning search";
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ModelError>(m, "ModelError", base.ptr());

  m.def("counter_names", [] {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < kCounterCount; ++i) names.emplace_back(abbreviation(counter_at(i)));
    return names;
  });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("size", [](const Dataset& d) { return d.space().size(); })
      .def_property_readonly("input_label", &Dataset::input_label)
      .def_property_readonly("best_runtime", &Dataset::best_runtime)
      .def_property_readonly("arch_name", [](const Dataset& d) { return d.arch().name; })
      .def_property_readonly("parameter_names", [](const Dataset& d) { return d.space().parameter_names(); })
      .def(
          "configuration", [](const Dataset& d, std::size_t i) { return d.space()[i].assignment; },
          py::arg("index"))
      .def(
          "runtime",
          [](const Dataset& d, std::size_t i) -> std::optional<double> {
            const auto* r = d.record_for(i);
            return r ? std::optional<double>(r->runtime_us) : std::nullopt;
          },
          py::arg("index"))
      .def(
          "counters",
          [](const Dataset& d, std::size_t i) -> py::object {
            const auto* r = d.record_for(i);
            return r ? py::object(to_dict(r->counters)) : py::none();
          },
          py::arg("index"))
      .def(
          "well_performing", [](const Dataset& d, double slack) { return well_performing_set(d, slack); },
          py::arg("slack") = 1.1)
      .def(
          "save", [](const Dataset& d, const std::string& dir) { save_dataset(d, DatasetPaths::in_directory(dir)); },
          py::arg("directory"));

  m.def(
      "load_dataset",
      [](const std::string& dir, std::optional<std::string> label) {
        return load_dataset(DatasetPaths::in_directory(dir), label);
      },
      py::arg("directory"), py::arg("label") = py::none());
  m.def(
      "generate_synthetic",
      [](const std::string& spec_path, std::uint64_t seed, double runtime_scale) {
        return generate_synthetic(load_synthetic_spec(spec_path), SyntheticOptions{seed, runtime_scale});
      },
      py::arg("spec_path"), py::arg("seed") = 0, py::arg("runtime_scale") = 1.0);

  py::class_<ModelSet>(m, "ModelSet")
      .def_property_readonly("family", [](const ModelSet& s) { return std::string(to_string(s.family)); })
      .def_property_readonly("counters",
                             [](const ModelSet& s) {
                               std::vector<std::string> names;
                               for (const auto& [c, model] : s.models) names.emplace_back(abbreviation(c));
                               return names;
                             })
      .def(
          "predict", [](const ModelSet& s, const std::vector<double>& x) { return to_dict(s.predict(x)); },
          py::arg("assignment"))
      .def("serialize", &serialize_model)
      .def("save", &save_model, py::arg("path"))
      .def("__eq__", [](const ModelSet& a, const ModelSet& b) { return a == b; });

  m.def(
      "train_models",
      [](const Dataset& d, const std::string& family, std::uint64_t seed) {
        TrainOptions o;
        o.family = parse_model_family(family);
        o.seed = seed;
        py::gil_scoped_release release;
        return train_models(d, o);
      },
      py::arg("dataset"), py::arg("family") = "tree", py::arg("seed") = 0);
  m.def("load_model", &load_model, py::arg("path"));
  m.def("parse_model", [](const std::string& text) { return parse_model(text); }, py::arg("text"));

  m.def(
      "analyze",
      [](const py::dict& counters, int cores, bool volta, std::int64_t threads) {
        ArchProfile arch;
        arch.name = "python";
        arch.cores = cores;
        arch.generation = volta ? Generation::VoltaPlus : Generation::PreVolta;
        const auto b = analyze(from_dict(counters), arch, threads);
        py::dict out;
        for (std::size_t i = 0; i < kBottleneckCount; ++i)
          out[py::str(std::string(bottleneck_name(static_cast<Bottleneck>(i))))] = b.values[i];
        return out;
      },
      py::arg("counters"), py::arg("cores"), py::arg("volta") = false, py::arg("threads"));
  m.def(
      "react",
      [](const py::dict& counters, int cores, bool volta, std::int64_t threads, double inst_reaction) {
        ArchProfile arch;
        arch.name = "python";
        arch.cores = cores;
        arch.generation = volta ? Generation::VoltaPlus : Generation::PreVolta;
        const auto d = react(analyze(from_dict(counters), arch, threads), inst_reaction);
        py::dict out;
        for (auto c : DeltaPC::kKeys) out[py::str(std::string(abbreviation(c)))] = d[c];
        return out;
      },
      py::arg("counters"), py::arg("cores"), py::arg("volta") = false, py::arg("threads"),
      py::arg("inst_reaction") = kDefaultInstReaction);

  m.def(
      "simulate",
      [](const Dataset& d, const ModelSet* models, const std::string& searcher, std::size_t reps, std::size_t n,
         std::size_t iterations, std::uint64_t seed, double slack, double overhead, std::optional<unsigned> workers) {
        const auto spec = make_spec(searcher, reps, n, iterations, seed, slack, overhead, workers);
        ConvergenceReport r;
        {
          py::gil_scoped_release release;
          r = simulate(d, models, spec);
        }
        return report_dict(r);
      },
      py::arg("dataset"), py::arg("models") = nullptr, py::arg("searcher") = "profile", py::arg("reps") = 1000,
      py::arg("n") = 5, py::arg("iterations") = 0, py::arg("seed") = 0, py::arg("slack") = 1.1,
      py::arg("overhead") = kDefaultProfilingOverhead, py::arg("workers") = py::none());
  m.def(
      "compare",
      [](const Dataset& d, const ModelSet& models, std::size_t reps, std::size_t n, std::size_t iterations,
         std::uint64_t seed, double slack, double overhead, std::optional<unsigned> workers) {
        const auto spec = make_spec("", reps, n, iterations, seed, slack, overhead, workers);
        Comparison c;
        {
          py::gil_scoped_release release;
          c = compare(d, models, spec);
        }
        py::dict out;
        out["random"] = report_dict(c.random);
        out["profile"] = report_dict(c.profile);
        out["improvement"] = *c.profile.improvement;
        return out;
      },
      py::arg("dataset"), py::arg("models"), py::arg("reps") = 1000, py::arg("n") = 5, py::arg("iterations") = 0,
      py::arg("seed") = 0, py::arg("slack") = 1.1, py::arg("overhead") = kDefaultProfilingOverhead,
      py::arg("workers") = py::none());
}
