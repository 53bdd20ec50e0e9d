#include "countertune/models.hpp"

#include <algorithm>
#include <json.hpp>

#include "countertune/error.hpp"
#include "countertune/parallel.hpp"
#include "text_util.hpp"

namespace countertune {

using nlohmann::json;

std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::DecisionTree: return "tree";
    case ModelFamily::Regression: return "regression";
    case ModelFamily::Lookup: return "lookup";
  }
  return "tree";
}

ModelFamily parse_model_family(std::string_view text) {
  if (text == "tree") return ModelFamily::DecisionTree;
  if (text == "regression") return ModelFamily::Regression;
  if (text == "lookup") return ModelFamily::Lookup;
  throw ModelError("unknown model family '" + std::string(text) + "' (tree, regression, lookup)");
}

void ModelSet::check_compatible(const TuningSpace& space) const {
  const auto params = space.parameters();
  bool same = params.size() == parameters.size();
  for (std::size_t i = 0; same && i < params.size(); ++i)
    same = params[i].name == parameters[i].name && params[i].is_binary == parameters[i].is_binary;
  if (same) return;
  std::string model_names, space_names;
  for (const auto& p : parameters) model_names += (model_names.empty() ? "" : ",") + p.name;
  for (const auto& p : params) space_names += (space_names.empty() ? "" : ",") + p.name;
  throw ModelError("parameter mismatch: model declares [" + model_names + "], space declares [" + space_names + "]");
}

namespace {

struct Predictor {
  std::span<const double> x;
  const std::vector<ModelParameter>& parameters;

  std::optional<double> operator()(const DecisionTreeModel& m) const { return m.predict(x); }
  std::optional<double> operator()(const RegressionFamily& f) const {
    std::string key;
    for (std::size_t p = 0; p < parameters.size(); ++p)
      if (parameters[p].is_binary) key.push_back(x[p] != 0.0 ? '1' : '0');
    auto it = f.by_subspace.find(key);
    if (it == f.by_subspace.end()) return std::nullopt;
    return it->second.predict(x);
  }
  std::optional<double> operator()(const LookupModel& m) const {
    auto it = m.values.find(std::vector<double>(x.begin(), x.end()));
    if (it == m.values.end()) return std::nullopt;
    return it->second;
  }
};

}  // namespace

CounterValues ModelSet::predict(std::span<const double> assignment) const {
  if (assignment.size() != parameters.size())
    throw ModelError("parameter mismatch: assignment has " + std::to_string(assignment.size()) +
                     " values, model declares " + std::to_string(parameters.size()));
  CounterValues out;
  const Predictor predictor{assignment, parameters};
  for (const auto& [counter, model] : models)
    if (auto v = std::visit(predictor, model)) out.set(counter, std::max(0.0, *v));
  return out;
}

CounterValues predict(const ModelSet& m, const TuningSpace& space, const TuningConfiguration& c) {
  m.check_compatible(space);
  return m.predict(c.assignment);
}

std::vector<Counter> modeled_counters(const Dataset& d) {
  std::vector<Counter> out;
  for (std::size_t i = 0; i < kCounterCount; ++i) {
    const auto c = counter_at(i);
    const bool wanted = classify(c) == CounterKind::Ops || c == Counter::SM_E;
    if (!wanted) continue;
    const auto records = d.records();
    if (std::all_of(records.begin(), records.end(), [c](const auto& r) { return r.counters.has(c); }))
      out.push_back(c);
  }
  return out;
}

LookupModel build_lookup(const Dataset& d, Counter counter) {
  LookupModel m;
  m.target = counter;
  for (const auto& r : d.records())
    if (auto v = r.counters.get(counter)) m.values.emplace(d.space()[r.config_index].assignment, *v);
  return m;
}

ModelSet train_models(const Dataset& d, const TrainOptions& options, std::vector<std::string>* warnings) {
  ModelSet set;
  for (const auto& p : d.space().parameters()) set.parameters.push_back({p.name, p.is_binary});
  set.source_arch = d.arch().name;
  set.source_input = d.input_label();
  set.family = options.family;

  const auto counters = modeled_counters(d);
  std::vector<CounterModel> trained(counters.size());
  std::vector<std::vector<std::string>> notes(counters.size());
  parallel_for(counters.size(), options.workers, [&](std::size_t i) {
    switch (options.family) {
      case ModelFamily::DecisionTree:
        trained[i] = train_decision_tree(d, counters[i], options.seed, options.grid);
        break;
      case ModelFamily::Regression:
        trained[i] = train_regression(d, counters[i], options.regression, &notes[i]);
        break;
      case ModelFamily::Lookup:
        trained[i] = build_lookup(d, counters[i]);
        break;
    }
  });
  for (std::size_t i = 0; i < counters.size(); ++i) {
    set.models.emplace(counters[i], std::move(trained[i]));
    if (warnings) warnings->insert(warnings->end(), notes[i].begin(), notes[i].end());
  }
  return set;
}

// ---------------------------------------------------------------------------
// Serialization: a JSON document tagged with format name and version.
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kFormatName = "countertune-model";

struct ModelToJson {
  json operator()(const DecisionTreeModel& m) const {
    json nodes = json::array();
    for (const auto& n : m.nodes) nodes.push_back({n.parameter, n.threshold, n.left, n.right, n.value});
    return {{"kind", "tree"},
            {"nodes", nodes},
            {"meta",
             {{"seed", m.meta.seed},
              {"max_depth", m.meta.max_depth},
              {"min_leaf", m.meta.min_leaf},
              {"mae", m.meta.mae},
              {"rmse", m.meta.rmse},
              {"train_size", m.meta.train_size},
              {"test_size", m.meta.test_size}}}};
  }
  json operator()(const RegressionFamily& f) const {
    json subspaces = json::array();
    for (const auto& [key, m] : f.by_subspace) {
      json terms = json::array();
      for (const auto& t : m.terms) terms.push_back({t.first, t.second, t.power});
      subspaces.push_back({{"key", key}, {"terms", terms}, {"coefficients", m.coefficients}});
    }
    return {{"kind", "regression"}, {"subspaces", subspaces}};
  }
  json operator()(const LookupModel& m) const {
    json entries = json::array();
    for (const auto& [x, v] : m.values) entries.push_back({x, v});
    return {{"kind", "lookup"}, {"entries", entries}};
  }
};

CounterModel model_from_json(const json& j, Counter counter, std::size_t parameter_count) {
  const auto kind = j.at("kind").get<std::string>();
  auto check_param = [&](int p, bool allow_none) {
    if ((p < 0 && !allow_none) || p >= static_cast<int>(parameter_count))
      throw ModelError("model for " + std::string(abbreviation(counter)) + " references parameter " +
                       std::to_string(p) + " outside the declared list");
  };
  if (kind == "tree") {
    DecisionTreeModel m;
    m.target = counter;
    for (const auto& n : j.at("nodes")) {
      TreeNode node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                    n.at(4).get<double>()};
      check_param(node.parameter, true);
      m.nodes.push_back(node);
    }
    const auto count = static_cast<int>(m.nodes.size());
    if (count == 0) throw ModelError("empty tree for " + std::string(abbreviation(counter)));
    for (const auto& n : m.nodes)
      if (n.parameter >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count))
        throw ModelError("corrupt tree for " + std::string(abbreviation(counter)));
    const auto& meta = j.at("meta");
    m.meta = {meta.at("seed").get<std::uint64_t>(), meta.at("max_depth").get<int>(),
              meta.at("min_leaf").get<int>(),       meta.at("mae").get<double>(),
              meta.at("rmse").get<double>(),        meta.at("train_size").get<std::size_t>(),
              meta.at("test_size").get<std::size_t>()};
    return m;
  }
  if (kind == "regression") {
    RegressionFamily f;
    f.target = counter;
    for (const auto& s : j.at("subspaces")) {
      RegressionModel m;
      m.target = counter;
      m.subspace_key = s.at("key").get<std::string>();
      for (const auto& t : s.at("terms")) {
        RegressionTerm term{t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()};
        check_param(term.first, true);
        check_param(term.second, true);
        m.terms.push_back(term);
      }
      m.coefficients = s.at("coefficients").get<std::vector<double>>();
      if (m.coefficients.size() != m.terms.size())
        throw ModelError("regression for " + std::string(abbreviation(counter)) + " has mismatched coefficients");
      f.by_subspace.emplace(m.subspace_key, std::move(m));
    }
    return f;
  }
  if (kind == "lookup") {
    LookupModel m;
    m.target = counter;
    for (const auto& e : j.at("entries")) {
      auto x = e.at(0).get<std::vector<double>>();
      if (x.size() != parameter_count) throw ModelError("lookup entry arity mismatch");
      m.values.emplace(std::move(x), e.at(1).get<double>());
    }
    return m;
  }
  throw ModelError("unknown model kind '" + kind + "'");
}

}  // namespace

std::string serialize_model(const ModelSet& m) {
  json params = json::array();
  for (const auto& p : m.parameters) params.push_back({{"name", p.name}, {"binary", p.is_binary}});
  json models = json::array();
  for (const auto& [counter, model] : m.models) {
    json entry = std::visit(ModelToJson{}, model);
    entry["counter"] = std::string(abbreviation(counter));
    models.push_back(std::move(entry));
  }
  json doc = {{"format", kFormatName},
              {"version", kModelFormatVersion},
              {"family", std::string(to_string(m.family))},
              {"source_arch", m.source_arch},
              {"source_input", m.source_input},
              {"parameters", params},
              {"models", models}};
  return doc.dump(1) + "\n";
}

ModelSet parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("truncated or malformed model file: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormatName) throw ModelError("not a countertune model file");
    const auto version = doc.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw ModelError("unsupported model version " + std::to_string(version) + " (expected " +
                       std::to_string(kModelFormatVersion) + ")");
    ModelSet m;
    m.family = parse_model_family(doc.at("family").get<std::string>());
    m.source_arch = doc.at("source_arch").get<std::string>();
    m.source_input = doc.at("source_input").get<std::string>();
    for (const auto& p : doc.at("parameters"))
      m.parameters.push_back({p.at("name").get<std::string>(), p.at("binary").get<bool>()});
    for (const auto& entry : doc.at("models")) {
      const auto name = entry.at("counter").get<std::string>();
      auto counter = parse_abbreviation(name);
      if (!counter) throw ModelError("unknown counter '" + name + "' in model file");
      m.models.emplace(*counter, model_from_json(entry, *counter, m.parameters.size()));
    }
    return m;
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ModelSet& m, const std::string& path) { detail::write_file(path, serialize_model(m)); }

ModelSet load_model(const std::string& path) { return parse_model(detail::read_file(path)); }

}  // namespace countertune
