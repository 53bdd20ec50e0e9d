#include "countertune/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "countertune/error.hpp"
#include "text_util.hpp"

namespace countertune {

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

struct Expression::Node {
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call } kind = Kind::Number;
  double number = 0.0;
  std::size_t variable = 0;
  std::string function;
  std::vector<std::unique_ptr<Node>> args;
};

namespace {

using Node = Expression::Node;

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& variables) : text_(text), variables_(variables) {}

  std::unique_ptr<Node> parse() {
    auto root = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error("formula '" + std::string(text_) + "': " + what + " at offset " + std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static std::unique_ptr<Node> binary(Node::Kind kind, std::unique_ptr<Node> lhs, std::unique_ptr<Node> rhs) {
    auto n = std::make_unique<Node>();
    n->kind = kind;
    n->args.push_back(std::move(lhs));
    n->args.push_back(std::move(rhs));
    return n;
  }

  std::unique_ptr<Node> expr() {
    auto lhs = term();
    while (true) {
      if (consume('+')) lhs = binary(Node::Kind::Add, std::move(lhs), term());
      else if (consume('-')) lhs = binary(Node::Kind::Sub, std::move(lhs), term());
      else return lhs;
    }
  }

  std::unique_ptr<Node> term() {
    auto lhs = unary();
    while (true) {
      if (consume('*')) lhs = binary(Node::Kind::Mul, std::move(lhs), unary());
      else if (consume('/')) lhs = binary(Node::Kind::Div, std::move(lhs), unary());
      else return lhs;
    }
  }

  std::unique_ptr<Node> unary() {
    if (consume('-')) {
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::Negate;
      n->args.push_back(unary());
      return n;
    }
    return power();
  }

  // Right-associative; binds tighter than unary minus on its left.
  std::unique_ptr<Node> power() {
    auto base = primary();
    if (consume('^')) return binary(Node::Kind::Pow, std::move(base), unary());
    return base;
  }

  std::unique_ptr<Node> primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (consume('(')) {
      auto inner = expr();
      if (!consume(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::unique_ptr<Node> number() {
    const auto start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    auto v = detail::parse_double(text_.substr(start, pos_ - start));
    if (!v) fail("malformed number");
    auto n = std::make_unique<Node>();
    n->number = *v;
    return n;
  }

  std::unique_ptr<Node> identifier() {
    const auto start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    if (consume('(')) return call(name);
    auto it = std::find(variables_.begin(), variables_.end(), name);
    if (it == variables_.end()) fail("references unknown parameter '" + name + "'");
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::Variable;
    n->variable = static_cast<std::size_t>(it - variables_.begin());
    return n;
  }

  std::unique_ptr<Node> call(const std::string& name) {
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::Call;
    n->function = name;
    if (!consume(')')) {
      do n->args.push_back(expr());
      while (consume(','));
      if (!consume(')')) fail("expected ')' after arguments of " + name);
    }
    const auto argc = n->args.size();
    const bool ok = (name == "min" || name == "max") ? argc >= 1
                    : name == "clamp"                 ? argc == 3
                    : name == "rnd"                   ? argc == 0
                    : (name == "abs" || name == "sqrt" || name == "log2" || name == "floor" || name == "ceil")
                        ? argc == 1
                        : false;
    if (!ok) fail("unknown function or wrong arity: " + name + "/" + std::to_string(argc));
    return n;
  }

  std::string_view text_;
  const std::vector<std::string>& variables_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, std::span<const double> vars, Rng* rng) {
  using K = Node::Kind;
  auto arg = [&](std::size_t i) { return eval_node(*n.args[i], vars, rng); };
  switch (n.kind) {
    case K::Number: return n.number;
    case K::Variable: return vars[n.variable];
    case K::Negate: return -arg(0);
    case K::Add: return arg(0) + arg(1);
    case K::Sub: return arg(0) - arg(1);
    case K::Mul: return arg(0) * arg(1);
    case K::Div: return arg(0) / arg(1);
    case K::Pow: return std::pow(arg(0), arg(1));
    case K::Call: break;
  }
  const auto& f = n.function;
  if (f == "rnd") {
    if (!rng) throw Error("rnd() needs a seeded generator");
    return rng->uniform();
  }
  if (f == "min" || f == "max") {
    double acc = arg(0);
    for (std::size_t i = 1; i < n.args.size(); ++i) acc = f == "min" ? std::min(acc, arg(i)) : std::max(acc, arg(i));
    return acc;
  }
  if (f == "clamp") return std::clamp(arg(0), arg(1), std::max(arg(1), arg(2)));
  if (f == "abs") return std::abs(arg(0));
  if (f == "sqrt") return std::sqrt(arg(0));
  if (f == "log2") return std::log2(arg(0));
  if (f == "floor") return std::floor(arg(0));
  return std::ceil(arg(0));
}

}  // namespace

Expression::Expression() = default;
Expression::~Expression() = default;
Expression::Expression(Expression&&) noexcept = default;
Expression& Expression::operator=(Expression&&) noexcept = default;
Expression::Expression(std::unique_ptr<Node> root) : root_(std::move(root)) {}

Expression Expression::parse(std::string_view text, const std::vector<std::string>& variables) {
  return Expression(Parser(text, variables).parse());
}

double Expression::evaluate(std::span<const double> variables, Rng* rng) const {
  if (!root_) throw Error("empty expression");
  return eval_node(*root_, variables, rng);
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

SyntheticSpec parse_synthetic_spec(std::string_view json_text, const std::string& source_name) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(source_name + ": " + e.what());
  }
  try {
    SyntheticSpec spec;
    spec.name = doc.value("name", "synthetic");
    spec.input_label = doc.value("input_label", spec.name);
    const auto& arch = doc.at("arch");
    spec.arch.name = arch.at("name").get<std::string>();
    auto gen = parse_generation(arch.value("generation", "pre_volta"));
    if (!gen) throw Error(source_name + ": arch.generation must be pre_volta or volta_plus");
    spec.arch.generation = *gen;
    spec.arch.cores = arch.at("cores").get<int>();
    if (spec.arch.cores < 1) throw Error(source_name + ": arch.cores must be >= 1");

    for (const auto& p : doc.at("parameters")) {
      std::vector<double> values;
      if (p.contains("values")) {
        values = p.at("values").get<std::vector<double>>();
      } else {
        const auto range = p.at("range").get<std::vector<double>>();
        if (range.size() != 2 || range[1] < range[0]) throw Error(source_name + ": range must be [lo, hi]");
        for (double v = range[0]; v <= range[1]; v += 1.0) values.push_back(v);
      }
      if (values.empty()) throw Error(source_name + ": parameter without values");
      spec.parameters.push_back(TuningParameter::make(p.at("name").get<std::string>(), std::move(values)));
    }
    for (const auto& [name, formula] : doc.at("counters").items()) {
      auto c = parse_abbreviation(name);
      if (!c || *c == Counter::GLOBAL_THREADS) throw Error(source_name + ": unknown counter '" + name + "'");
      spec.counter_formulas[*c] = formula.get<std::string>();
    }
    for (std::size_t i = 0; i < kHardwareCounterCount; ++i)
      if (!spec.counter_formulas.contains(counter_at(i)))
        throw Error(source_name + ": no formula for counter " + std::string(abbreviation(counter_at(i))));
    spec.global_threads_formula = doc.at("global_threads").get<std::string>();
    spec.runtime_formula = doc.at("runtime_us").get<std::string>();
    return spec;
  } catch (const json::exception& e) {
    throw Error(source_name + ": " + e.what());
  }
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  return parse_synthetic_spec(detail::read_file(path), path);
}

Dataset generate_synthetic(const SyntheticSpec& spec, const SyntheticOptions& options) {
  if (!(options.runtime_scale > 0.0)) throw Error("runtime scale must be positive");
  std::vector<std::string> param_names;
  for (const auto& p : spec.parameters) param_names.push_back(p.name);
  std::vector<std::string> all_names = param_names;
  for (std::size_t i = 0; i < kHardwareCounterCount; ++i) all_names.emplace_back(abbreviation(counter_at(i)));

  std::vector<std::pair<Counter, Expression>> counters;
  for (const auto& [c, formula] : spec.counter_formulas)
    counters.emplace_back(c, Expression::parse(formula, param_names));
  const auto threads_expr = Expression::parse(spec.global_threads_formula, all_names);
  auto runtime_names = all_names;
  runtime_names.emplace_back("GLOBAL_THREADS");
  const auto runtime_expr = Expression::parse(spec.runtime_formula, runtime_names);

  // Cartesian product, last parameter varying fastest.
  std::vector<std::vector<double>> assignments{{}};
  for (const auto& p : spec.parameters) {
    std::vector<std::vector<double>> next;
    next.reserve(assignments.size() * p.values.size());
    for (const auto& prefix : assignments)
      for (double v : p.values) {
        auto a = prefix;
        a.push_back(v);
        next.push_back(std::move(a));
      }
    assignments = std::move(next);
  }
  TuningSpace space(spec.parameters, assignments);

  std::vector<MeasurementRecord> records;
  records.reserve(space.size());
  for (const auto& config : space.configurations()) {
    Rng rng(derive_seed(options.seed, config.index));
    std::vector<double> vars = config.assignment;
    vars.resize(runtime_names.size(), 0.0);
    MeasurementRecord r;
    r.config_index = config.index;
    for (const auto& [c, expr] : counters) {
      const double v = expr.evaluate(config.assignment, &rng);
      if (!std::isfinite(v) || v < 0.0)
        throw Error("counter " + std::string(abbreviation(c)) + " evaluates to " + detail::format_double(v) +
                    " at configuration " + std::to_string(config.index));
      if (auto range = canonical_range(c); range && (v < range->first || v > range->second))
        throw Error("counter " + std::string(abbreviation(c)) + " = " + detail::format_double(v) +
                    " outside its canonical range at configuration " + std::to_string(config.index));
      r.counters.set(c, v);
      vars[param_names.size() + index_of(c)] = v;
    }
    const double threads = std::round(threads_expr.evaluate(vars, &rng));
    if (!(threads >= 1.0)) throw Error("global_threads < 1 at configuration " + std::to_string(config.index));
    r.global_threads = static_cast<std::int64_t>(threads);
    r.counters.set(Counter::GLOBAL_THREADS, threads);
    vars.back() = threads;
    const double runtime = runtime_expr.evaluate(vars, &rng) * options.runtime_scale;
    if (!std::isfinite(runtime) || !(runtime > 0.0))
      throw Error("runtime_us not positive at configuration " + std::to_string(config.index));
    r.runtime_us = runtime;
    records.push_back(std::move(r));
  }
  return Dataset(std::move(space), spec.arch, spec.input_label, std::move(records));
}

Dataset gen_synthetic(const SyntheticSpec& spec, const SyntheticOptions& options, const std::string& out_dir) {
  const auto d = generate_synthetic(spec, options);
  std::filesystem::create_directories(out_dir);
  const auto paths = DatasetPaths::in_directory(out_dir);
  save_dataset(d, paths);
  return load_dataset(paths, d.input_label());
}

}  // namespace countertune
