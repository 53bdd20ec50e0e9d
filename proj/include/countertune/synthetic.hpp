#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "countertune/counters.hpp"
#include "countertune/rng.hpp"
#include "countertune/tuning_space.hpp"

namespace countertune {

// Closed-form expression over named variables: numbers, + - * / ^, unary
// minus, parentheses, and the functions min, max, clamp(x, lo, hi), abs,
// sqrt, log2, floor, ceil and rnd() (uniform [0,1), seeded per configuration).
class Expression {
 public:
  // Throws Error on a syntax error or a name outside `variables`.
  static Expression parse(std::string_view text, const std::vector<std::string>& variables);

  Expression();
  ~Expression();
  Expression(Expression&&) noexcept;
  Expression& operator=(Expression&&) noexcept;

  // rnd() draws from `rng`; evaluating rnd() without one throws Error.
  double evaluate(std::span<const double> variables, Rng* rng = nullptr) const;

  struct Node;

 private:
  explicit Expression(std::unique_ptr<Node> root);
  std::unique_ptr<Node> root_;
};

// Generator description, read from JSON:
// {
//   "name": "...", "input_label": "...",
//   "arch": {"name": "...", "generation": "pre_volta", "cores": 1920},
//   "parameters": [{"name": "A", "values": [0, 1, 2]}, {"name": "B", "range": [1, 8]}],
//   "counters": {"DRAM_RT": "1000 + 100*A", ...every hardware counter...},
//   "global_threads": "expr", "runtime_us": "expr"
// }
// Counter formulas see the parameters; global_threads and runtime_us see the
// parameters and every counter by abbreviation; runtime_us also sees
// GLOBAL_THREADS. Configurations enumerate the Cartesian product, last
// parameter fastest.
struct SyntheticSpec {
  std::string name;
  std::string input_label;
  ArchProfile arch;
  std::vector<TuningParameter> parameters;
  std::map<Counter, std::string> counter_formulas;
  std::string global_threads_formula;
  std::string runtime_formula;
};

SyntheticSpec parse_synthetic_spec(std::string_view json_text, const std::string& source_name = "<spec>");
SyntheticSpec load_synthetic_spec(const std::string& path);

struct SyntheticOptions {
  std::uint64_t seed = 0;
  double runtime_scale = 1.0;
};

// Pure function of (spec, options).
Dataset generate_synthetic(const SyntheticSpec& spec, const SyntheticOptions& options = {});

// Writes the canonical dataset files into `out_dir` and returns the dataset
// as re-read from disk.
Dataset gen_synthetic(const SyntheticSpec& spec, const SyntheticOptions& options, const std::string& out_dir);

}  // namespace countertune
