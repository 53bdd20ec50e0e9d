#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "countertune/counters.hpp"
#include "countertune/tuning_space.hpp"

namespace countertune {

// Flat binary tree; a node with parameter < 0 is a leaf.
struct TreeNode {
  int parameter = -1;
  double threshold = 0.0;  // x[parameter] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf prediction

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct TreeTrainingMeta {
  std::uint64_t seed = 0;
  int max_depth = 0;
  int min_leaf = 1;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;

  friend bool operator==(const TreeTrainingMeta&, const TreeTrainingMeta&) = default;
};

struct DecisionTreeModel {
  Counter target = Counter::DRAM_RT;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  TreeTrainingMeta meta;

  double predict(std::span<const double> assignment) const;
  int depth() const;

  friend bool operator==(const DecisionTreeModel&, const DecisionTreeModel&) = default;
};

// Constant (first < 0), x[first]^power, or x[first] * x[second].
struct RegressionTerm {
  int first = -1;
  int second = -1;
  int power = 1;

  double evaluate(std::span<const double> assignment) const;
  friend bool operator==(const RegressionTerm&, const RegressionTerm&) = default;
};

struct RegressionModel {
  Counter target = Counter::DRAM_RT;
  std::string subspace_key;
  std::vector<RegressionTerm> terms;
  std::vector<double> coefficients;

  double predict(std::span<const double> assignment) const;
  friend bool operator==(const RegressionModel&, const RegressionModel&) = default;
};

// One least-squares model per populated binary subspace.
struct RegressionFamily {
  Counter target = Counter::DRAM_RT;
  std::map<std::string, RegressionModel> by_subspace;
  friend bool operator==(const RegressionFamily&, const RegressionFamily&) = default;
};

// Exact replay of measured counter values keyed by assignment. Stands in for a
// perfect model when measured counters of the whole space are available.
struct LookupModel {
  Counter target = Counter::DRAM_RT;
  std::map<std::vector<double>, double> values;
  friend bool operator==(const LookupModel&, const LookupModel&) = default;
};

using CounterModel = std::variant<DecisionTreeModel, RegressionFamily, LookupModel>;

enum class ModelFamily { DecisionTree, Regression, Lookup };
std::string_view to_string(ModelFamily f);
ModelFamily parse_model_family(std::string_view text);

struct ModelParameter {
  std::string name;
  bool is_binary = false;
  friend bool operator==(const ModelParameter&, const ModelParameter&) = default;
};

class ModelSet {
 public:
  std::vector<ModelParameter> parameters;
  std::string source_arch;
  std::string source_input;
  ModelFamily family = ModelFamily::DecisionTree;
  std::map<Counter, CounterModel> models;

  // Throws ModelError("parameter mismatch ...") unless the space declares the
  // same parameters in the same order.
  void check_compatible(const TuningSpace& space) const;

  // One clamped (>= 0) prediction per modeled counter; counters whose model
  // cannot place the assignment are omitted.
  CounterValues predict(std::span<const double> assignment) const;

  friend bool operator==(const ModelSet&, const ModelSet&) = default;
};

struct TreeGrid {
  std::vector<int> max_depths{2, 3, 4, 6, 8, 10};
  std::vector<int> min_leafs{1, 2, 5};
};

struct RegressionOptions {
  int interaction_order = 2;  // 1 disables interaction terms
};

struct TrainOptions {
  ModelFamily family = ModelFamily::DecisionTree;
  std::uint64_t seed = 0;
  TreeGrid grid;
  RegressionOptions regression;
  unsigned workers = 1;
};

// Ops counters present in every record, GLOBAL_THREADS, and SM_E.
std::vector<Counter> modeled_counters(const Dataset& d);

// Positions (into d.records()) of the seeded training half used by
// train_decision_tree; the remainder is the held-out test half.
std::vector<std::size_t> tree_training_records(std::size_t record_count, std::uint64_t seed);

// Throws ModelError with fewer than 4 records.
DecisionTreeModel train_decision_tree(const Dataset& d, Counter counter, std::uint64_t seed,
                                      const TreeGrid& grid = {});

// Under-populated subspaces are skipped with a message appended to `warnings`.
// Throws ModelError on a rank-deficient design, naming the subspace key.
RegressionFamily train_regression(const Dataset& d, Counter counter, const RegressionOptions& options = {},
                                  std::vector<std::string>* warnings = nullptr);

LookupModel build_lookup(const Dataset& d, Counter counter);

ModelSet train_models(const Dataset& d, const TrainOptions& options = {},
                      std::vector<std::string>* warnings = nullptr);

// Validates the space before predicting.
CounterValues predict(const ModelSet& m, const TuningSpace& space, const TuningConfiguration& c);

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const ModelSet& m);
ModelSet parse_model(std::string_view text);
void save_model(const ModelSet& m, const std::string& path);
ModelSet load_model(const std::string& path);

}  // namespace countertune
