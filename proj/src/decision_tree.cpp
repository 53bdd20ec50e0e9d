// Regression trees: greedy top-down growth with MSE (variance-reduction)
// splits, selected over a small hyperparameter grid by held-out MAE.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "countertune/error.hpp"
#include "countertune/models.hpp"
#include "countertune/rng.hpp"

namespace countertune {
namespace {

struct Sample {
  const double* x;
  double y;
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const Sample> samples, std::size_t parameter_count, int max_depth, int min_leaf)
      : samples_(samples), parameter_count_(parameter_count), max_depth_(max_depth),
        min_leaf_(static_cast<std::size_t>(std::max(1, min_leaf))) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> idx(samples_.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    int parameter = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    double lo = samples_[idx[0]].y, hi = lo, sum = 0.0;
    for (auto i : idx) {
      lo = std::min(lo, samples_[i].y);
      hi = std::max(hi, samples_[i].y);
      sum += samples_[i].y;
    }
    const double mean = sum / static_cast<double>(idx.size());
    // Identical targets give an exact leaf instead of a rounded mean.
    const double leaf_value = lo == hi ? lo : std::clamp(mean, lo, hi);

    double sse = 0.0;
    for (auto i : idx) sse += (samples_[i].y - mean) * (samples_[i].y - mean);

    if (depth >= max_depth_ || idx.size() < 2 * min_leaf_ || lo == hi) {
      nodes_[id].value = leaf_value;
      return id;
    }
    const Split split = best_split(idx, mean, sse);
    if (split.parameter < 0) {
      nodes_[id].value = leaf_value;
      return id;
    }

    std::vector<std::size_t> left, right;
    for (auto i : idx) (samples_[i].x[split.parameter] <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[id].parameter = split.parameter;
    nodes_[id].threshold = split.threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    nodes_[id].value = leaf_value;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& idx, double mean, double parent_sse) const {
    Split best;
    const double min_gain = 1e-12 * parent_sse;
    std::vector<std::size_t> order(idx);
    const std::size_t n = idx.size();
    for (std::size_t p = 0; p < parameter_count_; ++p) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return samples_[a].x[p] < samples_[b].x[p]; });
      double total = 0.0, total_sq = 0.0;
      for (auto i : order) {
        const double c = samples_[i].y - mean;
        total += c;
        total_sq += c * c;
      }
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double c = samples_[order[k]].y - mean;
        left_sum += c;
        left_sq += c * c;
        const double xk = samples_[order[k]].x[p];
        const double xn = samples_[order[k + 1]].x[p];
        if (xk == xn) continue;
        const std::size_t nl = k + 1, nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double child_sse = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                                 (right_sq - right_sum * right_sum / static_cast<double>(nr));
        const double gain = parent_sse - child_sse;
        if (gain > min_gain && gain > best.gain) {
          best.parameter = static_cast<int>(p);
          best.threshold = xk + (xn - xk) / 2.0;
          best.gain = gain;
        }
      }
    }
    return best;
  }

  std::span<const Sample> samples_;
  std::size_t parameter_count_;
  int max_depth_;
  std::size_t min_leaf_;
  std::vector<TreeNode> nodes_;
};

int subtree_depth(const std::vector<TreeNode>& nodes, int id) {
  const auto& n = nodes[static_cast<std::size_t>(id)];
  if (n.parameter < 0) return 0;
  return 1 + std::max(subtree_depth(nodes, n.left), subtree_depth(nodes, n.right));
}

// Seeded Fisher-Yates over record positions; the first half trains.
std::vector<std::size_t> shuffled_positions(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

}  // namespace

double DecisionTreeModel::predict(std::span<const double> assignment) const {
  if (nodes.empty()) throw ModelError("empty decision tree for " + std::string(abbreviation(target)));
  const TreeNode* n = &nodes[0];
  while (n->parameter >= 0) {
    const bool go_left = assignment[static_cast<std::size_t>(n->parameter)] <= n->threshold;
    n = &nodes[static_cast<std::size_t>(go_left ? n->left : n->right)];
  }
  return n->value;
}

int DecisionTreeModel::depth() const { return nodes.empty() ? 0 : subtree_depth(nodes, 0); }

std::vector<std::size_t> tree_training_records(std::size_t record_count, std::uint64_t seed) {
  auto order = shuffled_positions(record_count, seed);
  order.resize((record_count + 1) / 2);
  return order;
}

DecisionTreeModel train_decision_tree(const Dataset& d, Counter counter, std::uint64_t seed, const TreeGrid& grid) {
  const auto records = d.records();
  if (records.size() < 4)
    throw ModelError("decision tree for " + std::string(abbreviation(counter)) + " needs at least 4 records, got " +
                     std::to_string(records.size()));
  if (grid.max_depths.empty() || grid.min_leafs.empty()) throw ModelError("empty decision tree grid");

  std::vector<Sample> all;
  all.reserve(records.size());
  for (std::size_t pos : shuffled_positions(records.size(), seed)) {
    const auto& r = records[pos];
    auto v = r.counters.get(counter);
    if (!v) throw ModelError("record " + std::to_string(r.config_index) + " lacks " + std::string(abbreviation(counter)));
    all.push_back({d.space()[r.config_index].assignment.data(), *v});
  }
  const std::size_t train_n = (all.size() + 1) / 2;
  const std::span<const Sample> train(all.data(), train_n);
  const std::span<const Sample> test(all.data() + train_n, all.size() - train_n);

  const std::size_t params = d.space().parameters().size();
  DecisionTreeModel best;
  bool have_best = false;
  std::tuple<double, double, int> best_key{};
  for (int depth : grid.max_depths) {
    for (int min_leaf : grid.min_leafs) {
      DecisionTreeModel candidate;
      candidate.target = counter;
      candidate.nodes = TreeBuilder(train, params, depth, min_leaf).build();
      double abs_sum = 0.0, sq_sum = 0.0;
      for (const auto& s : test) {
        const double err = candidate.predict(std::span<const double>(s.x, params)) - s.y;
        abs_sum += std::abs(err);
        sq_sum += err * err;
      }
      const double n = static_cast<double>(test.size());
      candidate.meta = {seed, depth, min_leaf, abs_sum / n, std::sqrt(sq_sum / n), train.size(), test.size()};
      // Lowest MAE, then RMSE, then realized depth; grid order breaks the rest.
      std::tuple<double, double, int> key{candidate.meta.mae, candidate.meta.rmse, candidate.depth()};
      if (!have_best || key < best_key) {
        best = std::move(candidate);
        best_key = key;
        have_best = true;
      }
    }
  }
  return best;
}

}  // namespace countertune
