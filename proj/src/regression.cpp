// Per-binary-subspace least-squares models with linear, quadratic and
// interaction terms over the non-binary parameters.

#include <Eigen/Dense>
#include <algorithm>
#include <set>

#include "countertune/error.hpp"
#include "countertune/models.hpp"

namespace countertune {

double RegressionTerm::evaluate(std::span<const double> assignment) const {
  if (first < 0) return 1.0;
  const double a = assignment[static_cast<std::size_t>(first)];
  if (second >= 0) return a * assignment[static_cast<std::size_t>(second)];
  return power == 2 ? a * a : a;
}

double RegressionModel::predict(std::span<const double> assignment) const {
  double y = 0.0;
  for (std::size_t t = 0; t < terms.size(); ++t) y += coefficients[t] * terms[t].evaluate(assignment);
  return y;
}

namespace {

// Up to three representative values: both extremes and the middle one.
std::vector<double> pick_values(const std::set<double>& present) {
  std::vector<double> v(present.begin(), present.end());
  if (v.size() <= 2) return v;
  return {v.front(), v[(v.size() - 1) / 2], v.back()};
}

}  // namespace

RegressionFamily train_regression(const Dataset& d, Counter counter, const RegressionOptions& options,
                                  std::vector<std::string>* warnings) {
  const auto& space = d.space();
  const auto params = space.parameters();

  std::map<std::string, std::vector<const MeasurementRecord*>> groups;
  for (const auto& r : d.records()) groups[binary_subspace_key(space, space[r.config_index])].push_back(&r);

  RegressionFamily family;
  family.target = counter;
  for (const auto& [key, members] : groups) {
    std::vector<std::size_t> active;
    std::vector<std::vector<double>> chosen(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (params[p].is_binary) continue;
      std::set<double> present;
      for (const auto* r : members) present.insert(space[r->config_index].assignment[p]);
      if (present.size() < 2) continue;  // constant within the subspace
      chosen[p] = pick_values(present);
      active.push_back(p);
    }

    std::vector<RegressionTerm> terms{{-1, -1, 1}};
    for (auto p : active) {
      terms.push_back({static_cast<int>(p), -1, 1});
      if (chosen[p].size() >= 3) terms.push_back({static_cast<int>(p), -1, 2});
    }
    if (options.interaction_order >= 2)
      for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a + 1; b < active.size(); ++b)
          terms.push_back({static_cast<int>(active[a]), static_cast<int>(active[b]), 1});

    std::vector<const MeasurementRecord*> train;
    for (const auto* r : members) {
      const auto& x = space[r->config_index].assignment;
      const bool on_grid = std::all_of(active.begin(), active.end(), [&](std::size_t p) {
        return std::find(chosen[p].begin(), chosen[p].end(), x[p]) != chosen[p].end();
      });
      if (on_grid) train.push_back(r);
    }
    // Constraints can leave the value grid sparse; fall back to the whole subspace.
    if (train.size() < terms.size()) train = members;
    if (train.size() < terms.size()) {
      if (warnings)
        warnings->push_back("regression for " + std::string(abbreviation(counter)) + ": subspace '" + key +
                            "' has " + std::to_string(train.size()) + " records for " + std::to_string(terms.size()) +
                            " terms, skipped");
      continue;
    }

    Eigen::MatrixXd design(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(terms.size()));
    Eigen::VectorXd target(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto& x = space[train[i]->config_index].assignment;
      for (std::size_t t = 0; t < terms.size(); ++t)
        design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = terms[t].evaluate(x);
      target(static_cast<Eigen::Index>(i)) = train[i]->counters.value_or(counter, 0.0);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < static_cast<Eigen::Index>(terms.size()))
      throw ModelError("rank-deficient regression design for " + std::string(abbreviation(counter)) +
                       " in subspace '" + key + "' (rank " + std::to_string(qr.rank()) + " of " +
                       std::to_string(terms.size()) + ")");
    const Eigen::VectorXd coef = qr.solve(target);

    RegressionModel model;
    model.target = counter;
    model.subspace_key = key;
    model.terms = std::move(terms);
    model.coefficients.assign(coef.data(), coef.data() + coef.size());
    family.by_subspace.emplace(key, std::move(model));
  }
  return family;
}

}  // namespace countertune
