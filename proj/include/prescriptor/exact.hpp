#pragma once

// Extensive-form (deterministic-equivalent) solution of the weighted
// multistage problem: one decision copy per scenario-tree node.

#include "prescriptor/linopt.hpp"
#include "prescriptor/model.hpp"

namespace prescriptor {

struct ExactSolution {
  double objective = 0.0;
  Vector first_stage;
  std::vector<Vector> node_decisions; ///< indexed like tree.nodes
  std::size_t columns = 0;
  std::size_t rows = 0;
};

struct ExactOptions {
  /// 0 selects 1e6 nodes, or 1e4 when the instance has binary decisions.
  std::size_t node_cap = 0;
  bool relax_integrality = false;
  MipOptions mip;
};

std::size_t effective_node_cap(const ProblemInstance& instance, const ExactOptions& opts);

/// Throws InfeasibleError when the extensive form is infeasible and
/// ResourceError when the tree is over the cap.
ExactSolution solve_extensive(const ProblemInstance& instance, const ScenarioTree& tree,
                              const ExactOptions& opts = {});

/// Builds the full tree from the instance's root and solves it.
ExactSolution solve_extensive(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                              const ExactOptions& opts = {});

/// Q_t(s; y^i, x^i): the optimal cost from stage t on, given the incoming
/// state s and training sample i realised at stage t (1 <= t <= T).
double value_function_oracle(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                             std::size_t t, std::size_t sample, std::span<const double> state,
                             const ExactOptions& opts = {});

/// Probability-weighted cost of the per-node decisions.
double recompute_cost(const ProblemInstance& instance, const ScenarioTree& tree, const ExactSolution& sol);

} // namespace prescriptor
