#include "prescriptor/exact.hpp"

namespace prescriptor {

std::size_t effective_node_cap(const ProblemInstance& instance, const ExactOptions& opts) {
  if (opts.node_cap) return opts.node_cap;
  return instance.has_binaries() && !opts.relax_integrality ? 10'000 : kDefaultNodeCap;
}

namespace {

std::span<const double> node_uncertainty(const ProblemInstance& instance, const ScenarioNode& nd, bool is_root,
                                         const ScenarioTree& tree) {
  if (nd.depth == 0 || (is_root && !tree.root_has_sample)) return {};
  return instance.training.value().y(nd.sample, nd.depth);
}

} // namespace

ExactSolution solve_extensive(const ProblemInstance& instance, const ScenarioTree& tree, const ExactOptions& opts) {
  const std::size_t cap = effective_node_cap(instance, opts);
  if (tree.nodes.size() > cap)
    throw ResourceError("extensive form has " + std::to_string(tree.nodes.size()) + " nodes (cap " +
                        std::to_string(cap) + "); use kNN weights (support k) or a shorter horizon");
  if (tree.nodes.empty()) throw InputError("solve_extensive: empty tree");

  // Column offsets per node.
  std::vector<std::size_t> offset(tree.nodes.size() + 1, 0);
  for (std::size_t n = 0; n < tree.nodes.size(); ++n)
    offset[n + 1] = offset[n] + instance.stages.at(tree.nodes[n].depth).n_dec();
  const std::size_t ncol = offset.back();

  LinearProgram lp;
  lp.objective.assign(ncol, 0.0);
  lp.col_lower.assign(ncol, 0.0);
  lp.col_upper.assign(ncol, 0.0);
  lp.integer.assign(ncol, false);
  lp.A = Matrix(0, ncol);
  Vector row(ncol);
  for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
    const auto& nd = tree.nodes[n];
    const auto& st = instance.stages[nd.depth];
    const std::size_t o = offset[n];
    for (std::size_t j = 0; j < st.n_dec(); ++j) {
      lp.objective[o + j] = nd.probability * st.cost[j];
      lp.col_lower[o + j] = st.lower[j];
      lp.col_upper[o + j] = st.upper[j];
      lp.integer[o + j] = !opts.relax_integrality && st.kind[j] == VarKind::Binary;
    }
    const auto y = node_uncertainty(instance, nd, n == 0, tree);
    // Incoming state: fixed at the root, F z_parent otherwise.
    for (std::size_t r = 0; r < st.n_rows(); ++r) {
      std::fill(row.begin(), row.end(), 0.0);
      auto w = st.W.row(r);
      for (std::size_t j = 0; j < st.n_dec(); ++j) row[o + j] = w[j];
      double rhs = st.h[r];
      for (std::size_t u = 0; u < y.size(); ++u) rhs += st.U(r, u) * y[u];
      if (n == 0) {
        for (std::size_t k = 0; k < st.n_state; ++k) rhs += st.T(r, k) * tree.root_state.at(k);
      } else {
        const auto p = static_cast<std::size_t>(nd.parent);
        const auto& F = instance.stages[tree.nodes[p].depth].transition;
        for (std::size_t k = 0; k < st.n_state; ++k) {
          const double tk = st.T(r, k);
          if (tk == 0.0) continue;
          for (std::size_t j = 0; j < F.cols(); ++j) row[offset[p] + j] -= tk * F(k, j);
        }
      }
      lp.add_row(row, st.equality[r] ? rhs : -kInf, rhs);
    }
  }

  const SolveResult res = solve(lp, opts.mip);
  if (res.status == SolveStatus::Infeasible) throw InfeasibleError("extensive form is infeasible");
  if (res.status == SolveStatus::Unbounded) throw SolverError("extensive form is unbounded");

  ExactSolution sol;
  sol.objective = res.objective;
  sol.columns = ncol;
  sol.rows = lp.n_rows();
  sol.node_decisions.resize(tree.nodes.size());
  for (std::size_t n = 0; n < tree.nodes.size(); ++n)
    sol.node_decisions[n].assign(res.x.begin() + static_cast<std::ptrdiff_t>(offset[n]),
                                 res.x.begin() + static_cast<std::ptrdiff_t>(offset[n + 1]));
  sol.first_stage = sol.node_decisions[0];
  return sol;
}

ExactSolution solve_extensive(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                              const ExactOptions& opts) {
  const auto tree = build_scenario_tree(instance, models, effective_node_cap(instance, opts));
  return solve_extensive(instance, tree, opts);
}

double value_function_oracle(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                             std::size_t t, std::size_t sample, std::span<const double> state,
                             const ExactOptions& opts) {
  if (t == 0 || t > instance.horizon()) throw InputError("value_function_oracle: stage outside 1..T");
  if (state.size() != instance.stages[t].n_state)
    throw InputError("value_function_oracle: state dimension mismatch");
  const auto tree = build_subtree(instance, models, t, sample, state, effective_node_cap(instance, opts));
  return solve_extensive(instance, tree, opts).objective;
}

double recompute_cost(const ProblemInstance& instance, const ScenarioTree& tree, const ExactSolution& sol) {
  double total = 0.0;
  for (std::size_t n = 0; n < tree.nodes.size(); ++n)
    total += tree.nodes[n].probability * dot(instance.stages[tree.nodes[n].depth].cost, sol.node_decisions[n]);
  return total;
}

} // namespace prescriptor
