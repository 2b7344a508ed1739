#pragma once

// Hand-sized instances shared by the model, exact and sddp suites.

#include "prescriptor/model.hpp"

namespace fixture {

using namespace prescriptor;

/// Stage 0 does nothing (one zero-cost decision, state passed through as 0);
/// stage t >= 1 solves min z s.t. z >= y_t, z >= 0. Covariates are
/// one-dimensional: xs[t][i], ys[t-1][i].
inline ProblemInstance chase_demand(const std::vector<Vector>& xs, const std::vector<Vector>& ys, double x0,
                                    WeightSpec spec = {}) {
  ProblemInstance inst;
  inst.name = "chase";
  const std::size_t T = ys.size();
  const std::size_t N = ys.front().size();
  auto s0 = StageTemplate::empty(0, 1, 1, 0, 1);
  s0.upper[0] = 0.0;
  inst.stages.push_back(s0);
  for (std::size_t t = 1; t <= T; ++t) {
    auto st = StageTemplate::empty(t, 1, 1, 1, t < T ? 1 : 0);
    st.cost[0] = 1.0;
    st.add_row(Vector{-1.0}, 0.0, Vector{0.0}, Vector{-1.0}); // -z <= -y
    inst.stages.push_back(st);
  }
  std::vector<Matrix> X, Y;
  for (std::size_t t = 0; t < T; ++t) {
    Matrix x(N, 1), y(N, 1);
    for (std::size_t i = 0; i < N; ++i) {
      x(i, 0) = xs[t][i];
      y(i, 0) = ys[t][i];
    }
    X.push_back(x);
    Y.push_back(y);
  }
  inst.training = TrainingSet(X, Y);
  inst.initial_state = {0.0};
  inst.initial_covariate = {x0};
  inst.weight_specs = {spec};
  return inst;
}

} // namespace fixture
