#include "instances.hpp"
#include "oracles.hpp"

#include "prescriptor/bench.hpp"
#include "prescriptor/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace prescriptor;

namespace {

std::vector<std::size_t> leaves(const ScenarioTree& tree) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < tree.nodes.size(); ++n)
    if (tree.nodes[n].children.empty()) out.push_back(n);
  return out;
}

ProblemInstance small_inventory() {
  GeneratorConfig g;
  g.T = 3;
  g.N = 6;
  const auto loadings = draw_loadings(g.T, 1);
  return build_inventory_instance({}, generate_paths(g, loadings, 2));
}

} // namespace

TEST(Validate, WellFormedInventoryHasNoFindings) {
  EXPECT_TRUE(validate(small_inventory()).empty());
}

TEST(Validate, WrongTransitionRowCount) {
  auto inst = small_inventory();
  auto& F = inst.stages[1].transition;
  F = Matrix(F.rows() + 1, F.cols());
  const auto report = validate(inst);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, Finding::Kind::Dimension);
  EXPECT_THROW(require_valid(inst), InputError);
}

TEST(Validate, HorizonMismatch) {
  auto inst = small_inventory();
  inst.training = inst.training->head(inst.training->n_samples()); // same data
  std::vector<Matrix> xs, ys;
  for (std::size_t t = 0; t + 1 < inst.horizon(); ++t) {
    xs.push_back(inst.training->covariates(t));
    ys.push_back(inst.training->uncertainties(t + 1));
  }
  inst.training = TrainingSet(xs, ys);
  const auto report = validate(inst);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, Finding::Kind::Horizon);
}

TEST(Validate, UnboundedCostDirection) {
  auto inst = small_inventory();
  auto& st = inst.stages[0];
  st.cost[0] = -1.0;
  st.upper[0] = kInf;
  st.W = Matrix(0, st.n_dec());
  st.h.clear();
  st.T = Matrix(0, st.n_state);
  st.U = Matrix(0, st.n_uncertainty);
  st.equality.clear();
  bool found = false;
  for (const auto& f : validate(inst)) found |= f.kind == Finding::Kind::Unbounded;
  EXPECT_TRUE(found);
}

TEST(InstanceJson, RoundTrip) {
  const auto inst = small_inventory();
  const auto back = instance_from_json(instance_to_json(inst));
  EXPECT_EQ(instance_to_json(back).dump(), instance_to_json(inst).dump());
}

TEST(ScenarioTree, HandExamples) {
  const std::vector<Vector> xs{{0, 1, 2}, {0, 1, 2}}, ys{{1, 2, 3}, {1, 2, 3}};

  WeightSpec knn;
  knn.method = WeightMethod::Knn;
  knn.k = 1;
  auto inst = fixture::chase_demand(xs, ys, 0.0, knn);
  auto models = fit_stage_models(*inst.training, inst.weight_specs, 0);
  auto tree = build_scenario_tree(inst, models);
  EXPECT_EQ(tree.nodes.size(), 3u); // root plus one node per stage
  for (const auto& n : tree.nodes) EXPECT_DOUBLE_EQ(n.probability, 1.0);

  knn.k = 2;
  inst.weight_specs = {knn};
  models = fit_stage_models(*inst.training, inst.weight_specs, 0);
  tree = build_scenario_tree(inst, models);
  ASSERT_EQ(tree.leaf_count(), 4u);
  for (auto l : leaves(tree)) EXPECT_DOUBLE_EQ(tree.nodes[l].probability, 0.25);

  inst.weight_specs = {WeightSpec{}};
  models = fit_stage_models(*inst.training, inst.weight_specs, 0);
  tree = build_scenario_tree(inst, models);
  ASSERT_EQ(tree.leaf_count(), 9u);
  for (auto l : leaves(tree)) EXPECT_NEAR(tree.nodes[l].probability, 1.0 / 9.0, 1e-15);
}

TEST(ScenarioTree, ProbabilitiesAndSupportSizes) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto ri = oracle::random_instance(seed, 3, 6);
    const auto tree = build_scenario_tree(ri.instance, ri.models);
    double total = 0.0;
    for (auto l : leaves(tree)) {
      EXPECT_EQ(tree.nodes[l].depth, ri.instance.horizon());
      total += tree.nodes[l].probability;
    }
    EXPECT_NEAR(total, 1.0, 1e-9) << seed;
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
      const auto& nd = tree.nodes[n];
      if (nd.children.empty()) continue;
      // children enumerate the positive support of w^{t+1} at this node's covariate
      const auto w = ri.models[nd.depth].weights(tree.covariate(*ri.instance.training, n));
      ASSERT_EQ(nd.children.size(), w.support().size());
      double s = 0.0;
      for (auto c : nd.children) {
        EXPECT_GT(tree.nodes[c].branch_weight, 0.0);
        EXPECT_DOUBLE_EQ(tree.nodes[c].branch_weight, w[tree.nodes[c].sample]);
        EXPECT_NEAR(tree.nodes[c].probability, nd.probability * tree.nodes[c].branch_weight, 1e-15);
        s += tree.nodes[c].branch_weight;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(ScenarioTree, KnnLeafCountIsKToTheT) {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t T = 1 + rng.index(3), N = 3 + rng.index(5), k = 1 + rng.index(N);
    std::vector<Vector> xs(T, Vector(N)), ys(T, Vector(N));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < N; ++i) {
        xs[t][i] = rng.uniform();
        ys[t][i] = rng.uniform(0, 5);
      }
    WeightSpec spec;
    spec.method = WeightMethod::Knn;
    spec.k = k;
    const auto inst = fixture::chase_demand(xs, ys, rng.uniform(), spec);
    const auto models = fit_stage_models(*inst.training, inst.weight_specs, 1);
    EXPECT_EQ(build_scenario_tree(inst, models).leaf_count(),
              static_cast<std::size_t>(std::llround(std::pow(double(k), double(T)))));
  }
}

TEST(ScenarioTree, NodeCapIsEnforced) {
  const std::vector<Vector> xs(3, Vector{0, 1, 2, 3}), ys(3, Vector{1, 2, 3, 4});
  const auto inst = fixture::chase_demand(xs, ys, 0.0);
  const auto models = fit_stage_models(*inst.training, inst.weight_specs, 0);
  EXPECT_THROW(build_scenario_tree(inst, models, 20), ResourceError);
}

TEST(LowerBounds, DerivedOnlyForNonnegativeCosts) {
  const auto inv = small_inventory();
  for (std::size_t t = 1; t <= inv.horizon(); ++t) {
    const auto L = derived_lower_bound(inv, t);
    ASSERT_TRUE(L.has_value());
    EXPECT_EQ(*L, 0.0);
  }
  auto neg = fixture::chase_demand({{0, 1}}, {{1, 2}}, 0.0);
  neg.stages[1].cost[0] = -1.0;
  neg.stages[1].upper[0] = 4.0;
  EXPECT_FALSE(derived_lower_bound(neg, 1).has_value());
}
