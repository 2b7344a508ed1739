#include "instances.hpp"
#include "oracles.hpp"

#include "prescriptor/exact.hpp"
#include "prescriptor/sddp.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace prescriptor;

namespace {

// min z  s.t.  z >= s - y,  z >= 0
StageTemplate shortfall_stage() {
  auto st = StageTemplate::empty(1, 1, 1, 1, 0);
  st.cost[0] = 1.0;
  st.add_row(Vector{-1.0}, 0.0, Vector{-1.0}, Vector{1.0});
  return st;
}

// One binary state bit. Decisions (b, z): b binary at cost 1.5, z in [0, 3] at
// cost 1, with b + z >= 1.5 s + 0.5 y.
StageTemplate one_bit_stage() {
  auto st = StageTemplate::empty(1, 2, 1, 1, 0);
  st.cost = {1.5, 1.0};
  st.upper = {1.0, 3.0};
  st.kind = {VarKind::Binary, VarKind::Continuous};
  st.add_row(Vector{-1.0, -1.0}, 0.0, Vector{-1.5}, Vector{-0.5});
  return st;
}

// Two binary state bits, three binary decisions.
StageTemplate two_bit_stage() {
  auto st = StageTemplate::empty(1, 3, 2, 1, 0);
  st.cost = {2.0, 3.0, 1.0};
  st.upper = {1.0, 1.0, 5.0};
  st.kind = {VarKind::Binary, VarKind::Binary, VarKind::Continuous};
  // b0 + 2 b1 + z >= 1 + 2 s0 - s1 + y
  st.add_row(Vector{-1.0, -2.0, -1.0}, -1.0, Vector{-2.0, 1.0}, Vector{-1.0});
  // b0 <= 1 - s1 + y  (never binding below y >= 1 when s1 = 0)
  st.add_row(Vector{1.0, 0.0, 0.0}, 1.0, Vector{0.0, -1.0}, Vector{0.0});
  return st;
}

double stage_value(const StageTemplate& st, const Vector& s, const Vector& y) {
  return fix_state_and_solve(st, s, y, nullptr).objective;
}

// L(pi) for one_bit_stage with y = 1, by vertex enumeration of the (z, sigma)
// polytope for each value of b: min 1.5 b + z - pi sigma over
// -z + 1.5 sigma <= b - 0.5, z in [0,3], sigma in [0,1].
struct InnerOracle {
  std::vector<std::pair<double, Vector>> verts; // (b, (z, sigma))
  InnerOracle() {
    for (double b : {0.0, 1.0}) {
      LinearProgram lp;
      lp.objective = {0, 0};
      lp.col_lower = {0, 0};
      lp.col_upper = {3, 1};
      lp.integer = {false, false};
      lp.A = Matrix(0, 2);
      lp.add_row(Vector{-1.0, 1.5}, -kInf, b - 0.5);
      for (auto& v : oracle::vertices(lp)) verts.emplace_back(b, v);
    }
  }
  [[nodiscard]] double operator()(double pi) const {
    double best = kInf;
    for (const auto& [b, v] : verts) best = std::min(best, 1.5 * b + v[0] - pi * v[1]);
    return best;
  }
};

SddpConfig quick_config(std::uint64_t seed) {
  SddpConfig c;
  c.seed = seed;
  c.M = 10;
  c.max_iter = 60;
  return c;
}

} // namespace

// ------------------------------------------------------------- upper bound

TEST(UpperBound, Examples) {
  const Vector same{4, 4, 4};
  EXPECT_DOUBLE_EQ(statistical_upper_bound(same, 0.05).ub, 4.0);
  const Vector two{0, 2};
  const auto u = statistical_upper_bound(two, 0.05);
  EXPECT_DOUBLE_EQ(u.mean, 1.0);
  EXPECT_NEAR(u.std, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(u.ub, 2.959964, 1e-6);
  EXPECT_NEAR(statistical_upper_bound(two, 1.0).ub, 1.0, 1e-12);
  const Vector one{3};
  EXPECT_THROW(statistical_upper_bound(one, 0.05), InputError);
}

// ------------------------------------------------------------------- cuts

TEST(BendersCut, Examples) {
  const auto st = shortfall_stage();
  const Vector y{1.0};
  Vector s{2.0};
  CutContext ctx;
  ctx.stage = &st;
  ctx.state = s;
  ctx.uncertainty = y;
  auto c = benders_cut(ctx);
  EXPECT_NEAR(c.slope[0], 1.0, 1e-12);
  EXPECT_NEAR(c.intercept, -1.0, 1e-12);

  s = {0.0};
  ctx.state = s;
  c = benders_cut(ctx);
  EXPECT_NEAR(c.slope[0], 0.0, 1e-12);
  EXPECT_NEAR(c.intercept, 0.0, 1e-12);
}

TEST(BendersCut, TightAtTrialStateAndValidElsewhere) {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto ri = oracle::random_instance(seed, 3, 4, false);
    const auto& inst = ri.instance;
    const std::size_t T = inst.horizon();
    const auto& st = inst.stages[T];
    for (std::size_t i = 0; i < inst.training->n_samples(); ++i) {
      Vector s(st.n_state);
      for (auto& v : s) v = rng.uniform(-2, 2);
      CutContext ctx;
      ctx.stage = &st;
      ctx.state = s;
      ctx.uncertainty = inst.training->y(i, T);
      const auto c = benders_cut(ctx);
      EXPECT_NEAR(c.value(s), stage_value(st, s, Vector(ctx.uncertainty.begin(), ctx.uncertainty.end())), 1e-7);
      for (int k = 0; k < 20; ++k) {
        Vector q(st.n_state);
        for (auto& v : q) v = rng.uniform(-3, 3);
        EXPECT_LE(c.value(q), value_function_oracle(inst, ri.models, T, i, q) + 1e-6);
      }
    }
  }
}

TEST(BendersCut, AggregateIsTightForFullSupportWeights) {
  Rng rng(6);
  for (std::uint64_t seed = 20; seed < 40; ++seed) {
    auto ri = oracle::random_instance(seed, 3, 5, false);
    const auto& inst = ri.instance;
    const std::size_t T = inst.horizon(), N = inst.training->n_samples();
    const auto& st = inst.stages[T];
    Vector s(st.n_state);
    for (auto& v : s) v = rng.uniform(-2, 2);
    TrialCuts trial;
    double expect = 0.0;
    const auto w = WeightVector::uniform(N);
    for (std::size_t i = 0; i < N; ++i) {
      CutContext ctx;
      ctx.stage = &st;
      ctx.state = s;
      ctx.uncertainty = inst.training->y(i, T);
      trial.samples.push_back(i);
      trial.cuts.push_back(benders_cut(ctx));
      expect += w[i] * fix_state_and_solve(st, s, ctx.uncertainty, nullptr).objective;
    }
    EXPECT_NEAR(trial.aggregate(w, inst.lower_bound(T), s.size()).value(s), expect, 1e-7 * (1 + std::abs(expect)));
  }
}

TEST(IntegerCut, TightAtTrialAndValidOnAllBinaryStates) {
  const auto st = two_bit_stage();
  const Vector y{1.0};
  const double L = 0.0; // costs and bounds nonnegative
  for (int a = 0; a < 4; ++a) {
    Vector sj{double(a & 1), double(a >> 1)};
    CutContext ctx;
    ctx.stage = &st;
    ctx.state = sj;
    ctx.uncertainty = y;
    ctx.lower_bound = L;
    const auto c = integer_optimality_cut(ctx);
    const double pstar = stage_value(st, sj, y);
    EXPECT_NEAR(c.value(sj), pstar, 1e-9 * (1 + std::abs(pstar)));
    for (int b = 0; b < 4; ++b) {
      const Vector s{double(b & 1), double(b >> 1)};
      EXPECT_LE(c.value(s), stage_value(st, s, y) + 1e-9);
      const int dist = ((a ^ b) & 1) + ((a ^ b) >> 1);
      // distance >= 1 drops to the lower bound (see decisions ledger)
      if (dist == 1) EXPECT_NEAR(c.value(s), L, 1e-9);
    }
  }
}

TEST(IntegerCut, RejectsNonBinaryState) {
  const auto st = two_bit_stage();
  const Vector y{1.0}, s{0.5, 0.0};
  CutContext ctx;
  ctx.stage = &st;
  ctx.state = s;
  ctx.uncertainty = y;
  EXPECT_THROW(integer_optimality_cut(ctx), InputError);
}

TEST(LagrangianCut, InnerValueMatchesEnumeration) {
  const auto st = one_bit_stage();
  const Vector y{1.0}, s{0.0};
  CutContext ctx;
  ctx.stage = &st;
  ctx.state = s;
  ctx.uncertainty = y;
  const InnerOracle inner;
  for (double pi = -10.0; pi <= 10.0; pi += 0.37) EXPECT_NEAR(lagrangian_inner(ctx, Vector{pi}), inner(pi), 1e-9);
}

TEST(LagrangianCut, DualMatchesGridSearch) {
  const auto st = one_bit_stage();
  const Vector y{1.0};
  const InnerOracle inner;
  for (double bit : {0.0, 1.0}) {
    const Vector s{bit};
    double grid = -kInf;
    for (int k = -10000; k <= 10000; ++k) {
      const double pi = k * 1e-3;
      grid = std::max(grid, inner(pi) + pi * bit);
    }
    CutContext ctx;
    ctx.stage = &st;
    ctx.state = s;
    ctx.uncertainty = y;
    LagrangianOptions o;
    o.box = 10.0;
    const auto r = lagrangian_cut(ctx, o);
    EXPECT_NEAR(r.dual_value, grid, 1e-2) << "s = " << bit;
    EXPECT_NEAR(r.cut.value(s), r.dual_value, 1e-9);
    // valid at both binary states, never below the Benders cut at the trial state
    for (double q : {0.0, 1.0}) EXPECT_LE(r.cut.value(Vector{q}), stage_value(st, Vector{q}, y) + 1e-7);
    EXPECT_GE(r.cut.value(s), benders_cut(ctx).value(s) - 1e-7);
  }
}

TEST(LagrangianCut, StateFreeStageGivesZeroSlope) {
  auto st = StageTemplate::empty(1, 1, 1, 1, 0);
  st.cost[0] = 2.0;
  st.upper[0] = 1.0;
  st.kind[0] = VarKind::Binary;
  st.add_row(Vector{-1.0}, 0.0, Vector{0.0}, Vector{-1.0}); // b >= y
  const Vector y{1.0}, s{1.0};
  CutContext ctx;
  ctx.stage = &st;
  ctx.state = s;
  ctx.uncertainty = y;
  const auto r = lagrangian_cut(ctx);
  EXPECT_NEAR(r.cut.slope[0], 0.0, 1e-6);
  EXPECT_NEAR(r.cut.intercept, 2.0, 1e-6);
}

// -------------------------------------------------------------------- runs

TEST(Sddp, SingleSamplePathsAreIdentical) {
  auto ri = oracle::random_instance(7, 3, 1, false);
  const CutPool pool(Vector(ri.instance.lower_bounds), [&] {
    std::vector<std::size_t> d;
    for (std::size_t t = 1; t <= ri.instance.horizon(); ++t) d.push_back(ri.instance.stages[t].n_state);
    return d;
  }(), 1);
  const auto fwd = forward_pass(ri.instance, ri.models, pool, quick_config(1), 0);
  for (double v : fwd.costs) EXPECT_EQ(v, fwd.costs[0]);
}

TEST(Sddp, OneIterationSolvesDeterministicTwoStage) {
  const auto inst = fixture::chase_demand({{0.5}}, {{3.0}}, 0.0);
  const auto models = fit_stage_models(*inst.training, inst.weight_specs, 0);
  auto cfg = quick_config(0);
  cfg.max_iter = 1;
  const auto run = solve_sddp(inst, models, cfg);
  EXPECT_NEAR(run.log.at(0).lb, solve_extensive(inst, models).objective, 1e-9);
}

TEST(Sddp, ConvergesToExactAndBoundsAreMonotone) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto ri = oracle::random_instance(seed);
    const double exact = solve_extensive(ri.instance, ri.models).objective;
    const auto run = solve_sddp(ri.instance, ri.models, quick_config(seed));
    EXPECT_NEAR(run.lb, exact, 1e-4 * (1 + std::abs(exact))) << seed << " " << run.stop_reason;
    for (std::size_t k = 1; k < run.log.size(); ++k) EXPECT_GE(run.log[k].lb, run.log[k - 1].lb - 1e-9);
    EXPECT_LE(run.lb, exact + 1e-6 * (1 + std::abs(exact)));
  }
}

TEST(Sddp, StoredCutsAreValidUnderTheOracle) {
  Rng rng(8);
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    auto ri = oracle::random_instance(seed);
    const auto& inst = ri.instance;
    auto cfg = quick_config(seed);
    cfg.max_iter = 5;
    const auto run = solve_sddp(inst, ri.models, cfg);
    for (std::size_t t = 1; t <= inst.horizon(); ++t) {
      for (std::size_t m = 0; m < inst.training->n_samples(); ++m) {
        const auto& cuts = run.pool.sample_cuts(t, m);
        if (cuts.empty()) continue;
        for (int k = 0; k < 50; ++k) {
          Vector s(inst.stages[t].n_state);
          for (auto& v : s) v = rng.uniform(-3, 3);
          const double q = value_function_oracle(inst, ri.models, t, m, s);
          EXPECT_LE(cuts.argmax(s).second, q + 1e-6) << seed << " t=" << t;
        }
      }
    }
    // root-keyed cuts bound the weighted cost-to-go at x0
    const auto w = ri.models[0].weights(inst.initial_covariate);
    for (int k = 0; k < 20; ++k) {
      Vector s(inst.stages[1].n_state);
      for (auto& v : s) v = rng.uniform(-3, 3);
      double q = 0.0;
      for (auto [i, wi] : w.support()) q += wi * value_function_oracle(inst, ri.models, 1, i, s);
      EXPECT_LE(run.pool.value(1, kRootKey, s), q + 1e-6);
    }
  }
}

TEST(Sddp, KnnSupportBoundsSolvesPerTrial) {
  auto ri = oracle::random_instance(11, 3, 5, false);
  WeightSpec knn;
  knn.method = WeightMethod::Knn;
  knn.k = 2;
  ri.instance.weight_specs = {knn};
  ri.instance.training = ri.instance.training->head(ri.instance.training->n_samples());
  if (ri.instance.training->n_samples() < 2) GTEST_SKIP();
  ri.models = fit_stage_models(*ri.instance.training, ri.instance.weight_specs, 1);
  auto cfg = quick_config(2);
  cfg.max_iter = 3;
  const auto run = solve_sddp(ri.instance, ri.models, cfg);
  for (std::size_t t = 1; t <= ri.instance.horizon(); ++t)
    for (const auto& trial : run.pool.trials(t)) EXPECT_LE(trial.samples.size(), 2u);
}

TEST(Sddp, DeterministicAndThreadIndependent) {
  auto ri = oracle::random_instance(21);
  auto cfg = quick_config(3);
  cfg.max_iter = 8;
  const auto a = solve_sddp(ri.instance, ri.models, cfg);
  const auto b = solve_sddp(ri.instance, ri.models, cfg);
  cfg.threads = 4;
  const auto c = solve_sddp(ri.instance, ri.models, cfg);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t k = 0; k < a.log.size(); ++k) EXPECT_EQ(a.log[k].lb, b.log[k].lb);
  EXPECT_TRUE(a.pool == b.pool);
  EXPECT_TRUE(a.pool == c.pool);
  EXPECT_EQ(a.lb, c.lb);
  EXPECT_EQ(a.ub, c.ub);
}

TEST(Sddp, BinaryStateInstanceReachesExactMipValue) {
  // stage 0 buys a binary b (cost 1); stage 1 covers y - 3 b at cost 2 per unit
  ProblemInstance inst;
  auto s0 = StageTemplate::empty(0, 1, 1, 0, 1);
  s0.cost[0] = 1.0;
  s0.upper[0] = 1.0;
  s0.kind[0] = VarKind::Binary;
  s0.transition(0, 0) = 1.0;
  auto s1 = StageTemplate::empty(1, 1, 1, 1, 0);
  s1.cost[0] = 2.0;
  s1.upper[0] = 10.0;
  s1.add_row(Vector{-1.0}, 0.0, Vector{3.0}, Vector{-1.0}); // z >= y - 3 b
  inst.stages = {s0, s1};
  inst.initial_state = {0.0};
  inst.initial_covariate = {0.0};
  Matrix x(3, 1), y(3, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    x(i, 0) = double(i);
    y(i, 0) = std::vector<double>{0.2, 0.4, 1.5}[i];
  }
  inst.training = TrainingSet({x}, {y});
  inst.weight_specs = {WeightSpec{}};
  const auto models = fit_stage_models(*inst.training, inst.weight_specs, 0);
  const double exact = solve_extensive(inst, models).objective; // min(1, 2 * 0.7) = 1
  EXPECT_NEAR(exact, 1.0, 1e-9);
  for (auto mode : {CutMode::Lagrangian, CutMode::Integer, CutMode::IntegerLagrangian}) {
    auto cfg = quick_config(4);
    cfg.cuts = mode;
    const auto run = solve_sddp(inst, models, cfg);
    EXPECT_NEAR(run.lb, exact, 1e-4 * (1 + exact)) << to_string(mode);
  }
}

TEST(CutPoolJson, RoundTrip) {
  auto ri = oracle::random_instance(31);
  auto cfg = quick_config(5);
  cfg.max_iter = 4;
  const auto run = solve_sddp(ri.instance, ri.models, cfg);
  EXPECT_TRUE(pool_from_json(pool_to_json(run.pool)) == run.pool);
  std::ostringstream log;
  write_run_log(log, run);
  EXPECT_EQ(log.str().rfind("iter,lb,ub_mean,ub_std,ub,wall_ms,cuts_added", 0), 0u);
}
