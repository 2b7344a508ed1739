#include "prescriptor/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace prescriptor {

// --------------------------------------------------------------- generators

Loadings draw_loadings(std::size_t T, std::uint64_t seed) {
  Loadings l;
  for (std::size_t t = 1; t <= T; ++t) {
    Rng rng(seed, t);
    Vector a{0.8, 1.0, 1.0};
    Vector b{-1.0, 1.0, 0.0};
    rng.shuffle(a);
    rng.shuffle(b);
    l.a.push_back(std::move(a));
    l.b.push_back(std::move(b));
  }
  return l;
}

std::vector<Matrix> generate_covariates(const GeneratorConfig& config, std::size_t steps, std::uint64_t seed) {
  if (config.N == 0) throw InputError("generator: N must be at least 1");
  if (!config.stationary_start && config.initial.size() != config.d)
    throw InputError("generator: initial covariate must have d entries");
  std::vector<Matrix> xs(steps, Matrix(config.N, config.d));
  const double sd0 = 1.0 / std::sqrt(1.0 - config.ar_coeff * config.ar_coeff);
  for (std::size_t i = 0; i < config.N; ++i) {
    Rng rng(seed, i);
    Vector x(config.d);
    for (std::size_t k = 0; k < config.d; ++k)
      x[k] = config.stationary_start ? sd0 * rng.normal() : config.initial[k];
    for (std::size_t t = 0; t < steps; ++t) {
      if (t > 0)
        for (std::size_t k = 0; k < config.d; ++k) x[k] = config.ar_coeff * x[k] + config.noise_scale * rng.normal();
      for (std::size_t k = 0; k < config.d; ++k) xs[t](i, k) = x[k];
    }
  }
  return xs;
}

std::vector<Matrix> generate_demand(const std::vector<Matrix>& covariates, const Loadings& loadings,
                                    const GeneratorConfig& config, std::uint64_t seed) {
  const std::size_t T = loadings.a.size();
  if (covariates.size() < T) throw InputError("generator: need covariates x_0..x_{T-1}");
  const std::size_t N = T ? covariates[0].rows() : 0;
  std::vector<Matrix> ys(T, Matrix(N, 1));
  for (std::size_t i = 0; i < N; ++i) {
    Rng rng(seed, i);
    for (std::size_t t = 1; t <= T; ++t) {
      const auto x = covariates[t - 1].row(i);
      const auto& a = loadings.a[t - 1];
      const auto& b = loadings.b[t - 1];
      double lin = 0.0;
      double bx = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double phi = config.demand_noise ? rng.normal() : 0.0;
        lin += a[k] * (x[k] + config.phi_scale * phi);
        bx += b[k] * x[k];
      }
      const double theta = config.demand_noise ? rng.normal() : 0.0;
      const double y = config.intercept + config.loading_scale * lin + config.theta_scale * bx * theta;
      ys[t - 1](i, 0) = std::min(std::max(0.0, y), config.demand_cap);
    }
  }
  return ys;
}

TrainingSet generate_paths(const GeneratorConfig& config, const Loadings& loadings, std::uint64_t seed) {
  if (config.T == 0) throw InputError("generator: T must be at least 1");
  if (loadings.a.size() != config.T) throw InputError("generator: loadings do not match T");
  auto xs = generate_covariates(config, config.T, derive_seed(seed, 1));
  auto ys = generate_demand(xs, loadings, config, derive_seed(seed, 2));
  return TrainingSet(std::move(xs), std::move(ys));
}

void LotSizingParams::draw_prices() {
  if (!c2.empty()) return;
  Rng rng(price_seed, 0);
  for (std::size_t j = 0; j < q.size(); ++j) c2.push_back(rng.uniform(5.0, 10.0));
}

// ---------------------------------------------------------------- instances

ProblemInstance build_inventory_instance(const InventoryParams& p, const TrainingSet& training,
                                         const WeightSpec& spec) {
  const std::size_t T = training.horizon();
  ProblemInstance inst;
  inst.name = "inventory";
  inst.initial_state = {0.0, 0.0, 0.0};
  inst.initial_covariate.assign(training.covariates(0).cols(), 0.0);
  inst.training = training;
  inst.weight_specs = {spec};
  enum { z1, z2, I, C, h };
  for (std::size_t t = 0; t <= T; ++t) {
    const std::size_t nu = t == 0 ? 0 : 1;
    auto st = StageTemplate::empty(t, 5, 3, nu, t < T ? 3 : 0);
    st.cost = {p.c1, p.c2, 0.0, 0.0, 1.0};
    st.lower = {0.0, 0.0, -kInf, 0.0, 0.0};
    const Vector no_u(nu, 0.0);
    const Vector minus_y(nu, -1.0);
    // I - z2 = I_prev + P_prev - y
    st.add_row(Vector{0, -1, 1, 0, 0}, t == 0 ? -p.initial_demand : 0.0, Vector{1, 0, 1}, minus_y, true);
    // C - z1 = C_prev
    st.add_row(Vector{-1, 0, 0, 1, 0}, 0.0, Vector{0, 1, 0}, no_u, true);
    st.add_row(Vector{0, 0, 0, 1, 0}, p.budget_step * static_cast<double>(t + 1), Vector{0, 0, 0}, no_u);
    st.add_row(Vector{0, 0, p.ch, 0, -1}, 0.0, Vector{0, 0, 0}, no_u);
    st.add_row(Vector{0, 0, p.cb, 0, -1}, 0.0, Vector{0, 0, 0}, no_u);
    if (t < T) {
      st.transition(0, I) = 1.0;
      st.transition(1, C) = 1.0;
      st.transition(2, z1) = 1.0;
    }
    inst.stages.push_back(std::move(st));
  }
  return inst;
}

ProblemInstance build_lotsizing_instance(const LotSizingParams& params, const TrainingSet& training,
                                         const WeightSpec& spec) {
  LotSizingParams p = params;
  p.draw_prices();
  const std::size_t T = training.horizon();
  const std::size_t M = p.q.size();
  ProblemInstance inst;
  inst.name = "lotsizing";
  inst.initial_state = {0.0, 0.0, 0.0};
  inst.initial_covariate.assign(training.covariates(0).cols(), 0.0);
  inst.training = training;
  inst.weight_specs = {spec};
  const std::size_t n = M + 3;
  const std::size_t I = M + 1, C = M + 2;
  double qsum = 0.0;
  for (double q : p.q) qsum += q;
  for (std::size_t t = 0; t <= T; ++t) {
    const std::size_t nu = t == 0 ? 0 : 1;
    auto st = StageTemplate::empty(t, n, 3, nu, t < T ? 3 : 0);
    st.cost[0] = p.c1;
    for (std::size_t j = 0; j < M; ++j) {
      st.cost[1 + j] = p.c2[j] * p.q[j];
      st.upper[1 + j] = 1.0;
      st.kind[1 + j] = VarKind::Binary;
    }
    st.cost[I] = p.ch;
    const Vector no_u(nu, 0.0);
    Vector w(n, 0.0);
    // I - sum_j q_j b_j = I_prev + P_prev - y
    w[I] = 1.0;
    for (std::size_t j = 0; j < M; ++j) w[1 + j] = -p.q[j];
    st.add_row(w, 0.0, Vector{1, 0, 1}, Vector(nu, -1.0), true);
    std::fill(w.begin(), w.end(), 0.0);
    w[0] = -1.0;
    w[C] = 1.0;
    st.add_row(w, 0.0, Vector{0, 1, 0}, no_u, true);
    std::fill(w.begin(), w.end(), 0.0);
    w[C] = 1.0;
    st.add_row(w, p.budget_step * static_cast<double>(t + 1), Vector{0, 0, 0}, no_u);
    if (t < T) {
      st.transition(0, I) = 1.0;
      st.transition(1, C) = 1.0;
      st.transition(2, 0) = 1.0;
    }
    // Reachable ranges of the incoming state, for binary expansion.
    const double td = static_cast<double>(t);
    st.state_lower = {0.0, 0.0, 0.0};
    st.state_upper = {td * (p.budget_step + qsum), td * p.budget_step, td * p.budget_step};
    inst.stages.push_back(std::move(st));
  }
  return inst;
}

// ----------------------------------------------------------------- policies

std::string to_string(PolicyMode m) {
  switch (m) {
  case PolicyMode::Resolve: return "resolve";
  case PolicyMode::Static: return "static";
  case PolicyMode::Basestock: return "basestock";
  }
  return "?";
}

PolicyRun run_cut_policy(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                         const CutPool& pool, const TrainingSet& test, std::size_t path, PolicyMode mode,
                         const MipOptions& mip) {
  if (mode == PolicyMode::Basestock) throw InputError("run_cut_policy: basestock is not a cut policy");
  const std::size_t T = instance.horizon();
  if (test.horizon() != T) throw InputError("run_cut_policy: test paths have a different horizon");
  const auto x0 = test.x(path, 0);
  WeightVector fixed;
  if (mode == PolicyMode::Static && T > 0) fixed = models.at(0).weights(x0);
  // Constant weights make the static policy the re-solving one.
  const bool frozen = mode == PolicyMode::Static && T > 0 && !models.at(0).is_constant();
  const WeightVector* override_w = frozen ? &fixed : nullptr;

  PolicyRun run;
  Vector state = instance.initial_state;
  for (std::size_t t = 0; t <= T; ++t) {
    std::span<const double> y;
    std::span<const double> x;
    if (t > 0) y = test.y(path, t);
    if (t < T) x = test.x(path, t);
    try {
      // A constant model has one cost-to-go model, the one its training refined.
      const CovariateKey key = t < T && models.at(t).is_constant() ? kRootKey : kFreshKey;
      auto sol = policy_step(instance, models, pool, t, state, y, x, override_w, key, mip);
      run.stage_costs.push_back(sol.stage_cost);
      run.total += sol.stage_cost;
      state = sol.next_state;
      run.decisions.push_back(std::move(sol.decision));
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("test path " + std::to_string(path) + ": " + e.what());
    }
  }
  return run;
}

OrderChoice cheapest_cover(const LotSizingParams& params, double shortfall) {
  const std::size_t M = params.q.size();
  OrderChoice best;
  best.take.assign(M, false);
  if (shortfall <= 1e-12) return best;
  if (params.c2.size() != M) throw InputError("cheapest_cover: prices not drawn");
  if (M > 20) throw InputError("cheapest_cover: too many order options to enumerate");
  best.cost = kInf;
  std::size_t best_mask = 0;
  for (std::size_t mask = 1; mask < (std::size_t{1} << M); ++mask) {
    double qty = 0.0, cost = 0.0;
    for (std::size_t j = 0; j < M; ++j)
      if (mask >> j & 1) {
        qty += params.q[j];
        cost += params.c2[j] * params.q[j];
      }
    if (qty + 1e-9 < shortfall) continue;
    cost += params.ch * (qty - shortfall);
    if (cost < best.cost) {
      best.cost = cost;
      best.quantity = qty;
      best_mask = mask;
    }
  }
  if (best_mask == 0) throw InfeasibleError("demand shortfall exceeds every immediate order combination");
  for (std::size_t j = 0; j < M; ++j) best.take[j] = best_mask >> j & 1;
  return best;
}

namespace {

/// Serve demand y from position p; returns end inventory and order + holding cost.
struct StageEnd {
  double inventory;
  double cost;
  OrderChoice order;
};

StageEnd serve(const LotSizingParams& p, double position, double demand) {
  const double a = position - demand;
  StageEnd e;
  if (a >= 0.0) {
    e.order.take.assign(p.q.size(), false);
    e.inventory = a;
    e.cost = p.ch * a;
    return e;
  }
  e.order = cheapest_cover(p, -a);
  e.inventory = a + e.order.quantity;
  e.cost = e.order.cost;
  return e;
}

double interp(const Vector& grid, const Vector& f, double x) {
  const std::size_t G = grid.size();
  if (G == 1) return f[0];
  const double step = grid[1] - grid[0];
  double pos = (x - grid[0]) / step;
  if (pos <= 0.0) return f[0];
  std::size_t k = std::min(static_cast<std::size_t>(pos), G - 2);
  const double frac = pos - static_cast<double>(k);
  return std::max(0.0, f[k] + frac * (f[k + 1] - f[k]));
}

std::size_t argmin_target(const BasestockPolicy& pol, const LotSizingParams& p, const Vector& ev) {
  std::size_t best = 0;
  double bv = kInf;
  for (std::size_t g = 0; g < pol.grid.size(); ++g) {
    const double v = p.c1 * pol.grid[g] + ev[g];
    if (v < bv - 1e-12) {
      bv = v;
      best = g;
    }
  }
  return best;
}

Vector expected_value(const BasestockPolicy& pol, std::size_t t, const WeightVector& w) {
  // E over w of value at stage t+1
  Vector ev(pol.grid.size(), 0.0);
  const auto& table = pol.value[t];
  for (auto [n, wn] : w.support())
    for (std::size_t g = 0; g < ev.size(); ++g) ev[g] += wn * table[n][g];
  return ev;
}

} // namespace

BasestockPolicy fit_basestock(const TrainingSet& training, const std::vector<WeightModel>& models,
                              const LotSizingParams& params, std::size_t grid_points,
                              const WeightVector* static_weights) {
  LotSizingParams p = params;
  p.draw_prices();
  const std::size_t T = training.horizon();
  const std::size_t N = training.n_samples();
  if (T == 0) throw InputError("fit_basestock: horizon must be at least 1");
  if (grid_points == 0) throw InputError("fit_basestock: empty grid");

  BasestockPolicy pol;
  pol.is_static = static_weights != nullptr;
  if (static_weights) pol.static_weights = *static_weights;
  Vector demands;
  for (std::size_t t = 1; t <= T; ++t)
    for (std::size_t i = 0; i < N; ++i) demands.push_back(training.y(i, t)[0]);
  std::sort(demands.begin(), demands.end());
  const double top = demands[std::min(demands.size() - 1,
                                      static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(demands.size()))) - 1)];
  for (std::size_t g = 0; g < grid_points; ++g)
    pol.grid.push_back(grid_points == 1 ? 0.0 : top * static_cast<double>(g) / static_cast<double>(grid_points - 1));
  const std::size_t G = pol.grid.size();

  auto weights_at = [&](std::size_t t, std::size_t l) -> WeightVector {
    // w^{t+1} at training covariate x^l_t
    return static_weights ? *static_weights : models.at(t).weights(training.x(l, t));
  };

  pol.value.assign(T, std::vector<Vector>(N, Vector(G, 0.0)));
  pol.target.assign(T, Vector(N, 0.0));
  for (std::size_t l = 0; l < N; ++l)
    for (std::size_t g = 0; g < G; ++g) pol.value[T - 1][l][g] = serve(p, pol.grid[g], training.y(l, T)[0]).cost;

  for (std::size_t t = T - 1; t >= 1; --t) {
    Vector shared_ev;
    if (static_weights) shared_ev = expected_value(pol, t, *static_weights);
    for (std::size_t l = 0; l < N; ++l) {
      const Vector ev = static_weights ? shared_ev : expected_value(pol, t, weights_at(t, l));
      const double r = pol.grid[argmin_target(pol, p, ev)];
      pol.target[t][l] = r;
      const double y = training.y(l, t)[0];
      for (std::size_t g = 0; g < G; ++g) {
        const auto e = serve(p, pol.grid[g], y);
        const double z1 = std::clamp(r - e.inventory, 0.0, p.budget_step);
        pol.value[t - 1][l][g] = e.cost + p.c1 * z1 + interp(pol.grid, ev, e.inventory + z1);
      }
    }
  }
  for (std::size_t l = 0; l < N; ++l)
    pol.target[0][l] = pol.grid[argmin_target(pol, p, expected_value(pol, 0, weights_at(0, l)))];
  return pol;
}

double basestock_target(const BasestockPolicy& policy, const std::vector<WeightModel>& models,
                        const LotSizingParams& params, std::size_t t, std::span<const double> x) {
  if (t >= policy.value.size()) return 0.0;
  const WeightVector w = policy.is_static ? policy.static_weights : models.at(t).weights(x);
  return policy.grid[argmin_target(policy, params, expected_value(policy, t, w))];
}

PolicyRun run_basestock(const BasestockPolicy& policy, const std::vector<WeightModel>& models,
                        const LotSizingParams& params, const TrainingSet& test, std::size_t path) {
  LotSizingParams p = params;
  p.draw_prices();
  const std::size_t T = test.horizon();
  const std::size_t M = p.q.size();
  PolicyRun run;
  double inv = 0.0, cum = 0.0, pipe = 0.0;
  for (std::size_t t = 0; t <= T; ++t) {
    const double y = t == 0 ? 0.0 : test.y(path, t)[0];
    const auto e = serve(p, inv + pipe, y);
    double z1 = 0.0;
    if (t < T) {
      const double r = basestock_target(policy, models, p, t, test.x(path, t));
      const double room = p.budget_step * static_cast<double>(t + 1) - cum;
      z1 = std::clamp(r - e.inventory, 0.0, std::max(0.0, room));
    }
    inv = e.inventory;
    cum += z1;
    pipe = z1;
    Vector dec(M + 3, 0.0);
    dec[0] = z1;
    double cost = p.c1 * z1 + p.ch * inv;
    for (std::size_t j = 0; j < M; ++j)
      if (e.order.take[j]) {
        dec[1 + j] = 1.0;
        cost += p.c2[j] * p.q[j];
      }
    dec[M + 1] = inv;
    dec[M + 2] = cum;
    run.decisions.push_back(std::move(dec));
    run.stage_costs.push_back(cost);
    run.total += cost;
  }
  return run;
}

// -------------------------------------------------------------- experiments

std::string to_string(Problem p) { return p == Problem::Inventory ? "inventory" : "lotsizing"; }

Problem problem_from_string(const std::string& s) {
  if (s == "inventory") return Problem::Inventory;
  if (s == "lotsizing") return Problem::LotSizing;
  throw InputError("unknown problem '" + s + "' (expected inventory or lotsizing)");
}

MethodSpec method_from_string(const std::string& name) {
  MethodSpec m;
  m.name = name;
  std::string base = name;
  const std::string suffix = "-static";
  if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    m.is_static = true;
    base.resize(base.size() - suffix.size());
  }
  m.weights.method = weight_method_from_string(base);
  return m;
}

std::uint64_t loading_seed(std::uint64_t seed) { return derive_seed(seed, 11); }
std::uint64_t test_seed(std::uint64_t seed) { return derive_seed(seed, 12); }
std::uint64_t training_seed(std::uint64_t seed, std::size_t N, std::size_t replication) {
  return derive_seed(derive_seed(seed, 1000 + replication), N);
}

namespace {

GeneratorConfig generator_for(const BenchmarkConfig& c, std::size_t N) {
  GeneratorConfig g;
  g.T = c.T;
  g.N = N;
  if (c.problem == Problem::LotSizing) g.demand_cap = LotSizingParams{}.demand_cap;
  return g;
}

WeightSpec spec_for(const BenchmarkConfig& c, const MethodSpec& m, std::size_t N) {
  WeightSpec s = m.weights;
  if (s.method == WeightMethod::Knn) s.k = c.knn_k;
  if (s.method == WeightMethod::Forest || s.method == WeightMethod::Tree) {
    s.k = c.rf_min_leaf;
    s.n_trees = c.rf_trees;
    s.subsample = c.rf_subsample ? c.rf_subsample : std::max<std::size_t>(1, N - 1);
  }
  return s;
}

void mean_std(const Vector& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

} // namespace

BenchRow run_replication(const BenchmarkConfig& config, std::size_t N, const std::string& method,
                         std::size_t replication) {
  const auto start = std::chrono::steady_clock::now();
  const MethodSpec m = method_from_string(method);
  const WeightSpec spec = spec_for(config, m, N);
  const Loadings load = draw_loadings(config.T, loading_seed(config.seed));
  const std::uint64_t tseed = training_seed(config.seed, N, replication);
  const TrainingSet training = generate_paths(generator_for(config, N), load, tseed);
  const TrainingSet test = generate_paths(generator_for(config, config.test_paths), load, test_seed(config.seed));
  const auto models = fit_stage_models(training, {spec}, derive_seed(tseed, 21), config.threads);

  Vector costs(config.test_paths);
  if (config.problem == Problem::LotSizing && !config.lotsizing_sddp) {
    LotSizingParams p;
    p.price_seed = derive_seed(config.seed, 14);
    p.draw_prices();
    if (m.is_static) {
      parallel_for(config.test_paths, config.threads, [&](std::size_t i) {
        const WeightVector w = models.at(0).weights(test.x(i, 0));
        const auto pol = fit_basestock(training, models, p, config.grid_points, &w);
        costs[i] = run_basestock(pol, models, p, test, i).total;
      });
    } else {
      const auto pol = fit_basestock(training, models, p, config.grid_points);
      parallel_for(config.test_paths, config.threads,
                   [&](std::size_t i) { costs[i] = run_basestock(pol, models, p, test, i).total; });
    }
  } else {
    ProblemInstance inst;
    if (config.problem == Problem::Inventory) {
      inst = build_inventory_instance(InventoryParams{}, training, spec);
    } else {
      LotSizingParams p;
      p.price_seed = derive_seed(config.seed, 14);
      inst = build_lotsizing_instance(p, training, spec);
    }
    SddpConfig sc;
    sc.M = config.sddp_M;
    sc.max_iter = config.sddp_iterations;
    sc.epsilon = 0.0;
    sc.seed = derive_seed(tseed, 22);
    sc.threads = config.threads;
    sc.sample_root = true;
    const auto run = solve_sddp(inst, models, sc);
    const ProblemInstance policy_inst = run.expanded ? binary_expansion(inst, sc.expansion_bits) : inst;
    const PolicyMode mode = m.is_static ? PolicyMode::Static : PolicyMode::Resolve;
    parallel_for(config.test_paths, config.threads, [&](std::size_t i) {
      costs[i] = run_cut_policy(policy_inst, models, run.pool, test, i, mode).total;
    });
  }

  BenchRow row;
  row.problem = to_string(config.problem);
  row.N = N;
  row.method = method;
  row.replication = replication;
  mean_std(costs, row.mean_cost, row.std_cost);
  row.wall_ms = config.timing
                    ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()
                    : 0.0;
  return row;
}

std::vector<BenchRow> experiment_curve(const BenchmarkConfig& config) {
  if (config.replications == 0 || config.test_paths == 0) throw InputError("benchmark: empty experiment");
  std::vector<BenchRow> rows;
  for (std::size_t N : config.n_grid)
    for (const auto& method : config.methods)
      for (std::size_t r = 0; r < config.replications; ++r) rows.push_back(run_replication(config, N, method, r));
  return rows;
}

std::vector<BenchAggregate> aggregate(const std::vector<BenchRow>& rows) {
  std::vector<BenchAggregate> out;
  std::vector<Vector> means;
  std::map<std::tuple<std::string, std::size_t, std::string>, std::size_t> index;
  for (const auto& r : rows) {
    auto key = std::make_tuple(r.problem, r.N, r.method);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.problem, r.N, r.method, 0.0, 0.0});
      means.emplace_back();
    }
    means[it->second].push_back(r.mean_cost);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    double m, sd;
    mean_std(means[k], m, sd);
    out[k].mean_of_means = m;
    out[k].ci95 = means[k].size() > 1 ? 1.959963984540054 * sd / std::sqrt(static_cast<double>(means[k].size())) : 0.0;
  }
  return out;
}

void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "problem,N,method,replication,mean_cost,std_cost,wall_ms\n";
  for (const auto& r : rows)
    out << r.problem << ',' << r.N << ',' << r.method << ',' << r.replication << ',' << format_double(r.mean_cost)
        << ',' << format_double(r.std_cost) << ',' << format_double(r.wall_ms) << '\n';
}

void write_aggregate_csv(std::ostream& out, const std::vector<BenchAggregate>& agg) {
  out << "problem,N,method,mean_of_means,ci95\n";
  for (const auto& a : agg)
    out << a.problem << ',' << a.N << ',' << a.method << ',' << format_double(a.mean_of_means) << ','
        << format_double(a.ci95) << '\n';
}

} // namespace prescriptor
