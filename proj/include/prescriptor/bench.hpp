#pragma once

// Synthetic inventory-control and lot-sizing experiments: covariate and demand
// generators, instance builders, policy execution on test paths, and the
// basestock approximate DP used for lot sizing.

#include "prescriptor/sddp.hpp"

#include <ostream>
#include <string>

namespace prescriptor {

struct GeneratorConfig {
  std::size_t T = 11;
  std::size_t N = 100;
  std::size_t d = 3;
  double ar_coeff = 0.7;
  double noise_scale = 1.0; ///< scales the AR(1) innovations; 0 gives x_t = 0.7^t x_0
  double phi_scale = 0.25;
  double theta_scale = 5.0;
  double intercept = 50.0;
  double loading_scale = 12.0;
  double demand_cap = kInf;
  bool stationary_start = true; ///< x_0 ~ N(0, I / (1 - ar^2)); otherwise x_0 = initial
  Vector initial;
  bool demand_noise = true; ///< phi and theta drawn (false: both zero)
};

/// Factor loadings a_t, b_t for t = 1..T (index t-1).
struct Loadings {
  std::vector<Vector> a;
  std::vector<Vector> b;
};

/// Seeded shuffles of (0.8, 1, 1) and (-1, 1, 0), one per stage.
Loadings draw_loadings(std::size_t T, std::uint64_t seed);

/// covariates[t] is N x d for t = 0..steps-1; sample i uses its own stream.
std::vector<Matrix> generate_covariates(const GeneratorConfig& config, std::size_t steps, std::uint64_t seed);

/// demand[t-1] (N x 1) for t = 1..T, driven by covariates[t-1].
std::vector<Matrix> generate_demand(const std::vector<Matrix>& covariates, const Loadings& loadings,
                                    const GeneratorConfig& config, std::uint64_t seed);

/// Covariates x_0..x_{T-1} and demands y_1..y_T as a training (or test) set.
TrainingSet generate_paths(const GeneratorConfig& config, const Loadings& loadings, std::uint64_t seed);

struct InventoryParams {
  double c1 = 5.0;
  double c2 = 10.0;
  double ch = 5.0;
  double cb = -10.0;
  double budget_step = 50.0; ///< cumulative advance orders <= budget_step (t + 1)
  double initial_demand = 0.0;
};

struct LotSizingParams {
  Vector q{20, 40, 60, 80, 100};
  Vector c2; ///< per-unit price of option j; empty draws U(5,10) with `price_seed`
  double c1 = 5.0;
  double ch = 5.0;
  double budget_step = 50.0;
  double demand_cap = 200.0;
  std::uint64_t price_seed = 0;

  /// Fills c2 when empty.
  void draw_prices();
};

/// State (inventory, cumulative advance orders, pipeline order); decisions
/// (z1, z2, I, C, h) with h the epigraph of max(cb I, ch I).
ProblemInstance build_inventory_instance(const InventoryParams& params, const TrainingSet& training,
                                         const WeightSpec& spec = {});

/// Decisions (z1, b_1..b_M, I, C); I >= 0, no backlog.
ProblemInstance build_lotsizing_instance(const LotSizingParams& params, const TrainingSet& training,
                                         const WeightSpec& spec = {});

// ----------------------------------------------------------------- policies

struct PolicyRun {
  std::vector<Vector> decisions;
  Vector stage_costs;
  double total = 0.0;
};

enum class PolicyMode { Resolve, Static, Basestock };
std::string to_string(PolicyMode m);

/// Rolls a trained cut-based policy along test path `path`: at every stage the
/// stage problem is re-solved at the current state and covariate. Static mode
/// uses w^1(x_0) in place of every later weight function.
PolicyRun run_cut_policy(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                         const CutPool& pool, const TrainingSet& test, std::size_t path, PolicyMode mode,
                         const MipOptions& mip = {});

/// Immediate orders covering `shortfall` at least cost (order cost plus
/// holding of the excess); returns the chosen subset and its cost.
struct OrderChoice {
  std::vector<bool> take;
  double quantity = 0.0;
  double cost = 0.0;
};
OrderChoice cheapest_cover(const LotSizingParams& params, double shortfall);

struct BasestockPolicy {
  Vector grid;
  /// value[t-1][l][g]: cost from stage t on with start position grid[g] and sample l realised.
  std::vector<std::vector<Vector>> value;
  /// target[t][l]: fitted basestock level at stage t for training covariate x^l_t, t = 0..T-1.
  std::vector<Vector> target;
  bool is_static = false;
  WeightVector static_weights;
};

/// Backward induction on a grid of `grid_points` levels over [0, 99th
/// percentile of training demand]. With `static_weights` every stage uses them.
BasestockPolicy fit_basestock(const TrainingSet& training, const std::vector<WeightModel>& models,
                              const LotSizingParams& params, std::size_t grid_points = 21,
                              const WeightVector* static_weights = nullptr);

/// Target at stage t for covariate x (t = 0..T-1).
double basestock_target(const BasestockPolicy& policy, const std::vector<WeightModel>& models,
                        const LotSizingParams& params, std::size_t t, std::span<const double> x);

PolicyRun run_basestock(const BasestockPolicy& policy, const std::vector<WeightModel>& models,
                        const LotSizingParams& params, const TrainingSet& test, std::size_t path);

// -------------------------------------------------------------- experiments

enum class Problem { Inventory, LotSizing };
std::string to_string(Problem p);
Problem problem_from_string(const std::string& s);

/// A benchmark method: learner plus whether its weights are frozen at x_0.
struct MethodSpec {
  std::string name; ///< saa, knn, rf, tree, optionally suffixed "-static"
  WeightSpec weights;
  bool is_static = false;
};
MethodSpec method_from_string(const std::string& name);

struct BenchmarkConfig {
  Problem problem = Problem::Inventory;
  std::vector<std::size_t> n_grid{25, 50, 100, 200};
  std::vector<std::string> methods{"saa", "knn", "rf"};
  std::size_t replications = 25;
  std::size_t test_paths = 1000;
  std::size_t T = 11;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool timing = false;
  /// Learner hyperparameters. kNN keeps the library rule unless knn_k is set;
  /// forests default to small leaves on near-full subsamples (0 means N - 1),
  /// which localise the weights far better than the library defaults at N = 200.
  std::size_t knn_k = 0;
  std::size_t rf_min_leaf = 3;
  std::size_t rf_trees = 100;
  std::size_t rf_subsample = 0;
  /// SDDP training of cut policies.
  std::size_t sddp_iterations = 40;
  std::size_t sddp_M = 20;
  std::size_t grid_points = 21;
  /// Lot sizing through SDDP on the binary-expanded instance instead of basestock.
  bool lotsizing_sddp = false;
};

struct BenchRow {
  std::string problem;
  std::size_t N = 0;
  std::string method;
  std::size_t replication = 0;
  double mean_cost = 0.0;
  double std_cost = 0.0;
  double wall_ms = 0.0;
};

struct BenchAggregate {
  std::string problem;
  std::size_t N = 0;
  std::string method;
  double mean_of_means = 0.0;
  double ci95 = 0.0;
};

/// Out-of-sample mean cost of one method for one (N, replication).
BenchRow run_replication(const BenchmarkConfig& config, std::size_t N, const std::string& method,
                         std::size_t replication);

std::vector<BenchRow> experiment_curve(const BenchmarkConfig& config);
std::vector<BenchAggregate> aggregate(const std::vector<BenchRow>& rows);

void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows);
void write_aggregate_csv(std::ostream& out, const std::vector<BenchAggregate>& agg);

/// Seeds of one experiment: loadings, prices and the test set are shared by
/// all replications; training sets differ per (N, replication).
std::uint64_t loading_seed(std::uint64_t seed);
std::uint64_t test_seed(std::uint64_t seed);
std::uint64_t training_seed(std::uint64_t seed, std::size_t N, std::size_t replication);

} // namespace prescriptor
