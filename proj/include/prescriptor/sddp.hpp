#pragma once

// Stochastic dual dynamic programming over the weighted empirical problem:
// sampled forward passes, a statistical upper bound, and backward passes that
// grow piecewise-linear lower models of the cost-to-go.

#include "prescriptor/linopt.hpp"
#include "prescriptor/model.hpp"

#include <cstdint>
#include <map>
#include <ostream>

#include <json.hpp>

namespace prescriptor {

/// Training index of the covariate a cut was built for; two reserved keys.
using CovariateKey = std::int64_t;
inline constexpr CovariateKey kRootKey = -1;  ///< the instance's own x0
inline constexpr CovariateKey kFreshKey = -2; ///< an unseen covariate: no keyed cuts

/// Compact list of affine cuts over a state of fixed dimension.
class CutList {
public:
  CutList() = default;
  explicit CutList(std::size_t dim) : dim_(dim) {}

  [[nodiscard]] std::size_t size() const { return origin_.size(); }
  [[nodiscard]] bool empty() const { return origin_.empty(); }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] double intercept(std::size_t k) const { return data_[k * (dim_ + 1)]; }
  [[nodiscard]] std::span<const double> slope(std::size_t k) const {
    return {data_.data() + k * (dim_ + 1) + 1, dim_};
  }
  [[nodiscard]] double value(std::size_t k, std::span<const double> s) const;
  [[nodiscard]] Cut cut(std::size_t k) const;
  /// Index of the largest cut at s and its value; size() when empty.
  [[nodiscard]] std::pair<std::size_t, double> argmax(std::span<const double> s) const;

  void push_back(const Cut& c);

private:
  std::size_t dim_ = 0;
  Vector data_; ///< per cut: intercept, slope
  std::vector<Cut::Origin> origin_;
  std::vector<CutFamily> family_;
};

/// Per-sample cuts of one backward trial: cuts[a] is valid for Q_t(.; y^m, x^m)
/// with m = samples[a]. Any weight vector w turns them into a valid cut of the
/// expected cost-to-go: sum_a w_m cuts[a] + (1 - sum_a w_m) L_t.
struct TrialCuts {
  Cut::Origin origin;
  CutFamily family = CutFamily::Benders;
  std::vector<std::size_t> samples;
  std::vector<Cut> cuts;

  [[nodiscard]] Cut aggregate(const WeightVector& w, double lower, std::size_t dim) const;
};

/// Cuts for stages 1..T: keyed lists psi_t(., x) per covariate key plus the
/// per-sample trial cuts they are aggregated from.
class CutPool {
public:
  CutPool() = default;
  CutPool(Vector lower_bounds, std::vector<std::size_t> state_dims, std::size_t n_samples);

  [[nodiscard]] std::size_t horizon() const { return lower_.size(); }
  [[nodiscard]] std::size_t n_samples() const { return n_samples_; }
  [[nodiscard]] double lower_bound(std::size_t t) const { return lower_.at(t - 1); }
  [[nodiscard]] std::size_t state_dim(std::size_t t) const { return dims_.at(t - 1); }

  [[nodiscard]] const CutList& keyed(std::size_t t, CovariateKey key) const;
  [[nodiscard]] std::vector<CovariateKey> keys(std::size_t t) const;
  void add_keyed(std::size_t t, CovariateKey key, const Cut& cut);
  [[nodiscard]] std::span<const TrialCuts> trials(std::size_t t) const { return trials_.at(t - 1); }
  void add_trial(std::size_t t, TrialCuts trial);

  [[nodiscard]] std::size_t keyed_size() const;
  [[nodiscard]] std::size_t trial_count() const;

  /// psi_t(s, x) = max(L_t, keyed cuts of `key`).
  [[nodiscard]] double value(std::size_t t, CovariateKey key, std::span<const double> s) const;

  /// Aggregates every stored trial of stage t with weights w.
  [[nodiscard]] CutList materialize(std::size_t t, const WeightVector& w) const;

  /// Every per-sample cut of stage t built at training sample m.
  [[nodiscard]] const CutList& sample_cuts(std::size_t t, std::size_t m) const { return per_sample_.at(t - 1).at(m); }

  friend bool operator==(const CutPool&, const CutPool&);

private:
  Vector lower_;
  std::vector<std::size_t> dims_;
  std::size_t n_samples_ = 0;
  std::vector<std::map<CovariateKey, CutList>> keyed_;
  std::vector<std::vector<TrialCuts>> trials_;
  std::vector<std::vector<CutList>> per_sample_;
};

/// max(L, cut list) as a separation oracle for one stage solve.
class ListView final : public FutureCost {
public:
  ListView(double lower, const CutList& list) : lower_(lower), list_(list) {}
  [[nodiscard]] double lower_bound() const override { return lower_; }
  [[nodiscard]] std::optional<Cut> support(std::span<const double> s) const override;

private:
  double lower_;
  const CutList& list_;
};

/// sum_m w_m max(L, per-sample cuts of m): the tightest model the stored cuts
/// give at an arbitrary covariate.
class SampleView final : public FutureCost {
public:
  SampleView(const CutPool& pool, std::size_t t, const WeightVector& w);
  [[nodiscard]] double lower_bound() const override { return pool_.lower_bound(t_); }
  [[nodiscard]] std::optional<Cut> support(std::span<const double> s) const override;

private:
  const CutPool& pool_;
  std::size_t t_;
  std::vector<std::pair<std::size_t, double>> support_;
};

nlohmann::json cut_to_json(const Cut& c);
Cut cut_from_json(const nlohmann::json& j);
nlohmann::json pool_to_json(const CutPool& pool);
CutPool pool_from_json(const nlohmann::json& j);

// ------------------------------------------------------------------- bounds

struct UpperBound {
  double mean = 0.0;
  double std = 0.0;
  double ub = 0.0;
};

/// mean + z_{alpha/2} std / sqrt(M) with the (M-1) sample deviation.
UpperBound statistical_upper_bound(std::span<const double> costs, double alpha);

// --------------------------------------------------------------------- cuts

/// The stage-t problem for one (trial state, sample) pair.
struct CutContext {
  const StageTemplate* stage = nullptr;
  std::span<const double> state;
  std::span<const double> uncertainty;
  const FutureCost* future = nullptr; ///< null at the last stage
  double lower_bound = 0.0;           ///< L_t, used by integer-optimality cuts
  MipOptions mip;
  StageReuse* reuse = nullptr;        ///< Benders only; see StageSolveOptions
};

/// LP-relaxation duals of the state-pinning rows.
Cut benders_cut(const CutContext& ctx);

/// P* - (P* - L) * Hamming(s, s^j); needs a binary trial state.
Cut integer_optimality_cut(const CutContext& ctx);

struct LagrangianOptions {
  std::size_t max_evaluations = 50;
  double box = 0.0; ///< 0 selects 10 * max(1, max |cost|)
  double tolerance = 1e-6;
};

struct LagrangianResult {
  Cut cut;
  double dual_value = 0.0; ///< max over the box of L(pi) + pi.s^j
  std::size_t evaluations = 0;
  bool capped = false;
};

/// Cutting-plane maximization of the Lagrangian dual of sigma = s^j with
/// sigma relaxed to [0,1]^p.
LagrangianResult lagrangian_cut(const CutContext& ctx, const LagrangianOptions& opts = {});

/// Value of the Lagrangian inner problem L(pi).
double lagrangian_inner(const CutContext& ctx, const Vector& pi);

/// True when every component of the incoming state of stage t is a copy of a binary decision.
bool state_is_binary(const ProblemInstance& instance, std::size_t t);

/// Re-encodes every continuous state of stages 1..T with `bits` binary digits
/// over the declared range (rounded down; the remainder is absorbed by a
/// residual variable in [0, step]). Stage decisions gain the digits and
/// residuals after the original decisions.
ProblemInstance binary_expansion(const ProblemInstance& instance, std::size_t bits = 10);

// --------------------------------------------------------------------- runs

enum class CutMode { Auto, Benders, Integer, Lagrangian, IntegerLagrangian };
std::string to_string(CutMode m);
CutMode cut_mode_from_string(const std::string& s);

struct SddpConfig {
  std::size_t M = 20;
  double alpha = 0.05;
  double epsilon = 1e-4;
  std::size_t max_iter = 100;
  std::size_t stall_window = 10;
  double stall_tol = 1e-8;
  CutMode cuts = CutMode::Auto;
  std::size_t expansion_bits = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Draw each forward path's root covariate from the training x0 rows.
  bool sample_root = false;
  /// Aggregate every trial into every covariate key's list, not only its own.
  bool share_cuts = true;
  bool timing = false;
  MipOptions mip;
  LagrangianOptions lagrangian;
  const CutPool* warm_start = nullptr;
};

struct IterationLog {
  std::size_t iter = 0;
  double lb = 0.0;
  double ub_mean = 0.0;
  double ub_std = 0.0;
  double ub = 0.0;
  double wall_ms = 0.0;
  std::size_t cuts_added = 0;
};

struct ForwardPath {
  std::vector<Vector> states;           ///< incoming state of stages 1..T (index t-1)
  std::vector<std::size_t> samples;     ///< sampled training index at stages 1..T
  CovariateKey root_key = kRootKey;
  std::size_t root_sample = 0;          ///< meaningful when root_key >= 0
  double cost = 0.0;
};

struct ForwardResult {
  std::vector<ForwardPath> paths;
  Vector costs;
};

struct SddpRun {
  double lb = -kInf;
  /// Upper bound from an extra forward pass under the final cuts; the per-
  /// iteration bounds that drove stopping stay in `log`.
  double ub_mean = 0.0;
  double ub_std = 0.0;
  double ub = kInf;
  std::size_t iterations = 0;
  std::size_t M = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string stop_reason;
  std::vector<IterationLog> log;
  std::vector<std::vector<ForwardPath>> trials; ///< per iteration
  Vector first_stage;
  CutPool pool;
  bool expanded = false;           ///< states were binary-expanded
  std::size_t lagrangian_capped = 0;
};

/// Weight vectors w^{t+1}(x^i_t) for every training sample, cached per stage.
struct WeightCache {
  WeightCache(const ProblemInstance& instance, const std::vector<WeightModel>& models);
  /// w^{t+1} at training covariate x^i_t, t in 1..T-1.
  [[nodiscard]] const WeightVector& at(std::size_t t, std::size_t i) const { return w_[t - 1][i]; }
  /// w^1 at training covariate x^i_0.
  [[nodiscard]] const WeightVector& root(std::size_t i) const { return root_[i]; }

private:
  std::vector<std::vector<WeightVector>> w_;
  std::vector<WeightVector> root_;
};

/// One forward pass of M sampled paths.
ForwardResult forward_pass(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                           const CutPool& pool, const SddpConfig& config, std::size_t iteration);

/// One backward pass; returns the number of keyed cuts appended.
std::size_t backward_pass(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                          CutPool& pool, const std::vector<ForwardPath>& trials, const SddpConfig& config,
                          std::size_t iteration, std::size_t* lagrangian_capped = nullptr);

/// Lower bound: stage-0 objective under psi_1 (averaged over training x0 when sampling the root).
double lower_bound(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                   const CutPool& pool, const SddpConfig& config, Vector* first_stage = nullptr);

SddpRun solve_sddp(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                   const SddpConfig& config = {});

void write_run_log(std::ostream& out, const SddpRun& run);

/// Stage-t decision of a trained policy at an arbitrary state and covariate.
/// `weights` overrides w^{t+1}(x_t) (static policies); keyed cuts are used for `key`.
StageSolution policy_step(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                          const CutPool& pool, std::size_t t, std::span<const double> state,
                          std::span<const double> uncertainty, std::span<const double> covariate,
                          const WeightVector* weights = nullptr, CovariateKey key = kFreshKey,
                          const MipOptions& mip = {});

} // namespace prescriptor
