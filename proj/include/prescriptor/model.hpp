#pragma once

// Multistage problem data: affine stage templates, the instance that chains
// them, and the weighted scenario tree they induce.

#include "prescriptor/common.hpp"
#include "prescriptor/weights.hpp"

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace prescriptor {

enum class VarKind { Continuous, Binary };

/// Stage t problem: min c.z  s.t.  W z (<= | =) h + T s + U y,  lower <= z <= upper,
/// with next state F z. Cost and transition read the decision only; the state
/// and uncertainty enter through the right-hand side.
struct StageTemplate {
  std::size_t stage = 0;
  std::size_t n_state = 0;
  std::size_t n_uncertainty = 0;
  Vector cost;
  Matrix transition; ///< n_next_state x n_dec; no rows at the last stage
  Matrix W;
  Vector h;
  Matrix T; ///< rows x n_state
  Matrix U; ///< rows x n_uncertainty
  std::vector<bool> equality;
  Vector lower;
  Vector upper;
  std::vector<VarKind> kind;
  /// Declared state range, needed only for binary expansion of continuous states.
  Vector state_lower;
  Vector state_upper;

  [[nodiscard]] std::size_t n_dec() const { return cost.size(); }
  [[nodiscard]] std::size_t n_rows() const { return h.size(); }
  [[nodiscard]] std::size_t n_next_state() const { return transition.rows(); }
  [[nodiscard]] bool has_binaries() const;

  /// Appends one constraint row: w.z (<= | =) rhs + t.s + u.y.
  void add_row(std::span<const double> w, double rhs, std::span<const double> t,
               std::span<const double> u, bool is_equality = false);

  /// Allocates empty matrices for the given dimensions.
  static StageTemplate empty(std::size_t stage, std::size_t n_dec, std::size_t n_state,
                             std::size_t n_uncertainty, std::size_t n_next_state);
};

struct ProblemInstance {
  std::string name;
  std::vector<StageTemplate> stages; ///< T+1 templates
  Vector initial_state;
  Vector initial_covariate;
  std::optional<TrainingSet> training; ///< required when T >= 1
  std::vector<WeightSpec> weight_specs; ///< one shared spec or one per stage 1..T
  Vector lower_bounds;                  ///< L_t for t = 1..T; empty means derive

  [[nodiscard]] std::size_t horizon() const { return stages.empty() ? 0 : stages.size() - 1; }
  /// Initial lower bound on the stage-t expected cost-to-go, t in 1..T.
  [[nodiscard]] double lower_bound(std::size_t t) const;
  [[nodiscard]] bool has_binaries() const;
};

/// Zero when every cost-carrying variable has a nonnegative cost and a
/// nonnegative lower bound in stages t..T; nullopt otherwise.
std::optional<double> derived_lower_bound(const ProblemInstance& instance, std::size_t t);

struct Finding {
  enum class Kind { Dimension, Horizon, Bounds, Unbounded, EmptyStage, LowerBound };
  Kind kind;
  std::size_t stage;
  std::string message;
};

/// Lists every structural problem; an empty report means well-formed.
std::vector<Finding> validate(const ProblemInstance& instance);
std::string to_string(Finding::Kind k);

/// Throws InputError summarising the report when it is non-empty.
void require_valid(const ProblemInstance& instance);

nlohmann::json instance_to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr);

struct ScenarioNode {
  int parent = -1;
  std::size_t depth = 0;
  std::size_t sample = 0;      ///< training index; meaningless at the root of a full tree
  double probability = 1.0;    ///< product of branch weights from the root
  double branch_weight = 1.0;
  std::vector<std::size_t> children;
};

/// Weighted scenario tree. Depth t nodes carry sample i with y_t^i and x_t^i;
/// only positive-weight branches are present.
struct ScenarioTree {
  std::vector<ScenarioNode> nodes;
  std::size_t root_depth = 0;
  bool root_has_sample = false; ///< subtree rooted at a training sample
  Vector root_state;
  Vector root_covariate;

  [[nodiscard]] std::size_t leaf_count() const;
  /// Covariate observed at `node` (x_t), used to weight its children.
  [[nodiscard]] std::span<const double> covariate(const TrainingSet& data, std::size_t node) const;
};

inline constexpr std::size_t kDefaultNodeCap = 1'000'000;

/// Full tree from (s0, x0). `models[t-1]` holds w^t.
ScenarioTree build_scenario_tree(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                                 std::size_t node_cap = kDefaultNodeCap);

/// Subtree rooted at training sample `sample` observed at stage `depth`, with
/// the given incoming state.
ScenarioTree build_subtree(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                           std::size_t depth, std::size_t sample, std::span<const double> state,
                           std::size_t node_cap = kDefaultNodeCap);

} // namespace prescriptor
