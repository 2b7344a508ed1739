#pragma once

// Dense bounded revised simplex with exact basic duals, a best-bound
// branch-and-bound for binary variables, and the stage-subproblem solver that
// pins the incoming state with explicit equality rows.

#include "prescriptor/common.hpp"
#include "prescriptor/model.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace prescriptor {

/// min c.x  s.t.  row_lower <= A x <= row_upper,  col_lower <= x <= col_upper.
/// A one-sided "a.x <= b" row has row_lower = -inf.
struct LinearProgram {
  Vector objective;
  Matrix A;
  Vector row_lower;
  Vector row_upper;
  Vector col_lower;
  Vector col_upper;
  std::vector<bool> integer;

  [[nodiscard]] std::size_t n_cols() const { return objective.size(); }
  [[nodiscard]] std::size_t n_rows() const { return row_lower.size(); }
  [[nodiscard]] bool has_integers() const;

  /// Adds a column with zero coefficients in existing rows; returns its index.
  std::size_t add_column(double cost, double lower, double upper, bool is_integer = false);
  void add_row(std::span<const double> coeffs, double lower, double upper);
  /// Throws InputError on inconsistent dimensions or crossed bounds.
  void check() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };
std::string to_string(SolveStatus s);

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  Vector x;
  double objective = 0.0;
  /// d(objective)/d(active row bound). A binding "<=" row has a dual <= 0.
  Vector duals;
  Vector reduced_costs;
  /// Basic variables: j < n structural, n + i the logical of row i.
  std::vector<std::size_t> basis;
  /// Nonbasic structural or logical j (< n + m) sits at its upper bound.
  std::vector<bool> at_upper;
  bool has_duals = false;
  std::size_t iterations = 0;
  std::size_t nodes = 0;
};

/// A starting basis, typically the optimum of the same LP before rows were
/// appended (the new rows' logicals join the basis). Dual simplex restores
/// primal feasibility; an unusable hint falls back to a cold start.
struct WarmStart {
  std::vector<std::size_t> basis;
  std::vector<bool> at_upper;
};

struct LpOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-7;
  std::size_t max_iterations = 0; ///< 0 selects 50 (m + n) + 1000
  const WarmStart* warm = nullptr; ///< ignored by solve_mip
};

/// Pure continuous LP. Integrality flags are rejected.
SolveResult solve_lp(const LinearProgram& lp, const LpOptions& opts = {});

struct MipOptions {
  double integrality_tol = 1e-6;
  double absolute_gap = 1e-6;
  std::size_t node_limit = 1'000'000;
  LpOptions lp;
};

/// Thrown when the node limit is hit; carries what was known at that point.
class NodeLimitError : public ResourceError {
public:
  NodeLimitError(const std::string& msg, std::optional<Vector> incumbent, double incumbent_value,
                 double bound)
      : ResourceError(msg), incumbent(std::move(incumbent)), incumbent_value(incumbent_value), bound(bound) {}
  std::optional<Vector> incumbent;
  double incumbent_value;
  double bound;
};

/// Branch-and-bound over the integer (bounded, binary) columns. Duals absent.
SolveResult solve_mip(const LinearProgram& lp, const MipOptions& opts = {});

/// Dispatches on the presence of integer columns.
SolveResult solve(const LinearProgram& lp, const MipOptions& opts = {});

/// LP text format (CPLEX style) for debugging dumps.
void write_lp_text(std::ostream& out, const LinearProgram& lp, const std::string& name = "prescriptor");

// --------------------------------------------------------- stage subproblems

enum class CutFamily { Benders, Integer, Lagrangian };
std::string to_string(CutFamily f);
CutFamily cut_family_from_string(const std::string& s);

/// Affine minorant beta + pi.s of an expected cost-to-go.
struct Cut {
  double intercept = 0.0;
  Vector slope;
  CutFamily family = CutFamily::Benders;
  struct Origin {
    std::size_t iteration = 0;
    std::size_t stage = 0;
    std::size_t trial = 0;
  } origin;

  [[nodiscard]] double value(std::span<const double> s) const { return intercept + dot(slope, s); }
};

/// Piecewise-linear lower model psi(s) of the expected cost-to-go, queried as
/// a separation oracle so the stage LP only carries the pieces it needs.
class FutureCost {
public:
  virtual ~FutureCost() = default;
  [[nodiscard]] virtual double lower_bound() const = 0;
  /// Supporting piece of psi at s, or nullopt when psi(s) is the constant lower bound.
  [[nodiscard]] virtual std::optional<Cut> support(std::span<const double> s) const = 0;
};

/// max(L, max of a fixed cut list).
class CutSlice final : public FutureCost {
public:
  CutSlice(double lower, std::span<const Cut> cuts) : lower_(lower), cuts_(cuts) {}
  [[nodiscard]] double lower_bound() const override { return lower_; }
  [[nodiscard]] std::optional<Cut> support(std::span<const double> s) const override;

private:
  double lower_;
  std::span<const Cut> cuts_;
};

/// Cut rows and final basis carried from one continuous stage solve to the
/// next. Valid only between solves of the same template against the same
/// future model, where nothing but the right-hand side changes.
struct StageReuse {
  std::vector<Cut> rows;
  WarmStart basis;
};

struct StageSolveOptions {
  /// Solve the continuous relaxation even when the stage has binaries.
  bool relax_integrality = false;
  /// When set, the state copy is not pinned: it ranges over [0,1]^p and is
  /// priced with -multipliers (the Lagrangian inner problem).
  const Vector* lagrange_multipliers = nullptr;
  MipOptions mip;
  std::size_t max_separation_rounds = 10'000;
  /// In/out: seeds the cut rows and basis, receives them afterwards.
  /// Ignored for MIPs and Lagrangian solves.
  StageReuse* reuse = nullptr;
};

struct StageSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0; ///< g(z) + theta (minus multipliers.sigma in Lagrangian mode)
  double stage_cost = 0.0;
  double theta = 0.0;
  Vector decision;
  Vector state_copy;
  Vector next_state;
  Vector state_duals; ///< d objective / d s (LP relaxation for MIPs); empty in Lagrangian mode
  std::size_t separation_rounds = 0;
  std::size_t cut_rows = 0;
};

/// Solves  min g(z) + theta  s.t.  W z (<= | =) h + T s + U y,  theta >= psi(F z).
/// With Lagrange multipliers pi the state is replaced by copies sigma in [0,1]
/// priced at -pi. Separation rounds add cut rows until theta matches psi at
/// the optimum. `future` is null at the last stage.
StageSolution fix_state_and_solve(const StageTemplate& stage, std::span<const double> state,
                                  std::span<const double> uncertainty, const FutureCost* future,
                                  const StageSolveOptions& opts = {});

} // namespace prescriptor
