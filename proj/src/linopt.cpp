#include "prescriptor/linopt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>

namespace prescriptor {

bool LinearProgram::has_integers() const {
  return std::find(integer.begin(), integer.end(), true) != integer.end();
}

std::size_t LinearProgram::add_column(double cost, double lower, double upper, bool is_integer) {
  const std::size_t m = n_rows();
  const std::size_t n = n_cols();
  Matrix grown(m, n + 1);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) grown(r, c) = A(r, c);
  A = std::move(grown);
  objective.push_back(cost);
  col_lower.push_back(lower);
  col_upper.push_back(upper);
  integer.resize(n, false);
  integer.push_back(is_integer);
  return n;
}

void LinearProgram::add_row(std::span<const double> coeffs, double lower, double upper) {
  if (coeffs.size() != n_cols()) throw InputError("LinearProgram::add_row: coefficient count");
  if (A.rows() == 0) A = Matrix(0, n_cols());
  A.append_row(coeffs);
  row_lower.push_back(lower);
  row_upper.push_back(upper);
}

void LinearProgram::check() const {
  const std::size_t n = n_cols();
  const std::size_t m = n_rows();
  if (col_lower.size() != n || col_upper.size() != n) throw InputError("LP: column bound count");
  if (!integer.empty() && integer.size() != n) throw InputError("LP: integrality mask size");
  if (row_upper.size() != m || A.rows() != m || (m > 0 && A.cols() != n))
    throw InputError("LP: constraint matrix dimensions");
  for (std::size_t j = 0; j < n; ++j)
    if (col_lower[j] > col_upper[j]) throw InputError("LP: column lower bound exceeds upper bound");
  for (std::size_t i = 0; i < m; ++i)
    if (row_lower[i] > row_upper[i]) throw InputError("LP: row lower bound exceeds upper bound");
}

std::string to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::Optimal: return "optimal";
  case SolveStatus::Infeasible: return "infeasible";
  case SolveStatus::Unbounded: return "unbounded";
  }
  return "?";
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kHarrisTol = 1e-9;
constexpr std::size_t kRefactorEvery = 50;
constexpr std::size_t kDegenerateLimit = 30;

enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, Free };

class Simplex {
public:
  Simplex(const LinearProgram& lp, std::span<const double> col_lo, std::span<const double> col_hi,
          const LpOptions& opts, bool bland)
      : lp_(lp), m_(lp.n_rows()), n_(lp.n_cols()), opts_(opts), bland_always_(bland) {
    colA_.assign(n_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j) colA_[j * m_ + i] = lp.A(i, j);
    max_iter_ = opts.max_iterations ? opts.max_iterations : 50 * (m_ + n_) + 1000;
    if (opts.warm) setup_warm(col_lo, col_hi, *opts.warm);
    else setup(col_lo, col_hi);
  }

  /// From a warm basis: dual simplex to primal feasibility, then the primal
  /// phase two as a safeguard. Throws SolverError when the hint is unusable.
  SolveResult run_warm() {
    set_costs(false);
    if (!dual_iterate()) {
      SolveResult res;
      res.status = SolveStatus::Infeasible;
      res.iterations = iterations_;
      return res;
    }
    if (!iterate(false)) {
      SolveResult res;
      res.status = SolveStatus::Unbounded;
      res.iterations = iterations_;
      return res;
    }
    return finish();
  }

  SolveResult run() {
    SolveResult res;
    if (!art_rows_.empty()) {
      set_costs(true);
      iterate(true);
      // Judge each row on its own magnitude: one large row must not let a
      // small, finely scaled row slip through with a sizeable residual.
      bool infeasible = false;
      for (std::size_t a = 0; a < art_rows_.size(); ++a)
        infeasible = infeasible || x_[n_ + m_ + a] > opts_.feasibility_tol * row_magnitude(art_rows_[a]);
      if (infeasible) {
        res.status = SolveStatus::Infeasible;
        res.iterations = iterations_;
        return res;
      }
      for (std::size_t a = 0; a < art_rows_.size(); ++a) {
        const std::size_t j = n_ + m_ + a;
        lb_[j] = ub_[j] = 0.0;
        if (state_[j] != VarState::Basic) {
          state_[j] = VarState::AtLower;
          x_[j] = 0.0;
        }
      }
      refactor();
    }
    set_costs(false);
    if (!iterate(false)) {
      res.status = SolveStatus::Unbounded;
      res.iterations = iterations_;
      return res;
    }
    return finish();
  }

private:
  bool basic_feasible() const {
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t j = head_[i];
      const double tol = opts_.feasibility_tol * std::max(1.0, std::max(std::abs(lb_[j]) == kInf ? 0.0 : std::abs(lb_[j]),
                                                                         std::abs(ub_[j]) == kInf ? 0.0 : std::abs(ub_[j])));
      if (x_[j] < lb_[j] - tol || x_[j] > ub_[j] + tol) return false;
    }
    return true;
  }

  double row_magnitude(std::size_t i) const {
    double v = 1.0;
    if (std::isfinite(lp_.row_lower[i])) v = std::max(v, std::abs(lp_.row_lower[i]));
    if (std::isfinite(lp_.row_upper[i])) v = std::max(v, std::abs(lp_.row_upper[i]));
    for (std::size_t j = 0; j < n_; ++j) v = std::max(v, std::abs(colA_[j * m_ + i]));
    return v;
  }

  double max_violation() const {
    double v = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t j = head_[i];
      v = std::max({v, lb_[j] - x_[j], x_[j] - ub_[j]});
    }
    return v;
  }

  SolveResult finish() {
    SolveResult res;
    for (int attempt = 0;; ++attempt) {
      if (since_refactor_ > 0) refactor();
      if (basic_feasible()) break;
      // Badly scaled rows can leave the recomputed basic solution slightly
      // outside its bounds. The optimal basis is still dual feasible, so a
      // few dual simplex steps usually repair it.
      if (attempt < 3) {
        try {
          if (dual_iterate() && iterate(false)) continue;
        } catch (const SolverError&) {
        }
        if (since_refactor_ > 0) refactor();
      }
      // Otherwise accept the residual phase one already tolerated.
      if (max_violation() <= opts_.feasibility_tol * scale_) break;
      throw SolverError("simplex: basic solution lost feasibility after refactorization");
    }
    compute_duals();
    res.status = SolveStatus::Optimal;
    res.iterations = iterations_;
    res.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    for (std::size_t j = 0; j < n_; ++j) res.x[j] = std::clamp(res.x[j], lb_[j], ub_[j]);
    res.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) res.objective += lp_.objective[j] * res.x[j];
    res.duals = y_;
    res.reduced_costs.resize(n_);
    for (std::size_t j = 0; j < n_; ++j)
      res.reduced_costs[j] = state_[j] == VarState::Basic ? 0.0 : cost_[j] - col_dot(j, y_);
    res.basis.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t j = head_[i];
      res.basis[i] = j < n_ + m_ ? j : n_ + art_rows_[j - n_ - m_];
    }
    res.at_upper.resize(n_ + m_);
    for (std::size_t j = 0; j < n_ + m_; ++j) res.at_upper[j] = state_[j] == VarState::AtUpper;
    res.has_duals = true;
    return res;
  }

  void set_bounds(std::span<const double> col_lo, std::span<const double> col_hi) {
    const std::size_t base = n_ + m_;
    lb_.assign(base, 0.0);
    ub_.assign(base, 0.0);
    scale_ = 1.0;
    for (std::size_t j = 0; j < base; ++j) {
      lb_[j] = j < n_ ? col_lo[j] : lp_.row_lower[j - n_];
      ub_[j] = j < n_ ? col_hi[j] : lp_.row_upper[j - n_];
      if (std::isfinite(lb_[j])) scale_ = std::max(scale_, std::abs(lb_[j]));
      if (std::isfinite(ub_[j])) scale_ = std::max(scale_, std::abs(ub_[j]));
    }
  }

  void setup_warm(std::span<const double> col_lo, std::span<const double> col_hi, const WarmStart& warm) {
    const std::size_t base = n_ + m_;
    if (warm.basis.size() != m_ || warm.at_upper.size() != base) throw SolverError("warm start: shape mismatch");
    set_bounds(col_lo, col_hi);
    x_.assign(base, 0.0);
    state_.assign(base, VarState::AtLower);
    std::vector<char> basic(base, 0);
    head_ = warm.basis;
    for (std::size_t j : head_) {
      if (j >= base || basic[j]) throw SolverError("warm start: invalid basis");
      basic[j] = 1;
    }
    for (std::size_t j = 0; j < base; ++j) {
      if (basic[j]) {
        state_[j] = VarState::Basic;
      } else if (warm.at_upper[j] && ub_[j] < kInf) {
        state_[j] = VarState::AtUpper;
        x_[j] = ub_[j];
      } else if (lb_[j] > -kInf) {
        x_[j] = lb_[j];
      } else if (ub_[j] < kInf) {
        state_[j] = VarState::AtUpper;
        x_[j] = ub_[j];
      } else {
        state_[j] = VarState::Free;
      }
    }
    total_ = base;
    cost_.assign(total_, 0.0);
    binv_.assign(m_ * m_, 0.0);
    refactor();
  }

  /// Bounded dual simplex from a dual feasible basis. Returns false when the
  /// primal is infeasible.
  bool dual_iterate() {
    const double tol = opts_.feasibility_tol;
    for (;;) {
      if (++iterations_ > max_iter_) throw SolverError("dual simplex: iteration limit reached");
      if (since_refactor_ >= kRefactorEvery) refactor();
      compute_duals();
      // Leaving row: largest bound violation.
      std::size_t r = m_;
      double worst = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t j = head_[i];
        const double t = tol * std::max(1.0, std::max(std::isfinite(lb_[j]) ? std::abs(lb_[j]) : 0.0,
                                                      std::isfinite(ub_[j]) ? std::abs(ub_[j]) : 0.0));
        const double v = std::max(lb_[j] - x_[j], x_[j] - ub_[j]);
        if (v > t && v > worst) {
          worst = v;
          r = i;
        }
      }
      if (r == m_) return true;
      const std::size_t p = head_[r];
      const bool below = x_[p] < lb_[p];
      const double target = below ? lb_[p] : ub_[p];
      const std::span<const double> rho(&binv_[r * m_], m_);

      // Entering: min |d_j / alpha_j| among columns moving x_p toward its bound.
      std::size_t q = total_;
      double best_ratio = kInf;
      double best_alpha = 0.0;
      for (std::size_t j = 0; j < total_; ++j) {
        const VarState st = state_[j];
        if (st == VarState::Basic || lb_[j] == ub_[j]) continue;
        const double a = col_dot(j, rho);
        if (std::abs(a) <= kPivotTol) continue;
        // x_p moves by -a per unit increase of x_j.
        const bool up_ok = below ? a < 0.0 : a > 0.0;
        bool ok = false;
        if (st == VarState::AtLower) ok = up_ok;
        else if (st == VarState::AtUpper) ok = !up_ok;
        else ok = true;
        if (!ok) continue;
        const double d = cost_[j] - col_dot(j, y_);
        if (st == VarState::AtLower && d < -opts_.optimality_tol) throw SolverError("warm start: basis not dual feasible");
        if (st == VarState::AtUpper && d > opts_.optimality_tol) throw SolverError("warm start: basis not dual feasible");
        const double ratio = std::abs(d) / std::abs(a);
        if (ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && std::abs(a) > best_alpha)) {
          best_ratio = ratio;
          best_alpha = std::abs(a);
          q = j;
        }
      }
      if (q == total_) return false;

      Vector alpha;
      ftran(q, alpha);
      const double piv = alpha[r];
      if (std::abs(piv) <= kPivotTol) throw SolverError("dual simplex: unstable pivot");
      const double t = (x_[p] - target) / piv;
      for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] -= t * alpha[i];
      x_[q] += t;
      state_[p] = below ? VarState::AtLower : VarState::AtUpper;
      if (lb_[p] == ub_[p]) state_[p] = VarState::AtLower;
      x_[p] = target;
      state_[q] = VarState::Basic;
      head_[r] = q;
      double* prow = &binv_[r * m_];
      for (std::size_t k = 0; k < m_; ++k) prow[k] /= piv;
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == r || alpha[i] == 0.0) continue;
        const double f = alpha[i];
        double* row = &binv_[i * m_];
        for (std::size_t k = 0; k < m_; ++k) row[k] -= f * prow[k];
      }
      ++since_refactor_;
    }
  }

  void setup(std::span<const double> col_lo, std::span<const double> col_hi) {
    const std::size_t base = n_ + m_;
    lb_.assign(base, 0.0);
    ub_.assign(base, 0.0);
    x_.assign(base, 0.0);
    state_.assign(base, VarState::AtLower);
    scale_ = 1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      lb_[j] = col_lo[j];
      ub_[j] = col_hi[j];
      if (lb_[j] > -kInf) {
        x_[j] = lb_[j];
        state_[j] = VarState::AtLower;
      } else if (ub_[j] < kInf) {
        x_[j] = ub_[j];
        state_[j] = VarState::AtUpper;
      } else {
        x_[j] = 0.0;
        state_[j] = VarState::Free;
      }
      if (std::isfinite(lb_[j])) scale_ = std::max(scale_, std::abs(lb_[j]));
      if (std::isfinite(ub_[j])) scale_ = std::max(scale_, std::abs(ub_[j]));
    }
    Vector activity(m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (x_[j] == 0.0) continue;
      const double* col = &colA_[j * m_];
      for (std::size_t i = 0; i < m_; ++i) activity[i] += col[i] * x_[j];
    }
    head_.assign(m_, 0);
    std::vector<int> signs;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = n_ + i;
      lb_[s] = lp_.row_lower[i];
      ub_[s] = lp_.row_upper[i];
      if (std::isfinite(lb_[s])) scale_ = std::max(scale_, std::abs(lb_[s]));
      if (std::isfinite(ub_[s])) scale_ = std::max(scale_, std::abs(ub_[s]));
      const double r = activity[i];
      if (r >= lb_[s] - kHarrisTol && r <= ub_[s] + kHarrisTol) {
        state_[s] = VarState::Basic;
        x_[s] = r;
        head_[i] = s;
      } else {
        const double target = r < lb_[s] ? lb_[s] : ub_[s];
        x_[s] = target;
        state_[s] = r < lb_[s] ? VarState::AtLower : VarState::AtUpper;
        if (lb_[s] == ub_[s]) state_[s] = VarState::AtLower;
        // a.x - s + sign * art = 0  =>  sign * art = target - r
        const int sign = target - r > 0 ? 1 : -1;
        art_rows_.push_back(i);
        signs.push_back(sign);
        head_[i] = base + art_rows_.size() - 1;
      }
    }
    art_sign_ = std::move(signs);
    for (std::size_t a = 0; a < art_rows_.size(); ++a) {
      lb_.push_back(0.0);
      ub_.push_back(kInf);
      const std::size_t i = art_rows_[a];
      x_.push_back(std::abs(x_[n_ + i] - activity[i]));
      state_.push_back(VarState::Basic);
    }
    total_ = x_.size();
    cost_.assign(total_, 0.0);
    binv_.assign(m_ * m_, 0.0);
    refactor();
  }

  void set_costs(bool phase1) {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    if (phase1) {
      for (std::size_t j = n_ + m_; j < total_; ++j) cost_[j] = 1.0;
    } else {
      for (std::size_t j = 0; j < n_; ++j) cost_[j] = lp_.objective[j];
    }
  }

  double col_dot(std::size_t j, std::span<const double> v) const {
    if (j < n_) {
      const double* col = &colA_[j * m_];
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += col[i] * v[i];
      return s;
    }
    if (j < n_ + m_) return -v[j - n_];
    const std::size_t a = j - n_ - m_;
    return art_sign_[a] * v[art_rows_[a]];
  }

  /// Column j of the full constraint matrix, densely.
  void column(std::size_t j, Vector& out) const {
    out.assign(m_, 0.0);
    if (j < n_) {
      std::copy(colA_.begin() + static_cast<std::ptrdiff_t>(j * m_),
                colA_.begin() + static_cast<std::ptrdiff_t>((j + 1) * m_), out.begin());
    } else if (j < n_ + m_) {
      out[j - n_] = -1.0;
    } else {
      const std::size_t a = j - n_ - m_;
      out[art_rows_[a]] = art_sign_[a];
    }
  }

  void ftran(std::size_t j, Vector& alpha) const {
    alpha.assign(m_, 0.0);
    if (j < n_) {
      const double* col = &colA_[j * m_];
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = col[r];
        if (a == 0.0) continue;
        for (std::size_t i = 0; i < m_; ++i) alpha[i] += binv_[i * m_ + r] * a;
      }
    } else {
      std::size_t r;
      double a;
      if (j < n_ + m_) {
        r = j - n_;
        a = -1.0;
      } else {
        r = art_rows_[j - n_ - m_];
        a = art_sign_[j - n_ - m_];
      }
      for (std::size_t i = 0; i < m_; ++i) alpha[i] = binv_[i * m_ + r] * a;
    }
  }

  void refactor() {
    since_refactor_ = 0;
    if (m_ == 0) return;
    // Gauss-Jordan on [B | I].
    Vector aug(m_ * 2 * m_, 0.0);
    const std::size_t w = 2 * m_;
    Vector col;
    for (std::size_t k = 0; k < m_; ++k) {
      column(head_[k], col);
      for (std::size_t i = 0; i < m_; ++i) aug[i * w + k] = col[i];
      aug[k * w + m_ + k] = 1.0;
    }
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t piv = c;
      double best = std::abs(aug[c * w + c]);
      for (std::size_t r = c + 1; r < m_; ++r)
        if (std::abs(aug[r * w + c]) > best) {
          best = std::abs(aug[r * w + c]);
          piv = r;
        }
      if (best < 1e-12) throw SolverError("simplex: singular basis");
      if (piv != c)
        for (std::size_t k = 0; k < w; ++k) std::swap(aug[c * w + k], aug[piv * w + k]);
      const double inv = 1.0 / aug[c * w + c];
      for (std::size_t k = 0; k < w; ++k) aug[c * w + k] *= inv;
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = aug[r * w + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < w; ++k) aug[r * w + k] -= f * aug[c * w + k];
      }
    }
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t k = 0; k < m_; ++k) binv_[i * m_ + k] = aug[i * w + m_ + k];
    recompute_basics();
  }

  void recompute_basics() {
    Vector rhs(m_, 0.0);
    Vector col;
    for (std::size_t j = 0; j < total_; ++j) {
      if (state_[j] == VarState::Basic || x_[j] == 0.0) continue;
      if (j < n_) {
        const double* c = &colA_[j * m_];
        for (std::size_t i = 0; i < m_; ++i) rhs[i] -= c[i] * x_[j];
      } else if (j < n_ + m_) {
        rhs[j - n_] += x_[j];
      } else {
        const std::size_t a = j - n_ - m_;
        rhs[art_rows_[a]] -= art_sign_[a] * x_[j];
      }
    }
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < m_; ++r) s += binv_[i * m_ + r] * rhs[r];
      x_[head_[i]] = s;
    }
  }

  void compute_duals() {
    y_.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const double c = cost_[head_[i]];
      if (c == 0.0) continue;
      const double* row = &binv_[i * m_];
      for (std::size_t r = 0; r < m_; ++r) y_[r] += c * row[r];
    }
  }

  /// Returns false when the phase objective is unbounded below.
  bool iterate(bool phase1) {
    Vector alpha;
    std::size_t degenerate = 0;
    bool bland = bland_always_;
    for (;;) {
      if (++iterations_ > max_iter_) throw SolverError("simplex: iteration limit reached");
      if (since_refactor_ >= kRefactorEvery) refactor();
      compute_duals();

      std::size_t q = total_;
      double dq = 0.0;
      double best = 0.0;
      for (std::size_t j = 0; j < total_; ++j) {
        const VarState st = state_[j];
        if (st == VarState::Basic || lb_[j] == ub_[j]) continue;
        const double d = cost_[j] - col_dot(j, y_);
        const bool eligible = (st == VarState::AtLower && d < -opts_.optimality_tol) ||
                              (st == VarState::AtUpper && d > opts_.optimality_tol) ||
                              (st == VarState::Free && std::abs(d) > opts_.optimality_tol);
        if (!eligible) continue;
        if (bland) {
          q = j;
          dq = d;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          q = j;
          dq = d;
        }
      }
      if (q == total_) return true;

      const double dir = dq < 0.0 ? 1.0 : -1.0;
      ftran(q, alpha);

      // Harris pass 1: largest step keeping every basic within tolerance-relaxed bounds.
      double theta_max = kInf;
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = dir * alpha[i];
        const std::size_t j = head_[i];
        if (a > kPivotTol && lb_[j] > -kInf)
          theta_max = std::min(theta_max, (x_[j] - lb_[j] + kHarrisTol) / a);
        else if (a < -kPivotTol && ub_[j] < kInf)
          theta_max = std::min(theta_max, (ub_[j] - x_[j] + kHarrisTol) / -a);
      }
      const double flip = (lb_[q] > -kInf && ub_[q] < kInf) ? ub_[q] - lb_[q] : kInf;
      if (theta_max == kInf && flip == kInf) {
        if (phase1) throw SolverError("simplex: phase one reported an unbounded ray");
        return false;
      }

      std::size_t leave = m_;
      double theta = 0.0;
      if (flip <= theta_max) {
        theta = flip;
      } else {
        // Pass 2: among ratios within theta_max take the largest pivot.
        double best_piv = 0.0;
        double best_ratio = kInf;
        for (std::size_t i = 0; i < m_; ++i) {
          const double a = dir * alpha[i];
          const std::size_t j = head_[i];
          double ratio;
          if (a > kPivotTol && lb_[j] > -kInf) ratio = (x_[j] - lb_[j]) / a;
          else if (a < -kPivotTol && ub_[j] < kInf) ratio = (ub_[j] - x_[j]) / -a;
          else continue;
          if (ratio > theta_max) continue;
          if (bland) {
            if (ratio < best_ratio - 1e-12 || (std::abs(ratio - best_ratio) <= 1e-12 && head_[i] < head_[leave])) {
              best_ratio = ratio;
              leave = i;
            }
          } else if (std::abs(a) > best_piv) {
            best_piv = std::abs(a);
            leave = i;
            best_ratio = ratio;
          }
        }
        if (leave == m_) throw SolverError("simplex: ratio test failed");
        theta = std::max(0.0, best_ratio);
      }

      if (theta < 1e-12) {
        if (++degenerate > kDegenerateLimit) bland = true;
      } else {
        degenerate = 0;
        bland = bland_always_;
      }

      for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] -= dir * theta * alpha[i];
      x_[q] += dir * theta;

      if (leave == m_) {
        // Bound flip: the entering variable crosses its whole range.
        if (state_[q] == VarState::AtLower) {
          state_[q] = VarState::AtUpper;
          x_[q] = ub_[q];
        } else {
          state_[q] = VarState::AtLower;
          x_[q] = lb_[q];
        }
        continue;
      }

      const std::size_t out = head_[leave];
      const double a_out = dir * alpha[leave];
      if (a_out > 0.0) {
        state_[out] = VarState::AtLower;
        x_[out] = lb_[out];
      } else {
        state_[out] = VarState::AtUpper;
        x_[out] = ub_[out];
      }
      if (lb_[out] == ub_[out]) state_[out] = VarState::AtLower;
      state_[q] = VarState::Basic;
      head_[leave] = q;

      const double piv = alpha[leave];
      double* prow = &binv_[leave * m_];
      for (std::size_t k = 0; k < m_; ++k) prow[k] /= piv;
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == leave || alpha[i] == 0.0) continue;
        const double f = alpha[i];
        double* row = &binv_[i * m_];
        for (std::size_t k = 0; k < m_; ++k) row[k] -= f * prow[k];
      }
      ++since_refactor_;
    }
  }

  const LinearProgram& lp_;
  std::size_t m_;
  std::size_t n_;
  std::size_t total_ = 0;
  LpOptions opts_;
  bool bland_always_;
  std::size_t max_iter_ = 0;
  std::size_t iterations_ = 0;
  std::size_t since_refactor_ = 0;
  double scale_ = 1.0;
  std::vector<double> colA_;
  Vector lb_, ub_, x_, cost_, y_;
  std::vector<VarState> state_;
  std::vector<std::size_t> art_rows_;
  std::vector<int> art_sign_;
  std::vector<std::size_t> head_;
  Vector binv_;
};

void maybe_dump(const LinearProgram& lp) {
  static const char* dir = std::getenv("PRESCRIPTOR_DUMP_LP");
  if (!dir || !*dir) return;
  static std::atomic<std::size_t> counter{0};
  const std::size_t id = counter.fetch_add(1);
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / ("subproblem_" + std::to_string(id) + ".lp"));
  write_lp_text(out, lp, "subproblem_" + std::to_string(id));
}

SolveResult run_simplex(const LinearProgram& lp, std::span<const double> lo, std::span<const double> hi,
                        const LpOptions& opts_in) {
  if (opts_in.warm) {
    try {
      Simplex s(lp, lo, hi, opts_in, false);
      // Only an optimum is trusted; other verdicts are confirmed cold.
      auto r = s.run_warm();
      if (r.status == SolveStatus::Optimal) return r;
    } catch (const SolverError&) {
    }
  }
  LpOptions opts = opts_in;
  opts.warm = nullptr;
  // Dantzig pricing first; Bland's rule from scratch if that fails numerically.
  try {
    Simplex s(lp, lo, hi, opts, false);
    return s.run();
  } catch (const SolverError&) {
  }
  try {
    Simplex s(lp, lo, hi, opts, true);
    return s.run();
  } catch (const SolverError& e) {
    std::ostringstream os;
    os << "LP solve failed after restart (" << lp.n_rows() << " rows, " << lp.n_cols() << " cols): " << e.what();
    throw SolverError(os.str());
  }
}

} // namespace

SolveResult solve_lp(const LinearProgram& lp, const LpOptions& opts) {
  lp.check();
  if (lp.has_integers()) throw InputError("solve_lp: integrality flags set; use solve_mip");
  maybe_dump(lp);
  return run_simplex(lp, lp.col_lower, lp.col_upper, opts);
}

SolveResult solve_mip(const LinearProgram& lp, const MipOptions& opts) {
  lp.check();
  maybe_dump(lp);
  const std::size_t n = lp.n_cols();
  std::vector<std::size_t> int_cols;
  for (std::size_t j = 0; j < n; ++j)
    if (!lp.integer.empty() && lp.integer[j]) {
      if (!std::isfinite(lp.col_lower[j]) || !std::isfinite(lp.col_upper[j]))
        throw InputError("solve_mip: integer variables must be bounded");
      int_cols.push_back(j);
    }

  struct Node {
    double bound;
    std::size_t id;
    Vector lo, hi;
  };
  auto worse = [](const Node& a, const Node& b) {
    return a.bound > b.bound || (a.bound == b.bound && a.id > b.id);
  };
  LpOptions node_lp = opts.lp;
  node_lp.warm = nullptr;
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);

  SolveResult best;
  best.status = SolveStatus::Infeasible;
  double incumbent = kInf;
  std::size_t nodes = 0;
  std::size_t next_id = 0;
  open.push({-kInf, next_id++, lp.col_lower, lp.col_upper});
  // Integer bounds are rounded inward once.
  {
    Node root = open.top();
    open.pop();
    for (std::size_t j : int_cols) {
      root.lo[j] = std::ceil(root.lo[j] - opts.integrality_tol);
      root.hi[j] = std::floor(root.hi[j] + opts.integrality_tol);
      if (root.lo[j] > root.hi[j]) {
        best.nodes = 0;
        return best;
      }
    }
    open.push(std::move(root));
  }

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (node.bound >= incumbent - opts.absolute_gap) break;
    if (++nodes > opts.node_limit) {
      std::optional<Vector> inc;
      if (best.status == SolveStatus::Optimal) inc = best.x;
      throw NodeLimitError("branch-and-bound node limit reached", inc, incumbent, node.bound);
    }
    SolveResult r = run_simplex(lp, node.lo, node.hi, node_lp);
    if (r.status == SolveStatus::Unbounded) {
      if (nodes == 1) {
        r.has_duals = false;
        r.nodes = nodes;
        return r;
      }
      throw SolverError("solve_mip: unbounded relaxation below the root");
    }
    if (r.status != SolveStatus::Optimal) continue;
    if (r.objective >= incumbent - opts.absolute_gap) continue;

    std::size_t branch = n;
    double most = 0.0;
    for (std::size_t j : int_cols) {
      const double f = r.x[j] - std::floor(r.x[j]);
      const double dist = std::min(f, 1.0 - f);
      if (dist > opts.integrality_tol && dist > most) {
        most = dist;
        branch = j;
      }
    }
    if (branch == n) {
      for (std::size_t j : int_cols) r.x[j] = std::round(r.x[j]);
      r.objective = dot(lp.objective, r.x);
      incumbent = r.objective;
      best = std::move(r);
      continue;
    }
    Node down{r.objective, next_id++, node.lo, node.hi};
    down.hi[branch] = std::floor(r.x[branch]);
    Node up{r.objective, next_id++, std::move(node.lo), std::move(node.hi)};
    up.lo[branch] = std::ceil(r.x[branch]);
    open.push(std::move(down));
    open.push(std::move(up));
  }
  best.nodes = nodes;
  best.has_duals = false;
  best.duals.clear();
  best.reduced_costs.clear();
  best.basis.clear();
  return best;
}

SolveResult solve(const LinearProgram& lp, const MipOptions& opts) {
  return lp.has_integers() ? solve_mip(lp, opts) : solve_lp(lp, opts.lp);
}

void write_lp_text(std::ostream& out, const LinearProgram& lp, const std::string& name) {
  auto term = [&out](double c, std::size_t j, bool first) {
    if (c == 0.0) return false;
    if (c < 0.0) out << " - ";
    else if (!first) out << " + ";
    out << format_double(std::abs(c)) << " x" << j;
    return true;
  };
  out << "\\ " << name << "\nMinimize\n obj:";
  bool any = false;
  for (std::size_t j = 0; j < lp.n_cols(); ++j) any |= term(lp.objective[j], j, !any);
  if (!any) out << " 0 x0";
  out << "\nSubject To\n";
  for (std::size_t i = 0; i < lp.n_rows(); ++i) {
    auto emit = [&](const char* sense, double rhs, const std::string& tag) {
      out << " r" << i << tag << ":";
      bool first = true;
      for (std::size_t j = 0; j < lp.n_cols(); ++j)
        if (term(lp.A(i, j), j, first)) first = false;
      if (first) out << " 0 x0";
      out << ' ' << sense << ' ' << format_double(rhs) << '\n';
    };
    const double lo = lp.row_lower[i];
    const double hi = lp.row_upper[i];
    if (lo == hi) emit("=", lo, "");
    else {
      if (hi < kInf) emit("<=", hi, lo > -kInf ? "_u" : "");
      if (lo > -kInf) emit(">=", lo, hi < kInf ? "_l" : "");
    }
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < lp.n_cols(); ++j) {
    const double lo = lp.col_lower[j];
    const double hi = lp.col_upper[j];
    if (lo == -kInf && hi == kInf) out << " x" << j << " free\n";
    else {
      out << ' ' << (lo == -kInf ? std::string("-inf") : format_double(lo)) << " <= x" << j
          << " <= " << (hi == kInf ? std::string("+inf") : format_double(hi)) << '\n';
    }
  }
  bool has_int = false;
  for (std::size_t j = 0; j < lp.n_cols(); ++j)
    if (!lp.integer.empty() && lp.integer[j]) {
      if (!has_int) out << "Binaries\n";
      has_int = true;
      out << " x" << j << '\n';
    }
  out << "End\n";
}

// ------------------------------------------------------------- stage solves

std::string to_string(CutFamily f) {
  switch (f) {
  case CutFamily::Benders: return "benders";
  case CutFamily::Integer: return "integer";
  case CutFamily::Lagrangian: return "lagrangian";
  }
  return "?";
}

CutFamily cut_family_from_string(const std::string& s) {
  if (s == "benders") return CutFamily::Benders;
  if (s == "integer") return CutFamily::Integer;
  if (s == "lagrangian") return CutFamily::Lagrangian;
  throw InputError("unknown cut family '" + s + "' (expected benders, integer or lagrangian)");
}

std::optional<Cut> CutSlice::support(std::span<const double> s) const {
  std::optional<Cut> best;
  double best_value = lower_;
  for (const auto& c : cuts_) {
    const double v = c.value(s);
    if (v > best_value) {
      best_value = v;
      best = c;
    }
  }
  return best;
}

StageSolution fix_state_and_solve(const StageTemplate& stage, std::span<const double> state,
                                  std::span<const double> uncertainty, const FutureCost* future,
                                  const StageSolveOptions& opts) {
  const std::size_t p = stage.n_dec();
  const std::size_t ns = stage.n_state;
  const bool lagrangian = opts.lagrange_multipliers != nullptr;
  if (state.size() != ns && !lagrangian) throw InputError("fix_state_and_solve: state dimension mismatch");
  if (uncertainty.size() != stage.n_uncertainty)
    throw InputError("fix_state_and_solve: uncertainty dimension mismatch");
  if (lagrangian && opts.lagrange_multipliers->size() != ns)
    throw InputError("fix_state_and_solve: multiplier dimension mismatch");
  const bool with_theta = future != nullptr;
  const bool integral = stage.has_binaries() && !opts.relax_integrality;

  // The incoming state enters the right-hand side directly; only the
  // Lagrangian relaxation needs explicit copies sigma in [0,1].
  const std::size_t nsig = lagrangian ? ns : 0;
  LinearProgram lp;
  const std::size_t ncol = p + nsig + (with_theta ? 1 : 0);
  lp.objective.assign(ncol, 0.0);
  lp.col_lower.assign(ncol, 0.0);
  lp.col_upper.assign(ncol, 0.0);
  lp.integer.assign(ncol, false);
  for (std::size_t j = 0; j < p; ++j) {
    lp.objective[j] = stage.cost[j];
    lp.col_lower[j] = stage.lower[j];
    lp.col_upper[j] = stage.upper[j];
    lp.integer[j] = integral && stage.kind[j] == VarKind::Binary;
  }
  for (std::size_t k = 0; k < nsig; ++k) {
    lp.objective[p + k] = -(*opts.lagrange_multipliers)[k];
    lp.col_lower[p + k] = 0.0;
    lp.col_upper[p + k] = 1.0;
  }
  const std::size_t theta_col = p + nsig;
  if (with_theta) {
    lp.objective[theta_col] = 1.0;
    lp.col_lower[theta_col] = future->lower_bound();
    lp.col_upper[theta_col] = kInf;
  }
  lp.A = Matrix(0, ncol);
  Vector row(ncol);
  for (std::size_t r = 0; r < stage.n_rows(); ++r) {
    std::fill(row.begin(), row.end(), 0.0);
    auto w = stage.W.row(r);
    for (std::size_t j = 0; j < p; ++j) row[j] = w[j];
    double rhs = stage.h[r];
    for (std::size_t k = 0; k < ns; ++k) {
      if (lagrangian) row[p + k] = -stage.T(r, k);
      else rhs += stage.T(r, k) * state[k];
    }
    for (std::size_t u = 0; u < stage.n_uncertainty; ++u) rhs += stage.U(r, u) * uncertainty[u];
    lp.add_row(row, stage.equality[r] ? rhs : -kInf, rhs);
  }

  StageSolution sol;
  std::vector<Cut> added;
  SolveResult res;
  // Continuous stages re-optimize from the previous basis after each cut.
  const bool warmable = !lp.has_integers();
  WarmStart warm;
  MipOptions solve_opts = opts.mip;
  auto cut_row = [&](const Cut& piece) {
    // theta >= beta + pi.(F z)   <=>   (F^T pi).z - theta <= -beta
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < piece.slope.size(); ++k) s += piece.slope[k] * stage.transition(k, j);
      row[j] = s;
    }
    row[theta_col] = -1.0;
    lp.add_row(row, -kInf, -piece.intercept);
  };
  StageReuse* reuse = warmable && with_theta && !lagrangian ? opts.reuse : nullptr;
  if (reuse) {
    for (const auto& c : reuse->rows) cut_row(c);
    added = reuse->rows;
    if (!reuse->rows.empty() && reuse->basis.basis.size() == lp.n_rows()) {
      warm = reuse->basis;
      solve_opts.lp.warm = &warm;
    }
  }
  for (;;) {
    res = solve(lp, solve_opts);
    sol.status = res.status;
    if (res.status != SolveStatus::Optimal) return sol;
    if (!with_theta) break;
    const Vector next = stage.transition.multiply(std::span<const double>(res.x.data(), p));
    const double theta = res.x[theta_col];
    auto piece = future->support(next);
    if (!piece) break;
    const double v = piece->value(next);
    if (v <= theta + 1e-9 * std::max(1.0, std::abs(v))) break;
    bool repeat = false;
    for (const auto& c : added)
      if (c.intercept == piece->intercept && c.slope == piece->slope) repeat = true;
    if (repeat) break;
    if (++sol.separation_rounds > opts.max_separation_rounds)
      throw SolverError("fix_state_and_solve: separation did not converge");
    cut_row(*piece);
    added.push_back(std::move(*piece));
    if (warmable && res.basis.size() + 1 == lp.n_rows()) {
      warm.basis = res.basis;
      warm.basis.push_back(ncol + lp.n_rows() - 1);
      warm.at_upper = res.at_upper;
      warm.at_upper.push_back(false);
      solve_opts.lp.warm = &warm;
    }
  }

  sol.cut_rows = added.size();
  if (reuse) {
    reuse->basis = {res.basis, res.at_upper};
    reuse->rows = std::move(added);
  }
  sol.objective = res.objective;
  sol.decision.assign(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(p));
  if (lagrangian)
    sol.state_copy.assign(res.x.begin() + static_cast<std::ptrdiff_t>(p),
                          res.x.begin() + static_cast<std::ptrdiff_t>(p + ns));
  else
    sol.state_copy.assign(state.begin(), state.end());
  sol.stage_cost = dot(stage.cost, sol.decision);
  sol.theta = with_theta ? res.x[theta_col] : 0.0;
  sol.next_state = stage.transition.multiply(sol.decision);
  if (!lagrangian) {
    if (res.has_duals) {
      // d obj / d s_k through the right-hand sides h + T s + U y.
      sol.state_duals.assign(ns, 0.0);
      for (std::size_t r = 0; r < stage.n_rows(); ++r)
        for (std::size_t k = 0; k < ns; ++k) sol.state_duals[k] += res.duals[r] * stage.T(r, k);
    } else {
      StageSolveOptions relaxed = opts;
      relaxed.relax_integrality = true;
      auto lp_sol = fix_state_and_solve(stage, state, uncertainty, future, relaxed);
      sol.state_duals = std::move(lp_sol.state_duals);
    }
  }
  return sol;
}

} // namespace prescriptor
