#include "prescriptor/sddp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace prescriptor {

// ----------------------------------------------------------------- cut pool

double CutList::value(std::size_t k, std::span<const double> s) const {
  const double* p = data_.data() + k * (dim_ + 1);
  double v = p[0];
  for (std::size_t d = 0; d < dim_; ++d) v += p[d + 1] * s[d];
  return v;
}

Cut CutList::cut(std::size_t k) const {
  Cut c;
  c.intercept = intercept(k);
  auto sl = slope(k);
  c.slope.assign(sl.begin(), sl.end());
  c.family = family_[k];
  c.origin = origin_[k];
  return c;
}

std::pair<std::size_t, double> CutList::argmax(std::span<const double> s) const {
  std::size_t best = size();
  double bv = -kInf;
  for (std::size_t k = 0; k < size(); ++k) {
    const double v = value(k, s);
    if (v > bv) {
      bv = v;
      best = k;
    }
  }
  return {best, bv};
}

void CutList::push_back(const Cut& c) {
  if (c.slope.size() != dim_)
    throw InputError("cut has " + std::to_string(c.slope.size()) + " slope entries, expected " + std::to_string(dim_));
  data_.push_back(c.intercept);
  data_.insert(data_.end(), c.slope.begin(), c.slope.end());
  origin_.push_back(c.origin);
  family_.push_back(c.family);
}

Cut TrialCuts::aggregate(const WeightVector& w, double lower, std::size_t dim) const {
  Cut out;
  out.family = family;
  out.origin = origin;
  out.slope.assign(dim, 0.0);
  double mass = 0.0;
  for (std::size_t a = 0; a < samples.size(); ++a) {
    const double wm = w[samples[a]];
    if (wm == 0.0) continue;
    mass += wm;
    out.intercept += wm * cuts[a].intercept;
    for (std::size_t d = 0; d < dim; ++d) out.slope[d] += wm * cuts[a].slope[d];
  }
  // Mass outside the trial's samples falls back to the lower bound.
  const double rest = 1.0 - mass;
  if (rest > 0.0) out.intercept += rest * lower;
  return out;
}

CutPool::CutPool(Vector lower_bounds, std::vector<std::size_t> state_dims, std::size_t n_samples)
    : lower_(std::move(lower_bounds)), dims_(std::move(state_dims)), n_samples_(n_samples), keyed_(lower_.size()),
      trials_(lower_.size()) {
  if (dims_.size() != lower_.size()) throw InputError("cut pool: one state dimension per stage expected");
  for (std::size_t d : dims_) per_sample_.emplace_back(n_samples_, CutList(d));
}

const CutList& CutPool::keyed(std::size_t t, CovariateKey key) const {
  static const CutList empty_list;
  const auto& m = keyed_.at(t - 1);
  auto it = m.find(key);
  return it == m.end() ? empty_list : it->second;
}

std::vector<CovariateKey> CutPool::keys(std::size_t t) const {
  std::vector<CovariateKey> out;
  for (const auto& [k, v] : keyed_.at(t - 1)) out.push_back(k);
  return out;
}

void CutPool::add_keyed(std::size_t t, CovariateKey key, const Cut& cut) {
  auto& m = keyed_.at(t - 1);
  auto it = m.find(key);
  if (it == m.end()) it = m.emplace(key, CutList(dims_[t - 1])).first;
  it->second.push_back(cut);
}

void CutPool::add_trial(std::size_t t, TrialCuts trial) {
  if (trial.samples.size() != trial.cuts.size()) throw InputError("trial cuts: one cut per sample expected");
  for (std::size_t m : trial.samples)
    if (m >= n_samples_) throw InputError("trial cuts: sample index out of range");
  for (const auto& c : trial.cuts)
    if (c.slope.size() != dims_.at(t - 1)) throw InputError("trial cuts: slope length differs from the state dimension");
  for (std::size_t a = 0; a < trial.samples.size(); ++a) {
    Cut c = trial.cuts[a];
    c.family = trial.family;
    c.origin = trial.origin;
    per_sample_[t - 1][trial.samples[a]].push_back(c);
  }
  trials_.at(t - 1).push_back(std::move(trial));
}

std::size_t CutPool::keyed_size() const {
  std::size_t n = 0;
  for (const auto& m : keyed_)
    for (const auto& [k, v] : m) n += v.size();
  return n;
}

std::size_t CutPool::trial_count() const {
  std::size_t n = 0;
  for (const auto& v : trials_) n += v.size();
  return n;
}

double CutPool::value(std::size_t t, CovariateKey key, std::span<const double> s) const {
  const auto [k, v] = keyed(t, key).argmax(s);
  return std::max(lower_bound(t), v);
}

CutList CutPool::materialize(std::size_t t, const WeightVector& w) const {
  if (w.size() != n_samples_) throw InputError("cut pool: weight vector length differs from the training size");
  CutList out(state_dim(t));
  for (const auto& tr : trials(t)) out.push_back(tr.aggregate(w, lower_bound(t), state_dim(t)));
  return out;
}

bool operator==(const CutPool& a, const CutPool& b) {
  auto same_list = [](const CutList& x, const CutList& y) {
    if (x.size() != y.size() || x.dim() != y.dim()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const Cut cx = x.cut(k), cy = y.cut(k);
      if (cx.intercept != cy.intercept || cx.slope != cy.slope || cx.family != cy.family) return false;
    }
    return true;
  };
  if (a.lower_ != b.lower_ || a.dims_ != b.dims_ || a.n_samples_ != b.n_samples_) return false;
  for (std::size_t t = 0; t < a.keyed_.size(); ++t) {
    if (a.keyed_[t].size() != b.keyed_[t].size() || a.trials_[t].size() != b.trials_[t].size()) return false;
    for (const auto& [k, v] : a.keyed_[t]) {
      auto it = b.keyed_[t].find(k);
      if (it == b.keyed_[t].end() || !same_list(v, it->second)) return false;
    }
    for (std::size_t r = 0; r < a.trials_[t].size(); ++r) {
      const auto& x = a.trials_[t][r];
      const auto& y = b.trials_[t][r];
      if (x.family != y.family || x.samples != y.samples) return false;
      for (std::size_t c = 0; c < x.cuts.size(); ++c)
        if (x.cuts[c].intercept != y.cuts[c].intercept || x.cuts[c].slope != y.cuts[c].slope) return false;
    }
  }
  return true;
}

std::optional<Cut> ListView::support(std::span<const double> s) const {
  const auto [k, v] = list_.argmax(s);
  if (k == list_.size() || v <= lower_) return std::nullopt;
  return list_.cut(k);
}

SampleView::SampleView(const CutPool& pool, std::size_t t, const WeightVector& w) : pool_(pool), t_(t) {
  if (t < 1 || t > pool.horizon()) throw InputError("sample view: stage outside 1..T");
  if (w.size() != pool.n_samples()) throw InputError("sample view: weight vector length differs from the training size");
  support_ = w.support();
}

std::optional<Cut> SampleView::support(std::span<const double> s) const {
  const double L = pool_.lower_bound(t_);
  std::vector<std::size_t> chosen(support_.size());
  bool any = false;
  for (std::size_t a = 0; a < support_.size(); ++a) {
    const auto& list = pool_.sample_cuts(t_, support_[a].first);
    auto [k, v] = list.argmax(s);
    if (k == list.size() || v <= L) {
      k = list.size();
    } else {
      any = true;
    }
    chosen[a] = k;
  }
  if (!any) return std::nullopt;
  Cut out;
  out.slope.assign(s.size(), 0.0);
  out.origin.stage = t_;
  for (std::size_t a = 0; a < support_.size(); ++a) {
    const double w = support_[a].second;
    const auto& list = pool_.sample_cuts(t_, support_[a].first);
    if (chosen[a] == list.size()) {
      out.intercept += w * L;
      continue;
    }
    out.intercept += w * list.intercept(chosen[a]);
    auto sl = list.slope(chosen[a]);
    for (std::size_t d = 0; d < s.size(); ++d) out.slope[d] += w * sl[d];
  }
  return out;
}

nlohmann::json cut_to_json(const Cut& c) {
  return {{"intercept", c.intercept},
          {"slope", c.slope},
          {"family", to_string(c.family)},
          {"origin", {c.origin.iteration, c.origin.stage, c.origin.trial}}};
}

Cut cut_from_json(const nlohmann::json& j) {
  Cut c;
  c.intercept = j.at("intercept").get<double>();
  c.slope = j.at("slope").get<Vector>();
  c.family = cut_family_from_string(j.at("family").get<std::string>());
  if (j.contains("origin")) {
    const auto& o = j.at("origin");
    c.origin = {o.at(0).get<std::size_t>(), o.at(1).get<std::size_t>(), o.at(2).get<std::size_t>()};
  }
  return c;
}

nlohmann::json pool_to_json(const CutPool& pool) {
  nlohmann::json keyed = nlohmann::json::array();
  nlohmann::json trials = nlohmann::json::array();
  Vector lb;
  std::vector<std::size_t> dims;
  for (std::size_t t = 1; t <= pool.horizon(); ++t) {
    lb.push_back(pool.lower_bound(t));
    dims.push_back(pool.state_dim(t));
    for (CovariateKey key : pool.keys(t)) {
      const auto& list = pool.keyed(t, key);
      nlohmann::json arr = nlohmann::json::array();
      for (std::size_t k = 0; k < list.size(); ++k) arr.push_back(cut_to_json(list.cut(k)));
      keyed.push_back({{"stage", t}, {"key", key}, {"cuts", arr}});
    }
    for (const auto& tr : pool.trials(t)) {
      nlohmann::json cuts = nlohmann::json::array();
      for (const auto& c : tr.cuts) cuts.push_back({{"intercept", c.intercept}, {"slope", c.slope}});
      trials.push_back({{"stage", t},
                        {"family", to_string(tr.family)},
                        {"origin", {tr.origin.iteration, tr.origin.stage, tr.origin.trial}},
                        {"samples", tr.samples},
                        {"cuts", cuts}});
    }
  }
  return {{"lower_bounds", lb}, {"state_dims", dims}, {"n_samples", pool.n_samples()},
          {"keyed", keyed},     {"trials", trials}};
}

CutPool pool_from_json(const nlohmann::json& j) {
  CutPool pool(j.at("lower_bounds").get<Vector>(), j.at("state_dims").get<std::vector<std::size_t>>(),
               j.at("n_samples").get<std::size_t>());
  for (const auto& e : j.at("keyed"))
    for (const auto& c : e.at("cuts"))
      pool.add_keyed(e.at("stage").get<std::size_t>(), e.at("key").get<CovariateKey>(), cut_from_json(c));
  for (const auto& e : j.at("trials")) {
    TrialCuts tr;
    tr.family = cut_family_from_string(e.at("family").get<std::string>());
    const auto& o = e.at("origin");
    tr.origin = {o.at(0).get<std::size_t>(), o.at(1).get<std::size_t>(), o.at(2).get<std::size_t>()};
    tr.samples = e.at("samples").get<std::vector<std::size_t>>();
    for (const auto& c : e.at("cuts")) {
      Cut cut;
      cut.intercept = c.at("intercept").get<double>();
      cut.slope = c.at("slope").get<Vector>();
      cut.family = tr.family;
      cut.origin = tr.origin;
      tr.cuts.push_back(std::move(cut));
    }
    pool.add_trial(e.at("stage").get<std::size_t>(), std::move(tr));
  }
  return pool;
}

// ------------------------------------------------------------------- bounds

UpperBound statistical_upper_bound(std::span<const double> costs, double alpha) {
  if (costs.size() < 2) throw InputError("statistical upper bound needs at least two forward samples");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("confidence level alpha must lie in (0, 1]");
  const double M = static_cast<double>(costs.size());
  UpperBound b;
  for (double c : costs) b.mean += c;
  b.mean /= M;
  double ss = 0.0;
  for (double c : costs) ss += (c - b.mean) * (c - b.mean);
  b.std = std::sqrt(ss / (M - 1.0));
  const double z = alpha >= 1.0 ? 0.0 : normal_quantile(1.0 - alpha / 2.0);
  b.ub = b.mean + z * b.std / std::sqrt(M);
  return b;
}

// --------------------------------------------------------------------- cuts

namespace {

StageSolution solve_or_throw(const CutContext& ctx, const StageSolveOptions& opts, const char* what) {
  auto sol = fix_state_and_solve(*ctx.stage, ctx.state, ctx.uncertainty, ctx.future, opts);
  if (sol.status != SolveStatus::Optimal)
    throw InfeasibleError(std::string(what) + ": stage " + std::to_string(ctx.stage->stage) + " subproblem is " +
                          to_string(sol.status));
  return sol;
}

void require_binary(std::span<const double> s, const char* what) {
  for (double v : s)
    if (v != 0.0 && v != 1.0) throw InputError(std::string(what) + " needs a binary trial state");
}

} // namespace

Cut benders_cut(const CutContext& ctx) {
  StageSolveOptions o;
  o.relax_integrality = true;
  o.mip = ctx.mip;
  o.reuse = ctx.reuse;
  const auto sol = solve_or_throw(ctx, o, "Benders cut");
  Cut c;
  c.family = CutFamily::Benders;
  c.slope = sol.state_duals;
  c.intercept = sol.objective - dot(c.slope, ctx.state);
  return c;
}

Cut integer_optimality_cut(const CutContext& ctx) {
  require_binary(ctx.state, "integer optimality cut");
  StageSolveOptions o;
  o.mip = ctx.mip;
  const auto sol = solve_or_throw(ctx, o, "integer optimality cut");
  const double P = sol.objective;
  const double gap = P - ctx.lower_bound;
  // Hamming(s, s^j) = sum_k s^j_k + s_k (1 - 2 s^j_k)
  Cut c;
  c.family = CutFamily::Integer;
  c.slope.resize(ctx.state.size());
  double ones = 0.0;
  for (std::size_t k = 0; k < ctx.state.size(); ++k) {
    ones += ctx.state[k];
    c.slope[k] = -gap * (1.0 - 2.0 * ctx.state[k]);
  }
  c.intercept = P - gap * ones;
  return c;
}

namespace {

struct InnerValue {
  double value;
  Vector sigma;
};

InnerValue inner(const CutContext& ctx, const Vector& pi) {
  StageSolveOptions o;
  o.mip = ctx.mip;
  o.lagrange_multipliers = &pi;
  auto sol = fix_state_and_solve(*ctx.stage, {}, ctx.uncertainty, ctx.future, o);
  if (sol.status != SolveStatus::Optimal)
    throw InfeasibleError("Lagrangian inner problem at stage " + std::to_string(ctx.stage->stage) + " is " +
                          to_string(sol.status));
  return {sol.objective, std::move(sol.state_copy)};
}

} // namespace

double lagrangian_inner(const CutContext& ctx, const Vector& pi) { return inner(ctx, pi).value; }

LagrangianResult lagrangian_cut(const CutContext& ctx, const LagrangianOptions& opts) {
  require_binary(ctx.state, "Lagrangian cut");
  const std::size_t p = ctx.state.size();
  double box = opts.box;
  if (box <= 0.0) {
    double mc = 1.0;
    for (double c : ctx.stage->cost) mc = std::max(mc, std::abs(c));
    box = 10.0 * mc;
  }

  LagrangianResult res;
  Vector pi(p, 0.0);
  double best = -kInf;
  Vector best_pi = pi;
  double best_inner = 0.0;

  // Master: max eta s.t. eta <= f_k + g_k.(pi - pi_k), pi in the box.
  LinearProgram master;
  master.objective.assign(p + 1, 0.0);
  master.objective[p] = -1.0;
  master.col_lower.assign(p + 1, -box);
  master.col_upper.assign(p + 1, box);
  master.col_lower[p] = -kInf;
  master.col_upper[p] = kInf;
  master.integer.assign(p + 1, false);
  master.A = Matrix(0, p + 1);
  Vector row(p + 1);

  for (;;) {
    const auto iv = inner(ctx, pi);
    ++res.evaluations;
    const double f = iv.value + dot(pi, ctx.state);
    if (f > best) {
      best = f;
      best_pi = pi;
      best_inner = iv.value;
    }
    if (p == 0) break;
    // eta - g.pi <= f - g.pi_k with g = s^j - sigma
    double rhs = f;
    for (std::size_t k = 0; k < p; ++k) {
      const double g = ctx.state[k] - iv.sigma[k];
      row[k] = -g;
      rhs -= g * pi[k];
    }
    row[p] = 1.0;
    master.add_row(row, -kInf, rhs);
    const auto m = solve_lp(master);
    if (m.status != SolveStatus::Optimal) throw SolverError("Lagrangian master problem failed");
    const double upper = -m.objective;
    if (upper - best <= opts.tolerance * (1.0 + std::abs(best))) break;
    if (res.evaluations >= opts.max_evaluations) {
      res.capped = true;
      break;
    }
    pi.assign(m.x.begin(), m.x.begin() + static_cast<std::ptrdiff_t>(p));
  }

  res.dual_value = best;
  res.cut.family = CutFamily::Lagrangian;
  res.cut.slope = best_pi;
  res.cut.intercept = best_inner;
  return res;
}

namespace {

/// Stage t-1 transition row k copies one binary decision.
bool copies_binary(const StageTemplate& prev, std::size_t k) {
  std::size_t nz = 0;
  bool ok = true;
  for (std::size_t j = 0; j < prev.n_dec(); ++j) {
    const double f = prev.transition(k, j);
    if (f == 0.0) continue;
    ++nz;
    ok = ok && f == 1.0 && prev.kind[j] == VarKind::Binary;
  }
  return ok && nz == 1;
}

} // namespace

bool state_is_binary(const ProblemInstance& instance, std::size_t t) {
  if (t < 1 || t > instance.horizon()) throw InputError("state_is_binary: stage outside 1..T");
  const auto& prev = instance.stages[t - 1];
  for (std::size_t k = 0; k < prev.n_next_state(); ++k)
    if (!copies_binary(prev, k)) return false;
  return true;
}

ProblemInstance binary_expansion(const ProblemInstance& instance, std::size_t bits) {
  if (bits == 0 || bits > 30) throw InputError("binary expansion: bit width must be in 1..30");
  const std::size_t T = instance.horizon();
  struct Enc {
    bool binary;
    std::size_t offset, count;
    double lo, step;
  };
  // enc[t][k]: encoding of incoming state component k of stage t (t >= 1).
  std::vector<std::vector<Enc>> enc(T + 1);
  std::vector<std::size_t> width(T + 1, 0);
  const double levels = std::ldexp(1.0, static_cast<int>(bits)) - 1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const auto& st = instance.stages[t];
    const auto& prev = instance.stages[t - 1];
    std::size_t off = 0;
    for (std::size_t k = 0; k < st.n_state; ++k) {
      if (copies_binary(prev, k)) {
        enc[t].push_back({true, off, 1, 0.0, 1.0});
        off += 1;
        continue;
      }
      if (st.state_lower.size() != st.n_state || st.state_upper.size() != st.n_state ||
          !std::isfinite(st.state_lower[k]) || !std::isfinite(st.state_upper[k]) ||
          st.state_upper[k] <= st.state_lower[k])
        throw InputError("binary expansion: stage " + std::to_string(t) + " state " + std::to_string(k) +
                         " needs a finite declared range");
      enc[t].push_back({false, off, bits, st.state_lower[k], (st.state_upper[k] - st.state_lower[k]) / levels});
      off += bits;
    }
    width[t] = off;
  }

  ProblemInstance out = instance;
  for (std::size_t t = 0; t <= T; ++t) {
    const auto& st = instance.stages[t];
    const std::size_t p = st.n_dec();
    std::size_t extra = 0;
    if (t < T)
      for (const auto& e : enc[t + 1]) extra += e.binary ? 0 : e.count + 1;
    const std::size_t n_in = t == 0 ? st.n_state : width[t];
    const std::size_t n_next = t < T ? width[t + 1] : 0;
    StageTemplate nt = StageTemplate::empty(t, p + extra, n_in, st.n_uncertainty, n_next);
    nt.cost = st.cost;
    nt.cost.resize(p + extra, 0.0);
    nt.lower = st.lower;
    nt.upper = st.upper;
    nt.kind = st.kind;
    // Original rows with the state substituted by its encoding.
    Vector w(p + extra), tr(n_in);
    for (std::size_t r = 0; r < st.n_rows(); ++r) {
      std::fill(w.begin(), w.end(), 0.0);
      std::fill(tr.begin(), tr.end(), 0.0);
      auto wr = st.W.row(r);
      std::copy(wr.begin(), wr.end(), w.begin());
      double h = st.h[r];
      if (t == 0) {
        for (std::size_t k = 0; k < st.n_state; ++k) tr[k] = st.T(r, k);
      } else {
        for (std::size_t k = 0; k < st.n_state; ++k) {
          const auto& e = enc[t][k];
          const double tk = st.T(r, k);
          if (tk == 0.0) continue;
          h += tk * e.lo;
          for (std::size_t l = 0; l < e.count; ++l) tr[e.offset + l] = tk * e.step * std::ldexp(1.0, static_cast<int>(l));
        }
      }
      nt.add_row(w, h, tr, st.U.row(r), st.equality[r]);
    }
    if (t < T) {
      std::size_t col = p;
      std::fill(tr.begin(), tr.end(), 0.0);
      Vector u(st.n_uncertainty, 0.0);
      for (std::size_t k = 0; k < enc[t + 1].size(); ++k) {
        const auto& e = enc[t + 1][k];
        if (e.binary) {
          for (std::size_t j = 0; j < p; ++j) nt.transition(e.offset, j) = st.transition(k, j);
          continue;
        }
        // F_k z - sum_l step 2^l b_l - r = lo
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t j = 0; j < p; ++j) w[j] = st.transition(k, j);
        for (std::size_t l = 0; l < e.count; ++l) {
          w[col + l] = -e.step * std::ldexp(1.0, static_cast<int>(l));
          nt.lower.push_back(0.0);
          nt.upper.push_back(1.0);
          nt.kind.push_back(VarKind::Binary);
          nt.transition(e.offset + l, col + l) = 1.0;
        }
        w[col + e.count] = -1.0;
        nt.lower.push_back(0.0);
        nt.upper.push_back(e.step);
        nt.kind.push_back(VarKind::Continuous);
        nt.add_row(w, e.lo, tr, u, true);
        col += e.count + 1;
      }
    }
    nt.state_lower.assign(n_in, t == 0 ? -kInf : 0.0);
    nt.state_upper.assign(n_in, t == 0 ? kInf : 1.0);
    if (t == 0) {
      nt.state_lower = st.state_lower;
      nt.state_upper = st.state_upper;
    }
    out.stages[t] = std::move(nt);
  }
  return out;
}

// --------------------------------------------------------------------- runs

std::string to_string(CutMode m) {
  switch (m) {
  case CutMode::Auto: return "auto";
  case CutMode::Benders: return "benders";
  case CutMode::Integer: return "integer";
  case CutMode::Lagrangian: return "lagrangian";
  case CutMode::IntegerLagrangian: return "integer+lagrangian";
  }
  return "?";
}

CutMode cut_mode_from_string(const std::string& s) {
  if (s == "auto") return CutMode::Auto;
  if (s == "benders") return CutMode::Benders;
  if (s == "integer") return CutMode::Integer;
  if (s == "lagrangian") return CutMode::Lagrangian;
  if (s == "integer+lagrangian") return CutMode::IntegerLagrangian;
  throw InputError("unknown cut family '" + s + "' (expected auto, benders, integer, lagrangian or integer+lagrangian)");
}

WeightCache::WeightCache(const ProblemInstance& instance, const std::vector<WeightModel>& models) {
  const std::size_t T = instance.horizon();
  if (T == 0) return;
  const auto& data = instance.training.value();
  const std::size_t N = data.n_samples();
  root_.resize(N);
  for (std::size_t i = 0; i < N; ++i) root_[i] = models.at(0).weights(data.x(i, 0));
  w_.resize(T - 1);
  for (std::size_t t = 1; t < T; ++t) {
    w_[t - 1].resize(N);
    for (std::size_t i = 0; i < N; ++i) w_[t - 1][i] = models.at(t).weights(data.x(i, t));
  }
}

namespace {

std::vector<CutFamily> families_for(CutMode mode) {
  switch (mode) {
  case CutMode::Benders: return {CutFamily::Benders};
  case CutMode::Integer: return {CutFamily::Integer};
  case CutMode::Lagrangian: return {CutFamily::Lagrangian};
  case CutMode::IntegerLagrangian: return {CutFamily::Integer, CutFamily::Lagrangian};
  case CutMode::Auto: break;
  }
  return {CutFamily::Benders};
}

std::size_t draw(const WeightVector& w, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    acc += w[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// A constant weight function gives every covariate the same cost-to-go, so
// all keys of that stage share the root list.
CovariateKey canonical(const std::vector<WeightModel>& models, std::size_t t, CovariateKey key) {
  return models.at(t - 1).is_constant() ? kRootKey : key;
}

class Engine {
public:
  Engine(const ProblemInstance& instance, const std::vector<WeightModel>& models, const SddpConfig& config)
      : inst_(instance), models_(models), cfg_(config), cache_(instance, models),
        families_(families_for(config.cuts)) {
    if (inst_.horizon() > 0) {
      if (models_.size() != inst_.horizon()) throw InputError("SDDP: need one weight model per stage 1..T");
      root_weights_ = models_[0].weights(inst_.initial_covariate);
    }
  }

  ListView view(const CutPool& pool, std::size_t t, CovariateKey key) const {
    return ListView(pool.lower_bound(t), pool.keyed(t, canonical(models_, t, key)));
  }

  ForwardPath path(const CutPool& pool, std::size_t iteration, std::size_t j) const {
    const std::size_t T = inst_.horizon();
    const auto* data = inst_.training ? &*inst_.training : nullptr;
    Rng rng(derive_seed(cfg_.seed, 0x5dd9 + iteration), j);
    ForwardPath fp;
    const WeightVector* w = &root_weights_;
    if (cfg_.sample_root && T > 0) {
      fp.root_sample = rng.index(data->n_samples());
      fp.root_key = static_cast<CovariateKey>(fp.root_sample);
      w = &cache_.root(fp.root_sample);
    }
    Vector state = inst_.initial_state;
    CovariateKey key = fp.root_key;
    for (std::size_t t = 0; t <= T; ++t) {
      std::span<const double> y;
      if (t > 0) {
        const std::size_t i = draw(*w, rng);
        fp.samples.push_back(i);
        fp.states.push_back(state);
        y = data->y(i, t);
        key = static_cast<CovariateKey>(i);
        w = t < T ? &cache_.at(t, i) : nullptr;
      }
      std::optional<ListView> v;
      if (t < T) v.emplace(view(pool, t + 1, key));
      StageSolveOptions o;
      o.mip = cfg_.mip;
      const auto sol = fix_state_and_solve(inst_.stages[t], state, y, v ? &*v : nullptr, o);
      if (sol.status != SolveStatus::Optimal)
        throw InfeasibleError("forward pass: stage " + std::to_string(t) + " is " + to_string(sol.status) +
                              " on path " + std::to_string(j) +
                              (t > 0 ? " (sample " + std::to_string(fp.samples.back()) + ")" : std::string()));
      fp.cost += sol.stage_cost;
      state = sol.next_state;
    }
    return fp;
  }

  ForwardResult forward(const CutPool& pool, std::size_t iteration) const {
    ForwardResult fr;
    fr.paths.resize(cfg_.M);
    parallel_for(cfg_.M, cfg_.threads, [&](std::size_t j) { fr.paths[j] = path(pool, iteration, j); });
    for (const auto& p : fr.paths) fr.costs.push_back(p.cost);
    return fr;
  }

  /// Covariate keys of stage t and their weights w^t(.).
  std::vector<std::pair<CovariateKey, const WeightVector*>> stage_keys(std::size_t t) const {
    std::vector<std::pair<CovariateKey, const WeightVector*>> out;
    if (models_[t - 1].is_constant()) return {{kRootKey, &root_weights_}};
    const std::size_t N = inst_.training->n_samples();
    if (t == 1) out.emplace_back(kRootKey, &root_weights_);
    for (std::size_t i = 0; i < N; ++i)
      out.emplace_back(static_cast<CovariateKey>(i), t == 1 ? &cache_.root(i) : &cache_.at(t - 1, i));
    return out;
  }

  std::size_t backward(CutPool& pool, const std::vector<ForwardPath>& trials, std::size_t iteration,
                       std::size_t* capped) const {
    const std::size_t T = inst_.horizon();
    const auto& data = inst_.training.value();
    std::size_t added = 0;
    for (std::size_t t = T; t >= 1; --t) {
      struct Task {
        std::size_t j, i;
      };
      std::vector<Task> tasks;
      std::vector<CovariateKey> keys(trials.size());
      std::vector<const WeightVector*> weights(trials.size());
      for (std::size_t j = 0; j < trials.size(); ++j) {
        const auto& fp = trials[j];
        if (t == 1) {
          keys[j] = fp.root_key;
          weights[j] = fp.root_key >= 0 ? &cache_.root(fp.root_sample) : &root_weights_;
        } else {
          keys[j] = static_cast<CovariateKey>(fp.samples[t - 2]);
          weights[j] = &cache_.at(t - 1, fp.samples[t - 2]);
        }
        keys[j] = canonical(models_, t, keys[j]);
        for (auto [i, wi] : weights[j]->support()) tasks.push_back({j, i});
      }
      // Consecutive tasks of one path facing the same cost-to-go list form a
      // chain that reuses cut rows and bases; chains, not tasks, run in
      // parallel, so the outcome does not depend on the thread count.
      std::vector<std::size_t> chain_begin;
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        const bool same = k > 0 && t < T && tasks[k].j == tasks[k - 1].j &&
                          canonical(models_, t + 1, static_cast<CovariateKey>(tasks[k].i)) ==
                              canonical(models_, t + 1, static_cast<CovariateKey>(tasks[k - 1].i));
        if (!same) chain_begin.push_back(k);
      }
      chain_begin.push_back(tasks.size());
      const std::size_t nf = families_.size();
      std::vector<Cut> cuts(tasks.size() * nf);
      std::vector<char> hit_cap(tasks.size(), 0);
      parallel_for(chain_begin.size() - 1, cfg_.threads, [&](std::size_t ch) {
        StageReuse reuse;
        for (std::size_t k = chain_begin[ch]; k < chain_begin[ch + 1]; ++k) {
          const auto& task = tasks[k];
          std::optional<ListView> v;
          if (t < T) v.emplace(view(pool, t + 1, static_cast<CovariateKey>(task.i)));
          CutContext ctx;
          ctx.stage = &inst_.stages[t];
          ctx.state = trials[task.j].states[t - 1];
          ctx.uncertainty = data.y(task.i, t);
          ctx.future = v ? &*v : nullptr;
          ctx.lower_bound = pool.lower_bound(t);
          ctx.mip = cfg_.mip;
          ctx.reuse = &reuse;
          for (std::size_t f = 0; f < nf; ++f) {
            Cut c;
            switch (families_[f]) {
            case CutFamily::Benders: c = benders_cut(ctx); break;
            case CutFamily::Integer: c = integer_optimality_cut(ctx); break;
            case CutFamily::Lagrangian: {
              auto lr = lagrangian_cut(ctx, cfg_.lagrangian);
              hit_cap[k] = lr.capped;
              c = std::move(lr.cut);
              break;
            }
            }
            c.origin = {iteration, t, task.j};
            cuts[k * nf + f] = std::move(c);
          }
        }
      });

      // Serial, ordered pool update: one trial record per (path, family).
      const std::size_t ns = pool.state_dim(t);
      const double L = pool.lower_bound(t);
      std::vector<TrialCuts> fresh;
      std::vector<std::size_t> owner;
      std::size_t k = 0;
      for (std::size_t j = 0; j < trials.size(); ++j) {
        const std::size_t begin = k;
        while (k < tasks.size() && tasks[k].j == j) {
          if (capped && hit_cap[k]) ++*capped;
          ++k;
        }
        for (std::size_t f = 0; f < nf; ++f) {
          TrialCuts tr;
          tr.family = families_[f];
          tr.origin = {iteration, t, j};
          for (std::size_t q = begin; q < k; ++q) {
            tr.samples.push_back(tasks[q].i);
            tr.cuts.push_back(std::move(cuts[q * nf + f]));
          }
          fresh.push_back(std::move(tr));
          owner.push_back(j);
        }
      }
      const auto stage_keys_t = cfg_.share_cuts ? stage_keys(t) : decltype(stage_keys(t)){};
      for (std::size_t r = 0; r < fresh.size(); ++r) {
        const std::size_t j = owner[r];
        // The owning covariate first; with sharing, every other key of the stage too.
        pool.add_keyed(t, keys[j], fresh[r].aggregate(*weights[j], L, ns));
        ++added;
        for (const auto& [key, w] : stage_keys_t) {
          if (key == keys[j]) continue;
          pool.add_keyed(t, key, fresh[r].aggregate(*w, L, ns));
          ++added;
        }
        pool.add_trial(t, std::move(fresh[r]));
      }
    }
    return added;
  }

  double lower(const CutPool& pool, Vector* first_stage) const {
    const std::size_t T = inst_.horizon();
    StageSolveOptions o;
    o.mip = cfg_.mip;
    auto solve_root = [&](CovariateKey key) {
      std::optional<ListView> v;
      if (T > 0) v.emplace(view(pool, 1, key));
      auto sol = fix_state_and_solve(inst_.stages[0], inst_.initial_state, {}, v ? &*v : nullptr, o);
      if (sol.status != SolveStatus::Optimal) throw InfeasibleError("stage 0 is " + to_string(sol.status));
      return sol;
    };
    const auto root = solve_root(kRootKey);
    if (first_stage) *first_stage = root.decision;
    if (!cfg_.sample_root || T == 0) return root.objective;
    const std::size_t N = inst_.training->n_samples();
    Vector values(N);
    parallel_for(N, cfg_.threads,
                 [&](std::size_t i) { values[i] = solve_root(static_cast<CovariateKey>(i)).objective; });
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(N);
  }

private:
  const ProblemInstance& inst_;
  const std::vector<WeightModel>& models_;
  const SddpConfig& cfg_;
  WeightCache cache_;
  std::vector<CutFamily> families_;
  WeightVector root_weights_;
};

CutPool fresh_pool(const ProblemInstance& instance, const SddpConfig& config) {
  if (config.warm_start) return *config.warm_start;
  Vector lb;
  std::vector<std::size_t> dims;
  for (std::size_t t = 1; t <= instance.horizon(); ++t) {
    lb.push_back(instance.lower_bound(t));
    dims.push_back(instance.stages[t].n_state);
  }
  return CutPool(lb, dims, instance.training ? instance.training->n_samples() : 0);
}

} // namespace
ForwardResult forward_pass(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                           const CutPool& pool, const SddpConfig& config, std::size_t iteration) {
  return Engine(instance, models, config).forward(pool, iteration);
}

std::size_t backward_pass(const ProblemInstance& instance, const std::vector<WeightModel>& models, CutPool& pool,
                          const std::vector<ForwardPath>& trials, const SddpConfig& config, std::size_t iteration,
                          std::size_t* lagrangian_capped) {
  return Engine(instance, models, config).backward(pool, trials, iteration, lagrangian_capped);
}

double lower_bound(const ProblemInstance& instance, const std::vector<WeightModel>& models, const CutPool& pool,
                   const SddpConfig& config, Vector* first_stage) {
  return Engine(instance, models, config).lower(pool, first_stage);
}

SddpRun solve_sddp(const ProblemInstance& original, const std::vector<WeightModel>& models,
                   const SddpConfig& config) {
  require_valid(original);
  if (config.M < 2) throw InputError("SDDP needs M >= 2 forward samples for the upper bound");
  const std::size_t T = original.horizon();

  // Route binary-state families, expanding continuous states when needed.
  SddpConfig cfg = config;
  bool all_binary = T > 0;
  for (std::size_t t = 1; t <= T; ++t) all_binary = all_binary && state_is_binary(original, t);
  if (cfg.cuts == CutMode::Auto) {
    if (all_binary || (original.has_binaries() && T > 0)) cfg.cuts = CutMode::Lagrangian;
    else cfg.cuts = CutMode::Benders;
  }
  const bool needs_binary = cfg.cuts != CutMode::Benders;
  const bool expand = needs_binary && !all_binary && T > 0;
  const ProblemInstance expanded = expand ? binary_expansion(original, cfg.expansion_bits) : ProblemInstance{};
  const ProblemInstance& instance = expand ? expanded : original;

  Engine engine(instance, models, cfg);
  SddpRun run;
  run.M = cfg.M;
  run.alpha = cfg.alpha;
  run.seed = cfg.seed;
  run.expanded = expand;
  run.pool = fresh_pool(instance, cfg);

  std::vector<double> lbs;
  for (std::size_t it = 1;; ++it) {
    const auto start = std::chrono::steady_clock::now();
    IterationLog log;
    log.iter = it;
    std::size_t added = 0;
    UpperBound ub;
    if (T == 0) {
      log.lb = engine.lower(run.pool, &run.first_stage);
      ub = {log.lb, 0.0, log.lb};
    } else {
      auto fw = engine.forward(run.pool, it);
      ub = statistical_upper_bound(fw.costs, cfg.alpha);
      added = engine.backward(run.pool, fw.paths, it, &run.lagrangian_capped);
      run.trials.push_back(std::move(fw.paths));
      log.lb = engine.lower(run.pool, &run.first_stage);
    }
    log.ub_mean = ub.mean;
    log.ub_std = ub.std;
    log.ub = ub.ub;
    log.cuts_added = added;
    log.wall_ms = cfg.timing ? elapsed_ms(start) : 0.0;
    run.log.push_back(log);
    lbs.push_back(log.lb);
    run.iterations = it;
    run.lb = log.lb;
    run.ub_mean = ub.mean;
    run.ub_std = ub.std;
    run.ub = ub.ub;

    if (T == 0) {
      run.stop_reason = "deterministic";
      break;
    }
    if (run.ub - run.lb <= cfg.epsilon * std::max(1.0, std::abs(run.lb))) {
      run.stop_reason = "gap";
      break;
    }
    if (it >= cfg.max_iter) {
      run.stop_reason = "max_iter";
      break;
    }
    if (cfg.stall_window > 0 && lbs.size() > cfg.stall_window &&
        lbs.back() - lbs[lbs.size() - 1 - cfg.stall_window] < cfg.stall_tol) {
      run.stop_reason = "stalled";
      break;
    }
  }
  // The in-loop bound decided when to stop, so it is biased low at the stop;
  // report one drawn afresh under the final cuts instead.
  if (T > 0) {
    const auto fw = engine.forward(run.pool, run.iterations + 1);
    const auto ub = statistical_upper_bound(fw.costs, cfg.alpha);
    run.ub_mean = ub.mean;
    run.ub_std = ub.std;
    run.ub = ub.ub;
  }
  run.first_stage.resize(original.stages[0].n_dec());
  return run;
}

void write_run_log(std::ostream& out, const SddpRun& run) {
  out << "iter,lb,ub_mean,ub_std,ub,wall_ms,cuts_added\n";
  for (const auto& l : run.log)
    out << l.iter << ',' << format_double(l.lb) << ',' << format_double(l.ub_mean) << ','
        << format_double(l.ub_std) << ',' << format_double(l.ub) << ',' << format_double(l.wall_ms) << ','
        << l.cuts_added << '\n';
}

StageSolution policy_step(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                          const CutPool& pool, std::size_t t, std::span<const double> state,
                          std::span<const double> uncertainty, std::span<const double> covariate,
                          const WeightVector* weights, CovariateKey key, const MipOptions& mip) {
  const std::size_t T = instance.horizon();
  if (t > T) throw InputError("policy_step: stage beyond the horizon");
  WeightVector w;
  std::optional<ListView> keyed;
  std::optional<SampleView> sampled;
  const FutureCost* future = nullptr;
  if (t < T) {
    if (!weights && key != kFreshKey) {
      keyed.emplace(pool.lower_bound(t + 1), pool.keyed(t + 1, canonical(models, t + 1, key)));
      future = &*keyed;
    } else {
      if (!weights) {
        w = models.at(t).weights(covariate);
        weights = &w;
      }
      sampled.emplace(pool, t + 1, *weights);
      future = &*sampled;
    }
  }
  StageSolveOptions o;
  o.mip = mip;
  auto sol = fix_state_and_solve(instance.stages[t], state, uncertainty, future, o);
  if (sol.status != SolveStatus::Optimal)
    throw InfeasibleError("policy: stage " + std::to_string(t) + " is " + to_string(sol.status));
  return sol;
}

} // namespace prescriptor
