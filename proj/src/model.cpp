#include "prescriptor/model.hpp"

#include <cmath>
#include <sstream>

namespace prescriptor {

bool StageTemplate::has_binaries() const {
  for (auto k : kind)
    if (k == VarKind::Binary) return true;
  return false;
}

void StageTemplate::add_row(std::span<const double> w, double rhs, std::span<const double> t,
                            std::span<const double> u, bool is_equality) {
  if (w.size() != n_dec() || t.size() != n_state || u.size() != n_uncertainty)
    throw InputError("StageTemplate::add_row: coefficient dimensions do not match the stage");
  W.append_row(w);
  T.append_row(t);
  U.append_row(u);
  h.push_back(rhs);
  equality.push_back(is_equality);
}

StageTemplate StageTemplate::empty(std::size_t stage, std::size_t n_dec, std::size_t n_state,
                                   std::size_t n_uncertainty, std::size_t n_next_state) {
  StageTemplate s;
  s.stage = stage;
  s.n_state = n_state;
  s.n_uncertainty = n_uncertainty;
  s.cost.assign(n_dec, 0.0);
  s.transition = Matrix(n_next_state, n_dec);
  s.W = Matrix(0, n_dec);
  s.T = Matrix(0, n_state);
  s.U = Matrix(0, n_uncertainty);
  s.lower.assign(n_dec, 0.0);
  s.upper.assign(n_dec, kInf);
  s.kind.assign(n_dec, VarKind::Continuous);
  return s;
}

bool ProblemInstance::has_binaries() const {
  for (const auto& s : stages)
    if (s.has_binaries()) return true;
  return false;
}

std::optional<double> derived_lower_bound(const ProblemInstance& instance, std::size_t t) {
  for (std::size_t u = t; u < instance.stages.size(); ++u) {
    const auto& st = instance.stages[u];
    for (std::size_t j = 0; j < st.n_dec(); ++j) {
      if (st.cost[j] == 0.0) continue;
      if (st.cost[j] < 0.0 || st.lower[j] < 0.0) return std::nullopt;
    }
  }
  return 0.0;
}

double ProblemInstance::lower_bound(std::size_t t) const {
  if (t < 1 || t > horizon()) throw InputError("lower_bound: stage outside 1..T");
  if (!lower_bounds.empty()) return lower_bounds.at(t - 1);
  auto d = derived_lower_bound(*this, t);
  if (!d) throw InputError("stage " + std::to_string(t) + " needs an explicit initial lower bound");
  return *d;
}

std::string to_string(Finding::Kind k) {
  switch (k) {
  case Finding::Kind::Dimension: return "dimension";
  case Finding::Kind::Horizon: return "horizon";
  case Finding::Kind::Bounds: return "bounds";
  case Finding::Kind::Unbounded: return "unbounded";
  case Finding::Kind::EmptyStage: return "empty-stage";
  case Finding::Kind::LowerBound: return "lower-bound";
  }
  return "?";
}

std::vector<Finding> validate(const ProblemInstance& instance) {
  std::vector<Finding> report;
  auto add = [&](Finding::Kind k, std::size_t stage, std::string msg) {
    report.push_back({k, stage, std::move(msg)});
  };
  if (instance.stages.empty()) {
    add(Finding::Kind::EmptyStage, 0, "instance has no stages");
    return report;
  }
  const std::size_t horizon = instance.horizon();
  for (std::size_t t = 0; t <= horizon; ++t) {
    const auto& s = instance.stages[t];
    const std::size_t p = s.n_dec();
    const std::size_t m = s.n_rows();
    auto dim = [&](bool ok, const std::string& what) {
      if (!ok) add(Finding::Kind::Dimension, t, what);
    };
    if (p == 0) add(Finding::Kind::EmptyStage, t, "stage has no decision variables");
    if (s.stage != t) add(Finding::Kind::Dimension, t, "stage index field disagrees with position");
    dim(s.W.rows() == m && (m == 0 || s.W.cols() == p), "W must be rows x n_dec");
    dim(s.T.rows() == m && (m == 0 || s.T.cols() == s.n_state), "T must be rows x n_state");
    dim(s.U.rows() == m && (m == 0 || s.U.cols() == s.n_uncertainty), "U must be rows x n_uncertainty");
    dim(s.equality.size() == m, "equality flags must have one entry per row");
    dim(s.lower.size() == p && s.upper.size() == p && s.kind.size() == p,
        "bounds and kinds must have one entry per decision");
    if (t < horizon) {
      const std::size_t next = instance.stages[t + 1].n_state;
      dim(s.transition.rows() == next, "transition row count must equal the next stage's state dimension");
      dim(s.transition.rows() == 0 || s.transition.cols() == p, "transition must have n_dec columns");
    } else {
      dim(s.transition.rows() == 0, "last stage must not have a transition");
    }
    if (!s.state_lower.empty() || !s.state_upper.empty())
      dim(s.state_lower.size() == s.n_state && s.state_upper.size() == s.n_state,
          "declared state range must match the state dimension");
    if (s.lower.size() == p && s.upper.size() == p && s.kind.size() == p) {
      for (std::size_t j = 0; j < p; ++j) {
        if (s.lower[j] > s.upper[j])
          add(Finding::Kind::Bounds, t, "variable " + std::to_string(j) + " has lower > upper");
        if (s.kind[j] == VarKind::Binary && (s.lower[j] < 0.0 || s.upper[j] > 1.0))
          add(Finding::Kind::Bounds, t, "binary variable " + std::to_string(j) + " bounds exceed [0, 1]");
        if (j < s.cost.size() && ((s.cost[j] < 0.0 && s.upper[j] == kInf) ||
                                  (s.cost[j] > 0.0 && s.lower[j] == -kInf)))
          add(Finding::Kind::Unbounded, t,
              "variable " + std::to_string(j) + " can decrease the cost without a bound");
      }
    }
  }
  if (instance.stages[0].n_state != instance.initial_state.size())
    add(Finding::Kind::Dimension, 0, "initial state dimension disagrees with stage 0");
  if (instance.stages[0].n_uncertainty != 0)
    add(Finding::Kind::Dimension, 0, "stage 0 cannot depend on an uncertainty");
  if (horizon >= 1) {
    if (!instance.training) {
      add(Finding::Kind::Horizon, 0, "multistage instance has no training data");
    } else {
      const auto& data = *instance.training;
      if (data.horizon() != horizon)
        add(Finding::Kind::Horizon, 0,
            "training horizon " + std::to_string(data.horizon()) + " does not match T = " + std::to_string(horizon));
      else {
        for (std::size_t t = 1; t <= horizon; ++t)
          if (instance.stages[t].n_uncertainty != data.uncertainty_dim())
            add(Finding::Kind::Dimension, t, "uncertainty dimension disagrees with training data");
        if (instance.initial_covariate.size() != data.covariate_dim(0))
          add(Finding::Kind::Dimension, 0, "initial covariate dimension disagrees with training data");
      }
    }
    if (instance.weight_specs.size() > 1 && instance.weight_specs.size() != horizon)
      add(Finding::Kind::Horizon, 0, "weight specs must be one shared or one per stage");
    if (!instance.lower_bounds.empty()) {
      if (instance.lower_bounds.size() != horizon)
        add(Finding::Kind::LowerBound, 0, "lower_bounds must list L_1..L_T");
    } else {
      for (std::size_t t = 1; t <= horizon; ++t)
        if (!derived_lower_bound(instance, t)) {
          add(Finding::Kind::LowerBound, t, "costs can be negative: supply an explicit lower bound");
          break;
        }
    }
  } else if (instance.training && instance.training->horizon() != 0) {
    add(Finding::Kind::Horizon, 0, "single-stage instance carries multistage training data");
  }
  return report;
}

void require_valid(const ProblemInstance& instance) {
  auto report = validate(instance);
  if (report.empty()) return;
  std::ostringstream os;
  os << "invalid instance:";
  for (const auto& f : report) os << "\n  stage " << f.stage << " [" << to_string(f.kind) << "] " << f.message;
  throw InputError(os.str());
}

// -------------------------------------------------------------------- JSON

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto data = j.at("data").get<Vector>();
  if (data.size() != rows * cols) throw InputError("matrix JSON: data length disagrees with dimensions");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  return m;
}

nlohmann::json bound_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (x == kInf) a.push_back("inf");
    else if (x == -kInf) a.push_back("-inf");
    else a.push_back(x);
  }
  return a;
}

Vector bound_from(const nlohmann::json& j) {
  Vector v;
  for (const auto& e : j) {
    if (e.is_string()) {
      const auto s = e.get<std::string>();
      if (s == "inf") v.push_back(kInf);
      else if (s == "-inf") v.push_back(-kInf);
      else throw InputError("bound JSON: unexpected string '" + s + "'");
    } else {
      v.push_back(e.get<double>());
    }
  }
  return v;
}

} // namespace

nlohmann::json instance_to_json(const ProblemInstance& instance) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : instance.stages) {
    std::vector<std::string> kinds;
    for (auto k : s.kind) kinds.push_back(k == VarKind::Binary ? "binary" : "continuous");
    std::vector<int> eq;
    for (bool e : s.equality) eq.push_back(e ? 1 : 0);
    nlohmann::json js = {{"stage", s.stage},
                         {"n_dec", s.n_dec()},
                         {"n_state", s.n_state},
                         {"n_uncertainty", s.n_uncertainty},
                         {"cost", s.cost},
                         {"transition", matrix_json(s.transition)},
                         {"W", matrix_json(s.W)},
                         {"h", s.h},
                         {"T", matrix_json(s.T)},
                         {"U", matrix_json(s.U)},
                         {"equality", eq},
                         {"lower", bound_json(s.lower)},
                         {"upper", bound_json(s.upper)},
                         {"kind", kinds}};
    if (!s.state_lower.empty()) {
      js["state_lower"] = bound_json(s.state_lower);
      js["state_upper"] = bound_json(s.state_upper);
    }
    stages.push_back(std::move(js));
  }
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& w : instance.weight_specs) specs.push_back(weight_spec_to_json(w));
  nlohmann::json j = {{"name", instance.name},
                      {"stages", stages},
                      {"initial_state", instance.initial_state},
                      {"initial_covariate", instance.initial_covariate},
                      {"weights", specs},
                      {"lower_bounds", instance.lower_bounds}};
  if (instance.training) j["training"] = training_to_json(*instance.training);
  return j;
}

ProblemInstance instance_from_json(const nlohmann::json& j, std::vector<std::string>* warnings) {
  ProblemInstance inst;
  inst.name = j.value("name", std::string());
  for (const auto& js : j.at("stages")) {
    StageTemplate s;
    s.stage = js.at("stage").get<std::size_t>();
    s.n_state = js.at("n_state").get<std::size_t>();
    s.n_uncertainty = js.at("n_uncertainty").get<std::size_t>();
    s.cost = js.at("cost").get<Vector>();
    if (js.contains("n_dec") && js["n_dec"].get<std::size_t>() != s.cost.size())
      throw InputError("instance JSON: n_dec disagrees with cost length");
    s.transition = matrix_from(js.at("transition"));
    s.W = matrix_from(js.at("W"));
    s.h = js.at("h").get<Vector>();
    s.T = matrix_from(js.at("T"));
    s.U = matrix_from(js.at("U"));
    for (int e : js.at("equality").get<std::vector<int>>()) s.equality.push_back(e != 0);
    s.lower = bound_from(js.at("lower"));
    s.upper = bound_from(js.at("upper"));
    for (const auto& k : js.at("kind").get<std::vector<std::string>>()) {
      if (k == "binary") s.kind.push_back(VarKind::Binary);
      else if (k == "continuous") s.kind.push_back(VarKind::Continuous);
      else throw InputError("instance JSON: unknown variable kind '" + k + "'");
    }
    if (js.contains("state_lower")) {
      s.state_lower = bound_from(js["state_lower"]);
      s.state_upper = bound_from(js.at("state_upper"));
    }
    inst.stages.push_back(std::move(s));
  }
  inst.initial_state = j.at("initial_state").get<Vector>();
  inst.initial_covariate = j.value("initial_covariate", Vector{});
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (w.is_array())
      for (const auto& e : w) inst.weight_specs.push_back(weight_spec_from_json(e));
    else
      inst.weight_specs.push_back(weight_spec_from_json(w));
  }
  inst.lower_bounds = j.value("lower_bounds", Vector{});
  if (j.contains("training")) inst.training = training_from_json(j["training"], warnings);
  return inst;
}

// ------------------------------------------------------------ scenario tree

std::size_t ScenarioTree::leaf_count() const {
  std::size_t n = 0;
  for (const auto& nd : nodes)
    if (nd.children.empty()) ++n;
  return n;
}

std::span<const double> ScenarioTree::covariate(const TrainingSet& data, std::size_t node) const {
  const auto& nd = nodes.at(node);
  if (node == 0 && !root_has_sample) return root_covariate;
  return data.x(nd.sample, nd.depth);
}

namespace {

void expand(ScenarioTree& tree, const ProblemInstance& instance, const std::vector<WeightModel>& models,
            std::size_t node_cap) {
  const std::size_t horizon = instance.horizon();
  if (horizon == 0) return;
  if (models.size() != horizon) throw InputError("scenario tree: need one weight model per stage 1..T");
  const auto& data = instance.training.value();
  // Breadth-first: node indices grow with depth.
  for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
    const std::size_t depth = tree.nodes[n].depth;
    if (depth >= horizon) continue;
    const auto w = models[depth].weights(tree.covariate(data, n));
    for (auto [i, wi] : w.support()) {
      if (tree.nodes.size() >= node_cap)
        throw ResourceError("scenario tree exceeds " + std::to_string(node_cap) +
                            " nodes; use kNN weights (support k) or a shorter horizon");
      ScenarioNode child;
      child.parent = static_cast<int>(n);
      child.depth = depth + 1;
      child.sample = i;
      child.branch_weight = wi;
      child.probability = tree.nodes[n].probability * wi;
      tree.nodes[n].children.push_back(tree.nodes.size());
      tree.nodes.push_back(child);
    }
  }
}

} // namespace

ScenarioTree build_scenario_tree(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                                 std::size_t node_cap) {
  ScenarioTree tree;
  tree.root_state = instance.initial_state;
  tree.root_covariate = instance.initial_covariate;
  tree.nodes.push_back(ScenarioNode{});
  expand(tree, instance, models, node_cap);
  return tree;
}

ScenarioTree build_subtree(const ProblemInstance& instance, const std::vector<WeightModel>& models,
                           std::size_t depth, std::size_t sample, std::span<const double> state,
                           std::size_t node_cap) {
  if (depth < 1 || depth > instance.horizon()) throw InputError("build_subtree: depth outside 1..T");
  ScenarioTree tree;
  tree.root_depth = depth;
  tree.root_has_sample = true;
  tree.root_state.assign(state.begin(), state.end());
  ScenarioNode root;
  root.depth = depth;
  root.sample = sample;
  tree.nodes.push_back(root);
  expand(tree, instance, models, node_cap);
  return tree;
}

} // namespace prescriptor
