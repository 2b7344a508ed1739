#include "prescriptor/weights.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace prescriptor {

// ---------------------------------------------------------------- TrainingSet

TrainingSet::TrainingSet(std::vector<Matrix> covariates, std::vector<Matrix> uncertainties)
    : covariates_(std::move(covariates)), uncertainties_(std::move(uncertainties)) {
  if (uncertainties_.empty()) throw InputError("TrainingSet: horizon must be at least 1");
  if (covariates_.size() != uncertainties_.size())
    throw InputError("TrainingSet: need covariates for stages 0..T-1 and uncertainties for 1..T");
  n_samples_ = uncertainties_.front().rows();
  if (n_samples_ == 0) throw InputError("TrainingSet: at least one sample is required");
  for (const auto& m : covariates_)
    if (m.rows() != n_samples_) throw InputError("TrainingSet: ragged covariate sample count");
  for (const auto& m : uncertainties_) {
    if (m.rows() != n_samples_) throw InputError("TrainingSet: ragged uncertainty sample count");
    if (m.cols() != uncertainties_.front().cols())
      throw InputError("TrainingSet: uncertainty dimension varies across stages");
  }
}

TrainingSet TrainingSet::with_permuted_responses(std::span<const std::size_t> perm) const {
  if (perm.size() != n_samples_) throw InputError("with_permuted_responses: permutation size");
  std::vector<Matrix> ys;
  for (const auto& m : uncertainties_) {
    Matrix p(m.rows(), m.cols());
    for (std::size_t i = 0; i < n_samples_; ++i) {
      auto src = m.row(perm[i]);
      std::copy(src.begin(), src.end(), p.row(i).begin());
    }
    ys.push_back(std::move(p));
  }
  return TrainingSet(covariates_, std::move(ys));
}

TrainingSet TrainingSet::head(std::size_t n) const {
  if (n == 0 || n > n_samples_) throw InputError("TrainingSet::head: bad sample count");
  auto take = [n](const Matrix& m) {
    Matrix out(n, m.cols());
    for (std::size_t i = 0; i < n; ++i) {
      auto r = m.row(i);
      std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
  };
  std::vector<Matrix> xs, ys;
  for (const auto& m : covariates_) xs.push_back(take(m));
  for (const auto& m : uncertainties_) ys.push_back(take(m));
  return TrainingSet(std::move(xs), std::move(ys));
}

namespace {

struct Record {
  std::size_t sample;
  std::size_t stage;
  char kind;
  Vector values;
};

TrainingSet assemble(const std::vector<Record>& records, std::vector<std::string>* warnings) {
  std::size_t n = 0;
  std::size_t horizon = 0;
  for (const auto& r : records) {
    n = std::max(n, r.sample + 1);
    if (r.kind == 'y') horizon = std::max(horizon, r.stage);
  }
  if (n == 0 || horizon == 0) throw InputError("training data: no samples or no uncertainty rows");
  std::vector<std::map<std::size_t, Vector>> xs(horizon), ys(horizon);
  bool dropped = false;
  for (const auto& r : records) {
    if (r.kind == 'x') {
      if (r.stage >= horizon) {
        dropped = true;
        continue;
      }
      if (!xs[r.stage].emplace(r.sample, r.values).second)
        throw InputError("training data: duplicate x record");
    } else {
      if (r.stage < 1 || r.stage > horizon) throw InputError("training data: y stage out of range");
      if (!ys[r.stage - 1].emplace(r.sample, r.values).second)
        throw InputError("training data: duplicate y record");
    }
  }
  if (dropped && warnings)
    warnings->push_back("covariates observed after the last decision are ignored");
  auto to_matrix = [n](const std::map<std::size_t, Vector>& rows, const char* what) {
    if (rows.size() != n) throw InputError(std::string("training data: missing ") + what + " record");
    Matrix m;
    for (const auto& [i, v] : rows) {
      (void)i;
      m.append_row(v);
    }
    return m;
  };
  std::vector<Matrix> cx, cy;
  for (std::size_t t = 0; t < horizon; ++t) cx.push_back(to_matrix(xs[t], "x"));
  for (std::size_t t = 0; t < horizon; ++t) cy.push_back(to_matrix(ys[t], "y"));
  return TrainingSet(std::move(cx), std::move(cy));
}

} // namespace

void write_training_csv(std::ostream& out, const TrainingSet& data) {
  std::size_t width = data.uncertainty_dim();
  for (std::size_t t = 0; t < data.horizon(); ++t) width = std::max(width, data.covariate_dim(t));
  out << "sample,stage,kind";
  for (std::size_t d = 0; d < width; ++d) out << ",dim" << d;
  out << '\n';
  auto emit = [&](std::size_t i, std::size_t t, char kind, std::span<const double> v) {
    out << i << ',' << t << ',' << kind;
    for (std::size_t d = 0; d < width; ++d) {
      out << ',';
      if (d < v.size()) out << format_double(v[d]);
    }
    out << '\n';
  };
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    for (std::size_t t = 0; t < data.horizon(); ++t) emit(i, t, 'x', data.x(i, t));
    for (std::size_t t = 1; t <= data.horizon(); ++t) emit(i, t, 'y', data.y(i, t));
  }
}

TrainingSet read_training_csv(std::istream& in, std::vector<std::string>* warnings) {
  std::string line;
  bool header_seen = false;
  std::vector<Record> records;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line.rfind("sample,stage,kind", 0) != 0)
        throw InputError("training CSV: expected header 'sample,stage,kind,dim0,...'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() < 3) throw InputError("training CSV: short row at line " + std::to_string(line_no));
    Record r;
    try {
      r.sample = std::stoul(fields[0]);
      r.stage = std::stoul(fields[1]);
      if (fields[2] != "x" && fields[2] != "y") throw InputError("kind");
      r.kind = fields[2][0];
      for (std::size_t d = 3; d < fields.size(); ++d) {
        if (fields[d].empty()) break;
        r.values.push_back(std::stod(fields[d]));
      }
    } catch (const std::exception&) {
      throw InputError("training CSV: malformed row at line " + std::to_string(line_no));
    }
    records.push_back(std::move(r));
  }
  if (!header_seen) throw InputError("training CSV: empty input");
  return assemble(records, warnings);
}

nlohmann::json training_to_json(const TrainingSet& data) {
  nlohmann::json recs = nlohmann::json::array();
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    for (std::size_t t = 0; t < data.horizon(); ++t) {
      auto v = data.x(i, t);
      recs.push_back({{"sample", i}, {"stage", t}, {"kind", "x"}, {"values", Vector(v.begin(), v.end())}});
    }
    for (std::size_t t = 1; t <= data.horizon(); ++t) {
      auto v = data.y(i, t);
      recs.push_back({{"sample", i}, {"stage", t}, {"kind", "y"}, {"values", Vector(v.begin(), v.end())}});
    }
  }
  return {{"n_samples", data.n_samples()}, {"horizon", data.horizon()}, {"records", recs}};
}

TrainingSet training_from_json(const nlohmann::json& j, std::vector<std::string>* warnings) {
  std::vector<Record> records;
  for (const auto& r : j.at("records")) {
    const auto kind = r.at("kind").get<std::string>();
    if (kind != "x" && kind != "y") throw InputError("training JSON: kind must be x or y");
    records.push_back({r.at("sample").get<std::size_t>(), r.at("stage").get<std::size_t>(), kind[0],
                       r.at("values").get<Vector>()});
  }
  auto data = assemble(records, warnings);
  if (j.contains("n_samples") && j["n_samples"].get<std::size_t>() != data.n_samples())
    throw InputError("training JSON: n_samples disagrees with records");
  if (j.contains("horizon") && j["horizon"].get<std::size_t>() != data.horizon())
    throw InputError("training JSON: horizon disagrees with records");
  return data;
}

// --------------------------------------------------------------- WeightVector

std::vector<std::pair<std::size_t, double>> WeightVector::support() const {
  std::vector<std::pair<std::size_t, double>> s;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > 0.0) s.emplace_back(i, values[i]);
  return s;
}

bool WeightVector::is_valid(double tol) const {
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

WeightVector WeightVector::uniform(std::size_t n) {
  return WeightVector{Vector(n, 1.0 / static_cast<double>(n))};
}

WeightVector knn_weights(std::span<const double> query, const Matrix& covariates, std::size_t k) {
  const std::size_t n = covariates.rows();
  if (k < 1 || k > n) throw InputError("knn_weights: k must lie in [1, N]");
  if (query.size() != covariates.cols()) throw InputError("knn_weights: query dimension mismatch");
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = covariates.row(i);
    double d = 0.0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const double e = r[c] - query[c];
      d += e * e;
    }
    dist[i] = {d, i};
  }
  // Pair ordering compares distance first, then index: ties go to the lowest index.
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
  WeightVector w{Vector(n, 0.0)};
  const double share = 1.0 / static_cast<double>(k);
  for (std::size_t j = 0; j < k; ++j) w.values[dist[j].second] = share;
  return w;
}

double weighted_regression(const WeightVector& w, std::span<const double> responses) {
  if (w.size() != responses.size()) throw InputError("weighted_regression: length mismatch");
  return dot(w.values, responses);
}

// ---------------------------------------------------------------------- trees

std::size_t default_min_leaf(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 0.6) - 1e-9)));
}

std::size_t default_subsample(std::size_t n) {
  if (n <= 1) return n;
  auto s = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 0.8) - 1e-9));
  return std::max<std::size_t>(1, std::min(s, n - 1));
}

std::size_t TreeModel::leaf_of(std::span<const double> query) const {
  if (query.size() != dim) throw InputError("tree: query dimension mismatch");
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& nd = nodes[static_cast<std::size_t>(node)];
    node = query[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return static_cast<std::size_t>(nodes[static_cast<std::size_t>(node)].leaf);
}

bool operator==(const TreeModel& a, const TreeModel& b) {
  if (a.n_samples != b.n_samples || a.dim != b.dim || a.leaves != b.leaves ||
      a.nodes.size() != b.nodes.size())
    return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& x = a.nodes[i];
    const auto& y = b.nodes[i];
    if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left ||
        x.right != y.right || x.leaf != y.leaf || x.n_estimation != y.n_estimation)
      return false;
  }
  return true;
}

namespace {

struct PendingNode {
  int id;
  std::size_t depth;
  std::vector<std::size_t> est;
  std::vector<std::size_t> split;
};

/// Smallest admissible child size for a node with n estimation samples. The
/// lambda rule is capped at floor(n/2): above that no split can satisfy it.
std::size_t min_child(std::size_t n, const TreeParams& p) {
  auto lam = static_cast<std::size_t>(std::ceil(p.lambda * static_cast<double>(n) - 1e-9));
  return std::max(p.min_leaf, std::min(lam, n / 2));
}

double lower_median(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

} // namespace

TreeModel fit_tree(const Matrix& covariates, std::span<const std::size_t> split_idx,
                   std::span<const std::size_t> estimation_idx, const TreeParams& params,
                   std::uint64_t seed) {
  if (estimation_idx.empty()) throw InputError("fit_tree: estimation set is empty");
  if (params.min_leaf < 1) throw InputError("fit_tree: min leaf size must be >= 1");
  if (!(params.lambda > 0.0 && params.lambda <= 0.5)) throw InputError("fit_tree: lambda must lie in (0, 0.5]");
  if (!(params.pi > 0.0 && params.pi <= 1.0)) throw InputError("fit_tree: pi must lie in (0, 1]");
  const std::size_t d = covariates.cols();
  if (d == 0) throw InputError("fit_tree: covariates have no features");

  TreeModel tree;
  tree.n_samples = covariates.rows();
  tree.dim = d;
  tree.params = params;
  Rng rng(seed, 0);

  std::vector<PendingNode> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, {estimation_idx.begin(), estimation_idx.end()}, {split_idx.begin(), split_idx.end()}});

  auto make_leaf = [&tree](int id, std::vector<std::size_t> members) {
    auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    nd.leaf = static_cast<int>(tree.leaves.size());
    std::sort(members.begin(), members.end());
    tree.leaves.push_back(std::move(members));
  };

  while (!stack.empty()) {
    PendingNode cur = std::move(stack.back());
    stack.pop_back();
    const std::size_t n = cur.est.size();
    tree.nodes[static_cast<std::size_t>(cur.id)].n_estimation = n;
    if (n < 2 * params.min_leaf) {
      make_leaf(cur.id, std::move(cur.est));
      continue;
    }
    const std::size_t lo = min_child(n, params);
    const std::size_t hi = n - lo;

    // Feature draw: uniform with probability pi, otherwise round-robin by depth.
    std::size_t first = rng.uniform() < params.pi ? rng.index(d) : cur.depth % d;

    bool split_done = false;
    for (std::size_t attempt = 0; attempt < d && !split_done; ++attempt) {
      const std::size_t f = (first + attempt) % d;
      std::vector<std::pair<double, std::size_t>> sorted;
      sorted.reserve(n);
      for (std::size_t i : cur.est) sorted.emplace_back(covariates(i, f), i);
      std::sort(sorted.begin(), sorted.end());

      std::vector<double> split_vals;
      const auto& source = cur.split.empty() ? cur.est : cur.split;
      split_vals.reserve(source.size());
      for (std::size_t i : source) split_vals.push_back(covariates(i, f));
      const double median = lower_median(std::move(split_vals));
      std::size_t target = static_cast<std::size_t>(
          std::upper_bound(sorted.begin(), sorted.end(), std::make_pair(median, std::size_t(-1))) -
          sorted.begin());
      target = std::clamp(target, lo, hi);

      // Nearest admissible cut position with distinct neighbouring values.
      std::optional<std::size_t> cut;
      for (std::size_t off = 0; off <= hi - lo && !cut; ++off) {
        for (int sgn : {-1, 1}) {
          if (off == 0 && sgn == 1) continue;
          const auto m = static_cast<long long>(target) + sgn * static_cast<long long>(off);
          if (m < static_cast<long long>(lo) || m > static_cast<long long>(hi)) continue;
          const auto mu = static_cast<std::size_t>(m);
          if (sorted[mu - 1].first < sorted[mu].first) {
            cut = mu;
            break;
          }
        }
      }
      if (!cut) continue;

      const double threshold = 0.5 * (sorted[*cut - 1].first + sorted[*cut].first);
      std::vector<std::size_t> left_est, right_est, left_split, right_split;
      for (std::size_t j = 0; j < sorted.size(); ++j)
        (j < *cut ? left_est : right_est).push_back(sorted[j].second);
      for (std::size_t i : cur.split)
        (covariates(i, f) <= threshold ? left_split : right_split).push_back(i);

      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      const int right = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      auto& nd = tree.nodes[static_cast<std::size_t>(cur.id)];
      nd.feature = static_cast<int>(f);
      nd.threshold = threshold;
      nd.left = left;
      nd.right = right;
      // Right pushed first so the left subtree is numbered first.
      stack.push_back({right, cur.depth + 1, std::move(right_est), std::move(right_split)});
      stack.push_back({left, cur.depth + 1, std::move(left_est), std::move(left_split)});
      split_done = true;
    }
    // Only reachable with tied covariate values on every feature.
    if (!split_done) make_leaf(cur.id, std::move(cur.est));
  }
  return tree;
}

WeightVector tree_weights(const TreeModel& tree, std::span<const double> query) {
  WeightVector w{Vector(tree.n_samples, 0.0)};
  const auto& members = tree.leaves[tree.leaf_of(query)];
  const double share = 1.0 / static_cast<double>(members.size());
  for (std::size_t i : members) w.values[i] = share;
  return w;
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> honest_sets(std::vector<std::size_t> pool,
                                                                          Honesty honesty, Rng& rng) {
  if (honesty == Honesty::IgnoreResponse || pool.size() < 2) {
    std::sort(pool.begin(), pool.end());
    return {pool, pool};
  }
  rng.shuffle(pool);
  const std::size_t half = pool.size() / 2;
  std::vector<std::size_t> split(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> est(pool.begin() + static_cast<std::ptrdiff_t>(half), pool.end());
  std::sort(split.begin(), split.end());
  std::sort(est.begin(), est.end());
  return {split, est};
}

} // namespace

ForestModel fit_forest(const Matrix& covariates, const ForestParams& params, std::uint64_t seed,
                       unsigned threads) {
  const std::size_t n = covariates.rows();
  if (n == 0) throw InputError("fit_forest: no samples");
  if (params.n_trees < 1) throw InputError("fit_forest: need at least one tree");
  const std::size_t s = params.subsample == 0 ? default_subsample(n) : std::min(params.subsample, n);
  ForestModel forest;
  forest.seed = seed;
  forest.n_samples = n;
  forest.params = params;
  forest.params.subsample = s;
  forest.trees.resize(params.n_trees);
  forest.subsamples.resize(params.n_trees);
  parallel_for(params.n_trees, threads, [&](std::size_t b) {
    Rng rng(seed, 2 * b + 1);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < s; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
    idx.resize(s);
    std::sort(idx.begin(), idx.end());
    forest.subsamples[b] = idx;
    auto [split, est] = honest_sets(std::move(idx), params.tree.honesty, rng);
    forest.trees[b] = fit_tree(covariates, split, est, params.tree, derive_seed(seed, 2 * b + 2));
  });
  return forest;
}

WeightVector forest_weights(const ForestModel& forest, std::span<const double> query) {
  WeightVector w{Vector(forest.n_samples, 0.0)};
  const double inv_b = 1.0 / static_cast<double>(forest.trees.size());
  for (const auto& tree : forest.trees) {
    const auto& members = tree.leaves[tree.leaf_of(query)];
    const double share = inv_b / static_cast<double>(members.size());
    for (std::size_t i : members) w.values[i] += share;
  }
  return w;
}

namespace {

nlohmann::json tree_params_json(const TreeParams& p) {
  return {{"min_leaf", p.min_leaf},
          {"lambda", p.lambda},
          {"pi", p.pi},
          {"honesty", p.honesty == Honesty::IgnoreResponse ? "ignore-response" : "half-split"}};
}

TreeParams tree_params_from(const nlohmann::json& j) {
  TreeParams p;
  p.min_leaf = j.at("min_leaf").get<std::size_t>();
  p.lambda = j.at("lambda").get<double>();
  p.pi = j.at("pi").get<double>();
  p.honesty = j.at("honesty").get<std::string>() == "half-split" ? Honesty::HalfSplit : Honesty::IgnoreResponse;
  return p;
}

} // namespace

nlohmann::json forest_to_json(const ForestModel& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : forest.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes)
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.leaf, nd.n_estimation});
    trees.push_back({{"dim", t.dim}, {"nodes", nodes}, {"leaves", t.leaves}});
  }
  return {{"seed", forest.seed},
          {"n_samples", forest.n_samples},
          {"n_trees", forest.params.n_trees},
          {"subsample", forest.params.subsample},
          {"tree_params", tree_params_json(forest.params.tree)},
          {"subsamples", forest.subsamples},
          {"trees", trees}};
}

ForestModel forest_from_json(const nlohmann::json& j) {
  ForestModel f;
  f.seed = j.at("seed").get<std::uint64_t>();
  f.n_samples = j.at("n_samples").get<std::size_t>();
  f.params.n_trees = j.at("n_trees").get<std::size_t>();
  f.params.subsample = j.at("subsample").get<std::size_t>();
  f.params.tree = tree_params_from(j.at("tree_params"));
  f.subsamples = j.at("subsamples").get<std::vector<std::vector<std::size_t>>>();
  for (const auto& tj : j.at("trees")) {
    TreeModel t;
    t.n_samples = f.n_samples;
    t.dim = tj.at("dim").get<std::size_t>();
    t.params = f.params.tree;
    for (const auto& nj : tj.at("nodes")) {
      TreeModel::Node nd;
      nd.feature = nj.at(0).get<int>();
      nd.threshold = nj.at(1).get<double>();
      nd.left = nj.at(2).get<int>();
      nd.right = nj.at(3).get<int>();
      nd.leaf = nj.at(4).get<int>();
      nd.n_estimation = nj.at(5).get<std::size_t>();
      t.nodes.push_back(nd);
    }
    t.leaves = tj.at("leaves").get<std::vector<std::vector<std::size_t>>>();
    f.trees.push_back(std::move(t));
  }
  if (f.trees.size() != f.params.n_trees) throw InputError("forest JSON: tree count mismatch");
  return f;
}

// --------------------------------------------------------------- WeightModel

std::string to_string(WeightMethod m) {
  switch (m) {
  case WeightMethod::Saa: return "saa";
  case WeightMethod::Knn: return "knn";
  case WeightMethod::Tree: return "tree";
  case WeightMethod::Forest: return "rf";
  }
  return "?";
}

WeightMethod weight_method_from_string(const std::string& s) {
  if (s == "saa") return WeightMethod::Saa;
  if (s == "knn") return WeightMethod::Knn;
  if (s == "tree" || s == "cart") return WeightMethod::Tree;
  if (s == "rf" || s == "forest") return WeightMethod::Forest;
  throw InputError("unknown weight method '" + s + "' (expected saa, knn, tree or rf)");
}

nlohmann::json weight_spec_to_json(const WeightSpec& spec) {
  return {{"method", to_string(spec.method)},
          {"k", spec.k},
          {"n_trees", spec.n_trees},
          {"lambda", spec.lambda},
          {"pi", spec.pi},
          {"subsample", spec.subsample},
          {"honesty", spec.honesty == Honesty::IgnoreResponse ? "ignore-response" : "half-split"}};
}

WeightSpec weight_spec_from_json(const nlohmann::json& j) {
  WeightSpec s;
  s.method = weight_method_from_string(j.value("method", std::string("saa")));
  s.k = j.value("k", std::size_t{0});
  s.n_trees = j.value("n_trees", std::size_t{100});
  s.lambda = j.value("lambda", 0.2);
  s.pi = j.value("pi", 1.0);
  s.subsample = j.value("subsample", std::size_t{0});
  s.honesty = j.value("honesty", std::string("ignore-response")) == "half-split" ? Honesty::HalfSplit
                                                                                : Honesty::IgnoreResponse;
  return s;
}

WeightModel WeightModel::fit(const WeightSpec& spec, const Matrix& covariates, std::uint64_t seed,
                             unsigned threads) {
  const std::size_t n = covariates.rows();
  if (n == 0) throw InputError("WeightModel::fit: no samples");
  switch (spec.method) {
  case WeightMethod::Saa:
    return WeightModel(Uniform{n});
  case WeightMethod::Knn: {
    const std::size_t k = spec.k == 0 ? default_min_leaf(n) : spec.k;
    if (k > n) throw InputError("WeightModel::fit: k exceeds the number of samples");
    return WeightModel(Knn{covariates, k});
  }
  case WeightMethod::Tree: {
    TreeParams p{spec.k == 0 ? default_min_leaf(n) : spec.k, spec.lambda, spec.pi, spec.honesty};
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng rng(seed, 0);
    auto [split, est] = honest_sets(all, p.honesty, rng);
    return WeightModel(fit_tree(covariates, split, est, p, derive_seed(seed, 1)));
  }
  case WeightMethod::Forest: {
    ForestParams p;
    p.tree = TreeParams{spec.k == 0 ? default_min_leaf(n) : spec.k, spec.lambda, spec.pi, spec.honesty};
    p.n_trees = spec.n_trees;
    p.subsample = spec.subsample;
    return WeightModel(fit_forest(covariates, p, seed, threads));
  }
  }
  throw InputError("WeightModel::fit: unknown method");
}

WeightVector WeightModel::weights(std::span<const double> query) const {
  return std::visit(
      [&](const auto& m) -> WeightVector {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Uniform>) {
          return WeightVector::uniform(m.n);
        } else if constexpr (std::is_same_v<T, Knn>) {
          return knn_weights(query, m.covariates, m.k);
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          return tree_weights(m, query);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          return forest_weights(m, query);
        } else {
          return m.weights;
        }
      },
      impl_);
}

std::size_t WeightModel::n_samples() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Uniform>) return m.n;
        else if constexpr (std::is_same_v<T, Knn>) return m.covariates.rows();
        else if constexpr (std::is_same_v<T, TreeModel>) return m.n_samples;
        else if constexpr (std::is_same_v<T, ForestModel>) return m.n_samples;
        else return m.weights.size();
      },
      impl_);
}

bool WeightModel::is_constant() const {
  return std::holds_alternative<Uniform>(impl_) || std::holds_alternative<Fixed>(impl_);
}

std::vector<WeightModel> fit_stage_models(const TrainingSet& data, const std::vector<WeightSpec>& specs,
                                          std::uint64_t seed, unsigned threads) {
  const std::size_t horizon = data.horizon();
  if (specs.empty()) throw InputError("fit_stage_models: no weight spec");
  if (specs.size() != 1 && specs.size() != horizon)
    throw InputError("fit_stage_models: need one spec or one per stage");
  std::vector<WeightModel> models;
  models.reserve(horizon);
  for (std::size_t t = 1; t <= horizon; ++t) {
    const auto& spec = specs.size() == 1 ? specs.front() : specs[t - 1];
    models.push_back(WeightModel::fit(spec, data.covariates(t - 1), derive_seed(seed, 7919 + t), threads));
  }
  return models;
}

} // namespace prescriptor
