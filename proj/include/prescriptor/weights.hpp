#pragma once

// Weight functions that map a query covariate to a probability vector over
// training samples: uniform (SAA), k-nearest neighbours, honest random-split
// regression trees and subsampled forests of such trees.

#include "prescriptor/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace prescriptor {

/// Paired covariate/uncertainty paths. Covariates exist for stages 0..T-1,
/// uncertainties for stages 1..T.
class TrainingSet {
public:
  TrainingSet() = default;
  /// covariates[t] is N x d_t for t = 0..T-1; uncertainties[t-1] is N x d_y for t = 1..T.
  TrainingSet(std::vector<Matrix> covariates, std::vector<Matrix> uncertainties);

  [[nodiscard]] std::size_t n_samples() const { return n_samples_; }
  [[nodiscard]] std::size_t horizon() const { return uncertainties_.size(); }
  [[nodiscard]] std::size_t covariate_dim(std::size_t t) const { return covariates_.at(t).cols(); }
  [[nodiscard]] std::size_t uncertainty_dim() const {
    return uncertainties_.empty() ? 0 : uncertainties_.front().cols();
  }

  /// x_t^i, t in 0..T-1.
  [[nodiscard]] std::span<const double> x(std::size_t i, std::size_t t) const {
    return covariates_.at(t).row(i);
  }
  /// y_t^i, t in 1..T.
  [[nodiscard]] std::span<const double> y(std::size_t i, std::size_t t) const {
    return uncertainties_.at(t - 1).row(i);
  }
  [[nodiscard]] const Matrix& covariates(std::size_t t) const { return covariates_.at(t); }
  [[nodiscard]] const Matrix& uncertainties(std::size_t t) const { return uncertainties_.at(t - 1); }

  /// Same covariates with uncertainty rows reordered by `perm` (sample i takes the
  /// responses of perm[i]). Used to check that learners never look at responses.
  [[nodiscard]] TrainingSet with_permuted_responses(std::span<const std::size_t> perm) const;

  /// First n samples.
  [[nodiscard]] TrainingSet head(std::size_t n) const;

  friend bool operator==(const TrainingSet&, const TrainingSet&) = default;

private:
  std::size_t n_samples_ = 0;
  std::vector<Matrix> covariates_;
  std::vector<Matrix> uncertainties_;
};

/// CSV with header `sample,stage,kind,dim0,dim1,...`, kind in {x, y}. Lines
/// starting with '#' are comments. Covariate rows for stage T are dropped with
/// a warning on `warnings`.
void write_training_csv(std::ostream& out, const TrainingSet& data);
TrainingSet read_training_csv(std::istream& in, std::vector<std::string>* warnings = nullptr);
nlohmann::json training_to_json(const TrainingSet& data);
TrainingSet training_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr);

/// Probability vector over training samples.
struct WeightVector {
  Vector values;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  /// (index, weight) pairs with positive weight, in index order.
  [[nodiscard]] std::vector<std::pair<std::size_t, double>> support() const;
  /// Nonnegative entries summing to one within `tol`.
  [[nodiscard]] bool is_valid(double tol = 1e-9) const;

  static WeightVector uniform(std::size_t n);
};

/// Weight 1/k on each of the k nearest covariate rows (Euclidean, ties to the
/// lowest index).
WeightVector knn_weights(std::span<const double> query, const Matrix& covariates, std::size_t k);

double weighted_regression(const WeightVector& w, std::span<const double> responses);

enum class Honesty { IgnoreResponse, HalfSplit };

struct TreeParams {
  std::size_t min_leaf = 1; ///< k: leaves hold between k and 2k-1 estimation samples
  double lambda = 0.2;      ///< every split keeps at least this fraction on each side
  double pi = 1.0;          ///< each feature is chosen with probability >= pi/d
  Honesty honesty = Honesty::IgnoreResponse;
};

/// Axis-aligned partition with its estimation samples stored per leaf.
struct TreeModel {
  struct Node {
    int feature = -1; ///< -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1; ///< index into leaves
    /// Estimation-sample count at this node before splitting.
    std::size_t n_estimation = 0;
  };

  std::size_t n_samples = 0; ///< size of the global sample index space
  std::size_t dim = 0;
  TreeParams params;
  std::vector<Node> nodes;
  std::vector<std::vector<std::size_t>> leaves;

  [[nodiscard]] std::size_t leaf_of(std::span<const double> query) const;

  friend bool operator==(const TreeModel&, const TreeModel&);
};

/// Fits an honest regular random-split tree. Only covariate rows indexed by
/// `split_idx` position thresholds; leaves record the `estimation_idx` members.
/// Responses are never consulted.
TreeModel fit_tree(const Matrix& covariates, std::span<const std::size_t> split_idx,
                   std::span<const std::size_t> estimation_idx, const TreeParams& params,
                   std::uint64_t seed);

WeightVector tree_weights(const TreeModel& tree, std::span<const double> query);

struct ForestParams {
  TreeParams tree;
  std::size_t n_trees = 100;
  std::size_t subsample = 0; ///< 0 selects min(ceil(N^0.8), N-1)
};

struct ForestModel {
  std::vector<TreeModel> trees;
  std::vector<std::vector<std::size_t>> subsamples;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  ForestParams params;
};

/// Each tree sees a subsample drawn without replacement from its own seed
/// stream, so the forest is identical for any thread count.
ForestModel fit_forest(const Matrix& covariates, const ForestParams& params, std::uint64_t seed,
                       unsigned threads = 1);
WeightVector forest_weights(const ForestModel& forest, std::span<const double> query);

nlohmann::json forest_to_json(const ForestModel& forest);
ForestModel forest_from_json(const nlohmann::json& j);

std::size_t default_min_leaf(std::size_t n);
std::size_t default_subsample(std::size_t n);

enum class WeightMethod { Saa, Knn, Tree, Forest };

std::string to_string(WeightMethod m);
WeightMethod weight_method_from_string(const std::string& s);

/// Learner choice plus hyperparameters; zero means "use the default".
struct WeightSpec {
  WeightMethod method = WeightMethod::Saa;
  std::size_t k = 0;
  std::size_t n_trees = 100;
  double lambda = 0.2;
  double pi = 1.0;
  std::size_t subsample = 0;
  Honesty honesty = Honesty::IgnoreResponse;
};

nlohmann::json weight_spec_to_json(const WeightSpec& spec);
WeightSpec weight_spec_from_json(const nlohmann::json& j);

/// A fitted weight function over N samples. Immutable; safe to share.
class WeightModel {
public:
  struct Uniform {
    std::size_t n = 0;
  };
  struct Knn {
    Matrix covariates;
    std::size_t k = 1;
  };
  /// Query-independent weights (the stale-covariate "static" policies).
  struct Fixed {
    WeightVector weights;
  };

  WeightModel() = default;
  explicit WeightModel(Uniform u) : impl_(std::move(u)) {}
  explicit WeightModel(Knn k) : impl_(std::move(k)) {}
  explicit WeightModel(TreeModel t) : impl_(std::move(t)) {}
  explicit WeightModel(ForestModel f) : impl_(std::move(f)) {}
  explicit WeightModel(Fixed f) : impl_(std::move(f)) {}

  /// Fits the learner in `spec` on covariate rows (one per training sample).
  static WeightModel fit(const WeightSpec& spec, const Matrix& covariates, std::uint64_t seed,
                         unsigned threads = 1);

  [[nodiscard]] WeightVector weights(std::span<const double> query) const;
  [[nodiscard]] std::size_t n_samples() const;
  /// True when the weights ignore the query.
  [[nodiscard]] bool is_constant() const;

  [[nodiscard]] const auto& impl() const { return impl_; }

private:
  std::variant<Uniform, Knn, TreeModel, ForestModel, Fixed> impl_;
};

/// One model per stage t = 1..T, fitted on the stage t-1 covariates; element
/// t-1 of the result holds w^t.
std::vector<WeightModel> fit_stage_models(const TrainingSet& data,
                                          const std::vector<WeightSpec>& specs,
                                          std::uint64_t seed, unsigned threads = 1);

} // namespace prescriptor
