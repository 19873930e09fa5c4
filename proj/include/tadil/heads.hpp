#pragma once

#include "tadil/domain.hpp"

#include <cstdint>
#include <map>
#include <span>

namespace tadil {

struct HeadTraining {
  double learning_rate = 0.1;
  int iterations = 300;
  double init_scale = 0.01;
};

/// Multinomial linear classifier on standardized embedding features, trained
/// by full-batch gradient descent on softmax cross-entropy.
///
/// Standardization statistics are taken from the first training set and kept
/// for the lifetime of the head. An untrained head predicts class 0.
class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(Index dim, std::uint64_t seed);

  /// Continues from the current weights. Grows the class count if `labels`
  /// contains new classes. Throws Error{EmptyTrainingSet | DimensionMismatch |
  /// InvalidArgument}.
  void fit(const MatrixXr& X, std::span<const int> labels, const HeadTraining& cfg);
  int infer(const VectorXr& x) const;
  double accuracy(const MatrixXr& X, std::span<const int> labels) const;

  Index dim() const noexcept { return dim_; }
  Index num_classes() const noexcept { return weights_.rows(); }
  bool trained() const noexcept { return trained_; }

  // Parameters are exposed for snapshots and bit-level comparisons.
  const MatrixXr& weights() const noexcept { return weights_; }
  const VectorXr& bias() const noexcept { return bias_; }
  const VectorXr& feature_mean() const noexcept { return mean_; }
  const VectorXr& feature_scale() const noexcept { return scale_; }
  std::uint64_t seed() const noexcept { return seed_; }

  static LinearHead from_parts(Index dim, std::uint64_t seed, bool trained, MatrixXr weights,
                               VectorXr bias, VectorXr mean, VectorXr scale);

  friend bool operator==(const LinearHead& a, const LinearHead& b);

 private:
  MatrixXr standardize(const MatrixXr& X) const;
  void grow_classes(Index classes, double init_scale);

  Index dim_ = 0;
  std::uint64_t seed_ = 0;
  bool trained_ = false;
  MatrixXr weights_;  // classes x dim
  VectorXr bias_;
  VectorXr mean_;
  VectorXr scale_;
};

/// One head per task id.
class HeadRegistry {
 public:
  void add(TaskId task, LinearHead head);
  bool contains(TaskId task) const { return heads_.count(task) != 0; }
  /// Throws Error{UnknownTask}.
  const LinearHead& at(TaskId task) const;
  LinearHead& at(TaskId task);
  std::size_t size() const noexcept { return heads_.size(); }
  const std::map<TaskId, LinearHead>& heads() const noexcept { return heads_; }

 private:
  std::map<TaskId, LinearHead> heads_;
};

}  // namespace tadil
