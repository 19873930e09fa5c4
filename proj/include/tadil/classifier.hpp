#pragma once

#include "tadil/domain.hpp"

#include <map>
#include <set>
#include <vector>

namespace tadil {

/// Incremental nearest-exemplar task classifier.
///
/// Every fitted signature contributes its pooled neighbors as exemplars
/// labeled with the signature's task id. Exemplars are never removed or
/// revised, so fitting a new task cannot change what is stored for old ones.
/// Prediction is the task of the L1-nearest exemplar; a batch is labeled by
/// the mode of its per-row predictions.
///
/// Not synchronized: fit_increment needs exclusive access, predictions are
/// const and may run concurrently with each other.
class TaskClassifier {
 public:
  /// Throws Error{DuplicateTask} if sig.task_id was already fitted.
  void fit_increment(const TaskSignature& sig);

  /// Ties: lower task id, then earlier exemplar.
  TaskId predict_sample(const VectorXr& x) const;
  /// Per-row predictions for the rows of X.
  std::vector<TaskId> predict_rows(const MatrixXr& X) const;
  /// Mode of the per-row predictions; ties go to the lower task id.
  TaskId predict_batch(const EmbeddingBatch& batch) const;

  bool empty() const noexcept { return trained_.empty(); }
  const std::set<TaskId>& trained_tasks() const noexcept { return trained_; }
  const MatrixXr& exemplars() const noexcept { return exemplars_; }
  const std::vector<TaskId>& exemplar_tasks() const noexcept { return exemplar_tasks_; }
  const std::map<TaskId, MatrixXr>& centroids_by_task() const noexcept { return centroids_; }

  /// Rebuilds a classifier from serialized parts. Validates the invariants.
  static TaskClassifier from_parts(MatrixXr exemplars, std::vector<TaskId> exemplar_tasks,
                                   std::map<TaskId, MatrixXr> centroids);

 private:
  void require_trained(Index dim) const;

  MatrixXr exemplars_;
  std::vector<TaskId> exemplar_tasks_;
  std::map<TaskId, MatrixXr> centroids_;
  std::set<TaskId> trained_;
};

/// Mode of `predictions`, ties to the lower id. `predictions` must be nonempty.
TaskId majority_vote(const std::vector<TaskId>& predictions);

}  // namespace tadil
