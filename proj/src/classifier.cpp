#include "tadil/classifier.hpp"

#include "tadil/error.hpp"

#include <limits>
#include <string>

namespace tadil {

void TaskClassifier::fit_increment(const TaskSignature& sig) {
  if (trained_.count(sig.task_id)) {
    throw Error(Errc::DuplicateTask, "task " + std::to_string(sig.task_id) + " already trained");
  }
  if (!trained_.empty() && sig.dim() != exemplars_.cols()) {
    throw Error(Errc::DimensionMismatch, "signature dim differs from classifier");
  }
  const MatrixXr pooled = sig.pooled_neighbors();
  if (pooled.rows() < 1) throw Error(Errc::EmptyTrainingSet, "signature has no neighbors");

  const Index old_rows = exemplars_.rows();
  exemplars_.conservativeResize(old_rows + pooled.rows(), pooled.cols());
  exemplars_.bottomRows(pooled.rows()) = pooled;
  exemplar_tasks_.insert(exemplar_tasks_.end(), static_cast<std::size_t>(pooled.rows()), sig.task_id);
  centroids_[sig.task_id] = sig.centroids;
  trained_.insert(sig.task_id);
}

void TaskClassifier::require_trained(Index dim) const {
  if (trained_.empty()) throw Error(Errc::EmptyClassifier, "no task has been fitted");
  if (dim != exemplars_.cols()) throw Error(Errc::DimensionMismatch, "input dim differs from classifier");
}

TaskId TaskClassifier::predict_sample(const VectorXr& x) const {
  require_trained(x.size());
  const VectorXr dist = manhattan_to_rows(exemplars_, x);
  Index best = 0;
  for (Index i = 1; i < dist.size(); ++i) {
    const auto ti = exemplar_tasks_[static_cast<std::size_t>(i)];
    const auto tb = exemplar_tasks_[static_cast<std::size_t>(best)];
    if (dist(i) < dist(best) || (dist(i) == dist(best) && ti < tb)) best = i;
  }
  return exemplar_tasks_[static_cast<std::size_t>(best)];
}

std::vector<TaskId> TaskClassifier::predict_rows(const MatrixXr& X) const {
  require_trained(X.cols());
  std::vector<TaskId> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Index r = 0; r < X.rows(); ++r) out.push_back(predict_sample(X.row(r).transpose()));
  return out;
}

TaskId TaskClassifier::predict_batch(const EmbeddingBatch& batch) const {
  require_trained(batch.dim());
  if (batch.size() < 1) throw Error(Errc::InvalidArgument, "empty batch");
  return majority_vote(predict_rows(batch.vectors));
}

TaskClassifier TaskClassifier::from_parts(MatrixXr exemplars, std::vector<TaskId> exemplar_tasks,
                                          std::map<TaskId, MatrixXr> centroids) {
  if (static_cast<Index>(exemplar_tasks.size()) != exemplars.rows()) {
    throw Error(Errc::Corrupt, "exemplar labels do not match exemplar rows");
  }
  TaskClassifier clf;
  for (const auto& [task, c] : centroids) clf.trained_.insert(task);
  for (TaskId t : exemplar_tasks) {
    if (!clf.trained_.count(t)) throw Error(Errc::Corrupt, "exemplar labeled with unknown task");
  }
  clf.exemplars_ = std::move(exemplars);
  clf.exemplar_tasks_ = std::move(exemplar_tasks);
  clf.centroids_ = std::move(centroids);
  return clf;
}

TaskId majority_vote(const std::vector<TaskId>& predictions) {
  if (predictions.empty()) throw Error(Errc::InvalidArgument, "no predictions to vote on");
  std::map<TaskId, std::size_t> counts;
  for (TaskId t : predictions) ++counts[t];
  TaskId best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [task, n] : counts) {  // ascending id, so strict > keeps the lower id on ties
    if (n > best_count) {
      best = task;
      best_count = n;
    }
  }
  return best;
}

}  // namespace tadil
