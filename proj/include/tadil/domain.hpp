#pragma once

#include "tadil/linalg.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace tadil {

inline constexpr Index kDefaultDim = 512;
/// Rows whose norm is within this distance of 1 count as unit-norm.
inline constexpr double kUnitNormTolerance = 1e-6;
/// Rows with a smaller norm cannot be normalized.
inline constexpr double kZeroNormThreshold = 1e-12;

/// One batch of unit-norm embeddings (one per row).
///
/// `true_task` and `row_tasks` are evaluation-only ground truth. Nothing on
/// the online path (clustering, drift, task classification) reads them.
struct EmbeddingBatch {
  std::int64_t batch_id = 0;
  MatrixXr vectors;
  std::optional<TaskId> true_task;
  std::vector<TaskId> row_tasks;  // empty, or one label per row

  Index size() const noexcept { return vectors.rows(); }
  Index dim() const noexcept { return vectors.cols(); }
};

/// Validates `raw` and scales every row to unit Euclidean norm. Rows already
/// within kUnitNormTolerance of unit norm are kept bit-for-bit, which makes
/// the operation exactly idempotent and keeps float32 round-trips lossless.
///
/// Throws Error{ZeroVector | NonFinite | DimensionMismatch | InvalidArgument}.
EmbeddingBatch normalize_batch(MatrixXr raw, std::int64_t batch_id,
                               std::optional<Index> expected_dim = std::nullopt);

/// Assigns monotonically increasing batch ids at ingestion.
class BatchSequencer {
 public:
  explicit BatchSequencer(std::int64_t first_id = 0) : next_(first_id) {}

  EmbeddingBatch operator()(MatrixXr raw, std::optional<Index> expected_dim = std::nullopt) {
    EmbeddingBatch b = normalize_batch(std::move(raw), next_, expected_dim);
    ++next_;
    return b;
  }

  std::int64_t next_id() const noexcept { return next_; }

 private:
  std::int64_t next_;
};

/// DBSCAN output for one batch.
struct ClusterAssignment {
  static constexpr int kNoise = -1;

  std::vector<int> labels;  // one per batch row
  int num_clusters = 0;
};

/// Representative set of one task: one centroid per cluster plus the k member
/// embeddings nearest (L1) to it, copied out of the originating batch.
struct TaskSignature {
  TaskId task_id = 0;
  MatrixXr centroids;                          // one centroid per row
  std::vector<MatrixXr> neighbor_sets;         // neighbor_sets[i] pairs with centroid row i
  std::vector<std::vector<Index>> source_rows; // batch row of every stored neighbor
  int k = 10;
  std::int64_t created_at = 0;

  Index num_centroids() const noexcept { return centroids.rows(); }
  Index dim() const noexcept { return centroids.cols(); }
  Index pooled_size() const noexcept;
  /// All neighbor sets stacked in centroid order.
  MatrixXr pooled_neighbors() const;
};

/// Append-only task store. Task ids equal insertion indices.
class TaskMemory {
 public:
  /// Stores `sig` under the next task id and returns that id.
  TaskId append(TaskSignature sig);

  TaskId next_task_id() const noexcept { return static_cast<TaskId>(signatures_.size()); }
  std::size_t size() const noexcept { return signatures_.size(); }
  bool empty() const noexcept { return signatures_.empty(); }
  const TaskSignature& at(TaskId id) const;

  const std::vector<TaskSignature>& signatures() const noexcept { return signatures_; }
  /// Most recent first, the order drift checks visit memory in.
  auto most_recent_first() const noexcept {
    struct Range {
      std::vector<TaskSignature>::const_reverse_iterator b, e;
      auto begin() const { return b; }
      auto end() const { return e; }
    };
    return Range{signatures_.crbegin(), signatures_.crend()};
  }

 private:
  std::vector<TaskSignature> signatures_;
};

/// Result of a two-sample drift test. Negative score means no drift.
struct DriftVerdict {
  double statistic = 0.0;
  double threshold = 0.0;
  double score = 0.0;
  bool drifted = false;
};

enum class DecisionKind { KnownTask, NewTask };

/// Classifier and memory disagreed on a known task.
struct TaskMismatch {
  TaskId classifier_predicted = 0;
  TaskId memory_matched = 0;

  friend bool operator==(const TaskMismatch&, const TaskMismatch&) = default;
};

struct OnlineDecision {
  DecisionKind kind = DecisionKind::NewTask;
  TaskId task_id = 0;
  std::optional<TaskMismatch> warning;

  friend bool operator==(const OnlineDecision&, const OnlineDecision&) = default;
};

}  // namespace tadil
