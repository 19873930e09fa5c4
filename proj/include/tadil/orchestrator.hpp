#pragma once

#include "tadil/classifier.hpp"
#include "tadil/clustering.hpp"
#include "tadil/domain.hpp"
#include "tadil/drift.hpp"
#include "tadil/heads.hpp"
#include "tadil/signature.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tadil {

struct PipelineParams {
  ClusterParams cluster;
  DriftParams drift;
  int k = kDefaultNeighbors;
  HeadTraining head;
  std::uint64_t head_seed = 0;
};

struct DriftComparison {
  TaskId task_id = 0;
  DriftVerdict verdict;
};

/// One event-log record per online step.
struct StepRecord {
  std::int64_t step = 0;
  std::int64_t batch_id = 0;
  OnlineDecision decision;
  /// Memory entries visited, most recent first, up to the first match.
  std::vector<DriftComparison> comparisons;
};

struct OrchestratorState {
  TaskMemory memory;
  TaskClassifier classifier;
  HeadRegistry heads;
  std::optional<TaskId> active_task;
  PipelineParams params;
  std::vector<StepRecord> event_log;
};

/// Online task-agnostic task identification over a stream of batches.
///
/// Each step builds the batch's signature and scans memory most recent
/// first. The first stored task that does not drift is reused: the task
/// classifier is consulted, a mismatch is logged as a warning, and the stored
/// task's head becomes active. If every stored task drifts (or memory is
/// empty), the signature is stored under a new task id, the classifier is
/// fitted on it, and a fresh head is registered and activated.
///
/// Steps are transactional. Single writer: online_step and train_head must
/// not run concurrently with anything; infer is const.
class Orchestrator {
 public:
  explicit Orchestrator(PipelineParams params = {});
  explicit Orchestrator(OrchestratorState state);

  OnlineDecision online_step(const EmbeddingBatch& batch);

  /// Class label from the active task's head. Throws Error{NoActiveTask}.
  int infer(const VectorXr& x) const;

  /// Trains one task's head, leaving every other head untouched.
  /// Throws Error{UnknownTask | EmptyTrainingSet}.
  const LinearHead& train_head(TaskId task, const MatrixXr& vectors, std::span<const int> class_labels);

  const OrchestratorState& state() const noexcept { return state_; }
  const TaskMemory& memory() const noexcept { return state_.memory; }
  const TaskClassifier& classifier() const noexcept { return state_.classifier; }
  const HeadRegistry& heads() const noexcept { return state_.heads; }
  std::optional<TaskId> active_task() const noexcept { return state_.active_task; }
  const std::vector<StepRecord>& event_log() const noexcept { return state_.event_log; }
  const PipelineParams& params() const noexcept { return state_.params; }

 private:
  OrchestratorState state_;
};

/// Single-line JSON rendering of a step record (no trailing newline).
std::string event_log_line(const StepRecord& record);
/// All records, newline-terminated.
std::string event_log_text(const std::vector<StepRecord>& log);

std::string_view to_string(DecisionKind kind);

}  // namespace tadil
