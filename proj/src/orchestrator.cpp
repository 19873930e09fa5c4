#include "tadil/orchestrator.hpp"

#include "tadil/error.hpp"
#include "tadil/random.hpp"

#include "json.hpp"

#include <string>
#include <utility>

namespace tadil {

Orchestrator::Orchestrator(PipelineParams params) {
  params.cluster.validate();
  params.drift.validate();
  if (params.k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
  state_.params = params;
}

Orchestrator::Orchestrator(OrchestratorState state) : state_(std::move(state)) {
  const auto n = state_.memory.size();
  if (state_.heads.size() != n || state_.classifier.trained_tasks().size() != n) {
    throw Error(Errc::Corrupt, "memory, classifier and head registry sizes differ");
  }
  if (state_.active_task && !state_.classifier.trained_tasks().count(*state_.active_task)) {
    throw Error(Errc::Corrupt, "active task is not trained");
  }
}

OnlineDecision Orchestrator::online_step(const EmbeddingBatch& batch) {
  const auto& params = state_.params;
  if (!state_.memory.empty() && batch.dim() != state_.memory.at(0).dim()) {
    throw Error(Errc::DimensionMismatch, "batch dim differs from stored tasks");
  }

  StepRecord record;
  record.step = static_cast<std::int64_t>(state_.event_log.size());
  record.batch_id = batch.batch_id;

  TaskSignature sig = build_signature(batch, params.cluster, params.k, state_.memory.next_task_id());

  for (const TaskSignature& stored : state_.memory.most_recent_first()) {
    const DriftVerdict verdict = drift_check(sig, stored, params.drift);
    record.comparisons.push_back({stored.task_id, verdict});
    if (verdict.drifted) continue;

    const TaskId predicted = state_.classifier.predict_batch(batch);
    record.decision.kind = DecisionKind::KnownTask;
    record.decision.task_id = stored.task_id;
    if (predicted != stored.task_id) record.decision.warning = TaskMismatch{predicted, stored.task_id};

    state_.event_log.reserve(state_.event_log.size() + 1);
    state_.active_task = stored.task_id;
    state_.event_log.push_back(std::move(record));
    return state_.event_log.back().decision;
  }

  // Every stored task drifted: this is a new task. Stage all changes, then commit.
  const TaskId id = state_.memory.next_task_id();
  TaskClassifier classifier = state_.classifier;
  classifier.fit_increment(sig);
  HeadRegistry heads = state_.heads;
  heads.add(id, LinearHead(batch.dim(), derive_seed(params.head_seed, static_cast<std::uint64_t>(id))));
  TaskMemory memory = state_.memory;
  memory.append(std::move(sig));
  record.decision.kind = DecisionKind::NewTask;
  record.decision.task_id = id;
  state_.event_log.reserve(state_.event_log.size() + 1);

  state_.classifier = std::move(classifier);
  state_.heads = std::move(heads);
  state_.memory = std::move(memory);
  state_.active_task = id;
  state_.event_log.push_back(std::move(record));
  return state_.event_log.back().decision;
}

int Orchestrator::infer(const VectorXr& x) const {
  if (!state_.active_task) throw Error(Errc::NoActiveTask, "no batch has been processed");
  return state_.heads.at(*state_.active_task).infer(x);
}

const LinearHead& Orchestrator::train_head(TaskId task, const MatrixXr& vectors,
                                           std::span<const int> class_labels) {
  LinearHead head = state_.heads.at(task);
  head.fit(vectors, class_labels, state_.params.head);
  LinearHead& slot = state_.heads.at(task);
  slot = std::move(head);
  return slot;
}

std::string_view to_string(DecisionKind kind) {
  return kind == DecisionKind::NewTask ? "NewTask" : "KnownTask";
}

std::string event_log_line(const StepRecord& record) {
  nlohmann::ordered_json j;
  j["step"] = record.step;
  j["batch_id"] = record.batch_id;
  j["decision"] = std::string(to_string(record.decision.kind));
  j["task_id"] = record.decision.task_id;
  auto comparisons = nlohmann::ordered_json::array();
  for (const auto& c : record.comparisons) {
    comparisons.push_back({{"task_id", c.task_id},
                           {"statistic", c.verdict.statistic},
                           {"threshold", c.verdict.threshold},
                           {"score", c.verdict.score},
                           {"drifted", c.verdict.drifted}});
  }
  j["comparisons"] = std::move(comparisons);
  j["warning"] = record.decision.warning.has_value();
  if (record.decision.warning) {
    j["classifier_predicted"] = record.decision.warning->classifier_predicted;
    j["memory_matched"] = record.decision.warning->memory_matched;
  }
  return j.dump();
}

std::string event_log_text(const std::vector<StepRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    out += event_log_line(r);
    out += '\n';
  }
  return out;
}

}  // namespace tadil
