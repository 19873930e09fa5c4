#pragma once

#include "tadil/classifier.hpp"
#include "tadil/domain.hpp"
#include "tadil/orchestrator.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tadil {

/// One synthetic domain: an isotropic Gaussian blob, unit-normalized.
struct SyntheticTaskSpec {
  TaskId task_id = 0;
  VectorXr mean;
  double spread = 0.05;  // per-coordinate standard deviation before normalization
  int num_classes = 1;
  std::uint64_t class_seed = 0;  // fixes the class-labelling directions
};

/// `num_tasks` specs with mutually orthogonal means of norm sqrt(dim), so the
/// per-coordinate signal scale is 1 whatever the dimension.
std::vector<SyntheticTaskSpec> orthogonal_task_specs(int num_tasks, Index dim, double spread,
                                                     int num_classes, std::uint64_t seed);

/// A generated batch plus per-row class labels for head training. Labels are
/// argmax_c <w_c, noise> over the spec's seeded directions, so they are a
/// linear function of the pre-normalization sample.
struct LabeledBatch {
  EmbeddingBatch batch;
  std::vector<int> class_labels;
};

LabeledBatch generate_batch(const SyntheticTaskSpec& spec, Index batch_size, std::uint64_t seed,
                            std::int64_t batch_id = 0);

struct Scenario {
  std::vector<TaskId> sequence;
  int batches_per_step = 1;
  Index batch_size = 200;
  std::uint64_t seed = 0;
  bool train_heads = true;
};

struct StepOutcome {
  std::int64_t step = 0;
  std::int64_t batch_id = 0;
  TaskId true_task = -1;  // -1 when the batch carries no ground truth
  OnlineDecision decision;
  bool correct = false;
};

struct ScenarioReport {
  std::vector<StepRecord> events;
  std::vector<StepOutcome> outcomes;
  int new_tasks = 0;
  int known_tasks = 0;
  int warnings = 0;
  /// Fraction of steps whose decided task maps to the true task, where a
  /// decided id is bound to the true task of the step that created it.
  double task_id_accuracy = 0.0;
  std::map<TaskId, TaskId> decided_to_true;
};

/// Feeds one generated batch per (step, repetition) through `orchestrator`.
/// Specs are looked up by task id. Each active head is trained on its batch
/// when scenario.train_heads is set.
ScenarioReport run_scenario(const Scenario& scenario, std::span<const SyntheticTaskSpec> specs,
                            Orchestrator& orchestrator);
ScenarioReport run_scenario(const Scenario& scenario, std::span<const SyntheticTaskSpec> specs,
                            const PipelineParams& params);

/// Feeds already-ingested batches through `orchestrator`. Accuracy counts
/// only batches that carry true_task.
ScenarioReport run_stream(std::span<const EmbeddingBatch> batches, Orchestrator& orchestrator);

std::string scenario_report_json(const ScenarioReport& report);

/// Signed drift scores: entry (i, j) = drift_check(signatures[i],
/// signatures[j]).score off the diagonal and drift_check(signatures[i],
/// same_task_probes[i]).score on it.
MatrixXr drift_confusion_matrix(std::span<const TaskSignature> signatures,
                                std::span<const TaskSignature> same_task_probes,
                                const DriftParams& params);

/// Builds two independent signatures per spec and returns their confusion matrix.
MatrixXr synthetic_drift_matrix(std::span<const SyntheticTaskSpec> specs, Index batch_size,
                                const PipelineParams& params, std::uint64_t seed);

struct RecallReport {
  std::vector<TaskId> tasks;
  std::vector<double> recall;
  std::vector<Index> support;
  double min_required = 0.0;  // 1 / number of trained tasks
  std::vector<bool> sufficient;  // recall strictly above min_required

  bool all_sufficient() const;
};

/// Per-sample recall of every trained task over rows carrying ground truth
/// (row_tasks, else true_task). Tasks without evaluation rows get recall 0.
RecallReport recall_report(const TaskClassifier& clf, std::span<const EmbeddingBatch> eval_batches);

/// One row per classifier stage T = 2..specs.size(): the classifier holds
/// tasks 0..T-1 and is evaluated on `eval_batches_per_task` fresh batches of
/// each of them.
struct RecallStage {
  int num_tasks = 0;
  RecallReport report;
};
std::vector<RecallStage> staged_recall(std::span<const SyntheticTaskSpec> specs, Index batch_size,
                                       int eval_batches_per_task, const PipelineParams& params,
                                       std::uint64_t seed);

}  // namespace tadil
