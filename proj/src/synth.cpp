#include "tadil/synth.hpp"

#include "tadil/error.hpp"
#include "tadil/random.hpp"
#include "tadil/signature.hpp"

#include "json.hpp"

#include <Eigen/QR>

#include <cmath>
#include <random>
#include <set>
#include <string>

namespace tadil {

namespace {

MatrixXr gaussian_matrix(Index rows, Index cols, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  MatrixXr m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

const SyntheticTaskSpec& find_spec(std::span<const SyntheticTaskSpec> specs, TaskId task) {
  for (const auto& s : specs) {
    if (s.task_id == task) return s;
  }
  throw Error(Errc::UnknownTask, "no synthetic spec for task " + std::to_string(task));
}

}  // namespace

std::vector<SyntheticTaskSpec> orthogonal_task_specs(int num_tasks, Index dim, double spread,
                                                     int num_classes, std::uint64_t seed) {
  if (num_tasks < 1 || num_tasks > dim) throw Error(Errc::InvalidArgument, "need 1 <= num_tasks <= dim");
  if (!(spread > 0.0)) throw Error(Errc::InvalidArgument, "spread must be positive");
  if (num_classes < 1) throw Error(Errc::InvalidArgument, "num_classes must be >= 1");

  const Eigen::MatrixXd G = gaussian_matrix(dim, num_tasks, 1.0, derive_seed(seed, 0x6d65616eULL));
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, num_tasks);

  std::vector<SyntheticTaskSpec> specs;
  for (int t = 0; t < num_tasks; ++t) {
    SyntheticTaskSpec s;
    s.task_id = t;
    s.mean = Q.col(t) * std::sqrt(static_cast<double>(dim));
    s.spread = spread;
    s.num_classes = num_classes;
    s.class_seed = derive_seed(seed, 0x636c6173ULL, static_cast<std::uint64_t>(t));
    specs.push_back(std::move(s));
  }
  return specs;
}

LabeledBatch generate_batch(const SyntheticTaskSpec& spec, Index batch_size, std::uint64_t seed,
                            std::int64_t batch_id) {
  if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
  if (!(spec.spread > 0.0)) throw Error(Errc::InvalidArgument, "spread must be positive");
  const Index dim = spec.mean.size();

  const MatrixXr noise = gaussian_matrix(batch_size, dim, 1.0, seed);
  MatrixXr raw = (noise * spec.spread).rowwise() + spec.mean.transpose();

  LabeledBatch out;
  out.class_labels.assign(static_cast<std::size_t>(batch_size), 0);
  if (spec.num_classes > 1) {
    const MatrixXr directions = gaussian_matrix(spec.num_classes, dim, 1.0, spec.class_seed);
    const MatrixXr scores = noise * directions.transpose();
    for (Index i = 0; i < batch_size; ++i) {
      Index best = 0;
      scores.row(i).maxCoeff(&best);
      out.class_labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
  }
  out.batch = normalize_batch(std::move(raw), batch_id);
  out.batch.true_task = spec.task_id;
  out.batch.row_tasks.assign(static_cast<std::size_t>(batch_size), spec.task_id);
  return out;
}

namespace {

/// Accumulates step outcomes. Only batches with ground truth enter accuracy.
class ReportBuilder {
 public:
  explicit ReportBuilder(const Orchestrator& orchestrator)
      : orchestrator_(orchestrator), log_start_(orchestrator.event_log().size()) {}

  void add(const EmbeddingBatch& batch, const OnlineDecision& d) {
    StepOutcome o;
    o.step = static_cast<std::int64_t>(report_.outcomes.size());
    o.batch_id = batch.batch_id;
    o.true_task = batch.true_task.value_or(-1);
    o.decision = d;
    if (d.kind == DecisionKind::NewTask) {
      ++report_.new_tasks;
    } else {
      ++report_.known_tasks;
    }
    if (d.warning) ++report_.warnings;
    if (batch.true_task) {
      if (d.kind == DecisionKind::NewTask) {
        o.correct = bound_true_.insert(*batch.true_task).second;
        report_.decided_to_true[d.task_id] = *batch.true_task;
      } else {
        auto it = report_.decided_to_true.find(d.task_id);
        o.correct = it != report_.decided_to_true.end() && it->second == *batch.true_task;
      }
      ++labeled_;
      if (o.correct) ++correct_;
    }
    report_.outcomes.push_back(o);
  }

  ScenarioReport finish() {
    const auto& log = orchestrator_.event_log();
    report_.events.assign(log.begin() + static_cast<std::ptrdiff_t>(log_start_), log.end());
    report_.task_id_accuracy =
        labeled_ == 0 ? 0.0 : static_cast<double>(correct_) / static_cast<double>(labeled_);
    return std::move(report_);
  }

 private:
  const Orchestrator& orchestrator_;
  std::size_t log_start_;
  ScenarioReport report_;
  std::set<TaskId> bound_true_;
  std::size_t labeled_ = 0;
  std::size_t correct_ = 0;
};

}  // namespace

ScenarioReport run_scenario(const Scenario& scenario, std::span<const SyntheticTaskSpec> specs,
                            Orchestrator& orchestrator) {
  if (scenario.batches_per_step < 1) throw Error(Errc::InvalidArgument, "batches_per_step must be >= 1");
  for (TaskId t : scenario.sequence) find_spec(specs, t);

  ReportBuilder builder(orchestrator);
  std::int64_t batch_id = 0;
  for (std::size_t step = 0; step < scenario.sequence.size(); ++step) {
    const SyntheticTaskSpec& spec = find_spec(specs, scenario.sequence[step]);
    for (int rep = 0; rep < scenario.batches_per_step; ++rep) {
      const auto seed = derive_seed(scenario.seed, step, static_cast<std::uint64_t>(rep));
      const LabeledBatch lb = generate_batch(spec, scenario.batch_size, seed, batch_id++);
      const OnlineDecision d = orchestrator.online_step(lb.batch);
      if (scenario.train_heads) orchestrator.train_head(d.task_id, lb.batch.vectors, lb.class_labels);
      builder.add(lb.batch, d);
    }
  }
  return builder.finish();
}

ScenarioReport run_stream(std::span<const EmbeddingBatch> batches, Orchestrator& orchestrator) {
  ReportBuilder builder(orchestrator);
  for (const auto& batch : batches) builder.add(batch, orchestrator.online_step(batch));
  return builder.finish();
}

ScenarioReport run_scenario(const Scenario& scenario, std::span<const SyntheticTaskSpec> specs,
                            const PipelineParams& params) {
  Orchestrator orchestrator(params);
  return run_scenario(scenario, specs, orchestrator);
}

std::string scenario_report_json(const ScenarioReport& report) {
  nlohmann::ordered_json j;
  j["new_tasks"] = report.new_tasks;
  j["known_tasks"] = report.known_tasks;
  j["warnings"] = report.warnings;
  j["task_id_accuracy"] = report.task_id_accuracy;
  auto steps = nlohmann::ordered_json::array();
  for (const auto& o : report.outcomes) {
    steps.push_back({{"step", o.step},
                     {"batch_id", o.batch_id},
                     {"true_task", o.true_task},
                     {"decision", std::string(to_string(o.decision.kind))},
                     {"task_id", o.decision.task_id},
                     {"warning", o.decision.warning.has_value()},
                     {"correct", o.correct}});
  }
  j["steps"] = std::move(steps);
  auto mapping = nlohmann::ordered_json::object();
  for (const auto& [decided, truth] : report.decided_to_true) mapping[std::to_string(decided)] = truth;
  j["decided_to_true"] = std::move(mapping);
  return j.dump(2);
}

MatrixXr drift_confusion_matrix(std::span<const TaskSignature> signatures,
                                std::span<const TaskSignature> same_task_probes,
                                const DriftParams& params) {
  const auto n = static_cast<Index>(signatures.size());
  if (n < 2) throw Error(Errc::InvalidArgument, "need at least two signatures");
  if (same_task_probes.size() != signatures.size()) {
    throw Error(Errc::InvalidArgument, "one same-task probe per signature required");
  }
  MatrixXr scores(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& si = signatures[static_cast<std::size_t>(i)];
    scores(i, i) = drift_check(si, same_task_probes[static_cast<std::size_t>(i)], params).score;
    for (Index j = 0; j < n; ++j) {
      if (j != i) scores(i, j) = drift_check(si, signatures[static_cast<std::size_t>(j)], params).score;
    }
  }
  return scores;
}

MatrixXr synthetic_drift_matrix(std::span<const SyntheticTaskSpec> specs, Index batch_size,
                                const PipelineParams& params, std::uint64_t seed) {
  std::vector<TaskSignature> stored, probes;
  for (const auto& spec : specs) {
    const auto t = static_cast<std::uint64_t>(spec.task_id);
    const auto a = generate_batch(spec, batch_size, derive_seed(seed, t, 0));
    const auto b = generate_batch(spec, batch_size, derive_seed(seed, t, 1));
    stored.push_back(build_signature(a.batch, params.cluster, params.k, spec.task_id));
    probes.push_back(build_signature(b.batch, params.cluster, params.k, spec.task_id));
  }
  return drift_confusion_matrix(stored, probes, params.drift);
}

bool RecallReport::all_sufficient() const {
  for (bool s : sufficient) {
    if (!s) return false;
  }
  return true;
}

RecallReport recall_report(const TaskClassifier& clf, std::span<const EmbeddingBatch> eval_batches) {
  if (clf.empty()) throw Error(Errc::EmptyClassifier, "classifier has no tasks");
  RecallReport r;
  r.tasks.assign(clf.trained_tasks().begin(), clf.trained_tasks().end());
  r.min_required = 1.0 / static_cast<double>(r.tasks.size());

  std::map<TaskId, Index> hits, total;
  for (const auto& batch : eval_batches) {
    if (batch.row_tasks.empty() && !batch.true_task) continue;
    const auto predicted = clf.predict_rows(batch.vectors);
    for (Index i = 0; i < batch.size(); ++i) {
      const TaskId truth =
          batch.row_tasks.empty() ? *batch.true_task : batch.row_tasks[static_cast<std::size_t>(i)];
      ++total[truth];
      if (predicted[static_cast<std::size_t>(i)] == truth) ++hits[truth];
    }
  }
  for (TaskId t : r.tasks) {
    const Index n = total[t];
    const double recall = n > 0 ? static_cast<double>(hits[t]) / static_cast<double>(n) : 0.0;
    r.recall.push_back(recall);
    r.support.push_back(n);
    r.sufficient.push_back(recall > r.min_required);
  }
  return r;
}

std::vector<RecallStage> staged_recall(std::span<const SyntheticTaskSpec> specs, Index batch_size,
                                       int eval_batches_per_task, const PipelineParams& params,
                                       std::uint64_t seed) {
  if (specs.size() < 2) throw Error(Errc::InvalidArgument, "need at least two tasks");
  std::vector<RecallStage> stages;
  TaskClassifier clf;
  for (std::size_t t = 0; t < specs.size(); ++t) {
    const auto train = generate_batch(specs[t], batch_size, derive_seed(seed, t, 0));
    clf.fit_increment(build_signature(train.batch, params.cluster, params.k, specs[t].task_id));
    if (t == 0) continue;

    std::vector<EmbeddingBatch> eval;
    for (std::size_t u = 0; u <= t; ++u) {
      for (int b = 0; b < eval_batches_per_task; ++b) {
        const auto stream = derive_seed(seed, 1000 + t, u * 1000 + static_cast<std::uint64_t>(b));
        eval.push_back(generate_batch(specs[u], batch_size, stream).batch);
      }
    }
    stages.push_back({static_cast<int>(t + 1), recall_report(clf, eval)});
  }
  return stages;
}

}  // namespace tadil
