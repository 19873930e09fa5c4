#include "doctest.h"
#include "support.hpp"

#include "tadil/error.hpp"
#include "tadil/io.hpp"
#include "tadil/orchestrator.hpp"
#include "tadil/random.hpp"
#include "tadil/synth.hpp"

using namespace tadil;

namespace {

constexpr Index kDim = 64;

PipelineParams params_with_seed(std::uint64_t seed) {
  PipelineParams p;
  p.drift.rng_seed = seed;
  p.head_seed = seed;
  return p;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected tadil::Error");
  return Errc::InvalidArgument;
}

/// State with `tasks` stored tasks, built with a threshold every pair exceeds.
Orchestrator forced_tasks(const std::vector<SyntheticTaskSpec>& specs, int tasks, std::uint64_t seed) {
  PipelineParams p = params_with_seed(seed);
  p.drift.fixed_threshold = -1e9;
  Orchestrator o(p);
  for (int t = 0; t < tasks; ++t) {
    const auto lb = generate_batch(specs[static_cast<std::size_t>(t)], 200, derive_seed(seed, static_cast<std::uint64_t>(t)), t);
    o.online_step(lb.batch);
    o.train_head(t, lb.batch.vectors, lb.class_labels);
  }
  return o;
}

}  // namespace

TEST_CASE("cold start creates task 0") {
  const auto specs = orthogonal_task_specs(1, kDim, 0.05, 2, 1);
  Orchestrator o(params_with_seed(1));
  const auto d = o.online_step(generate_batch(specs[0], 200, 1).batch);
  CHECK(d.kind == DecisionKind::NewTask);
  CHECK(d.task_id == 0);
  CHECK_FALSE(d.warning);
  CHECK(o.memory().size() == 1);
  CHECK(o.active_task() == 0);
}

TEST_CASE("a second batch from the same blob is usually matched to task 0") {
  // The match hinges on a 0.05-level test, so it is a rate, not a certainty.
  int known = 0;
  const int trials = 40;
  for (int s = 0; s < trials; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto specs = orthogonal_task_specs(1, kDim, 0.05, 2, seed);
    Orchestrator o(params_with_seed(seed));
    o.online_step(generate_batch(specs[0], 200, derive_seed(seed, 1), 0).batch);
    const auto d = o.online_step(generate_batch(specs[0], 200, derive_seed(seed, 2), 1).batch);
    if (d.kind == DecisionKind::KnownTask) {
      ++known;
      CHECK(d.task_id == 0);
      CHECK_FALSE(d.warning);
      CHECK(o.memory().size() == 1);
    } else {
      CHECK(d.task_id == 1);
    }
  }
  CHECK(known >= 32);
}

TEST_CASE("a new domain after a known one is a new task") {
  const auto specs = orthogonal_task_specs(2, kDim, 0.05, 2, 4);
  Orchestrator o(params_with_seed(4));
  o.online_step(generate_batch(specs[0], 200, 1, 0).batch);
  const auto d = o.online_step(generate_batch(specs[1], 200, 2, 1).batch);
  CHECK(d.kind == DecisionKind::NewTask);
  CHECK(d.task_id == 1);
  REQUIRE(o.event_log().size() == 2);
  CHECK(o.event_log()[1].comparisons.size() == 1);
  CHECK(o.event_log()[1].comparisons[0].verdict.drifted);
}

TEST_CASE("memory is scanned most recent first and stops at the first match") {
  const auto specs = orthogonal_task_specs(3, kDim, 0.05, 2, 6);
  Orchestrator forced = forced_tasks(specs, 3, 6);
  OrchestratorState st = forced.state();
  st.params.drift.fixed_threshold = 1e9;  // nothing drifts
  Orchestrator o(std::move(st));
  o.online_step(generate_batch(specs[0], 200, 99, 3).batch);
  const auto& rec = o.event_log().back();
  REQUIRE(rec.comparisons.size() == 1);
  CHECK(rec.comparisons[0].task_id == 2);
}

TEST_CASE("classifier disagreement raises a warning but the memory match wins") {
  const auto specs = orthogonal_task_specs(2, kDim, 0.05, 3, 8);
  Orchestrator forced = forced_tasks(specs, 2, 8);
  OrchestratorState st = forced.state();
  st.params.drift.fixed_threshold = 1e9;
  Orchestrator o(std::move(st));
  const auto d = o.online_step(generate_batch(specs[0], 200, 5, 2).batch);
  CHECK(d.kind == DecisionKind::KnownTask);
  CHECK(d.task_id == 1);
  REQUIRE(d.warning);
  CHECK(d.warning->classifier_predicted == 0);
  CHECK(d.warning->memory_matched == 1);
  CHECK(o.active_task() == 1);
  const VectorXr x = generate_batch(specs[0], 1, 6).batch.vectors.row(0).transpose();
  CHECK(o.infer(x) == o.heads().at(1).infer(x));
}

TEST_CASE("infer routes through the active head") {
  const auto specs = orthogonal_task_specs(6, kDim, 0.05, 4, 12);
  Orchestrator o = forced_tasks(specs, 6, 12);
  CHECK(o.active_task() == 5);
  const auto probe = generate_batch(specs[5], 100, 77).batch;
  bool differs = false;
  for (Index i = 0; i < probe.size(); ++i) {
    const VectorXr x = probe.vectors.row(i).transpose();
    CHECK(o.infer(x) == o.heads().at(5).infer(x));
    differs = differs || o.heads().at(5).infer(x) != o.heads().at(2).infer(x);
  }
  CHECK(differs);  // heads are isolated, so routing matters

  OrchestratorState st = o.state();
  st.params.drift.fixed_threshold = 1e9;
  st.active_task = 2;
  Orchestrator other(std::move(st));
  for (Index i = 0; i < 5; ++i) {
    const VectorXr x = probe.vectors.row(i).transpose();
    CHECK(other.infer(x) == other.heads().at(2).infer(x));
  }
}

TEST_CASE("infer without an active task fails") {
  Orchestrator o;
  CHECK(code_of([&] { o.infer(VectorXr::Ones(4)); }) == Errc::NoActiveTask);
}

TEST_CASE("head training reaches high accuracy on separable data") {
  const auto specs = orthogonal_task_specs(1, kDim, 0.05, 1, 3);
  Orchestrator o(params_with_seed(3));
  o.online_step(generate_batch(specs[0], 200, 1).batch);
  // Two classes split by the sign of one coordinate, with a margin.
  MatrixXr X = test::gaussian(200, kDim, 5);
  std::vector<int> labels(200);
  for (Index i = 0; i < 200; ++i) {
    labels[static_cast<std::size_t>(i)] = X(i, 0) > 0 ? 1 : 0;
    X(i, 0) += X(i, 0) > 0 ? 0.5 : -0.5;
  }
  X.rowwise().normalize();
  const auto& head = o.train_head(0, X, labels);
  CHECK(head.accuracy(X, labels) >= 0.99);
}

TEST_CASE("training one head leaves the others bit-identical") {
  const auto specs = orthogonal_task_specs(4, kDim, 0.05, 3, 14);
  Orchestrator o = forced_tasks(specs, 4, 14);
  const LinearHead before = o.heads().at(1);
  const auto lb = generate_batch(specs[3], 200, 123);
  o.train_head(3, lb.batch.vectors, lb.class_labels);
  CHECK(o.heads().at(1) == before);
}

TEST_CASE("head training errors") {
  const auto specs = orthogonal_task_specs(1, kDim, 0.05, 1, 3);
  Orchestrator o(params_with_seed(3));
  o.online_step(generate_batch(specs[0], 200, 1).batch);
  CHECK(code_of([&] { o.train_head(0, MatrixXr(0, kDim), std::vector<int>{}); }) == Errc::EmptyTrainingSet);
  CHECK(code_of([&] { o.train_head(7, MatrixXr::Ones(2, kDim), std::vector<int>{0, 1}); }) == Errc::UnknownTask);
}

TEST_CASE("a failing step leaves the state untouched") {
  const auto specs = orthogonal_task_specs(2, kDim, 0.05, 2, 2);
  Orchestrator o(params_with_seed(2));
  o.online_step(generate_batch(specs[0], 200, 1).batch);
  const auto before = io::snapshot_state(o.state());
  CHECK(code_of([&] { o.online_step(test::batch_of(test::gaussian(50, kDim / 2, 1))); }) == Errc::DimensionMismatch);
  CHECK(io::snapshot_state(o.state()) == before);
}

TEST_CASE("new-task steps preserve old heads and exemplars; cardinalities stay equal") {
  const auto specs = orthogonal_task_specs(4, kDim, 0.05, 3, 21);
  Orchestrator o(params_with_seed(21));
  const std::vector<TaskId> seq{0, 1, 0, 2, 3, 3};
  std::size_t memory_size = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto lb = generate_batch(specs[static_cast<std::size_t>(seq[i])], 200, derive_seed(21, i), static_cast<std::int64_t>(i));
    const auto heads_before = o.heads().heads();
    const MatrixXr exemplars_before = o.classifier().exemplars();
    const auto d = o.online_step(lb.batch);
    if (d.kind == DecisionKind::NewTask) {
      CHECK(o.memory().size() == memory_size + 1);
      for (const auto& [task, head] : heads_before) CHECK(o.heads().at(task) == head);
      CHECK(o.classifier().exemplars().topRows(exemplars_before.rows()) == exemplars_before);
      CHECK_FALSE(d.warning);
      CHECK(d.task_id == static_cast<TaskId>(memory_size));
    } else {
      CHECK(o.memory().size() == memory_size);
    }
    memory_size = o.memory().size();
    CHECK(o.heads().size() == memory_size);
    CHECK(o.classifier().trained_tasks().size() == memory_size);
    o.train_head(d.task_id, lb.batch.vectors, lb.class_labels);
  }
}

TEST_CASE("warnings are recorded exactly when the classifier disagrees") {
  const auto specs = orthogonal_task_specs(3, kDim, 0.05, 2, 30);
  Orchestrator forced = forced_tasks(specs, 3, 30);
  OrchestratorState st = forced.state();
  st.params.drift.fixed_threshold = 1e9;
  Orchestrator o(std::move(st));
  for (std::uint64_t s = 0; s < 6; ++s) {
    const auto batch = generate_batch(specs[s % 3], 200, 500 + s, static_cast<std::int64_t>(10 + s)).batch;
    const TaskId predicted = o.classifier().predict_batch(batch);
    const auto d = o.online_step(batch);
    CHECK(d.warning.has_value() == (predicted != d.task_id));
  }
}

TEST_CASE("event log lines are single-line JSON with the step fields") {
  const auto specs = orthogonal_task_specs(2, kDim, 0.05, 2, 9);
  Orchestrator o(params_with_seed(9));
  o.online_step(generate_batch(specs[0], 200, 1, 0).batch);
  o.online_step(generate_batch(specs[1], 200, 2, 1).batch);
  const std::string line = event_log_line(o.event_log()[1]);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.rfind("{\"step\":1,\"batch_id\":1,\"decision\":\"NewTask\",\"task_id\":1,\"comparisons\":[{\"task_id\":0,", 0) == 0);
  CHECK(line.find("\"warning\":false") != std::string::npos);
}
