#include "tadil/error.hpp"
#include "tadil/io.hpp"
#include "tadil/random.hpp"
#include "tadil/synth.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace tadil;
namespace fs = std::filesystem;

namespace {

struct Shared {
  double eps = 0.3;
  int min_pts = 10;
  int k = 10;
  Index dim = kDefaultDim;
  Index batch_size = 200;
  int permutations = 100;
  double significance = 0.05;
  std::optional<double> fixed_threshold;
  std::uint64_t seed = 0;
  fs::path out_dir = ".";

  PipelineParams params() const {
    PipelineParams p;
    p.cluster = {eps, min_pts};
    p.k = k;
    p.drift.permutations = permutations;
    p.drift.significance = significance;
    p.drift.fixed_threshold = fixed_threshold;
    p.drift.rng_seed = seed;
    p.head_seed = seed;
    return p;
  }
};

struct Synthetic {
  int tasks = 6;
  double spread = 0.05;
  int classes = 2;
  int batches_per_step = 1;
  std::vector<TaskId> sequence;

  std::vector<SyntheticTaskSpec> specs(const Shared& s) const {
    return orthogonal_task_specs(tasks, s.dim, spread, classes, s.seed);
  }
  Scenario scenario(const Shared& s) const {
    Scenario sc;
    sc.sequence = sequence;
    if (sc.sequence.empty()) {
      sc.sequence.resize(static_cast<std::size_t>(tasks));
      std::iota(sc.sequence.begin(), sc.sequence.end(), 0);
    }
    sc.batches_per_step = batches_per_step;
    sc.batch_size = s.batch_size;
    sc.seed = s.seed;
    return sc;
  }
};

void add_synthetic_options(CLI::App& cmd, Synthetic& syn) {
  cmd.add_option("--tasks", syn.tasks, "Number of synthetic tasks")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--spread", syn.spread, "Per-coordinate standard deviation of each task")->capture_default_str();
  cmd.add_option("--classes", syn.classes, "Classes per task for head training")->capture_default_str();
  cmd.add_option("--repeat", syn.batches_per_step, "Batches per sequence step")->capture_default_str();
  cmd.add_option("--sequence", syn.sequence, "Task order, e.g. 0,1,2,1 (default: each task once)")->delimiter(',');
}

std::vector<EmbeddingBatch> read_input(const fs::path& path, const Shared& s, bool rechunk) {
  io::ReadOptions opts;
  opts.expected_dim = s.dim;
  if (rechunk) opts.batch_size = s.batch_size;
  return io::read_embedding_file(path, opts);
}

void write_reports(const fs::path& out_dir, const ScenarioReport& report) {
  fs::create_directories(out_dir);
  io::atomic_write(out_dir / "events.jsonl", event_log_text(report.events));
  io::atomic_write(out_dir / "report.json", scenario_report_json(report) + "\n");
}

std::string matrix_csv(const MatrixXr& m) {
  std::ostringstream out;
  out.precision(17);
  out << "task";
  for (Index j = 0; j < m.cols(); ++j) out << "," << j;
  out << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    out << i;
    for (Index j = 0; j < m.cols(); ++j) out << "," << m(i, j);
    out << "\n";
  }
  return out.str();
}

std::string recall_csv(const std::vector<RecallStage>& stages) {
  std::ostringstream out;
  out.precision(17);
  out << "stage_tasks,task,recall,support,min_required,sufficient\n";
  for (const auto& st : stages) {
    const auto& r = st.report;
    for (std::size_t i = 0; i < r.tasks.size(); ++i) {
      out << st.num_tasks << "," << r.tasks[i] << "," << r.recall[i] << "," << r.support[i] << ","
          << r.min_required << "," << (r.sufficient[i] ? 1 : 0) << "\n";
    }
  }
  return out.str();
}

std::string state_summary(const OrchestratorState& st) {
  std::ostringstream out;
  out << "{\"tasks\":" << st.memory.size() << ",\"heads\":" << st.heads.size() << ",\"active_task\":";
  if (st.active_task) out << *st.active_task;
  else out << "null";
  out << ",\"steps\":" << st.event_log.size() << "}";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online task identification over embedding streams"};
  app.require_subcommand(1);
  app.fallthrough();

  Shared s;
  app.add_option("--eps", s.eps, "DBSCAN radius in cosine distance")->capture_default_str();
  app.add_option("--min-pts", s.min_pts, "DBSCAN minimum neighborhood size")->capture_default_str();
  app.add_option("--k", s.k, "Neighbors kept per cluster in a signature")->capture_default_str();
  app.add_option("--dim", s.dim, "Embedding dimension")->capture_default_str();
  app.add_option("--batch-size", s.batch_size, "Rows per batch")->capture_default_str();
  app.add_option("--permutations", s.permutations, "Permutations for the drift threshold")->capture_default_str();
  app.add_option("--significance", s.significance, "Drift test level")->capture_default_str();
  app.add_option("--fixed-threshold", s.fixed_threshold, "Use this drift threshold instead of calibrating");
  app.add_option("--seed", s.seed, "Random seed")->envname("TADIL_SEED")->capture_default_str();
  app.add_option("--out-dir", s.out_dir, "Directory for output files")->capture_default_str();

  Synthetic syn;
  fs::path input, snapshot_path, out_file;
  bool rechunk = false;
  int eval_batches = 3;

  auto* run = app.add_subcommand("run", "Run a synthetic scenario or an embedding file through the engine");
  add_synthetic_options(*run, syn);
  run->add_option("--input", input, "EMB1 or JSONL embedding file (replaces the synthetic scenario)")
      ->check(CLI::ExistingFile);
  run->add_flag("--rechunk", rechunk, "Split input rows by --batch-size instead of stored boundaries");
  run->add_option("--snapshot", snapshot_path, "Also save the final state here");

  auto* drift = app.add_subcommand("drift-matrix", "Signed drift scores between synthetic tasks");
  add_synthetic_options(*drift, syn);

  auto* recall = app.add_subcommand("recall-report", "Per-task recall of the task classifier by stage");
  add_synthetic_options(*recall, syn);
  recall->add_option("--eval-batches", eval_batches, "Evaluation batches per task and stage")->capture_default_str();

  auto* snap = app.add_subcommand("snapshot", "Run a stream and save the resulting state");
  add_synthetic_options(*snap, syn);
  snap->add_option("--input", input, "EMB1 or JSONL embedding file")->check(CLI::ExistingFile);
  snap->add_flag("--rechunk", rechunk, "Split input rows by --batch-size instead of stored boundaries");
  snap->add_option("--snapshot", snapshot_path, "Snapshot path")->required();

  auto* restore = app.add_subcommand("restore", "Load a state, optionally continue it on more batches");
  restore->add_option("--snapshot", snapshot_path, "Snapshot path")->required()->check(CLI::ExistingFile);
  restore->add_option("--input", input, "Batches to process after restoring")->check(CLI::ExistingFile);
  restore->add_flag("--rechunk", rechunk, "Split input rows by --batch-size instead of stored boundaries");
  restore->add_option("--save", out_file, "Save the continued state here");

  auto* gen = app.add_subcommand("gen-synthetic", "Write a labeled synthetic stream as EMB1 or JSONL");
  add_synthetic_options(*gen, syn);
  gen->add_option("--out", out_file, "Output file (.jsonl selects the text format)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto stream_report = [&](Orchestrator& orch) {
      if (!input.empty()) return run_stream(read_input(input, s, rechunk), orch);
      return run_scenario(syn.scenario(s), syn.specs(s), orch);
    };

    if (run->parsed() || snap->parsed()) {
      Orchestrator orch(s.params());
      const auto report = stream_report(orch);
      if (run->parsed()) {
        write_reports(s.out_dir, report);
        std::cout << scenario_report_json(report) << "\n";
      }
      if (!snapshot_path.empty()) io::save_snapshot(snapshot_path, orch.state());
      if (snap->parsed()) std::cout << state_summary(orch.state()) << "\n";
    } else if (drift->parsed()) {
      const MatrixXr m = synthetic_drift_matrix(syn.specs(s), s.batch_size, s.params(), s.seed);
      fs::create_directories(s.out_dir);
      const auto csv = matrix_csv(m);
      io::atomic_write(s.out_dir / "drift_matrix.csv", csv);
      std::cout << csv;
    } else if (recall->parsed()) {
      const auto stages = staged_recall(syn.specs(s), s.batch_size, eval_batches, s.params(), s.seed);
      fs::create_directories(s.out_dir);
      const auto csv = recall_csv(stages);
      io::atomic_write(s.out_dir / "recall.csv", csv);
      std::cout << csv;
    } else if (restore->parsed()) {
      Orchestrator orch(io::load_snapshot(snapshot_path));
      if (!input.empty()) {
        const auto report = run_stream(read_input(input, s, rechunk), orch);
        write_reports(s.out_dir, report);
        if (!out_file.empty()) io::save_snapshot(out_file, orch.state());
      }
      std::cout << state_summary(orch.state()) << "\n";
    } else if (gen->parsed()) {
      const auto specs = syn.specs(s);
      const auto sc = syn.scenario(s);
      std::vector<EmbeddingBatch> batches;
      std::int64_t id = 0;
      for (std::size_t step = 0; step < sc.sequence.size(); ++step) {
        const auto t = sc.sequence[step];
        if (t < 0 || t >= syn.tasks) throw Error(Errc::InvalidArgument, "sequence names an unknown task");
        for (int rep = 0; rep < sc.batches_per_step; ++rep) {
          auto b = generate_batch(specs[static_cast<std::size_t>(t)], s.batch_size,
                                  derive_seed(s.seed, step, static_cast<std::uint64_t>(rep)), id++)
                       .batch;
          // Single precision, so both file formats carry identical values.
          b.vectors = b.vectors.cast<float>().cast<double>();
          batches.push_back(std::move(b));
        }
      }
      io::write_embedding_file(out_file, batches);
      std::cout << "wrote " << batches.size() << " batches to " << out_file.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what();
    if (e.byte_offset()) std::cerr << " (byte " << *e.byte_offset() << ")";
    std::cerr << "\n";
    return 1;
  }
  return 0;
}
