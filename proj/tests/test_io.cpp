#include "doctest.h"
#include "support.hpp"

#include "tadil/error.hpp"
#include "tadil/io.hpp"
#include "tadil/synth.hpp"

#include <bit>
#include <filesystem>
#include <fstream>
#include <random>

using namespace tadil;
namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

/// Hand-built EMB1 record, independent of the encoder.
std::vector<std::uint8_t> emb1_record(std::uint32_t dim, std::uint32_t count, const std::vector<float>& values,
                                      const std::vector<std::uint32_t>& labels = {}, std::uint32_t version = 1) {
  std::vector<std::uint8_t> out{'E', 'M', 'B', '1'};
  put_u32(out, version);
  put_u32(out, dim);
  put_u32(out, count);
  out.push_back(labels.empty() ? 0 : 1);
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  for (auto l : labels) put_u32(out, l);
  return out;
}

std::vector<float> unit_rows(std::uint32_t dim, std::uint32_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(dim) * count);
  for (std::uint32_t r = 0; r < count; ++r) {
    double norm = 0.0;
    for (std::uint32_t c = 0; c < dim; ++c) {
      v[r * dim + c] = n(rng);
      norm += double(v[r * dim + c]) * v[r * dim + c];
    }
    for (std::uint32_t c = 0; c < dim; ++c) v[r * dim + c] = static_cast<float>(v[r * dim + c] / std::sqrt(norm));
  }
  return v;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tadil_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<EmbeddingBatch> labeled_batches() {
  const auto specs = orthogonal_task_specs(2, 16, 0.05, 1, 3);
  std::vector<EmbeddingBatch> out;
  for (int i = 0; i < 3; ++i) {
    auto b = generate_batch(specs[static_cast<std::size_t>(i % 2)], 5 + i, 10 + i, i).batch;
    b.vectors = b.vectors.cast<float>().cast<double>();
    out.push_back(normalize_batch(b.vectors, i));
    out.back().true_task = b.true_task;
  }
  out[2].row_tasks = {0, 1, 1, 0, 1, 1, 0};
  out[2].true_task.reset();
  return out;
}

}  // namespace

TEST_CASE("an unlabeled 512 x 200 record decodes as one batch") {
  const auto values = unit_rows(512, 200, 1);
  const auto batches = io::decode_embeddings(emb1_record(512, 200, values));
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].size() == 200);
  CHECK(batches[0].dim() == 512);
  CHECK_FALSE(batches[0].true_task.has_value());
  CHECK(batches[0].row_tasks.empty());
  CHECK(batches[0].vectors(7, 3) == static_cast<double>(values[7 * 512 + 3]));
}

TEST_CASE("encode/decode round-trips values and bytes exactly") {
  const auto batches = labeled_batches();
  const auto bytes = io::encode_embeddings(batches);
  const auto back = io::decode_embeddings(bytes);
  REQUIRE(back.size() == batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) {
    CHECK(back[i].vectors == batches[i].vectors);
    CHECK(back[i].batch_id == batches[i].batch_id);
  }
  CHECK(back[0].true_task == batches[0].true_task);
  CHECK(back[2].row_tasks == batches[2].row_tasks);
  CHECK(io::encode_embeddings(back) == bytes);
}

TEST_CASE("text format round-trips values exactly") {
  const auto batches = labeled_batches();
  const auto text = io::encode_embeddings_text(batches);
  const auto back = io::decode_embeddings_text(text);
  REQUIRE(back.size() == batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) CHECK(back[i].vectors == batches[i].vectors);
  CHECK(back[1].true_task == batches[1].true_task);
  CHECK(back[2].row_tasks == batches[2].row_tasks);
  CHECK(io::encode_embeddings_text(back) == text);
}

TEST_CASE("a file cut mid-row reports the first incomplete row offset") {
  auto bytes = emb1_record(8, 4, unit_rows(8, 4, 2));
  bytes.resize(17 + 2 * 8 * 4 + 5);
  try {
    io::decode_embeddings(bytes);
    FAIL("expected TruncatedFile");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TruncatedFile);
    REQUIRE(e.byte_offset().has_value());
    CHECK(*e.byte_offset() == 17 + 2 * 8 * 4);
  }
}

TEST_CASE("malformed records are rejected with a typed error") {
  const auto values = unit_rows(4, 2, 3);
  auto bad_magic = emb1_record(4, 2, values);
  bad_magic[3] = '2';
  CHECK(code_of([&] { io::decode_embeddings(bad_magic); }) == Errc::BadMagic);
  CHECK(code_of([&] { io::decode_embeddings(emb1_record(4, 2, values, {}, 2)); }) == Errc::VersionUnsupported);

  auto mixed = emb1_record(4, 2, values);
  const auto other = emb1_record(2, 2, unit_rows(2, 2, 4));
  mixed.insert(mixed.end(), other.begin(), other.end());
  CHECK(code_of([&] { io::decode_embeddings(mixed); }) == Errc::DimensionMismatch);

  io::ReadOptions want8;
  want8.expected_dim = 8;
  CHECK(code_of([&] { io::decode_embeddings(emb1_record(4, 2, values), want8); }) == Errc::DimensionMismatch);

  auto nan = values;
  nan[5] = std::numeric_limits<float>::quiet_NaN();
  CHECK(code_of([&] { io::decode_embeddings(emb1_record(4, 2, nan)); }) == Errc::NonFinite);

  std::vector<float> zero(8, 0.0f);
  CHECK(code_of([&] { io::decode_embeddings(emb1_record(4, 2, zero)); }) == Errc::ZeroVector);
  CHECK(code_of([&] { io::decode_embeddings_text("{\"vector\": [1, 0]}\n{\"vector\": [1]}\n"); }) ==
        Errc::DimensionMismatch);
}

TEST_CASE("batch_size re-chunks rows across records") {
  auto bytes = emb1_record(4, 5, unit_rows(4, 5, 5));
  const auto more = emb1_record(4, 4, unit_rows(4, 4, 6));
  bytes.insert(bytes.end(), more.begin(), more.end());
  io::ReadOptions opts;
  opts.batch_size = 4;
  opts.first_batch_id = 10;
  const auto batches = io::decode_embeddings(bytes, opts);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[2].size() == 1);
  CHECK(batches[2].batch_id == 12);
}

TEST_CASE("files: format detection and atomic replacement") {
  TempDir dir;
  const auto batches = labeled_batches();
  io::write_embedding_file(dir.path / "a.emb", batches);
  io::write_embedding_file(dir.path / "a.jsonl", batches);
  CHECK(io::read_file(dir.path / "a.jsonl").front() == '{');
  const auto a = io::read_embedding_file(dir.path / "a.emb");
  const auto b = io::read_embedding_file(dir.path / "a.jsonl");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].vectors == b[i].vectors);

  io::atomic_write(dir.path / "x.txt", std::string("old"));
  io::atomic_write(dir.path / "x.txt", std::string("new"));
  std::ifstream in(dir.path / "x.txt");
  std::string s;
  in >> s;
  CHECK(s == "new");
  CHECK(std::distance(fs::directory_iterator(dir.path), fs::directory_iterator{}) == 3);
  CHECK(code_of([&] { io::atomic_write(dir.path / "missing" / "y", std::string("z")); }) == Errc::Io);
  CHECK_FALSE(fs::exists(dir.path / "missing"));
  CHECK(code_of([&] { io::read_embedding_file(dir.path / "nope.emb"); }) == Errc::Io);
}

namespace {

Orchestrator trained_orchestrator(std::vector<SyntheticTaskSpec>& specs) {
  specs = orthogonal_task_specs(3, 64, 0.05, 2, 9);
  PipelineParams p;
  p.drift.rng_seed = 9;
  Orchestrator orch(p);
  Scenario sc;
  sc.sequence = {0, 1, 0, 2};
  sc.seed = 9;
  run_scenario(sc, specs, orch);
  return orch;
}

}  // namespace

TEST_CASE("snapshot restore continues bit-for-bit") {
  std::vector<SyntheticTaskSpec> specs;
  Orchestrator live = trained_orchestrator(specs);
  const auto bytes = io::snapshot_state(live.state());
  Orchestrator restored(io::restore_state(bytes));
  CHECK(io::snapshot_state(restored.state()) == bytes);

  const auto next = generate_batch(specs[1], 200, 77, 99).batch;
  CHECK(live.online_step(next) == restored.online_step(next));
  CHECK(io::snapshot_state(live.state()) == io::snapshot_state(restored.state()));
  for (Index r = 0; r < 5; ++r) CHECK(live.infer(next.vectors.row(r).transpose()) == restored.infer(next.vectors.row(r).transpose()));
}

TEST_CASE("empty state round-trips") {
  const Orchestrator empty;
  const auto back = io::restore_state(io::snapshot_state(empty.state()));
  CHECK(back.memory.size() == 0);
  CHECK_FALSE(back.active_task.has_value());
  CHECK(io::snapshot_state(back) == io::snapshot_state(empty.state()));
}

TEST_CASE("damaged snapshots are rejected and the file is left alone") {
  TempDir dir;
  std::vector<SyntheticTaskSpec> specs;
  const Orchestrator orch = trained_orchestrator(specs);
  const auto path = dir.path / "state.tads";
  io::save_snapshot(path, orch.state());
  auto bytes = io::read_file(path);

  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x01;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(flipped.data()), static_cast<std::streamsize>(flipped.size()));
  }
  CHECK(code_of([&] { io::load_snapshot(path); }) == Errc::Corrupt);
  CHECK(io::read_file(path) == flipped);

  auto versioned = bytes;
  versioned[4] = 2;
  CHECK(code_of([&] { io::restore_state(versioned); }) == Errc::VersionMismatch);
  bytes.resize(bytes.size() - 1);
  CHECK(code_of([&] { io::restore_state(bytes); }) == Errc::Corrupt);
}
