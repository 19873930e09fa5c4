#include "tadil/io.hpp"

#include "tadil/error.hpp"

#include "json.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace tadil::io {

namespace {

using json = nlohmann::json;

constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
constexpr char kSnapshotMagic[4] = {'T', 'A', 'D', 'S'};
constexpr std::size_t kRecordHeader = 17;

// ---------------------------------------------------------------------------
// Little-endian primitives

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

// ---------------------------------------------------------------------------
// Batch assembly shared by both codecs

struct Rows {
  std::vector<double> values;  // row-major
  std::vector<std::optional<TaskId>> labels;
  std::vector<std::size_t> boundaries;  // row index where each stored batch starts
};

std::vector<EmbeddingBatch> assemble(const Rows& rows, const ReadOptions& opts, Index dim) {
  const auto n = static_cast<Index>(rows.labels.size());
  std::vector<std::pair<Index, Index>> spans;  // [begin, end)
  if (opts.batch_size) {
    if (*opts.batch_size < 1) throw Error(Errc::InvalidArgument, "batch size must be >= 1");
    for (Index b = 0; b < n; b += *opts.batch_size) spans.emplace_back(b, std::min(n, b + *opts.batch_size));
  } else {
    for (std::size_t i = 0; i < rows.boundaries.size(); ++i) {
      const auto end = i + 1 < rows.boundaries.size() ? rows.boundaries[i + 1] : static_cast<std::size_t>(n);
      spans.emplace_back(static_cast<Index>(rows.boundaries[i]), static_cast<Index>(end));
    }
  }

  BatchSequencer sequencer(opts.first_batch_id);
  std::vector<EmbeddingBatch> out;
  for (auto [begin, end] : spans) {
    if (end <= begin) continue;
    MatrixXr m(end - begin, dim);
    for (Index r = begin; r < end; ++r)
      for (Index c = 0; c < dim; ++c)
        m(r - begin, c) = rows.values[static_cast<std::size_t>(r * dim + c)];
    EmbeddingBatch batch = sequencer(std::move(m), opts.expected_dim);

    bool labeled = true;
    for (Index r = begin; r < end; ++r) labeled = labeled && rows.labels[static_cast<std::size_t>(r)].has_value();
    if (labeled) {
      for (Index r = begin; r < end; ++r) batch.row_tasks.push_back(*rows.labels[static_cast<std::size_t>(r)]);
      bool uniform = true;
      for (TaskId t : batch.row_tasks) uniform = uniform && t == batch.row_tasks.front();
      if (uniform) batch.true_task = batch.row_tasks.front();
    }
    out.push_back(std::move(batch));
  }
  return out;
}

std::optional<TaskId> row_label(const EmbeddingBatch& b, Index row) {
  if (!b.row_tasks.empty()) return b.row_tasks[static_cast<std::size_t>(row)];
  return b.true_task;
}

void check_labels(const EmbeddingBatch& b) {
  if (!b.row_tasks.empty() && static_cast<Index>(b.row_tasks.size()) != b.size()) {
    throw Error(Errc::InvalidArgument, "row_tasks must hold one label per row");
  }
}

// ---------------------------------------------------------------------------
// JSON helpers for snapshots

json matrix_json(const MatrixXr& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

MatrixXr matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
    throw Error(Errc::Corrupt, "matrix shape does not match its data");
  }
  MatrixXr m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json vector_json(const VectorXr& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXr vector_from(const json& j) {
  const auto data = j.get<std::vector<double>>();
  VectorXr v(static_cast<Index>(data.size()));
  std::copy(data.begin(), data.end(), v.data());
  return v;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json params_json(const PipelineParams& p) {
  return {{"eps", p.cluster.eps},
          {"min_pts", p.cluster.min_pts},
          {"k", p.k},
          {"kernel_bandwidth", optional_json(p.drift.kernel_bandwidth)},
          {"permutations", p.drift.permutations},
          {"significance", p.drift.significance},
          {"fixed_threshold", optional_json(p.drift.fixed_threshold)},
          {"rng_seed", p.drift.rng_seed},
          {"head_learning_rate", p.head.learning_rate},
          {"head_iterations", p.head.iterations},
          {"head_init_scale", p.head.init_scale},
          {"head_seed", p.head_seed}};
}

PipelineParams params_from(const json& j) {
  PipelineParams p;
  p.cluster.eps = j.at("eps").get<double>();
  p.cluster.min_pts = j.at("min_pts").get<int>();
  p.k = j.at("k").get<int>();
  p.drift.kernel_bandwidth = optional_from(j.at("kernel_bandwidth"));
  p.drift.permutations = j.at("permutations").get<int>();
  p.drift.significance = j.at("significance").get<double>();
  p.drift.fixed_threshold = optional_from(j.at("fixed_threshold"));
  p.drift.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  p.head.learning_rate = j.at("head_learning_rate").get<double>();
  p.head.iterations = j.at("head_iterations").get<int>();
  p.head.init_scale = j.at("head_init_scale").get<double>();
  p.head_seed = j.at("head_seed").get<std::uint64_t>();
  return p;
}

json signature_json(const TaskSignature& s) {
  json sets = json::array();
  for (const auto& n : s.neighbor_sets) sets.push_back(matrix_json(n));
  return {{"task_id", s.task_id},      {"k", s.k},         {"created_at", s.created_at},
          {"centroids", matrix_json(s.centroids)}, {"neighbor_sets", std::move(sets)},
          {"source_rows", s.source_rows}};
}

TaskSignature signature_from(const json& j) {
  TaskSignature s;
  s.task_id = j.at("task_id").get<TaskId>();
  s.k = j.at("k").get<int>();
  s.created_at = j.at("created_at").get<std::int64_t>();
  s.centroids = matrix_from(j.at("centroids"));
  for (const auto& n : j.at("neighbor_sets")) s.neighbor_sets.push_back(matrix_from(n));
  s.source_rows = j.at("source_rows").get<std::vector<std::vector<Index>>>();
  if (s.neighbor_sets.size() != static_cast<std::size_t>(s.centroids.rows()) ||
      s.source_rows.size() != s.neighbor_sets.size()) {
    throw Error(Errc::Corrupt, "signature centroid and neighbor counts differ");
  }
  return s;
}

json verdict_json(const DriftVerdict& v) {
  return {{"statistic", v.statistic}, {"threshold", v.threshold}, {"score", v.score}, {"drifted", v.drifted}};
}

DriftVerdict verdict_from(const json& j) {
  return {j.at("statistic").get<double>(), j.at("threshold").get<double>(), j.at("score").get<double>(),
          j.at("drifted").get<bool>()};
}

json record_json(const StepRecord& r) {
  json comparisons = json::array();
  for (const auto& c : r.comparisons) comparisons.push_back({{"task_id", c.task_id}, {"verdict", verdict_json(c.verdict)}});
  json warning = nullptr;
  if (r.decision.warning) {
    warning = {{"classifier_predicted", r.decision.warning->classifier_predicted},
               {"memory_matched", r.decision.warning->memory_matched}};
  }
  return {{"step", r.step},
          {"batch_id", r.batch_id},
          {"kind", r.decision.kind == DecisionKind::NewTask ? "NewTask" : "KnownTask"},
          {"task_id", r.decision.task_id},
          {"warning", std::move(warning)},
          {"comparisons", std::move(comparisons)}};
}

StepRecord record_from(const json& j) {
  StepRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.batch_id = j.at("batch_id").get<std::int64_t>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "NewTask" && kind != "KnownTask") throw Error(Errc::Corrupt, "unknown decision kind");
  r.decision.kind = kind == "NewTask" ? DecisionKind::NewTask : DecisionKind::KnownTask;
  r.decision.task_id = j.at("task_id").get<TaskId>();
  if (!j.at("warning").is_null()) {
    r.decision.warning = TaskMismatch{j["warning"].at("classifier_predicted").get<TaskId>(),
                                      j["warning"].at("memory_matched").get<TaskId>()};
  }
  for (const auto& c : j.at("comparisons")) {
    r.comparisons.push_back({c.at("task_id").get<TaskId>(), verdict_from(c.at("verdict"))});
  }
  return r;
}

json head_json(const LinearHead& h) {
  return {{"dim", h.dim()},
          {"seed", h.seed()},
          {"trained", h.trained()},
          {"weights", matrix_json(h.weights())},
          {"bias", vector_json(h.bias())},
          {"mean", vector_json(h.feature_mean())},
          {"scale", vector_json(h.feature_scale())}};
}

LinearHead head_from(const json& j) {
  return LinearHead::from_parts(j.at("dim").get<Index>(), j.at("seed").get<std::uint64_t>(),
                                j.at("trained").get<bool>(), matrix_from(j.at("weights")),
                                vector_from(j.at("bias")), vector_from(j.at("mean")), vector_from(j.at("scale")));
}

json state_json(const OrchestratorState& s) {
  json memory = json::array();
  for (const auto& sig : s.memory.signatures()) memory.push_back(signature_json(sig));

  json centroids = json::array();
  for (const auto& [task, c] : s.classifier.centroids_by_task()) {
    centroids.push_back({{"task_id", task}, {"centroids", matrix_json(c)}});
  }
  json heads = json::array();
  for (const auto& [task, h] : s.heads.heads()) heads.push_back({{"task_id", task}, {"head", head_json(h)}});
  json log = json::array();
  for (const auto& r : s.event_log) log.push_back(record_json(r));

  return {{"params", params_json(s.params)},
          {"memory", std::move(memory)},
          {"classifier",
           {{"exemplars", matrix_json(s.classifier.exemplars())},
            {"exemplar_tasks", s.classifier.exemplar_tasks()},
            {"centroids", std::move(centroids)}}},
          {"heads", std::move(heads)},
          {"active_task", s.active_task ? json(*s.active_task) : json(nullptr)},
          {"event_log", std::move(log)}};
}

OrchestratorState state_from(const json& j) {
  OrchestratorState s;
  s.params = params_from(j.at("params"));
  for (const auto& sig : j.at("memory")) {
    TaskSignature restored = signature_from(sig);
    const TaskId expected = s.memory.next_task_id();
    if (restored.task_id != expected) throw Error(Errc::Corrupt, "memory task ids out of order");
    s.memory.append(std::move(restored));
  }
  const auto& c = j.at("classifier");
  std::map<TaskId, MatrixXr> centroids;
  for (const auto& e : c.at("centroids")) centroids[e.at("task_id").get<TaskId>()] = matrix_from(e.at("centroids"));
  s.classifier = TaskClassifier::from_parts(matrix_from(c.at("exemplars")),
                                            c.at("exemplar_tasks").get<std::vector<TaskId>>(), std::move(centroids));
  for (const auto& e : j.at("heads")) s.heads.add(e.at("task_id").get<TaskId>(), head_from(e.at("head")));
  if (!j.at("active_task").is_null()) s.active_task = j["active_task"].get<TaskId>();
  for (const auto& r : j.at("event_log")) s.event_log.push_back(record_from(r));
  return s;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t at = 0;
  while (at < bytes.size()) {
    const auto len = static_cast<uInt>(std::min<std::size_t>(bytes.size() - at, 1u << 30));
    crc = crc32(crc, bytes.data() + at, len);
    at += len;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

// ---------------------------------------------------------------------------
// EMB1

std::vector<std::uint8_t> encode_embeddings(std::span<const EmbeddingBatch> batches) {
  std::vector<std::uint8_t> out;
  for (const auto& b : batches) {
    check_labels(b);
    const bool has_labels = !b.row_tasks.empty() || b.true_task.has_value();
    out.insert(out.end(), std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
    put_u32(out, kEmbeddingVersion);
    put_u32(out, static_cast<std::uint32_t>(b.dim()));
    put_u32(out, static_cast<std::uint32_t>(b.size()));
    out.push_back(has_labels ? 1 : 0);
    for (Index r = 0; r < b.size(); ++r)
      for (Index c = 0; c < b.dim(); ++c) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(b.vectors(r, c))));
    if (has_labels) {
      for (Index r = 0; r < b.size(); ++r) {
        const TaskId t = *row_label(b, r);
        if (t < 0) throw Error(Errc::InvalidArgument, "EMB1 labels must be non-negative");
        put_u32(out, static_cast<std::uint32_t>(t));
      }
    }
  }
  return out;
}

std::vector<EmbeddingBatch> decode_embeddings(std::span<const std::uint8_t> bytes, const ReadOptions& opts) {
  Rows rows;
  std::optional<Index> dim;
  std::size_t at = 0;
  while (at < bytes.size()) {
    if (bytes.size() - at < kRecordHeader) {
      if (bytes.size() - at >= 4 && std::memcmp(bytes.data() + at, kEmbeddingMagic, 4) != 0) {
        throw Error(Errc::BadMagic, "expected EMB1 record", at);
      }
      throw Error(Errc::TruncatedFile, "record header cut short", at);
    }
    if (std::memcmp(bytes.data() + at, kEmbeddingMagic, 4) != 0) throw Error(Errc::BadMagic, "expected EMB1 record", at);
    const std::uint32_t version = get_u32(bytes, at + 4);
    if (version != kEmbeddingVersion) {
      throw Error(Errc::VersionUnsupported, "EMB1 version " + std::to_string(version), at + 4);
    }
    const Index record_dim = get_u32(bytes, at + 8);
    const Index count = get_u32(bytes, at + 12);
    const std::uint8_t has_labels = bytes[at + 16];
    if (record_dim < 1) throw Error(Errc::DimensionMismatch, "record dim is zero", at + 8);
    if (dim && *dim != record_dim) throw Error(Errc::DimensionMismatch, "records disagree on dim", at + 8);
    if (opts.expected_dim && *opts.expected_dim != record_dim) {
      throw Error(Errc::DimensionMismatch, "expected dim " + std::to_string(*opts.expected_dim), at + 8);
    }
    if (has_labels > 1) throw Error(Errc::Corrupt, "has_labels flag must be 0 or 1", at + 16);
    dim = record_dim;
    at += kRecordHeader;

    const auto row_bytes = static_cast<std::size_t>(record_dim) * 4;
    const std::size_t available_rows = (bytes.size() - at) / row_bytes;
    if (available_rows < static_cast<std::size_t>(count)) {
      throw Error(Errc::TruncatedFile, "row " + std::to_string(available_rows) + " of " + std::to_string(count) +
                                           " is incomplete",
                  at + available_rows * row_bytes);
    }
    rows.boundaries.push_back(rows.labels.size());
    for (Index i = 0; i < count * record_dim; ++i) {
      const float v = std::bit_cast<float>(get_u32(bytes, at));
      if (!std::isfinite(v)) throw Error(Errc::NonFinite, "non-finite value", at);
      rows.values.push_back(v);
      at += 4;
    }
    if (has_labels) {
      if (bytes.size() - at < static_cast<std::size_t>(count) * 4) {
        throw Error(Errc::TruncatedFile, "label section cut short", at + ((bytes.size() - at) / 4) * 4);
      }
      for (Index i = 0; i < count; ++i, at += 4) rows.labels.emplace_back(static_cast<TaskId>(get_u32(bytes, at)));
    } else {
      rows.labels.insert(rows.labels.end(), static_cast<std::size_t>(count), std::nullopt);
    }
  }
  if (!dim) return {};
  return assemble(rows, opts, *dim);
}

// ---------------------------------------------------------------------------
// Text

std::string encode_embeddings_text(std::span<const EmbeddingBatch> batches) {
  std::string out;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    check_labels(batch);
    for (Index r = 0; r < batch.size(); ++r) {
      nlohmann::ordered_json line;
      line["batch"] = b;
      line["vector"] = std::vector<double>(batch.vectors.row(r).begin(), batch.vectors.row(r).end());
      if (auto t = row_label(batch, r)) line["task"] = *t;
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<EmbeddingBatch> decode_embeddings_text(const std::string& text, const ReadOptions& opts) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t offset = 0;
  Rows rows;
  std::optional<std::int64_t> current_batch;
  std::optional<Index> dim;

  while (std::getline(in, line)) {
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::Corrupt, where + ": " + e.what(), line_offset);
    }
    if (!j.is_object() || !j.contains("vector") || !j["vector"].is_array()) {
      throw Error(Errc::Corrupt, where + " lacks a vector array", line_offset);
    }
    const auto& v = j["vector"];
    if (dim && static_cast<Index>(v.size()) != *dim) {
      throw Error(Errc::DimensionMismatch, where + " has dim " + std::to_string(v.size()), line_offset);
    }
    if (opts.expected_dim && static_cast<Index>(v.size()) != *opts.expected_dim) {
      throw Error(Errc::DimensionMismatch, where + " has dim " + std::to_string(v.size()), line_offset);
    }
    dim = static_cast<Index>(v.size());
    for (const auto& x : v) {
      // JSON has no NaN/Inf literals; nlohmann decodes them as null.
      if (!x.is_number()) throw Error(Errc::NonFinite, where + " has a non-numeric entry", line_offset);
      rows.values.push_back(x.get<double>());
    }
    const std::int64_t batch = j.contains("batch") ? j["batch"].get<std::int64_t>() : 0;
    if (!current_batch || *current_batch != batch) {
      rows.boundaries.push_back(rows.labels.size());
      current_batch = batch;
    }
    rows.labels.push_back(j.contains("task") ? std::optional<TaskId>(j["task"].get<TaskId>()) : std::nullopt);
  }
  if (!dim) return {};
  return assemble(rows, opts, *dim);
}

// ---------------------------------------------------------------------------
// Files

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<EmbeddingBatch> read_embedding_file(const std::filesystem::path& path, const ReadOptions& opts) {
  const auto bytes = read_file(path);
  const auto first = std::find_if(bytes.begin(), bytes.end(), [](std::uint8_t c) { return !std::isspace(c); });
  if (first != bytes.end() && *first == '{') return decode_embeddings_text(std::string(bytes.begin(), bytes.end()), opts);
  return decode_embeddings(bytes, opts);
}

void write_embedding_file(const std::filesystem::path& path, std::span<const EmbeddingBatch> batches) {
  if (path.extension() == ".jsonl") {
    atomic_write(path, encode_embeddings_text(batches));
  } else {
    atomic_write(path, encode_embeddings(batches));
  }
}

void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(Errc::Io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::Io, "cannot rename onto " + path.string());
  }
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------
// Snapshots

std::vector<std::uint8_t> snapshot_state(const OrchestratorState& state) {
  const std::vector<std::uint8_t> payload = json::to_cbor(state_json(state));
  std::vector<std::uint8_t> out(std::begin(kSnapshotMagic), std::end(kSnapshotMagic));
  put_u32(out, kSnapshotVersion);
  put_u64(out, payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, crc32_of(payload));
  return out;
}

OrchestratorState restore_state(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 16;
  if (bytes.size() < kHeader + 4) throw Error(Errc::Corrupt, "snapshot too short");
  if (std::memcmp(bytes.data(), kSnapshotMagic, 4) != 0) throw Error(Errc::Corrupt, "not a snapshot");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kSnapshotVersion) {
    throw Error(Errc::VersionMismatch, "snapshot version " + std::to_string(version) + ", expected " +
                                           std::to_string(kSnapshotVersion));
  }
  const std::uint64_t size = get_u64(bytes, 8);
  if (size != bytes.size() - kHeader - 4) throw Error(Errc::Corrupt, "snapshot payload size mismatch");
  const auto payload = bytes.subspan(kHeader, static_cast<std::size_t>(size));
  if (crc32_of(payload) != get_u32(bytes, kHeader + static_cast<std::size_t>(size))) {
    throw Error(Errc::Corrupt, "snapshot checksum mismatch");
  }
  try {
    return state_from(json::from_cbor(payload.begin(), payload.end()));
  } catch (const json::exception& e) {
    throw Error(Errc::Corrupt, std::string("snapshot payload: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::Corrupt) throw;
    throw Error(Errc::Corrupt, e.what());
  }
}

void save_snapshot(const std::filesystem::path& path, const OrchestratorState& state) {
  atomic_write(path, snapshot_state(state));
}

OrchestratorState load_snapshot(const std::filesystem::path& path) { return restore_state(read_file(path)); }

}  // namespace tadil::io
