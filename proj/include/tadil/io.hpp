#pragma once

#include "tadil/domain.hpp"
#include "tadil/orchestrator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tadil::io {

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct ReadOptions {
  /// Re-chunk all rows into batches of this size (last may be short)
  /// instead of using the boundaries stored in the file.
  std::optional<Index> batch_size;
  std::optional<Index> expected_dim;
  std::int64_t first_batch_id = 0;
};

/// EMB1 (little-endian), one record per batch, records concatenated:
///   "EMB1" | u32 version | u32 dim | u32 count | u8 has_labels
///   | count*dim f32 row-major | count u32 labels if has_labels
std::vector<std::uint8_t> encode_embeddings(std::span<const EmbeddingBatch> batches);
std::vector<EmbeddingBatch> decode_embeddings(std::span<const std::uint8_t> bytes, const ReadOptions& opts = {});

/// Line-delimited JSON: {"vector": [...], "task": int?, "batch": int?} per row.
/// Consecutive rows with equal "batch" form one batch.
std::string encode_embeddings_text(std::span<const EmbeddingBatch> batches);
std::vector<EmbeddingBatch> decode_embeddings_text(const std::string& text, const ReadOptions& opts = {});

/// Picks the codec from content: EMB1 magic or a leading '{'.
/// Throws Error{BadMagic | VersionUnsupported | TruncatedFile | DimensionMismatch | NonFinite | Io}.
std::vector<EmbeddingBatch> read_embedding_file(const std::filesystem::path& path, const ReadOptions& opts = {});

/// Writes EMB1, or the text format when the extension is .jsonl. Atomic.
void write_embedding_file(const std::filesystem::path& path, std::span<const EmbeddingBatch> batches);

/// Versioned, checksummed snapshot of the whole orchestrator state:
///   "TADS" | u32 version | u64 payload size | CBOR payload | u32 CRC-32(payload)
std::vector<std::uint8_t> snapshot_state(const OrchestratorState& state);
/// Throws Error{VersionMismatch | Corrupt}.
OrchestratorState restore_state(std::span<const std::uint8_t> bytes);

void save_snapshot(const std::filesystem::path& path, const OrchestratorState& state);
OrchestratorState load_snapshot(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write(const std::filesystem::path& path, const std::string& text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace tadil::io
