#include "tadil/domain.hpp"

#include "tadil/error.hpp"

#include <cmath>
#include <string>

namespace tadil {

EmbeddingBatch normalize_batch(MatrixXr raw, std::int64_t batch_id, std::optional<Index> expected_dim) {
  if (raw.rows() < 1 || raw.cols() < 1) {
    throw Error(Errc::InvalidArgument, "batch must contain at least one row and one column");
  }
  if (expected_dim && raw.cols() != *expected_dim) {
    throw Error(Errc::DimensionMismatch, "expected dim " + std::to_string(*expected_dim) + ", got " +
                                             std::to_string(raw.cols()));
  }
  if (!raw.allFinite()) {
    throw Error(Errc::NonFinite, "batch contains NaN or Inf");
  }
  for (Index i = 0; i < raw.rows(); ++i) {
    const double norm = raw.row(i).norm();
    if (norm < kZeroNormThreshold) {
      throw Error(Errc::ZeroVector, "row " + std::to_string(i) + " has zero norm");
    }
    if (std::abs(norm - 1.0) > kUnitNormTolerance) {
      raw.row(i) /= norm;
    }
  }
  EmbeddingBatch batch;
  batch.batch_id = batch_id;
  batch.vectors = std::move(raw);
  return batch;
}

Index TaskSignature::pooled_size() const noexcept {
  Index n = 0;
  for (const auto& s : neighbor_sets) n += s.rows();
  return n;
}

MatrixXr TaskSignature::pooled_neighbors() const {
  MatrixXr pooled(pooled_size(), dim());
  Index row = 0;
  for (const auto& s : neighbor_sets) {
    pooled.middleRows(row, s.rows()) = s;
    row += s.rows();
  }
  return pooled;
}

TaskId TaskMemory::append(TaskSignature sig) {
  const TaskId id = next_task_id();
  sig.task_id = id;
  signatures_.push_back(std::move(sig));
  return id;
}

const TaskSignature& TaskMemory::at(TaskId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= signatures_.size()) {
    throw Error(Errc::UnknownTask, "task " + std::to_string(id) + " is not in memory");
  }
  return signatures_[static_cast<std::size_t>(id)];
}

}  // namespace tadil
