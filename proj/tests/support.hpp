#pragma once

#include "tadil/domain.hpp"

#include <cstdint>
#include <random>

namespace tadil::test {

inline MatrixXr gaussian(Index rows, Index cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  MatrixXr m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

/// `rows` unit vectors scattered around `center` (unnormalized noise sd `sd`).
inline MatrixXr blob(const VectorXr& center, Index rows, double sd, std::uint64_t seed) {
  MatrixXr m = gaussian(rows, center.size(), seed, sd);
  m.rowwise() += center.transpose();
  m.rowwise().normalize();
  return m;
}

inline VectorXr basis(Index dim, Index i) {
  VectorXr e = VectorXr::Zero(dim);
  e(i) = 1.0;
  return e;
}

inline EmbeddingBatch batch_of(MatrixXr rows, std::int64_t id = 0) {
  return normalize_batch(std::move(rows), id);
}

}  // namespace tadil::test
