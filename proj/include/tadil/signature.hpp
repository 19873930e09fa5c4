#pragma once

#include "tadil/clustering.hpp"
#include "tadil/domain.hpp"

#include <vector>

namespace tadil {

inline constexpr int kDefaultNeighbors = 10;

/// Arithmetic mean of each cluster's members, one row per cluster label.
/// Noise rows are ignored. Throws Error{NoClusters} when there are none.
MatrixXr compute_centroids(const EmbeddingBatch& batch, const ClusterAssignment& assignment);

/// Positions (into `members`) of the min(k, rows) rows nearest to `centroid`
/// in L1 distance, ascending; ties go to the lower position.
std::vector<Index> nearest_neighbors(const MatrixXr& members, const VectorXr& centroid, int k);

/// Cluster, take centroids, and keep the k L1-nearest members of each.
/// A batch that clusters to pure noise is treated as a single cluster.
TaskSignature build_signature(const EmbeddingBatch& batch, const ClusterParams& params, int k,
                              TaskId task_id);

}  // namespace tadil
