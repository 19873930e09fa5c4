#pragma once

#include "tadil/domain.hpp"

#include <vector>

namespace tadil {

struct ClusterParams {
  double eps = 0.3;  // max cosine distance of a neighborhood
  int min_pts = 10;  // neighborhood size (self included) that makes a core point

  /// Throws Error{InvalidArgument} unless 0 < eps <= 2 and min_pts >= 1.
  void validate() const;
};

/// Core-point mask: row i is core iff at least min_pts rows (itself
/// included) lie within eps cosine distance.
std::vector<bool> core_points(const EmbeddingBatch& batch, const ClusterParams& params);

/// DBSCAN over cosine distance with exact pairwise distances.
///
/// Rows are scanned in ascending order; each unvisited core point seeds a new
/// cluster that is expanded breadth-first. A border point joins the first
/// cluster that reaches it. Labels are renumbered by first appearance in row
/// order and noise is ClusterAssignment::kNoise.
ClusterAssignment cluster_embeddings(const EmbeddingBatch& batch, const ClusterParams& params);

}  // namespace tadil
