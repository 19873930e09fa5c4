#include "tadil/signature.hpp"

#include "tadil/error.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

namespace tadil {

MatrixXr compute_centroids(const EmbeddingBatch& batch, const ClusterAssignment& assignment) {
  if (assignment.num_clusters <= 0) throw Error(Errc::NoClusters, "assignment has no clusters");
  if (static_cast<Index>(assignment.labels.size()) != batch.size()) {
    throw Error(Errc::DimensionMismatch, "assignment does not match batch rows");
  }
  MatrixXr sums = MatrixXr::Zero(assignment.num_clusters, batch.dim());
  std::vector<Index> counts(static_cast<std::size_t>(assignment.num_clusters), 0);
  for (Index i = 0; i < batch.size(); ++i) {
    const int c = assignment.labels[static_cast<std::size_t>(i)];
    if (c == ClusterAssignment::kNoise) continue;
    sums.row(c) += batch.vectors.row(i);
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < assignment.num_clusters; ++c) {
    sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  return sums;
}

std::vector<Index> nearest_neighbors(const MatrixXr& members, const VectorXr& centroid, int k) {
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (members.rows() < 1) throw Error(Errc::InvalidArgument, "no members");
  if (members.cols() != centroid.size()) throw Error(Errc::DimensionMismatch, "centroid dim");

  const VectorXr dist = manhattan_to_rows(members, centroid);
  std::vector<Index> order(static_cast<std::size_t>(members.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](Index a, Index b) {
                      return std::pair(dist(a), a) < std::pair(dist(b), b);
                    });
  order.resize(take);
  return order;
}

TaskSignature build_signature(const EmbeddingBatch& batch, const ClusterParams& params, int k,
                              TaskId task_id) {
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
  ClusterAssignment assignment = cluster_embeddings(batch, params);
  if (assignment.num_clusters == 0) {
    assignment.labels.assign(static_cast<std::size_t>(batch.size()), 0);
    assignment.num_clusters = 1;
  }
  const MatrixXr centroids = compute_centroids(batch, assignment);

  TaskSignature sig;
  sig.task_id = task_id;
  sig.k = k;
  sig.created_at = batch.batch_id;
  sig.centroids = centroids;
  for (int c = 0; c < assignment.num_clusters; ++c) {
    std::vector<Index> rows;
    for (Index i = 0; i < batch.size(); ++i) {
      if (assignment.labels[static_cast<std::size_t>(i)] == c) rows.push_back(i);
    }
    const MatrixXr members = batch.vectors(rows, Eigen::all);
    const auto picked = nearest_neighbors(members, centroids.row(c).transpose(), k);
    std::vector<Index> source;
    source.reserve(picked.size());
    for (Index p : picked) source.push_back(rows[static_cast<std::size_t>(p)]);
    sig.neighbor_sets.emplace_back(batch.vectors(source, Eigen::all));
    sig.source_rows.push_back(std::move(source));
  }
  return sig;
}

}  // namespace tadil
