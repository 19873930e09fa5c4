#include "tadil/clustering.hpp"

#include "tadil/error.hpp"

#include <deque>

namespace tadil {

namespace {

using Neighborhoods = std::vector<std::vector<Index>>;

Neighborhoods eps_neighborhoods(const MatrixXr& X, double eps) {
  const MatrixXr D = pairwise_cosine_distances(X);
  Neighborhoods out(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    auto& n = out[static_cast<std::size_t>(i)];
    for (Index j = 0; j < X.rows(); ++j) {
      if (D(i, j) <= eps) n.push_back(j);
    }
  }
  return out;
}

std::vector<bool> core_mask(const Neighborhoods& hoods, int min_pts) {
  std::vector<bool> core(hoods.size());
  for (std::size_t i = 0; i < hoods.size(); ++i) {
    core[i] = hoods[i].size() >= static_cast<std::size_t>(min_pts);
  }
  return core;
}

}  // namespace

void ClusterParams::validate() const {
  if (!(eps > 0.0 && eps <= 2.0)) throw Error(Errc::InvalidArgument, "eps must lie in (0, 2]");
  if (min_pts < 1) throw Error(Errc::InvalidArgument, "min_pts must be >= 1");
}

std::vector<bool> core_points(const EmbeddingBatch& batch, const ClusterParams& params) {
  params.validate();
  return core_mask(eps_neighborhoods(batch.vectors, params.eps), params.min_pts);
}

ClusterAssignment cluster_embeddings(const EmbeddingBatch& batch, const ClusterParams& params) {
  params.validate();
  if (batch.size() < 1) throw Error(Errc::InvalidArgument, "empty batch");

  const auto hoods = eps_neighborhoods(batch.vectors, params.eps);
  const auto core = core_mask(hoods, params.min_pts);
  const std::size_t m = hoods.size();

  constexpr int kUnassigned = -2;
  std::vector<int> raw(m, kUnassigned);
  int clusters = 0;
  std::deque<Index> frontier;

  for (std::size_t seed = 0; seed < m; ++seed) {
    if (raw[seed] != kUnassigned || !core[seed]) continue;
    const int id = clusters++;
    raw[seed] = id;
    frontier.assign(1, static_cast<Index>(seed));
    while (!frontier.empty()) {
      const auto p = static_cast<std::size_t>(frontier.front());
      frontier.pop_front();
      if (!core[p]) continue;  // border points do not expand
      for (Index q : hoods[p]) {
        auto& lq = raw[static_cast<std::size_t>(q)];
        if (lq != kUnassigned) continue;
        lq = id;
        frontier.push_back(q);
      }
    }
  }

  // Renumber by first appearance in row order.
  ClusterAssignment out;
  out.labels.assign(m, ClusterAssignment::kNoise);
  std::vector<int> remap(static_cast<std::size_t>(clusters), -1);
  int next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (raw[i] == kUnassigned) continue;
    auto& r = remap[static_cast<std::size_t>(raw[i])];
    if (r < 0) r = next++;
    out.labels[i] = r;
  }
  out.num_clusters = clusters;
  return out;
}

}  // namespace tadil
