#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "tadil/clustering.hpp"
#include "tadil/error.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace tadil;

namespace {

/// Random mixture: a few blobs of varying tightness plus scattered points.
EmbeddingBatch random_mixture(std::uint64_t seed, Index dim, Index rows) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nblobs(1, 4);
  std::uniform_real_distribution<double> tight(0.3, 1.5);
  const int blobs = nblobs(rng);
  const double base = 0.6 / std::sqrt(static_cast<double>(dim));
  MatrixXr X(rows, dim);
  const MatrixXr centers = test::gaussian(blobs, dim, seed * 7 + 1);
  for (Index i = 0; i < rows; ++i) {
    const auto b = static_cast<Index>(rng() % static_cast<std::uint64_t>(blobs + 1));
    if (b == blobs) {
      X.row(i) = test::gaussian(1, dim, rng());  // scattered
    } else {
      const VectorXr c = centers.row(b).normalized();
      X.row(i) = test::blob(c, 1, base * tight(rng), rng()).row(0);
    }
  }
  return normalize_batch(X, 0);
}

}  // namespace

TEST_CASE("identical vectors form one cluster") {
  const VectorXr v = test::gaussian(1, 512, 1).row(0).normalized();
  MatrixXr X = v.transpose().replicate(20, 1);
  const auto a = cluster_embeddings(test::batch_of(X), {0.3, 10});
  CHECK(a.num_clusters == 1);
  CHECK(std::all_of(a.labels.begin(), a.labels.end(), [](int l) { return l == 0; }));
}

TEST_CASE("two orthogonal blobs give exactly two clusters matching the reference") {
  const Index dim = 16;
  MatrixXr X(100, dim);
  X.topRows(50) = test::blob(test::basis(dim, 0), 50, 0.02, 5);
  X.bottomRows(50) = test::blob(test::basis(dim, 1), 50, 0.02, 6);
  // Precondition of the example: each blob is tight.
  for (Index i = 0; i < 50; ++i)
    for (Index j = 0; j < 50; ++j) {
      REQUIRE(oracle::cosine_distance_loop(X, i, j) <= 0.05);
      REQUIRE(oracle::cosine_distance_loop(X, 50 + i, 50 + j) <= 0.05);
    }
  const auto batch = test::batch_of(X);
  const auto a = cluster_embeddings(batch, {0.3, 10});
  const auto ref = oracle::dbscan(batch.vectors, 0.3, 10);
  CHECK(a.num_clusters == 2);
  CHECK(ref.num_clusters == 2);
  CHECK(oracle::same_partition(a.labels, ref.labels));
  for (Index i = 0; i < 100; ++i) CHECK(a.labels[static_cast<std::size_t>(i)] == (i < 50 ? 0 : 1));
}

TEST_CASE("fewer than minPts mutually close points are all noise") {
  const auto batch = test::batch_of(test::blob(test::basis(16, 0), 5, 0.01, 9));
  const auto a = cluster_embeddings(batch, {0.3, 10});
  const auto ref = oracle::dbscan(batch.vectors, 0.3, 10);
  CHECK(ref.num_clusters == 0);
  CHECK(a.num_clusters == 0);
  CHECK(std::all_of(a.labels.begin(), a.labels.end(), [](int l) { return l == ClusterAssignment::kNoise; }));
}

TEST_CASE("matches brute-force DBSCAN on random mixtures") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const Index dim = trial % 2 == 0 ? 8 : 512;
    const Index rows = 10 + static_cast<Index>(rng() % 191);
    const ClusterParams params{0.05 + 0.45 * std::uniform_real_distribution<double>()(rng),
                               2 + static_cast<int>(rng() % 11)};
    const auto batch = random_mixture(rng(), dim, rows);
    const auto a = cluster_embeddings(batch, params);
    const auto ref = oracle::dbscan(batch.vectors, params.eps, params.min_pts);
    CAPTURE(trial);
    CHECK(a.num_clusters == ref.num_clusters);
    CHECK(a.labels == ref.labels);  // same tie-break, so same numbering
  }
}

TEST_CASE("core points and their partition survive row shuffles") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = random_mixture(rng(), 8, 120);
    const ClusterParams params{0.2, 5};
    std::vector<Index> perm(static_cast<std::size_t>(batch.size()));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto shuffled = normalize_batch(batch.vectors(perm, Eigen::all), 0);

    const auto core = core_points(batch, params);
    const auto core_s = core_points(shuffled, params);
    const auto a = cluster_embeddings(batch, params);
    const auto b = cluster_embeddings(shuffled, params);
    std::vector<int> la, lb;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      const auto src = static_cast<std::size_t>(perm[i]);
      CHECK(core_s[i] == core[src]);
      if (core[src]) {
        la.push_back(a.labels[src]);
        lb.push_back(b.labels[i]);
      }
    }
    CHECK(oracle::same_partition(la, lb));
    CHECK(a.num_clusters == b.num_clusters);
  }
}

TEST_CASE("every cluster has a core point and labels are dense") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = random_mixture(rng(), 8, 150);
    const ClusterParams params{0.15, 6};
    const auto a = cluster_embeddings(batch, params);
    const auto core = core_points(batch, params);
    std::set<int> with_core, seen;
    int expected_next = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      const int l = a.labels[i];
      if (l < 0) continue;
      if (!seen.count(l)) {
        CHECK(l == expected_next);  // first-appearance numbering
        ++expected_next;
        seen.insert(l);
      }
      if (core[i]) with_core.insert(l);
    }
    CHECK(static_cast<int>(seen.size()) == a.num_clusters);
    CHECK(with_core == seen);
  }
}

TEST_CASE("invalid cluster params are rejected") {
  const auto batch = test::batch_of(MatrixXr::Ones(3, 4));
  CHECK_THROWS_AS(cluster_embeddings(batch, {0.0, 10}), Error);
  CHECK_THROWS_AS(cluster_embeddings(batch, {2.5, 10}), Error);
  CHECK_THROWS_AS(cluster_embeddings(batch, {0.3, 0}), Error);
}
