#include "tadil/drift.hpp"

#include "tadil/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace tadil {

namespace {

void require_samples(const MatrixXr& a, const MatrixXr& b) {
  if (a.rows() < 2 || b.rows() < 2) {
    throw Error(Errc::TooFewNeighbors, "each sample needs at least 2 rows (got " +
                                           std::to_string(a.rows()) + " and " +
                                           std::to_string(b.rows()) + ")");
  }
  if (a.cols() != b.cols()) throw Error(Errc::DimensionMismatch, "samples differ in dim");
}

void require_bandwidth(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(Errc::DegenerateBandwidth, "bandwidth must be positive and finite");
  }
}

MatrixXr stack(const MatrixXr& a, const MatrixXr& b) {
  MatrixXr pool(a.rows() + b.rows(), a.cols());
  pool << a, b;
  return pool;
}

/// Unbiased MMD^2 from a precomputed kernel matrix over the pool, with the
/// first `nx` entries of `order` on one side and the rest on the other.
double mmd_from_kernel(const MatrixXr& K, const std::vector<Index>& order, std::size_t nx) {
  const std::size_t n = order.size();
  const std::size_t ny = n - nx;
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Index pi = order[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double kij = K(pi, order[j]);
      if (j < nx) {
        xx += kij;
      } else if (i >= nx) {
        yy += kij;
      } else {
        xy += kij;
      }
    }
  }
  const double dx = static_cast<double>(nx), dy = static_cast<double>(ny);
  return 2.0 * xx / (dx * (dx - 1.0)) + 2.0 * yy / (dy * (dy - 1.0)) - 2.0 * xy / (dx * dy);
}

std::vector<Index> lexicographic_order(const MatrixXr& pool) {
  std::vector<Index> order(static_cast<std::size_t>(pool.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index r, Index s) {
    for (Index c = 0; c < pool.cols(); ++c) {
      if (pool(r, c) != pool(s, c)) return pool(r, c) < pool(s, c);
    }
    return false;
  });
  return order;
}

std::mt19937_64 permutation_stream(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

}  // namespace

void DriftParams::validate() const {
  if (permutations < 1) throw Error(Errc::InvalidArgument, "permutations must be >= 1");
  if (!(significance > 0.0 && significance < 1.0)) {
    throw Error(Errc::InvalidArgument, "significance must lie in (0, 1)");
  }
  if (kernel_bandwidth) require_bandwidth(*kernel_bandwidth);
}

double mmd_statistic(const MatrixXr& a, const MatrixXr& b, double bandwidth) {
  require_bandwidth(bandwidth);
  require_samples(a, b);
  const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
  auto k = [gamma](const auto& u, const auto& v) { return std::exp(-gamma * (u - v).squaredNorm()); };

  double aa = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = i + 1; j < a.rows(); ++j) aa += k(a.row(i), a.row(j));
  double bb = 0.0;
  for (Index i = 0; i < b.rows(); ++i)
    for (Index j = i + 1; j < b.rows(); ++j) bb += k(b.row(i), b.row(j));
  double ab = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) ab += k(a.row(i), b.row(j));

  const double na = static_cast<double>(a.rows()), nb = static_cast<double>(b.rows());
  return 2.0 * aa / (na * (na - 1.0)) + 2.0 * bb / (nb * (nb - 1.0)) - 2.0 * ab / (na * nb);
}

double median_heuristic_bandwidth(const MatrixXr& a, const MatrixXr& b) {
  const MatrixXr pool = stack(a, b);
  const MatrixXr sq = pairwise_squared_euclidean(pool);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pool.rows() * (pool.rows() - 1) / 2));
  for (Index i = 0; i < pool.rows(); ++i)
    for (Index j = i + 1; j < pool.rows(); ++j) d.push_back(std::sqrt(sq(i, j)));
  if (d.empty()) return 1.0;

  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double median = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  if (median > 0.0) return median;

  double sum = 0.0;
  std::size_t positive = 0;
  for (double x : d) {
    if (x > 0.0) {
      sum += x;
      ++positive;
    }
  }
  return positive > 0 ? sum / static_cast<double>(positive) : 1.0;
}

double resolve_bandwidth(const MatrixXr& a, const MatrixXr& b, const DriftParams& params) {
  return params.kernel_bandwidth ? *params.kernel_bandwidth : median_heuristic_bandwidth(a, b);
}

std::vector<double> permutation_null(const MatrixXr& a, const MatrixXr& b, double bandwidth,
                                     const DriftParams& params) {
  params.validate();
  require_bandwidth(bandwidth);
  require_samples(a, b);

  const MatrixXr pool = stack(a, b);
  const MatrixXr K =
      (pairwise_squared_euclidean(pool) * (-1.0 / (2.0 * bandwidth * bandwidth))).array().exp().matrix();
  const std::vector<Index> canonical = lexicographic_order(pool);
  const auto first_side = static_cast<std::size_t>(std::min(a.rows(), b.rows()));

  std::vector<double> null(static_cast<std::size_t>(params.permutations));
  for (int p = 0; p < params.permutations; ++p) {
    auto rng = permutation_stream(params.rng_seed, p);
    std::vector<Index> order = canonical;
    std::shuffle(order.begin(), order.end(), rng);
    null[static_cast<std::size_t>(p)] = mmd_from_kernel(K, order, first_side);
  }
  return null;
}

double calibrate_threshold(const MatrixXr& a, const MatrixXr& b, const DriftParams& params) {
  params.validate();
  if (params.fixed_threshold) return *params.fixed_threshold;

  std::vector<double> null = permutation_null(a, b, resolve_bandwidth(a, b, params), params);
  std::sort(null.begin(), null.end());
  const double h = (1.0 - params.significance) * static_cast<double>(null.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, null.size() - 1);
  const double q = null[lo] + (h - static_cast<double>(lo)) * (null[hi] - null[lo]);
  return std::max(q, 0.0);
}

DriftVerdict two_sample_test(const MatrixXr& a, const MatrixXr& b, const DriftParams& params) {
  params.validate();
  require_samples(a, b);
  DriftVerdict v;
  v.statistic = mmd_statistic(a, b, resolve_bandwidth(a, b, params));
  v.threshold = calibrate_threshold(a, b, params);
  v.score = v.statistic - v.threshold;
  v.drifted = v.score > 0.0;
  return v;
}

DriftVerdict drift_check(const TaskSignature& current, const TaskSignature& stored,
                         const DriftParams& params) {
  if (current.dim() != stored.dim()) throw Error(Errc::DimensionMismatch, "signatures differ in dim");
  return two_sample_test(current.pooled_neighbors(), stored.pooled_neighbors(), params);
}

}  // namespace tadil
