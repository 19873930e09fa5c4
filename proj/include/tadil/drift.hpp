#pragma once

#include "tadil/domain.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace tadil {

struct DriftParams {
  /// Gaussian kernel bandwidth; unset selects the median heuristic.
  std::optional<double> kernel_bandwidth;
  int permutations = 100;
  double significance = 0.05;
  /// Skips permutation calibration when set.
  std::optional<double> fixed_threshold;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Unbiased MMD^2 U-statistic with k(u,v) = exp(-|u-v|^2 / (2 bw^2)).
/// Can be negative. Needs at least two rows on each side.
double mmd_statistic(const MatrixXr& a, const MatrixXr& b, double bandwidth);

/// Median of all pairwise Euclidean distances over the rows of a and b. Falls
/// back to the mean positive distance, then to 1, when the median is zero.
double median_heuristic_bandwidth(const MatrixXr& a, const MatrixXr& b);

/// The bandwidth drift checks use: the configured one or the median heuristic.
double resolve_bandwidth(const MatrixXr& a, const MatrixXr& b, const DriftParams& params);

/// Statistics of `params.permutations` random relabelings of the pooled rows.
///
/// The pool is put in a canonical (lexicographic) row order before shuffling
/// and the smaller side is always drawn first, so the null distribution does
/// not depend on argument order. Permutation i draws from its own seeded
/// stream, independent of any other permutation.
std::vector<double> permutation_null(const MatrixXr& a, const MatrixXr& b, double bandwidth,
                                     const DriftParams& params);

/// (1 - significance) quantile (linear interpolation) of the permutation null,
/// floored at zero, or params.fixed_threshold when set.
double calibrate_threshold(const MatrixXr& a, const MatrixXr& b, const DriftParams& params);

/// Two-sample drift decision between raw sample sets.
DriftVerdict two_sample_test(const MatrixXr& a, const MatrixXr& b, const DriftParams& params);

/// Drift decision between the pooled neighbor sets of two signatures.
/// Throws Error{TooFewNeighbors} when either side has fewer than two rows.
DriftVerdict drift_check(const TaskSignature& current, const TaskSignature& stored,
                         const DriftParams& params);

}  // namespace tadil
