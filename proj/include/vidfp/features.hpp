#pragma once

#include <Eigen/Dense>

#include <vector>

#include "vidfp/frames.hpp"

namespace vidfp {

enum class FeatureKind { Global, Temporal, Local };

struct FeatureConfig {
  int standard_length = 64;  // every feature column is resampled to this length
  int histogram_bins = 64;
  int local_points = 4;      // descriptors per frame; missing points give zero columns
  int descriptor_patch = 20; // patch side around an interest point, pixels
  int descriptor_grid = 4;   // cells per patch side; descriptor length = grid^2 * 4

  int columnCount() const { return 2 + local_points; }
  void validate() const;
};

/// Kind of slice column c: 0 is the global histogram, 1 the temporal
/// difference, the rest local descriptors.
inline FeatureKind sliceColumnKind(int column) {
  if (column == 0) return FeatureKind::Global;
  if (column == 1) return FeatureKind::Temporal;
  return FeatureKind::Local;
}

/// Normalized gray histogram; bin b counts pixels p with p*bins/256 == b.
/// Sums to one.
Eigen::VectorXd globalHistogram(const Frame& frame, int bins);

/// L1-normalized absolute difference of the two frames' normalized
/// histograms; the zero vector when the histograms agree.
Eigen::VectorXd temporalDiff(const Frame& prev, const Frame& next, int bins);

struct InterestPoint {
  int x = 0;
  int y = 0;
  double response = 0.0;
};

/// Top-k blob responses of a single-scale determinant-of-Hessian detector
/// (9x9 box filters over an integral image) after 3x3 non-maximum
/// suppression. Sorted by descending response, ties by (y, x) scan order;
/// only strictly positive responses qualify, so a constant frame yields an
/// empty list.
std::vector<InterestPoint> detectInterestPoints(const Frame& frame, int k);

/// Gradient-distribution descriptor of the patch centered at the point:
/// per grid cell the sums (dx, dy, |dx|, |dy|) of central-difference
/// gradients, L2-normalized unless identically zero. Samples are
/// border-clamped. Length grid^2 * 4 (64 for the defaults).
Eigen::VectorXd localDescriptor(const Frame& frame, int x, int y,
                                const FeatureConfig& config = {});

/// Linear-interpolation resampling onto `length` uniform positions over
/// [0, v.size()-1]; exact identity when the length already matches.
Eigen::VectorXd standardizeColumn(const Eigen::VectorXd& v, int length);

/// One frontal slice of the video tensor: standardized columns
/// [global, temporal, local_1 .. local_K]. `prev` may be null for the first
/// frame of a sequence, which zeroes the temporal column.
Eigen::MatrixXd buildSlice(const Frame* prev, const Frame& frame, const FeatureConfig& config);

}  // namespace vidfp
