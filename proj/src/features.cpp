#include "vidfp/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vidfp {

void FeatureConfig::validate() const {
  if (standard_length < 2) throw std::invalid_argument("standard_length must be >= 2");
  if (histogram_bins < 2) throw std::invalid_argument("histogram_bins must be >= 2");
  if (local_points < 0) throw std::invalid_argument("local_points must be >= 0");
  if (descriptor_patch < descriptor_grid || descriptor_grid < 1 ||
      descriptor_patch % descriptor_grid != 0)
    throw std::invalid_argument("descriptor_patch must be a positive multiple of descriptor_grid");
}

Eigen::VectorXd globalHistogram(const Frame& frame, int bins) {
  if (bins < 2) throw std::invalid_argument("histogram needs at least 2 bins");
  Eigen::VectorXd h = Eigen::VectorXd::Zero(bins);
  for (const std::uint8_t p : frame.pixels) h[static_cast<int>(p) * bins / 256] += 1.0;
  return h / static_cast<double>(frame.pixels.size());
}

Eigen::VectorXd temporalDiff(const Frame& prev, const Frame& next, int bins) {
  if (prev.width != next.width || prev.height != next.height)
    throw std::invalid_argument("temporalDiff: frame sizes differ");
  Eigen::VectorXd d =
      (globalHistogram(next, bins) - globalHistogram(prev, bins)).cwiseAbs();
  const double mass = d.sum();
  return mass == 0.0 ? d : Eigen::VectorXd(d / mass);
}

namespace {

// Integral image with one row/column of zero padding; sums are over the
// half-open rectangle [0,x) x [0,y).
class IntegralImage {
 public:
  explicit IntegralImage(const Frame& frame)
      : width_(frame.width), height_(frame.height),
        sums_(static_cast<std::size_t>(width_ + 1) * (height_ + 1), 0) {
    for (int y = 0; y < height_; ++y) {
      std::uint64_t row = 0;
      for (int x = 0; x < width_; ++x) {
        row += frame(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }

  /// Pixel sum over the inclusive rectangle [x0,x1] x [y0,y1].
  double box(int x0, int y0, int x1, int y1) const {
    return static_cast<double>(at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) +
                               at(x0, y0));
  }

 private:
  std::uint64_t& at(int x, int y) {
    return sums_[static_cast<std::size_t>(y) * (width_ + 1) + x];
  }
  std::uint64_t at(int x, int y) const {
    return sums_[static_cast<std::size_t>(y) * (width_ + 1) + x];
  }

  int width_, height_;
  std::vector<std::uint64_t> sums_;
};

}  // namespace

std::vector<InterestPoint> detectInterestPoints(const Frame& frame, int k) {
  if (k == 0) return {};
  if (k < 0) throw std::invalid_argument("detectInterestPoints: k must be >= 0");
  if (frame.width < 16 || frame.height < 16)
    throw std::invalid_argument("detectInterestPoints: frame must be at least 16x16");

  const IntegralImage ii(frame);
  const int w = frame.width;
  const int h = frame.height;
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(w, h);
  // 9x9 box-filter second derivatives, normalized by the filter area.
  for (int y = 4; y < h - 4; ++y) {
    for (int x = 4; x < w - 4; ++x) {
      const double dxx = (ii.box(x - 4, y - 2, x - 2, y + 2) -
                          2.0 * ii.box(x - 1, y - 2, x + 1, y + 2) +
                          ii.box(x + 2, y - 2, x + 4, y + 2)) / 81.0;
      const double dyy = (ii.box(x - 2, y - 4, x + 2, y - 2) -
                          2.0 * ii.box(x - 2, y - 1, x + 2, y + 1) +
                          ii.box(x - 2, y + 2, x + 2, y + 4)) / 81.0;
      const double dxy = (ii.box(x - 3, y - 3, x - 1, y - 1) +
                          ii.box(x + 1, y + 1, x + 3, y + 3) -
                          ii.box(x + 1, y - 3, x + 3, y - 1) -
                          ii.box(x - 3, y + 1, x - 1, y + 3)) / 81.0;
      resp(x, y) = dxx * dyy - 0.81 * dxy * dxy;
    }
  }

  std::vector<InterestPoint> candidates;
  for (int y = 4; y < h - 4; ++y) {
    for (int x = 4; x < w - 4; ++x) {
      const double r = resp(x, y);
      if (r <= 0.0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double rn = resp(x + dx, y + dy);
          // equal responses go to the earlier point in scan order
          if (rn > r || (rn == r && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({x, y, r});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const InterestPoint& a, const InterestPoint& b) {
              if (a.response != b.response) return a.response > b.response;
              return std::pair(a.y, a.x) < std::pair(b.y, b.x);
            });
  if (static_cast<int>(candidates.size()) > k) candidates.resize(static_cast<std::size_t>(k));
  return candidates;
}

namespace {

// Bilinear sample with border clamping.
double sampleClamped(const Frame& f, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  return (1 - ax) * (1 - ay) * f.clamped(x0, y0) + ax * (1 - ay) * f.clamped(x0 + 1, y0) +
         (1 - ax) * ay * f.clamped(x0, y0 + 1) + ax * ay * f.clamped(x0 + 1, y0 + 1);
}

}  // namespace

Eigen::VectorXd localDescriptor(const Frame& frame, int x, int y, const FeatureConfig& config) {
  config.validate();
  if (x < 0 || x >= frame.width || y < 0 || y >= frame.height)
    throw std::invalid_argument("localDescriptor: point outside the frame");
  const int patch = config.descriptor_patch;
  const int grid = config.descriptor_grid;
  const int cell = patch / grid;
  // samples sit at half-pixel offsets so the even-sized patch is exactly
  // centered; a mirrored patch then maps sample-for-sample onto itself
  const double half = patch / 2.0 - 0.5;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(grid * grid * 4);
  for (int v = 0; v < patch; ++v) {
    for (int u = 0; u < patch; ++u) {
      const double px = x - half + u;
      const double py = y - half + v;
      const double gx = (sampleClamped(frame, px + 1, py) - sampleClamped(frame, px - 1, py)) / 2.0;
      const double gy = (sampleClamped(frame, px, py + 1) - sampleClamped(frame, px, py - 1)) / 2.0;
      const int base = ((v / cell) * grid + (u / cell)) * 4;
      d[base] += gx;
      d[base + 1] += gy;
      d[base + 2] += std::abs(gx);
      d[base + 3] += std::abs(gy);
    }
  }
  const double norm = d.norm();
  return norm == 0.0 ? d : Eigen::VectorXd(d / norm);
}

Eigen::VectorXd standardizeColumn(const Eigen::VectorXd& v, int length) {
  if (v.size() == 0) throw std::invalid_argument("standardizeColumn: empty input");
  if (length < 1) throw std::invalid_argument("standardizeColumn: length must be >= 1");
  if (v.size() == length) return v;
  Eigen::VectorXd out(length);
  const auto n = v.size();
  for (int j = 0; j < length; ++j) {
    const double pos =
        length == 1 ? 0.0 : static_cast<double>(j) * static_cast<double>(n - 1) / (length - 1);
    const auto i0 = static_cast<Eigen::Index>(pos);
    const double frac = pos - static_cast<double>(i0);
    const Eigen::Index i1 = std::min(i0 + 1, n - 1);
    out[j] = (1.0 - frac) * v[i0] + frac * v[i1];
  }
  return out;
}

Eigen::MatrixXd buildSlice(const Frame* prev, const Frame& frame, const FeatureConfig& config) {
  config.validate();
  const int length = config.standard_length;
  Eigen::MatrixXd slice = Eigen::MatrixXd::Zero(length, config.columnCount());
  slice.col(0) = standardizeColumn(globalHistogram(frame, config.histogram_bins), length);
  if (prev != nullptr)
    slice.col(1) = standardizeColumn(temporalDiff(*prev, frame, config.histogram_bins), length);
  const std::vector<InterestPoint> points = detectInterestPoints(frame, config.local_points);
  for (std::size_t i = 0; i < points.size(); ++i) {
    slice.col(2 + static_cast<Eigen::Index>(i)) =
        standardizeColumn(localDescriptor(frame, points[i].x, points[i].y, config), length);
  }
  return slice;
}

}  // namespace vidfp
