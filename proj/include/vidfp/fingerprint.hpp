#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "vidfp/ard.hpp"
#include "vidfp/features.hpp"
#include "vidfp/frames.hpp"
#include "vidfp/tensor.hpp"
#include "vidfp/tucker.hpp"

namespace vidfp {

/// End-to-end fingerprinting configuration. The video tensor has dimensions
/// (standard_length, 2 + local_points, target_frames), so the fingerprint
/// length I1+I2+I3 depends only on this config and fingerprints stay
/// comparable across videos whatever ranks the rank selection picks.
struct PipelineConfig {
  FeatureConfig feature;
  int target_frames = 64;
  ArdConfig ard;  // max_ranks of 0 resolve to min(dim, 8) per mode
  std::uint64_t seed = 0;

  Shape3 tensorDims() const {
    return {feature.standard_length, feature.columnCount(), target_frames};
  }

  /// Copy with auto max_ranks filled in against the tensor dimensions.
  PipelineConfig resolved() const;
  void validate() const;
};

/// Stable 16-hex-digit hash of the resolved configuration. Fingerprints made
/// under different configurations are not comparable, and matching refuses
/// to mix them.
std::string configDigest(const PipelineConfig& config);

struct Fingerprint {
  Eigen::VectorXd y;  // length I1+I2+I3, nonnegative
  double tag = 0.0;
  Shape3 ranks{0, 0, 0};
  std::string config_digest;
};

struct FingerprintResult {
  Fingerprint fingerprint;
  TuckerModel<double> model;
};

/// Stacks per-frame feature slices as frontal slices after resampling the
/// sequence to target_frames.
Tensor3d buildVideoTensor(const FrameSequence& seq, const PipelineConfig& config);

/// ARD-selected Tucker decomposition plus the fingerprint: y concatenates
/// the row means of |A(1)|, |A(2)|, |A(3)| and the tag is the sum of the
/// core entries.
FingerprintResult fingerprintTensor(const Tensor3d& t, const PipelineConfig& config);

Fingerprint computeFingerprint(const Tensor3d& t, const PipelineConfig& config);

FingerprintResult fingerprintVideo(const FrameSequence& seq, const PipelineConfig& config);

/// Sum of all core-tensor entries.
double computeMatchTag(const Tensor3d& core);

/// 2-norm condition numbers of the mode-3 matricization of each model's
/// core; a singular matricization reports +infinity and is counted
/// separately. Summary statistics cover the finite values.
struct ConditionReport {
  std::vector<double> values;
  int singular_count = 0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

ConditionReport conditionReport(const std::vector<TuckerModel<double>>& models);

}  // namespace vidfp
