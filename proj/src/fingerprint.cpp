#include "vidfp/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vidfp {

namespace {

constexpr Eigen::Index kAutoRankCap = 6;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string canonicalConfigString(const PipelineConfig& c) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "v1|L=%d|bins=%d|K=%d|patch=%d|grid=%d|I3=%d|prior=%c|snr=%.17g|learn=%d|"
                "mr=%lld,%lld,%lld|prune=%.17g|iters=%d|tol=%.17g|seed=%llu",
                c.feature.standard_length, c.feature.histogram_bins, c.feature.local_points,
                c.feature.descriptor_patch, c.feature.descriptor_grid, c.target_frames,
                c.ard.prior == ArdPrior::Gaussian ? 'g' : 'l', c.ard.snr_db,
                c.ard.learn_sigma ? 1 : 0, static_cast<long long>(c.ard.max_ranks[0]),
                static_cast<long long>(c.ard.max_ranks[1]),
                static_cast<long long>(c.ard.max_ranks[2]), c.ard.prune_ratio, c.ard.max_iter,
                c.ard.tol, static_cast<unsigned long long>(c.seed));
  return buf;
}

}  // namespace

PipelineConfig PipelineConfig::resolved() const {
  PipelineConfig out = *this;
  const Shape3 dims = tensorDims();
  for (int n = 0; n < 3; ++n) {
    if (out.ard.max_ranks[n] == 0)
      out.ard.max_ranks[n] = std::min(dims[n], kAutoRankCap);
  }
  out.validate();
  return out;
}

void PipelineConfig::validate() const {
  feature.validate();
  if (target_frames < 2) throw std::invalid_argument("target_frames must be >= 2");
  const Shape3 dims = tensorDims();
  for (int n = 0; n < 3; ++n) {
    if (ard.max_ranks[n] < 0 || ard.max_ranks[n] > dims[n])
      throw std::invalid_argument("ard.max_ranks exceed the video tensor dimensions");
  }
}

std::string configDigest(const PipelineConfig& config) {
  const std::uint64_t h = fnv1a64(canonicalConfigString(config.resolved()));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Tensor3d buildVideoTensor(const FrameSequence& seq, const PipelineConfig& config) {
  const PipelineConfig c = config.resolved();
  const FrameSequence sampled = sampleFrames(seq, c.target_frames);
  const Shape3 dims = c.tensorDims();
  Tensor3d t(dims);
  for (std::size_t f = 0; f < sampled.frames.size(); ++f) {
    const Frame* prev = f == 0 ? nullptr : &sampled.frames[f - 1];
    const Eigen::MatrixXd slice = buildSlice(prev, sampled.frames[f], c.feature);
    for (Eigen::Index j = 0; j < dims[1]; ++j)
      for (Eigen::Index i = 0; i < dims[0]; ++i)
        t(i, j, static_cast<Eigen::Index>(f)) = slice(i, j);
  }
  return t;
}

FingerprintResult fingerprintTensor(const Tensor3d& t, const PipelineConfig& config) {
  const PipelineConfig c = config.resolved();
  const ArdResult ard = ardSelectRanks(t, c.ard);

  FingerprintResult result;
  result.model = ard.model;
  Fingerprint& fp = result.fingerprint;
  fp.ranks = ard.selected_ranks;
  fp.config_digest = configDigest(c);
  fp.tag = computeMatchTag(ard.model.core);
  fp.y.resize(t.dim(1) + t.dim(2) + t.dim(3));
  Eigen::Index offset = 0;
  for (int n = 1; n <= 3; ++n) {
    const Eigen::MatrixXd& a = ard.model.factor(n);
    fp.y.segment(offset, a.rows()) = a.cwiseAbs().rowwise().mean();
    offset += a.rows();
  }
  return result;
}

Fingerprint computeFingerprint(const Tensor3d& t, const PipelineConfig& config) {
  return fingerprintTensor(t, config).fingerprint;
}

FingerprintResult fingerprintVideo(const FrameSequence& seq, const PipelineConfig& config) {
  return fingerprintTensor(buildVideoTensor(seq, config), config);
}

double computeMatchTag(const Tensor3d& core) { return core.sum(); }

ConditionReport conditionReport(const std::vector<TuckerModel<double>>& models) {
  if (models.empty()) throw std::invalid_argument("conditionReport: empty model list");
  ConditionReport report;
  std::vector<double> finite;
  for (const TuckerModel<double>& model : models) {
    const Eigen::MatrixXd m = matricize(model.core, 3);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smin = s[s.size() - 1];
    if (smin <= 0.0) {
      report.values.push_back(std::numeric_limits<double>::infinity());
      ++report.singular_count;
    } else {
      report.values.push_back(s[0] / smin);
      finite.push_back(report.values.back());
    }
  }
  if (finite.empty()) {
    report.min = report.median = report.max = std::numeric_limits<double>::infinity();
    return report;
  }
  std::sort(finite.begin(), finite.end());
  report.min = finite.front();
  report.max = finite.back();
  const std::size_t n = finite.size();
  report.median = n % 2 == 1 ? finite[n / 2] : 0.5 * (finite[n / 2 - 1] + finite[n / 2]);
  return report;
}

}  // namespace vidfp
