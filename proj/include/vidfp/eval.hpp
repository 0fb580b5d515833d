#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vidfp/fingerprint.hpp"
#include "vidfp/frames.hpp"
#include "vidfp/matchdb.hpp"

namespace vidfp {

enum class ModKind {
  Rotation,
  Awgn,
  MotionBlur,
  Contrast,
  LetterBox,
  CaptionInsert,
  LogoInsert,
  PictureInPicture,
  Crop,
  Flip,
  FrameResample,
  Affine,
  Combo1,  // contrast + gamma + noise
  Combo2,  // contrast + gamma + noise + blur + frame resampling
  Combo3,  // crop + flip + pattern insertion
  Combo4,  // crop + flip + pattern insertion + picture-in-picture + shift
};

struct Modification {
  ModKind kind = ModKind::Flip;
  double angle_deg = 5.0;       // rotation, counterclockwise
  double noise_sigma = 110.0;   // additive Gaussian noise
  int blur_length = 10;         // horizontal box kernel, pixels
  double saturate_frac = 0.01;  // contrast stretch tail fraction per side
  double box_frac = 0.10;       // letter-box bar height fraction
  int insert_size = 100;        // picture-in-picture patch side, capped at width/3
  double crop_frac = 0.25;      // fraction of the frame area removed
  double resample_frac = 0.05;  // fraction of frames replaced by a neighbor
  Eigen::Matrix3d affine;       // source -> destination homogeneous map
  double gamma = 0.8;           // gamma step inside combos
  double shift_frac = 0.05;     // horizontal shift inside combo 4

  explicit Modification(ModKind k = ModKind::Flip);
  void validate(int width, int height) const;
};

std::string modKindName(ModKind kind);
ModKind modKindFromName(const std::string& name);

/// The twelve single-mode kinds in declaration order.
std::vector<ModKind> singleModifications();
/// True for the four combined kinds.
bool isCombo(ModKind kind);

struct CorpusSpec {
  int n_videos = 50;
  int frames_per_video = 64;
  int width = 128;
  int height = 96;
  std::uint64_t seed = 1;
  int min_objects = 3;  // moving rectangles/discs per video
  int max_objects = 6;
  double max_speed = 3.0;  // pixels per frame per axis

  void validate() const;
};

/// Deterministic procedural videos: a per-video textured background with
/// moving bright/dark objects, all parameters drawn from per-video seeds.
std::vector<FrameSequence> synthCorpus(const CorpusSpec& spec);

/// Applies a single or combined modification. Frame dimensions never change
/// and only FrameResample touches the temporal axis. `seed` feeds the
/// stochastic steps (noise, frame selection).
FrameSequence applyModification(const FrameSequence& seq, const Modification& m,
                                std::uint64_t seed);

/// Weighted harmonic mean of precision and recall; beta < 1 favors
/// precision. Zero when recall is zero.
double fScore(double precision, double recall, double beta);

struct RocPoint {
  double threshold = 0.0;
  double false_alarm = 0.0;
  double miss = 0.0;
};

/// Threshold sweep over the sorted unique distances of labeled pairs.
std::vector<RocPoint> rocCurve(const std::vector<std::pair<double, bool>>& pair_distances);

/// Trapezoidal area under the miss-versus-false-alarm staircase, padded to
/// the (0,1)/(1,0) axes endpoints; lower is better.
double rocArea(const std::vector<RocPoint>& curve);

/// Comparison system: per-video mean global histogram, mean temporal
/// difference and mean local descriptor concatenated (length 3L), with no
/// tensor decomposition.
Eigen::VectorXd concatenatedBaselineFingerprint(const FrameSequence& seq,
                                                const PipelineConfig& config);

enum class EvalSystem { Comprehensive, ConcatenatedBaseline };

struct EvalThresholdRow {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  double miss = 0.0;
  double false_alarm = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct ModificationReport {
  std::string modification;
  std::vector<EvalThresholdRow> rows;
  std::vector<RocPoint> roc;
  double fitted_tau = 0.0;  // per-modification fit, when that mode is active
  bool fit_ok = false;
};

struct ModificationReport;

enum class ThresholdMode {
  /// Each modification row scores at the tau fitted from its own distance
  /// samples; modifications beyond the robustness envelope cannot skew the
  /// others' operating points.
  FitPerModification,
  /// One tau fitted from the distances pooled over every modification.
  FitPooled,
  /// Fixed thresholds supplied by the caller.
  Fixed,
};

struct EvalReport {
  std::string system;
  double beta = 0.5;
  ThresholdMode threshold_mode = ThresholdMode::FitPerModification;
  double pooled_tau = 0.0;         // valid when the pooled fit succeeded
  ThresholdModel pooled_model;
  bool pooled_fit_ok = false;
  std::vector<ModificationReport> per_modification;
  /// Mode-3 core condition number per original video (comprehensive system
  /// only; +infinity marks a singular matricization).
  std::vector<double> condition_numbers;
  double runtime_seconds = 0.0;
};

struct EvalOptions {
  PipelineConfig pipeline;
  double beta = 0.5;
  ThresholdMode threshold_mode = ThresholdMode::FitPerModification;
  std::vector<double> thresholds;  // used by ThresholdMode::Fixed
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Fingerprints the originals and every modified copy, then scores
/// (original, own copy) pairs as positives and (original, other video's
/// copy) pairs as negatives.
EvalReport runEvaluation(const std::vector<FrameSequence>& corpus,
                         const std::vector<Modification>& modifications, EvalSystem system,
                         const EvalOptions& options);

void writeEvalCsv(const std::filesystem::path& path, const std::vector<EvalReport>& reports,
                  const std::string& config_header);
void writeRocCsv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
void writeConditionCsv(const std::filesystem::path& path,
                       const std::vector<double>& condition_numbers);

/// Runs fn(i) for i in [0, n) on `threads` workers; results must be written
/// to per-index slots so the outcome is identical for any thread count.
void parallelFor(int n, int threads, const std::function<void(int)>& fn);

}  // namespace vidfp
