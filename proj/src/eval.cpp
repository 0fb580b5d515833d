#include "vidfp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "vidfp/rng.hpp"

namespace fs = std::filesystem;

namespace vidfp {

Modification::Modification(ModKind k) : kind(k) {
  affine << 1.0, 0.0, 0.0,
            0.5, 1.0, 0.0,
            0.0, 0.0, 1.0;
}

void Modification::validate(int width, int height) const {
  (void)width;
  (void)height;
  if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
  if (blur_length < 1) throw std::invalid_argument("blur_length must be >= 1");
  if (saturate_frac < 0.0 || saturate_frac >= 0.5)
    throw std::invalid_argument("saturate_frac must lie in [0, 0.5)");
  if (box_frac < 0.0 || box_frac >= 0.5)
    throw std::invalid_argument("box_frac must lie in [0, 0.5)");
  if (insert_size < 1) throw std::invalid_argument("insert_size must be >= 1");
  if (crop_frac < 0.0 || crop_frac >= 1.0)
    throw std::invalid_argument("crop_frac must lie in [0, 1)");
  if (resample_frac < 0.0 || resample_frac > 1.0)
    throw std::invalid_argument("resample_frac must lie in [0, 1]");
  if (std::abs(affine.determinant()) < 1e-12)
    throw std::invalid_argument("affine matrix must be invertible");
  if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  if (shift_frac < 0.0 || shift_frac >= 1.0)
    throw std::invalid_argument("shift_frac must lie in [0, 1)");
}

namespace {

const std::pair<ModKind, const char*> kModNames[] = {
    {ModKind::Rotation, "rotation"},
    {ModKind::Awgn, "awgn"},
    {ModKind::MotionBlur, "motion-blur"},
    {ModKind::Contrast, "contrast"},
    {ModKind::LetterBox, "letter-box"},
    {ModKind::CaptionInsert, "caption-insert"},
    {ModKind::LogoInsert, "logo-insert"},
    {ModKind::PictureInPicture, "picture-in-picture"},
    {ModKind::Crop, "crop"},
    {ModKind::Flip, "flip"},
    {ModKind::FrameResample, "frame-resample"},
    {ModKind::Affine, "affine"},
    {ModKind::Combo1, "combo1"},
    {ModKind::Combo2, "combo2"},
    {ModKind::Combo3, "combo3"},
    {ModKind::Combo4, "combo4"},
};

}  // namespace

std::string modKindName(ModKind kind) {
  for (const auto& [k, name] : kModNames)
    if (k == kind) return name;
  throw std::invalid_argument("unknown modification kind");
}

ModKind modKindFromName(const std::string& name) {
  for (const auto& [k, n] : kModNames)
    if (name == n) return k;
  throw std::invalid_argument("unknown modification name '" + name + "'");
}

std::vector<ModKind> singleModifications() {
  std::vector<ModKind> out;
  for (const auto& [k, name] : kModNames)
    if (!isCombo(k)) out.push_back(k);
  return out;
}

bool isCombo(ModKind kind) {
  return kind == ModKind::Combo1 || kind == ModKind::Combo2 || kind == ModKind::Combo3 ||
         kind == ModKind::Combo4;
}

void CorpusSpec::validate() const {
  if (n_videos < 2) throw std::invalid_argument("corpus needs at least 2 videos");
  if (frames_per_video < 2) throw std::invalid_argument("videos need at least 2 frames");
  if (width < 32 || height < 32) throw std::invalid_argument("frames must be at least 32x32");
  if (min_objects < 0 || max_objects < min_objects)
    throw std::invalid_argument("bad object count range");
  if (max_speed <= 0.0) throw std::invalid_argument("max_speed must be positive");
}

namespace {

// Small high-contrast glyph whose shape parameters give the video a
// distinctive set of interest-point neighborhoods. All shapes are
// mirror-symmetric about the frame axes.
struct Marker {
  enum class Shape { Ellipse, Ring, Bar, Cross, TwoTone };
  Shape shape = Shape::Ellipse;
  double ox = 0.0, oy = 0.0;
  double radius = 6.0;
  bool upright = true;       // axis orientation: true swaps u/v
  double inner = 0.5;        // ring hole / two-tone core, fraction of radius
  double aspect = 0.5;       // minor-axis or arm-width fraction
  std::uint8_t value = 255;
  std::uint8_t value2 = 0;   // two-tone core
  int period = 0;            // 0: always on, otherwise blinking
  int phase = 0;
};

void paintMarker(Frame& f, double cx, double cy, const Marker& m) {
  const double r = m.radius;
  const int reach = static_cast<int>(r) + 2;
  for (int y = std::max(0, int(cy) - reach); y <= std::min(f.height - 1, int(cy) + reach); ++y)
    for (int x = std::max(0, int(cx) - reach); x <= std::min(f.width - 1, int(cx) + reach); ++x) {
      double u = x - cx, v = y - cy;
      if (!m.upright) std::swap(u, v);
      const double rr = u * u + v * v;
      bool on = false;
      bool core = false;
      switch (m.shape) {
        case Marker::Shape::Ellipse: {
          const double b = std::max(2.0, r * m.aspect);
          on = (u * u) / (r * r) + (v * v) / (b * b) <= 1.0;
          break;
        }
        case Marker::Shape::Ring:
          on = rr <= r * r && rr >= (r * m.inner) * (r * m.inner);
          break;
        case Marker::Shape::Bar:
          on = std::abs(u) <= r && std::abs(v) <= std::max(1.5, r * m.aspect);
          break;
        case Marker::Shape::Cross: {
          const double arm = std::max(1.2, r * m.aspect);
          on = (std::abs(u) <= r && std::abs(v) <= arm) ||
               (std::abs(v) <= r && std::abs(u) <= arm);
          break;
        }
        case Marker::Shape::TwoTone:
          on = rr <= r * r;
          core = rr <= (r * m.inner) * (r * m.inner);
          break;
      }
      if (on) f(x, y) = core ? m.value2 : m.value;
    }
}

// Alternating hard-extreme polarities keep every glyph high-contrast on any
// background and pin the intensity range of every video, so a percentile
// contrast stretch is close to the identity. The continuous shape
// parameters keep the glyph library large.
Marker randomLandmark(Rng& rng, bool bright) {
  Marker m;
  m.shape = static_cast<Marker::Shape>(rng.uniformInt(0, 4));
  m.radius = rng.uniform(5.5, 8.5);
  m.upright = rng.uniformInt(0, 1) == 1;
  m.inner = rng.uniform(0.35, 0.75);
  m.aspect = rng.uniform(0.22, 0.6);
  m.value = bright ? static_cast<std::uint8_t>(rng.uniformInt(243, 255))
                   : static_cast<std::uint8_t>(rng.uniformInt(0, 12));
  m.value2 = bright ? static_cast<std::uint8_t>(rng.uniformInt(0, 12))
                    : static_cast<std::uint8_t>(rng.uniformInt(243, 255));
  return m;
}

struct MovingObject {
  double x, y, vx, vy;
  int w, h;
  std::uint8_t value;
  bool disc;
};

Frame renderBackground(const CorpusSpec& spec, Rng& rng, double& phase_speed,
                       std::vector<double>& params) {
  // base, gx, gy, then two gentle low-frequency waves (amp, fx, fy, phase);
  // smooth concentrated backgrounds keep each video's histogram distinct
  params = {rng.uniform(40.0, 210.0),  rng.uniform(-0.5, 0.5),   rng.uniform(-0.5, 0.5),
            rng.uniform(8.0, 30.0),    rng.uniform(0.01, 0.08),  rng.uniform(0.01, 0.08),
            rng.uniform(0.0, 6.28318), rng.uniform(4.0, 18.0),   rng.uniform(0.01, 0.06),
            rng.uniform(0.01, 0.06),   rng.uniform(0.0, 6.28318)};
  phase_speed = rng.uniform(-0.15, 0.15);
  return Frame(spec.width, spec.height);
}

void paintBackground(Frame& f, const std::vector<double>& p, double phase_offset) {
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const double v = p[0] + p[1] * x + p[2] * y +
                       p[3] * std::sin(p[4] * x + p[5] * y + p[6] + phase_offset) +
                       p[7] * std::sin(p[8] * x - p[9] * y + p[10] + phase_offset);
      f(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
}

void paintObject(Frame& f, const MovingObject& o) {
  const int x0 = static_cast<int>(std::lround(o.x));
  const int y0 = static_cast<int>(std::lround(o.y));
  const double cx = x0 + o.w / 2.0;
  const double cy = y0 + o.h / 2.0;
  const double r = std::min(o.w, o.h) / 2.0;
  for (int y = std::max(0, y0); y < std::min(f.height, y0 + o.h); ++y) {
    for (int x = std::max(0, x0); x < std::min(f.width, x0 + o.w); ++x) {
      if (o.disc) {
        const double dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy > r * r) continue;
      }
      f(x, y) = o.value;
    }
  }
}

}  // namespace

namespace {

// Deterministic permutation of 0..n-1; assigning stratified slots through it
// guarantees pairwise-distinct palettes and blink periods across the corpus.
std::vector<int> corpusPermutation(int n, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(rng.uniformInt(0, i))]);
  return perm;
}

}  // namespace

std::vector<FrameSequence> synthCorpus(const CorpusSpec& spec) {
  spec.validate();
  const std::vector<int> base_slot = corpusPermutation(spec.n_videos, deriveSeed(spec.seed, 1u << 20));
  const std::vector<int> blink_slot = corpusPermutation(spec.n_videos, deriveSeed(spec.seed, 2u << 20));
  std::vector<FrameSequence> corpus;
  corpus.reserve(static_cast<std::size_t>(spec.n_videos));
  for (int v = 0; v < spec.n_videos; ++v) {
    Rng rng(deriveSeed(spec.seed, static_cast<std::uint64_t>(v)));
    std::vector<double> bg;
    double phase_speed = 0.0;
    Frame canvas = renderBackground(spec, rng, phase_speed, bg);
    bg[0] = 40.0 + 170.0 * (base_slot[static_cast<std::size_t>(v)] + rng.uniform(0.1, 0.9)) /
                       spec.n_videos;

    // objects roam a central stage, like framed subjects; border edits
    // (letter-box, captions, logos) then do not erase them
    const double x_lo = 0.06 * spec.width;
    const double x_hi = 0.94 * spec.width;
    const double y_lo = 0.13 * spec.height;
    const double y_hi = 0.87 * spec.height;
    // plain movers carry the temporal signal; their contrast stays mild so
    // their corners never outrank the landmark glyphs
    const int n_objects = rng.uniformInt(spec.min_objects, spec.max_objects);
    std::vector<MovingObject> objects;
    for (int o = 0; o < n_objects; ++o) {
      MovingObject obj;
      obj.w = rng.uniformInt(8, std::max(9, spec.width / 5));
      obj.h = rng.uniformInt(8, std::max(9, spec.height / 5));
      obj.x = rng.uniform(x_lo, std::max(x_lo + 1.0, x_hi - obj.w));
      obj.y = rng.uniform(y_lo, std::max(y_lo + 1.0, y_hi - obj.h));
      double speed = 0.0;
      do {
        obj.vx = rng.uniform(-spec.max_speed, spec.max_speed);
        obj.vy = rng.uniform(-spec.max_speed, spec.max_speed);
        speed = std::hypot(obj.vx, obj.vy);
      } while (speed < 0.5);
      const double delta = (rng.uniformInt(0, 1) ? 1.0 : -1.0) * rng.uniform(25.0, 60.0);
      obj.value = static_cast<std::uint8_t>(std::clamp(bg[0] + delta, 0.0, 255.0));
      obj.disc = rng.uniformInt(0, 1) == 1;
      objects.push_back(obj);
    }

    // fixed landmark glyphs with extreme contrast own the interest points;
    // they keep clear of each other so every glyph sits alone in its patch,
    // and the first two blink with distinct periods for temporal identity
    std::vector<Marker> landmarks;
    const int n_landmarks = rng.uniformInt(7, 9);
    int period1 = 0;
    for (int b = 0; b < n_landmarks; ++b) {
      Marker m = randomLandmark(rng, b % 2 == 0);
      for (int attempt = 0; attempt < 200; ++attempt) {
        m.ox = rng.uniform(x_lo + m.radius + 2.0, x_hi - m.radius - 2.0);
        m.oy = rng.uniform(y_lo + m.radius + 2.0, y_hi - m.radius - 2.0);
        bool clear = true;
        for (const Marker& other : landmarks)
          clear &= std::hypot(m.ox - other.ox, m.oy - other.oy) >= 24.0;
        if (clear) break;
      }
      if (b == 0) {
        // stratified over the corpus so every video blinks differently
        m.period =
            5 + (blink_slot[static_cast<std::size_t>(v)] * 22) / std::max(1, spec.n_videos - 1);
        m.phase = rng.uniformInt(0, m.period - 1);
        period1 = m.period;
      } else if (b == 1) {
        m.period = rng.uniformInt(6, 26);
        while (std::abs(m.period - period1) < 3) m.period = rng.uniformInt(6, 26);
        m.phase = rng.uniformInt(0, m.period - 1);
      }
      landmarks.push_back(m);
    }

    FrameSequence seq;
    seq.width = spec.width;
    seq.height = spec.height;
    for (int fidx = 0; fidx < spec.frames_per_video; ++fidx) {
      paintBackground(canvas, bg, phase_speed * fidx);
      for (const Marker& m : landmarks) {
        if (m.period > 0 && ((fidx + m.phase) % m.period) * 2 >= m.period) continue;
        paintMarker(canvas, m.ox, m.oy, m);
      }
      for (MovingObject& obj : objects) paintObject(canvas, obj);
      seq.frames.push_back(canvas);
      for (MovingObject& obj : objects) {
        obj.x += obj.vx;
        obj.y += obj.vy;
        if (obj.x < x_lo || obj.x + obj.w > x_hi) {
          obj.vx = -obj.vx;
          obj.x = std::clamp(obj.x, x_lo, std::max(x_lo, x_hi - obj.w));
        }
        if (obj.y < y_lo || obj.y + obj.h > y_hi) {
          obj.vy = -obj.vy;
          obj.y = std::clamp(obj.y, y_lo, std::max(y_lo, y_hi - obj.h));
        }
      }
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

namespace {

std::uint8_t toByte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double bilinearBlackFill(const Frame& f, double fx, double fy) {
  if (fx < 0.0 || fy < 0.0 || fx > f.width - 1.0 || fy > f.height - 1.0) return 0.0;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, f.width - 1);
  const int y1 = std::min(y0 + 1, f.height - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  return (1 - ax) * (1 - ay) * f(x0, y0) + ax * (1 - ay) * f(x1, y0) +
         (1 - ax) * ay * f(x0, y1) + ax * ay * f(x1, y1);
}

template <typename MapFn>
Frame warp(const Frame& src, MapFn&& map) {
  Frame out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const auto [fx, fy] = map(double(x), double(y));
      out(x, y) = toByte(bilinearBlackFill(src, fx, fy));
    }
  return out;
}

Frame rotateFrame(const Frame& f, double angle_deg) {
  if (angle_deg == 0.0) return f;
  const double theta = angle_deg * M_PI / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (f.width - 1) / 2.0, cy = (f.height - 1) / 2.0;
  return warp(f, [&](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair(cx + c * dx - s * dy, cy + s * dx + c * dy);
  });
}

Frame awgnFrame(const Frame& f, double sigma, Rng& rng) {
  if (sigma == 0.0) return f;
  Frame out = f;
  for (auto& p : out.pixels) p = toByte(double(p) + sigma * rng.normal());
  return out;
}

Frame blurFrame(const Frame& f, int length) {
  if (length <= 1) return f;
  Frame out(f.width, f.height);
  const int start = -(length / 2);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      double sum = 0.0;
      for (int k = 0; k < length; ++k) sum += f.clamped(x + start + k, y);
      out(x, y) = toByte(sum / length);
    }
  return out;
}

Frame contrastFrame(const Frame& f, double frac) {
  long hist[256] = {0};
  for (const auto p : f.pixels) ++hist[p];
  const double target = frac * double(f.pixels.size());
  long cum = 0;
  int lo = 0;
  for (int p = 0; p < 256; ++p) {
    cum += hist[p];
    if (cum > target) {
      lo = p;
      break;
    }
  }
  cum = 0;
  int hi = 255;
  for (int p = 255; p >= 0; --p) {
    cum += hist[p];
    if (cum > target) {
      hi = p;
      break;
    }
  }
  if (lo >= hi) return f;
  Frame out = f;
  for (auto& p : out.pixels) p = toByte((double(p) - lo) * 255.0 / (hi - lo));
  return out;
}

Frame letterBoxFrame(const Frame& f, double frac) {
  Frame out = f;
  const int band = static_cast<int>(frac * f.height);
  for (int y = 0; y < band; ++y)
    for (int x = 0; x < f.width; ++x) {
      out(x, y) = 0;
      out(x, f.height - 1 - y) = 0;
    }
  return out;
}

Frame captionFrame(const Frame& f) {
  // a line of fine block "text" overlaid near the bottom: white 1px strokes
  // keyed by a fixed bit pattern, over two thirds of the width
  Frame out = f;
  const int text_h = std::max(4, f.height / 20);
  const int y0 = f.height - 2 * text_h;
  const int x1 = 2 + (f.width - 4) * 2 / 3;
  for (int y = y0; y < y0 + text_h; ++y)
    for (int x = 2; x < x1; ++x) {
      const bool on = ((0x6DB5A973u >> (x % 29)) & 1u) != 0 && (y - y0) != text_h / 2;
      if (on) out(x, y) = 255;
    }
  return out;
}

Frame logoFrame(const Frame& f) {
  Frame out = f;
  const int s = std::max(8, std::min(f.width, f.height) / 8);
  for (int y = 2; y < 2 + s && y < f.height; ++y)
    for (int x = f.width - s - 2; x < f.width - 2 && x >= 0; ++x) out(x, y) = 255;
  return out;
}

Frame pictureInPictureFrame(const Frame& f, int size) {
  // a smooth two-tone inset, visually distinct without being a field of
  // artificial corners
  Frame out = f;
  const int s = std::min(size, f.width / 3);
  const int x0 = 4;
  const int y0 = std::max(0, f.height - s - 4);
  for (int v = 0; v < s && y0 + v < f.height; ++v)
    for (int u = 0; u < s && x0 + u < f.width; ++u) {
      const double g = 40.0 + 170.0 * (u + v) / (2.0 * s) +
                       35.0 * std::sin(0.35 * u) * std::sin(0.35 * v);
      out(x0 + u, y0 + v) = toByte(g);
    }
  return out;
}

Frame cropFrame(const Frame& f, double crop_frac) {
  if (crop_frac == 0.0) return f;
  const double keep = std::sqrt(1.0 - crop_frac);
  const double cw = keep * f.width;
  const double ch = keep * f.height;
  const double x0 = (f.width - cw) / 2.0;
  const double y0 = (f.height - ch) / 2.0;
  return warp(f, [&](double x, double y) {
    return std::pair(x0 + x * (cw - 1.0) / (f.width - 1.0),
                     y0 + y * (ch - 1.0) / (f.height - 1.0));
  });
}

Frame flipFrame(const Frame& f) {
  Frame out(f.width, f.height);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) out(x, y) = f(f.width - 1 - x, y);
  return out;
}

Frame affineFrame(const Frame& f, const Eigen::Matrix3d& m) {
  // applied about the frame center so the transformed content stays in view
  const Eigen::Matrix3d inv = m.inverse();
  const double cx = (f.width - 1) / 2.0, cy = (f.height - 1) / 2.0;
  return warp(f, [&](double x, double y) {
    const Eigen::Vector3d src = inv * Eigen::Vector3d(x - cx, y - cy, 1.0);
    return std::pair(src[0] / src[2] + cx, src[1] / src[2] + cy);
  });
}

Frame gammaFrame(const Frame& f, double gamma) {
  Frame out = f;
  for (auto& p : out.pixels) p = toByte(255.0 * std::pow(double(p) / 255.0, gamma));
  return out;
}

Frame shiftFrame(const Frame& f, double frac) {
  const int s = static_cast<int>(std::lround(frac * f.width));
  if (s == 0) return f;
  Frame out(f.width, f.height);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) out(x, y) = x - s >= 0 ? f(x - s, y) : 0;
  return out;
}

FrameSequence mapFrames(const FrameSequence& seq, const std::function<Frame(const Frame&)>& fn) {
  FrameSequence out;
  out.width = seq.width;
  out.height = seq.height;
  out.frames.reserve(seq.frames.size());
  for (const Frame& f : seq.frames) out.frames.push_back(fn(f));
  return out;
}

FrameSequence resampleFramesRandomly(const FrameSequence& seq, double frac, Rng& rng) {
  const auto n = seq.frames.size();
  const auto count = static_cast<std::size_t>(std::lround(frac * double(n)));
  FrameSequence out = seq;
  if (count == 0 || n < 2) return out;
  std::vector<std::size_t> indices(n - 1);
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i + 1;
  for (std::size_t i = indices.size(); i > 1; --i)
    std::swap(indices[i - 1], indices[static_cast<std::size_t>(rng.uniformInt(0, int(i) - 1))]);
  indices.resize(std::min(count, indices.size()));
  std::sort(indices.begin(), indices.end());
  for (const std::size_t i : indices) out.frames[i] = out.frames[i - 1];
  return out;
}

}  // namespace

FrameSequence applyModification(const FrameSequence& seq, const Modification& m,
                                std::uint64_t seed) {
  m.validate(seq.width, seq.height);
  switch (m.kind) {
    case ModKind::Rotation:
      return mapFrames(seq, [&](const Frame& f) { return rotateFrame(f, m.angle_deg); });
    case ModKind::Awgn: {
      Rng rng(deriveSeed(seed, 0));
      return mapFrames(seq, [&](const Frame& f) { return awgnFrame(f, m.noise_sigma, rng); });
    }
    case ModKind::MotionBlur:
      return mapFrames(seq, [&](const Frame& f) { return blurFrame(f, m.blur_length); });
    case ModKind::Contrast:
      return mapFrames(seq, [&](const Frame& f) { return contrastFrame(f, m.saturate_frac); });
    case ModKind::LetterBox:
      return mapFrames(seq, [&](const Frame& f) { return letterBoxFrame(f, m.box_frac); });
    case ModKind::CaptionInsert:
      return mapFrames(seq, [](const Frame& f) { return captionFrame(f); });
    case ModKind::LogoInsert:
      return mapFrames(seq, [](const Frame& f) { return logoFrame(f); });
    case ModKind::PictureInPicture:
      return mapFrames(seq,
                       [&](const Frame& f) { return pictureInPictureFrame(f, m.insert_size); });
    case ModKind::Crop:
      return mapFrames(seq, [&](const Frame& f) { return cropFrame(f, m.crop_frac); });
    case ModKind::Flip:
      return mapFrames(seq, [](const Frame& f) { return flipFrame(f); });
    case ModKind::FrameResample: {
      Rng rng(deriveSeed(seed, 1));
      return resampleFramesRandomly(seq, m.resample_frac, rng);
    }
    case ModKind::Affine:
      return mapFrames(seq, [&](const Frame& f) { return affineFrame(f, m.affine); });
    case ModKind::Combo1:
    case ModKind::Combo2:
    case ModKind::Combo3:
    case ModKind::Combo4:
      break;
  }

  // combined modifications apply their members in order
  FrameSequence out = seq;
  std::uint64_t step_index = 100;
  const auto apply_single = [&](ModKind kind) {
    Modification member = m;
    member.kind = kind;
    out = applyModification(out, member, deriveSeed(seed, step_index++));
  };
  const auto apply_gamma = [&] {
    out = mapFrames(out, [&](const Frame& f) { return gammaFrame(f, m.gamma); });
  };
  const auto apply_shift = [&] {
    out = mapFrames(out, [&](const Frame& f) { return shiftFrame(f, m.shift_frac); });
  };
  switch (m.kind) {
    case ModKind::Combo1:
      apply_single(ModKind::Contrast);
      apply_gamma();
      apply_single(ModKind::Awgn);
      break;
    case ModKind::Combo2:
      apply_single(ModKind::Contrast);
      apply_gamma();
      apply_single(ModKind::Awgn);
      apply_single(ModKind::MotionBlur);
      apply_single(ModKind::FrameResample);
      break;
    case ModKind::Combo3:
      apply_single(ModKind::Crop);
      apply_single(ModKind::Flip);
      apply_single(ModKind::CaptionInsert);
      break;
    case ModKind::Combo4:
      apply_single(ModKind::Crop);
      apply_single(ModKind::Flip);
      apply_single(ModKind::CaptionInsert);
      apply_single(ModKind::PictureInPicture);
      apply_shift();
      break;
    default:
      throw std::logic_error("unreachable modification kind");
  }
  return out;
}

double fScore(double precision, double recall, double beta) {
  if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0)
    throw std::invalid_argument("fScore: rates must lie in [0,1]");
  if (beta <= 0.0) throw std::invalid_argument("fScore: beta must be positive");
  if (recall == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

std::vector<RocPoint> rocCurve(const std::vector<std::pair<double, bool>>& pair_distances) {
  long positives = 0, negatives = 0;
  for (const auto& [d, is_copy] : pair_distances) (is_copy ? positives : negatives)++;
  if (positives == 0 || negatives == 0)
    throw std::invalid_argument("rocCurve: both classes must be present");

  std::vector<double> thresholds;
  thresholds.reserve(pair_distances.size());
  for (const auto& [d, is_copy] : pair_distances) thresholds.push_back(d);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<RocPoint> curve;
  curve.reserve(thresholds.size());
  for (const double tau : thresholds) {
    long fn = 0, fp = 0;
    for (const auto& [d, is_copy] : pair_distances) {
      if (is_copy && d > tau) ++fn;
      if (!is_copy && d <= tau) ++fp;
    }
    curve.push_back({tau, double(fp) / double(negatives), double(fn) / double(positives)});
  }
  return curve;
}

double rocArea(const std::vector<RocPoint>& curve) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(curve.size() + 2);
  pts.emplace_back(0.0, 1.0);
  for (const RocPoint& p : curve) pts.emplace_back(p.false_alarm, p.miss);
  pts.emplace_back(1.0, 0.0);
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) {
              return a.first != b.first ? a.first < b.first : a.second > b.second;
            });
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  return area;
}

Eigen::VectorXd concatenatedBaselineFingerprint(const FrameSequence& seq,
                                                const PipelineConfig& config) {
  const PipelineConfig c = config.resolved();
  const Tensor3d t = buildVideoTensor(seq, c);
  const Eigen::Index length = t.dim(1);
  const Eigen::Index cols = t.dim(2);
  const Eigen::Index frames = t.dim(3);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * length);
  for (Eigen::Index f = 0; f < frames; ++f)
    for (Eigen::Index i = 0; i < length; ++i) {
      out[i] += t(i, 0, f);
      out[length + i] += t(i, 1, f);
      for (Eigen::Index j = 2; j < cols; ++j) out[2 * length + i] += t(i, j, f);
    }
  out.segment(0, length) /= double(frames);
  out.segment(length, length) /= double(frames);
  if (cols > 2) out.segment(2 * length, length) /= double(frames * (cols - 2));
  return out;
}

void parallelFor(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

EvalReport runEvaluation(const std::vector<FrameSequence>& corpus,
                         const std::vector<Modification>& modifications, EvalSystem system,
                         const EvalOptions& options) {
  if (corpus.size() < 2) throw std::invalid_argument("runEvaluation: corpus needs >= 2 videos");
  if (modifications.empty())
    throw std::invalid_argument("runEvaluation: no modifications given");
  const PipelineConfig config = options.pipeline.resolved();
  const auto start = std::chrono::steady_clock::now();
  const int n = static_cast<int>(corpus.size());

  const auto fingerprintOf = [&](const FrameSequence& seq) -> Eigen::VectorXd {
    if (system == EvalSystem::Comprehensive)
      return fingerprintVideo(seq, config).fingerprint.y;
    return concatenatedBaselineFingerprint(seq, config);
  };

  EvalReport report;
  report.system =
      system == EvalSystem::Comprehensive ? "comprehensive" : "concatenated-baseline";
  report.beta = options.beta;
  report.threshold_mode = options.threshold_mode;
  if (options.threshold_mode == ThresholdMode::Fixed && options.thresholds.empty())
    throw std::invalid_argument("runEvaluation: Fixed threshold mode needs thresholds");

  std::vector<Eigen::VectorXd> originals(corpus.size());
  if (system == EvalSystem::Comprehensive) {
    std::vector<TuckerModel<double>> models(corpus.size());
    parallelFor(n, options.threads, [&](int i) {
      FingerprintResult result = fingerprintVideo(corpus[size_t(i)], config);
      originals[size_t(i)] = std::move(result.fingerprint.y);
      models[size_t(i)] = std::move(result.model);
    });
    report.condition_numbers = conditionReport(models).values;
  } else {
    parallelFor(n, options.threads,
                [&](int i) { originals[size_t(i)] = fingerprintOf(corpus[size_t(i)]); });
  }

  struct ModDistances {
    std::vector<double> positives;
    std::vector<double> negatives;
  };
  std::vector<ModDistances> distances(modifications.size());

  for (std::size_t mi = 0; mi < modifications.size(); ++mi) {
    std::vector<Eigen::VectorXd> copies(corpus.size());
    parallelFor(n, options.threads, [&](int i) {
      const std::uint64_t seed =
          deriveSeed(options.seed, (static_cast<std::uint64_t>(mi) << 32) | std::uint64_t(i));
      copies[size_t(i)] = fingerprintOf(applyModification(corpus[size_t(i)], modifications[mi], seed));
    });
    ModDistances& d = distances[mi];
    for (int i = 0; i < n; ++i) {
      d.positives.push_back((originals[size_t(i)] - copies[size_t(i)]).norm());
      for (int j = 0; j < n; ++j)
        if (j != i) d.negatives.push_back((originals[size_t(i)] - copies[size_t(j)]).norm());
    }
  }

  {
    // the pooled fit is reported whenever the pooled samples admit one
    std::vector<double> v, w;
    for (const ModDistances& d : distances) {
      v.insert(v.end(), d.positives.begin(), d.positives.end());
      w.insert(w.end(), d.negatives.begin(), d.negatives.end());
    }
    try {
      report.pooled_model = fitThreshold(v, w);
      report.pooled_tau = report.pooled_model.tau;
      report.pooled_fit_ok = true;
    } catch (const std::invalid_argument&) {
      report.pooled_fit_ok = false;
    }
  }
  if (options.threshold_mode == ThresholdMode::FitPooled && !report.pooled_fit_ok)
    throw std::invalid_argument("runEvaluation: pooled threshold fit failed");

  for (std::size_t mi = 0; mi < modifications.size(); ++mi) {
    const ModDistances& d = distances[mi];
    ModificationReport mod_report;
    mod_report.modification = modKindName(modifications[mi].kind);
    const auto positives = static_cast<long>(d.positives.size());
    const auto negatives = static_cast<long>(d.negatives.size());

    std::vector<double> taus;
    switch (options.threshold_mode) {
      case ThresholdMode::Fixed:
        taus = options.thresholds;
        break;
      case ThresholdMode::FitPooled:
        taus.push_back(report.pooled_tau);
        break;
      case ThresholdMode::FitPerModification:
        try {
          mod_report.fitted_tau = fitThreshold(d.positives, d.negatives).tau;
          mod_report.fit_ok = true;
        } catch (const std::invalid_argument&) {
          // copies indistinguishable from non-copies; score at the pooled
          // tau (or the median negative) so the row still exists
          if (report.pooled_fit_ok) {
            mod_report.fitted_tau = report.pooled_tau;
          } else {
            std::vector<double> sorted = d.negatives;
            std::sort(sorted.begin(), sorted.end());
            mod_report.fitted_tau = sorted[sorted.size() / 2];
          }
          mod_report.fit_ok = false;
        }
        taus.push_back(mod_report.fitted_tau);
        break;
    }

    for (const double tau : taus) {
      EvalThresholdRow row;
      row.threshold = tau;
      for (const double dist : d.positives) (dist <= tau ? row.tp : row.fn)++;
      for (const double dist : d.negatives) (dist <= tau ? row.fp : row.tn)++;
      row.precision = row.tp + row.fp == 0 ? 0.0 : double(row.tp) / double(row.tp + row.fp);
      row.recall = double(row.tp) / double(positives);
      row.f_beta = fScore(row.precision, row.recall, options.beta);
      row.miss = double(row.fn) / double(positives);
      row.false_alarm = double(row.fp) / double(negatives);
      mod_report.rows.push_back(row);
    }
    std::vector<std::pair<double, bool>> labeled;
    labeled.reserve(d.positives.size() + d.negatives.size());
    for (const double dist : d.positives) labeled.emplace_back(dist, true);
    for (const double dist : d.negatives) labeled.emplace_back(dist, false);
    mod_report.roc = rocCurve(labeled);
    report.per_modification.push_back(std::move(mod_report));
  }

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void writeEvalCsv(const fs::path& path, const std::vector<EvalReport>& reports,
                  const std::string& config_header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# config: " << config_header << "\n";
  for (const EvalReport& report : reports) {
    out << "# thresholds " << report.system << ": "
        << (report.threshold_mode == ThresholdMode::Fixed
                ? "fixed"
                : (report.threshold_mode == ThresholdMode::FitPooled ? "fitted-pooled"
                                                                     : "fitted-per-modification"));
    if (report.pooled_fit_ok) out << ", pooled_tau=" << g17(report.pooled_tau);
    out << "\n";
  }
  out << "modification,system,threshold,precision,recall,f_beta,miss,false_alarm,tp,fp,tn,fn\n";
  for (const EvalReport& report : reports)
    for (const ModificationReport& mod : report.per_modification)
      for (const EvalThresholdRow& row : mod.rows)
        out << mod.modification << ',' << report.system << ',' << g17(row.threshold) << ','
            << g17(row.precision) << ',' << g17(row.recall) << ',' << g17(row.f_beta) << ','
            << g17(row.miss) << ',' << g17(row.false_alarm) << ',' << row.tp << ',' << row.fp
            << ',' << row.tn << ',' << row.fn << "\n";
}

void writeRocCsv(const fs::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "modification,system,threshold,false_alarm,miss\n";
  for (const EvalReport& report : reports)
    for (const ModificationReport& mod : report.per_modification)
      for (const RocPoint& p : mod.roc)
        out << mod.modification << ',' << report.system << ',' << g17(p.threshold) << ','
            << g17(p.false_alarm) << ',' << g17(p.miss) << "\n";
}

void writeConditionCsv(const fs::path& path, const std::vector<double>& condition_numbers) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "video,condition\n";
  for (std::size_t i = 0; i < condition_numbers.size(); ++i)
    out << i << ',' << (std::isinf(condition_numbers[i]) ? "inf" : g17(condition_numbers[i]))
        << "\n";
}

}  // namespace vidfp
