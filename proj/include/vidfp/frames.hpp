#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vidfp {

/// 8-bit grayscale raster, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t operator()(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& operator()(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }

  /// Border-clamped access, usable with out-of-range coordinates.
  std::uint8_t clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= width ? width - 1 : x);
    y = y < 0 ? 0 : (y >= height ? height - 1 : y);
    return (*this)(x, y);
  }

  bool operator==(const Frame& other) const = default;
};

struct FrameSequence {
  int width = 0;
  int height = 0;
  std::vector<Frame> frames;

  std::size_t frameCount() const { return frames.size(); }
  bool operator==(const FrameSequence& other) const = default;
};

/// Builds a sequence from frames, validating shared dimensions and the
/// minimum length of 2.
FrameSequence makeSequence(std::vector<Frame> frames);

Frame readPgm(const std::filesystem::path& path);
void writePgm(const std::filesystem::path& path, const Frame& frame);

/// Loads a frame sequence from either a directory of binary PGM (P5) images
/// in lexicographic filename order, or a JSON sidecar header
/// {width, height, frame_count} whose sibling .raw file holds the planar
/// 8-bit data.
FrameSequence loadFrames(const std::filesystem::path& path);

/// Writes frames as zero-padded frame_%05d.pgm files.
void saveFramesPgm(const FrameSequence& seq, const std::filesystem::path& dir);

/// Writes the JSON header at `header_path` and the data next to it with a
/// .raw extension.
void saveFramesRaw(const FrameSequence& seq, const std::filesystem::path& header_path);

/// Uniform temporal resampling to exactly `target` frames: frame j of the
/// output is input frame round(j*(N-1)/(target-1)). Shorter inputs repeat
/// frames under the same formula.
FrameSequence sampleFrames(const FrameSequence& seq, int target);

}  // namespace vidfp
