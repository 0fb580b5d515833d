#include "vidfp/features.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "vidfp/frames.hpp"
#include "vidfp/rng.hpp"

using namespace vidfp;
namespace fs = std::filesystem;

namespace {

Frame constantFrame(int w, int h, std::uint8_t value) {
  Frame f(w, h);
  std::fill(f.pixels.begin(), f.pixels.end(), value);
  return f;
}

Frame randomFrame(Rng& rng, int w, int h) {
  Frame f(w, h);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng.uniformInt(0, 255));
  return f;
}

fs::path freshTempDir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("vidfp_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("a directory of identical PGM frames loads in order") {
  const fs::path dir = freshTempDir("pgmdir");
  const Frame f = constantFrame(32, 32, 77);
  for (int i = 0; i < 10; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "f_%03d.pgm", i);
    writePgm(dir / name, f);
  }
  const FrameSequence seq = loadFrames(dir);
  CHECK(seq.frameCount() == 10);
  CHECK(seq.width == 32);
  for (const Frame& frame : seq.frames) CHECK(frame == f);
  fs::remove_all(dir);
}

TEST_CASE("a single-frame directory is rejected") {
  const fs::path dir = freshTempDir("single");
  writePgm(dir / "only.pgm", constantFrame(16, 16, 0));
  CHECK_THROWS_AS(loadFrames(dir), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("frames with inconsistent dimensions are rejected") {
  const fs::path dir = freshTempDir("mixed");
  writePgm(dir / "a.pgm", constantFrame(16, 16, 0));
  writePgm(dir / "b.pgm", constantFrame(16, 18, 0));
  CHECK_THROWS_AS(loadFrames(dir), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("raw planar files round-trip through the writer") {
  Rng rng(101);
  std::vector<Frame> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(randomFrame(rng, 64, 48));
  const FrameSequence seq = makeSequence(std::move(frames));

  const fs::path dir = freshTempDir("raw");
  saveFramesRaw(seq, dir / "clip.json");
  const FrameSequence back = loadFrames(dir / "clip.json");
  CHECK(back == seq);
  CHECK(back.frameCount() == 20);
  CHECK(back.width == 64);
  CHECK(back.height == 48);
  fs::remove_all(dir);
}

TEST_CASE("pgm writer and reader round-trip exactly") {
  Rng rng(103);
  const Frame f = randomFrame(rng, 21, 17);
  const fs::path dir = freshTempDir("pgm1");
  writePgm(dir / "x.pgm", f);
  CHECK(readPgm(dir / "x.pgm") == f);
  fs::remove_all(dir);
}

TEST_CASE("sampling to the existing frame count is the identity") {
  Rng rng(3);
  std::vector<Frame> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(randomFrame(rng, 16, 16));
  const FrameSequence seq = makeSequence(std::move(frames));
  CHECK(sampleFrames(seq, 6) == seq);
}

TEST_CASE("sampling 10 frames down to 2 keeps the endpoints") {
  std::vector<Frame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(constantFrame(16, 16, std::uint8_t(i)));
  const FrameSequence seq = makeSequence(std::move(frames));
  const FrameSequence out = sampleFrames(seq, 2);
  CHECK(out.frames[0](0, 0) == 0);
  CHECK(out.frames[1](0, 0) == 9);
}

TEST_CASE("sampling 7 frames to 4 picks indices 0 2 4 6") {
  std::vector<Frame> frames;
  for (int i = 0; i < 7; ++i) frames.push_back(constantFrame(16, 16, std::uint8_t(i)));
  const FrameSequence out = sampleFrames(makeSequence(std::move(frames)), 4);
  REQUIRE(out.frameCount() == 4);
  for (int j = 0; j < 4; ++j) CHECK(out.frames[size_t(j)](0, 0) == 2 * j);
}

TEST_CASE("upsampling repeats frames by the same formula") {
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(constantFrame(16, 16, std::uint8_t(i)));
  const FrameSequence out = sampleFrames(makeSequence(std::move(frames)), 5);
  REQUIRE(out.frameCount() == 5);
  const int expected[5] = {0, 1, 1, 2, 2};  // round(j*2/4)
  for (int j = 0; j < 5; ++j) CHECK(out.frames[size_t(j)](0, 0) == expected[j]);
}

TEST_CASE("histogram of an all-black frame has all mass in the first bin") {
  const Eigen::VectorXd h = globalHistogram(constantFrame(32, 32, 0), 64);
  CHECK(h[0] == 1.0);
  CHECK(h.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.tail(63).isZero(0.0));
}

TEST_CASE("histogram of a half-black half-white frame splits across the end bins") {
  Frame f(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) f(x, y) = y < 16 ? 0 : 255;
  const Eigen::VectorXd h = globalHistogram(f, 64);
  CHECK(h[0] == doctest::Approx(0.5));
  CHECK(h[63] == doctest::Approx(0.5));
}

TEST_CASE("histogram matches a naive counting oracle exactly") {
  Rng rng(11);
  const Frame f = randomFrame(rng, 40, 30);
  const int bins = 64;
  const Eigen::VectorXd h = globalHistogram(f, bins);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(bins);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const int b = static_cast<int>(std::floor(double(f(x, y)) * bins / 256.0));
      expected[b] += 1.0;
    }
  expected /= double(f.width * f.height);
  CHECK(h == expected);
  CHECK(std::abs(h.sum() - 1.0) < 1e-12);
}

TEST_CASE("histogram is invariant under horizontal and vertical flips") {
  Rng rng(13);
  const Frame f = randomFrame(rng, 24, 18);
  Frame hflip = f, vflip = f;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      hflip(x, y) = f(f.width - 1 - x, y);
      vflip(x, y) = f(x, f.height - 1 - y);
    }
  CHECK(globalHistogram(f, 64) == globalHistogram(hflip, 64));
  CHECK(globalHistogram(f, 64) == globalHistogram(vflip, 64));
}

TEST_CASE("temporal difference of identical frames is the zero vector") {
  Rng rng(17);
  const Frame f = randomFrame(rng, 20, 20);
  CHECK(temporalDiff(f, f, 64).isZero(0.0));
}

TEST_CASE("black-to-white transition puts half the mass in each end bin") {
  const Eigen::VectorXd d =
      temporalDiff(constantFrame(16, 16, 0), constantFrame(16, 16, 255), 64);
  CHECK(d[0] == doctest::Approx(0.5));
  CHECK(d[63] == doctest::Approx(0.5));
  CHECK(d.sum() == doctest::Approx(1.0));
}

TEST_CASE("temporal difference is L1-normalized or identically zero") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const Frame a = randomFrame(rng, 18, 18);
    const Frame b = randomFrame(rng, 18, 18);
    const double mass = temporalDiff(a, b, 32).sum();
    CHECK((mass == 0.0 || std::abs(mass - 1.0) < 1e-12));
  }
  CHECK_THROWS_AS(temporalDiff(constantFrame(8, 8, 0), constantFrame(9, 8, 0), 32),
                  std::invalid_argument);
}

TEST_CASE("a constant frame has no interest points") {
  CHECK(detectInterestPoints(constantFrame(64, 64, 128), 4).empty());
  CHECK(detectInterestPoints(constantFrame(64, 64, 128), 0).empty());
}

TEST_CASE("a bright square on black is detected near its center") {
  Frame f(64, 64);
  for (int y = 28; y < 33; ++y)
    for (int x = 30; x < 35; ++x) f(x, y) = 255;
  const auto points = detectInterestPoints(f, 1);
  REQUIRE(points.size() == 1);
  CHECK(std::abs(points[0].x - 32) <= 3);
  CHECK(std::abs(points[0].y - 30) <= 3);
}

TEST_CASE("at most k points are returned and NMS keeps them 2 apart") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const Frame f = randomFrame(rng, 48, 48);
    const auto points = detectInterestPoints(f, 4);
    CHECK(points.size() <= 4);
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j) {
        const int cheb = std::max(std::abs(points[i].x - points[j].x),
                                  std::abs(points[i].y - points[j].y));
        CHECK(cheb >= 2);
      }
  }
}

TEST_CASE("interest point detection is deterministic") {
  Rng rng(29);
  const Frame f = randomFrame(rng, 40, 40);
  const auto a = detectInterestPoints(f, 4);
  const auto b = detectInterestPoints(f, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    CHECK(a[i].response == b[i].response);
  }
}

TEST_CASE("small frames are rejected when points are requested") {
  CHECK_THROWS_AS(detectInterestPoints(constantFrame(15, 20, 0), 1), std::invalid_argument);
}

TEST_CASE("descriptor of a constant patch is the zero vector") {
  const Eigen::VectorXd d = localDescriptor(constantFrame(32, 32, 99), 16, 16);
  CHECK(d.size() == 64);
  CHECK(d.isZero(0.0));
}

TEST_CASE("a step edge along x concentrates energy in the |dx| cells") {
  Frame f(40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) f(x, y) = x < 20 ? 30 : 220;
  const Eigen::VectorXd d = localDescriptor(f, 20, 20);
  double sum_abs_dx = 0.0, sum_abs_dy = 0.0;
  for (int cell = 0; cell < 16; ++cell) {
    sum_abs_dx += d[cell * 4 + 2];
    sum_abs_dy += d[cell * 4 + 3];
  }
  CHECK(sum_abs_dx > 10.0 * sum_abs_dy);
}

TEST_CASE("descriptors of non-constant patches have unit norm") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const Frame f = randomFrame(rng, 30, 30);
    const Eigen::VectorXd d = localDescriptor(f, rng.uniformInt(0, 29), rng.uniformInt(0, 29));
    CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(localDescriptor(constantFrame(30, 30, 0), 30, 2), std::invalid_argument);
}

TEST_CASE("standardize keeps vectors that already have the target length") {
  Rng rng(37);
  Eigen::VectorXd v(8);
  for (int i = 0; i < 8; ++i) v[i] = rng.normal();
  CHECK(standardizeColumn(v, 8) == v);
}

TEST_CASE("standardize interpolates linearly") {
  Eigen::VectorXd v(2);
  v << 0.0, 1.0;
  const Eigen::VectorXd out = standardizeColumn(v, 3);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == doctest::Approx(0.5));
  CHECK(out[2] == 1.0);
}

TEST_CASE("standardize preserves constant vectors") {
  for (int n : {3, 7, 129}) {
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 2.5);
    const Eigen::VectorXd out = standardizeColumn(v, 64);
    REQUIRE(out.size() == 64);
    for (int i = 0; i < 64; ++i) CHECK(out[i] == doctest::Approx(2.5).epsilon(1e-15));
  }
  CHECK_THROWS_AS(standardizeColumn(Eigen::VectorXd(), 4), std::invalid_argument);
}

TEST_CASE("a slice with no local points has exactly two columns") {
  Rng rng(41);
  FeatureConfig config;
  config.local_points = 0;
  const Frame f = randomFrame(rng, 32, 32);
  const Eigen::MatrixXd slice = buildSlice(nullptr, f, config);
  CHECK(slice.rows() == 64);
  CHECK(slice.cols() == 2);
}

TEST_CASE("the first frame of a sequence has a zero temporal column") {
  Rng rng(43);
  const Frame f = randomFrame(rng, 32, 32);
  const Eigen::MatrixXd slice = buildSlice(nullptr, f, FeatureConfig{});
  CHECK(slice.col(1).isZero(0.0));
  CHECK(sliceColumnKind(0) == FeatureKind::Global);
  CHECK(sliceColumnKind(1) == FeatureKind::Temporal);
  CHECK(sliceColumnKind(2) == FeatureKind::Local);
}

TEST_CASE("a constant video yields zero local columns and the plain histogram") {
  const Frame f = constantFrame(32, 32, 80);
  const FeatureConfig config;
  const Eigen::MatrixXd slice = buildSlice(&f, f, config);
  CHECK(slice.cols() == 6);
  CHECK(slice.col(0) == globalHistogram(f, 64));
  CHECK(slice.col(1).isZero(0.0));
  CHECK(slice.rightCols(4).isZero(0.0));
}

TEST_CASE("slice shape is identical for all frames under one config") {
  Rng rng(47);
  const FeatureConfig config;
  const Frame a = randomFrame(rng, 32, 32);
  const Frame b = randomFrame(rng, 48, 64);
  const Frame b_prev = randomFrame(rng, 48, 64);
  const Eigen::MatrixXd sa = buildSlice(nullptr, a, config);
  const Eigen::MatrixXd sb = buildSlice(&b_prev, b, config);
  CHECK(sa.rows() == sb.rows());
  CHECK(sa.cols() == sb.cols());
  CHECK(sa.allFinite());
  CHECK(sb.allFinite());
}
