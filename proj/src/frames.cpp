#include "vidfp/frames.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;

namespace vidfp {

namespace {

int readPnmInt(std::istream& in, const fs::path& path) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) throw std::runtime_error("malformed PGM header: " + path.string());
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  // the terminating byte was the single whitespace after the token
  return value;
}

Frame framesValidated(Frame frame, const fs::path& path) {
  if (frame.width <= 0 || frame.height <= 0)
    throw std::runtime_error("PGM with non-positive dimensions: " + path.string());
  return frame;
}

}  // namespace

FrameSequence makeSequence(std::vector<Frame> frames) {
  if (frames.size() < 2) throw std::invalid_argument("a frame sequence needs at least 2 frames");
  FrameSequence seq;
  seq.width = frames.front().width;
  seq.height = frames.front().height;
  if (seq.width <= 0 || seq.height <= 0)
    throw std::invalid_argument("frames must have positive dimensions");
  for (const Frame& f : frames) {
    if (f.width != seq.width || f.height != seq.height)
      throw std::invalid_argument("all frames must share the same dimensions");
  }
  seq.frames = std::move(frames);
  return seq;
}

Frame readPgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5')
    throw std::runtime_error("not a binary PGM (P5) file: " + path.string());
  const int width = readPnmInt(in, path);
  const int height = readPnmInt(in, path);
  const int maxval = readPnmInt(in, path);
  if (maxval <= 0 || maxval > 255)
    throw std::runtime_error("only 8-bit PGM supported: " + path.string());
  Frame frame(width, height);
  in.read(reinterpret_cast<char*>(frame.pixels.data()),
          static_cast<std::streamsize>(frame.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(frame.pixels.size()))
    throw std::runtime_error("truncated PGM data: " + path.string());
  return framesValidated(std::move(frame), path);
}

void writePgm(const fs::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

FrameSequence loadPgmDirectory(const fs::path& dir) {
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  if (paths.size() < 2)
    throw std::runtime_error("need at least 2 .pgm frames in " + dir.string());
  std::vector<Frame> frames;
  frames.reserve(paths.size());
  for (const fs::path& p : paths) frames.push_back(readPgm(p));
  try {
    return makeSequence(std::move(frames));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string(e.what()) + " in " + dir.string());
  }
}

FrameSequence loadRawWithHeader(const fs::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw std::runtime_error("cannot open " + header_path.string());
  nlohmann::json header;
  try {
    in >> header;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad raw header " + header_path.string() + ": " + e.what());
  }
  const int width = header.at("width").get<int>();
  const int height = header.at("height").get<int>();
  const int count = header.at("frame_count").get<int>();
  if (width <= 0 || height <= 0 || count < 2)
    throw std::runtime_error("bad raw header values in " + header_path.string());

  fs::path raw_path = header_path;
  raw_path.replace_extension(".raw");
  std::ifstream raw(raw_path, std::ios::binary);
  if (!raw) throw std::runtime_error("cannot open " + raw_path.string());
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Frame f(width, height);
    raw.read(reinterpret_cast<char*>(f.pixels.data()),
             static_cast<std::streamsize>(f.pixels.size()));
    if (raw.gcount() != static_cast<std::streamsize>(f.pixels.size()))
      throw std::runtime_error("raw file shorter than header promises: " + raw_path.string());
    frames.push_back(std::move(f));
  }
  return makeSequence(std::move(frames));
}

}  // namespace

FrameSequence loadFrames(const fs::path& path) {
  if (fs::is_directory(path)) return loadPgmDirectory(path);
  if (path.extension() == ".json") return loadRawWithHeader(path);
  throw std::runtime_error("expected a directory of PGMs or a .json raw header: " +
                           path.string());
}

void saveFramesPgm(const FrameSequence& seq, const fs::path& dir) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%05zu.pgm", i);
    writePgm(dir / name, seq.frames[i]);
  }
}

void saveFramesRaw(const FrameSequence& seq, const fs::path& header_path) {
  nlohmann::json header{{"width", seq.width},
                        {"height", seq.height},
                        {"frame_count", seq.frames.size()}};
  std::ofstream out(header_path);
  if (!out) throw std::runtime_error("cannot write " + header_path.string());
  out << header.dump() << "\n";

  fs::path raw_path = header_path;
  raw_path.replace_extension(".raw");
  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) throw std::runtime_error("cannot write " + raw_path.string());
  for (const Frame& f : seq.frames)
    raw.write(reinterpret_cast<const char*>(f.pixels.data()),
              static_cast<std::streamsize>(f.pixels.size()));
}

FrameSequence sampleFrames(const FrameSequence& seq, int target) {
  if (target < 2) throw std::invalid_argument("sampleFrames: target must be >= 2");
  const auto n = static_cast<long>(seq.frames.size());
  FrameSequence out;
  out.width = seq.width;
  out.height = seq.height;
  out.frames.reserve(static_cast<std::size_t>(target));
  for (int j = 0; j < target; ++j) {
    const auto idx = std::lround(static_cast<double>(j) * (n - 1) / (target - 1));
    out.frames.push_back(seq.frames[static_cast<std::size_t>(idx)]);
  }
  return out;
}

}  // namespace vidfp
