#include "tdvc/depth_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "tdvc/error.hpp"

namespace tdvc {
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm header tokenizer that skips whitespace and '#' comments.
class HeaderCursor {
 public:
  HeaderCursor(const std::vector<std::uint8_t>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  unsigned long number() {
    skip_space();
    unsigned long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9) throw FormatError(path_.string() + ": header value too large");
    }
    if (digits == 0) throw FormatError(path_.string() + ": malformed PGM header");
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError(path_.string() + ": malformed PGM header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 2;
};

bool is_frame_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" || ext == ".pnm" || ext == ".ppm" || ext == ".raw";
}

}  // namespace

void DepthSequence::validate() const {
  if (frames.empty()) throw DomainError("depth sequence is empty");
  if (bit_depth != 8 && bit_depth != 16) throw DomainError("bit depth must be 8 or 16");
  if (!(fps > 0.0)) throw DomainError("fps must be positive");
  const double max_value = peak();
  for (const auto& f : frames) {
    if (f.width != width() || f.height != height()) throw DomainError("depth frames have mixed dimensions");
    if (f.width == 0 || f.height == 0 || f.pixels.size() != f.width * f.height) {
      throw DomainError("depth frame is malformed");
    }
    if (bit_depth == 8 && *std::max_element(f.pixels.begin(), f.pixels.end()) > max_value) {
      throw DomainError("8-bit sequence holds values above 255");
    }
  }
}

Frame read_pgm(const fs::path& path, unsigned& bit_depth) {
  const auto bytes = slurp(path);
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError(path.string() + ": not a netpbm file");
  if (bytes[1] != '5') {
    throw UnsupportedFormatError(path.string() + ": netpbm variant P" + std::string(1, static_cast<char>(bytes[1])) +
                                 " is not supported (binary grayscale P5 only)");
  }
  HeaderCursor cursor(bytes, path);
  const auto width = cursor.number();
  const auto height = cursor.number();
  const auto maxval = cursor.number();
  const std::size_t start = cursor.raster_start();
  if (width == 0 || height == 0) throw FormatError(path.string() + ": zero image dimension");
  if (maxval == 0 || maxval > 65535) throw FormatError(path.string() + ": invalid maxval");
  bit_depth = maxval > 255 ? 16 : 8;
  const std::size_t bytes_per = bit_depth == 16 ? 2 : 1;

  Frame frame(width, height);
  if (bytes.size() - start < frame.pixels.size() * bytes_per) throw FormatError(path.string() + ": raster truncated");
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    frame.pixels[i] = bytes_per == 2
                          ? static_cast<std::uint16_t>((bytes[start + 2 * i] << 8) | bytes[start + 2 * i + 1])
                          : bytes[start + i];
  }
  return frame;
}

void write_pgm(const fs::path& path, const Frame& frame, unsigned bit_depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path.string());
  out << "P5\n" << frame.width << ' ' << frame.height << '\n' << (bit_depth == 16 ? 65535 : 255) << '\n';
  std::vector<std::uint8_t> raster;
  raster.reserve(frame.pixels.size() * 2);
  for (std::uint16_t v : frame.pixels) {
    if (bit_depth == 16) {
      raster.push_back(static_cast<std::uint8_t>(v >> 8));
      raster.push_back(static_cast<std::uint8_t>(v & 0xFFu));
    } else {
      raster.push_back(static_cast<std::uint8_t>(std::min<std::uint16_t>(v, 255)));
    }
  }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Frame read_raw(const fs::path& path, unsigned& bit_depth) {
  fs::path dims = path;
  dims += ".dims";
  if (!fs::exists(dims)) dims = path.parent_path() / "raw.dims";
  std::ifstream desc(dims);
  std::size_t width = 0, height = 0;
  if (!desc || !(desc >> width >> height >> bit_depth)) {
    throw FormatError(path.string() + ": missing or malformed dimension sidecar");
  }
  if (width == 0 || height == 0 || (bit_depth != 8 && bit_depth != 16)) {
    throw FormatError(path.string() + ": invalid dimensions in sidecar");
  }
  const auto bytes = slurp(path);
  const std::size_t bytes_per = bit_depth == 16 ? 2 : 1;
  Frame frame(width, height);
  if (bytes.size() != frame.pixels.size() * bytes_per) {
    throw FormatError(path.string() + ": raw size does not match sidecar dimensions");
  }
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    frame.pixels[i] = bytes_per == 2 ? static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8)) : bytes[i];
  }
  return frame;
}

DepthSequence ingest(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& input : inputs) {
    if (fs::is_directory(input)) {
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
      }
    } else if (fs::exists(input)) {
      files.push_back(input);
    } else {
      throw IoError("no such file or directory: " + input.string());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) throw DomainError("no depth frames found");

  DepthSequence seq;
  bool first = true;
  for (const auto& file : files) {
    unsigned depth = 0;
    std::string ext = file.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    Frame frame = ext == ".raw" ? read_raw(file, depth) : read_pgm(file, depth);
    if (first) {
      seq.bit_depth = depth;
      first = false;
    } else if (depth != seq.bit_depth) {
      throw DomainError(file.string() + ": bit depth differs from the first frame");
    }
    if (!seq.frames.empty() && (frame.width != seq.width() || frame.height != seq.height())) {
      throw DomainError(file.string() + ": dimensions differ from the first frame");
    }
    seq.frames.push_back(std::move(frame));
  }
  seq.validate();
  return seq;
}

DepthSequence ingest(const fs::path& input) { return ingest(std::vector<fs::path>{input}); }

void write_sequence(const fs::path& dir, const DepthSequence& seq) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%05zu.pgm", i);
    write_pgm(dir / name, seq.frames[i], seq.bit_depth);
  }
}

}  // namespace tdvc
