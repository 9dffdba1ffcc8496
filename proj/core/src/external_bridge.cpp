#include "tdvc/external_bridge.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "tdvc/error.hpp"
#include "tdvc/factor_codec.hpp"

namespace tdvc {
namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

// Removes the scratch directory on scope exit.
class ScratchDir {
 public:
  explicit ScratchDir(fs::path path) : path_(std::move(path)) { fs::create_directories(path_); }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

}  // namespace

ProcessResult run_command(const std::string& command) {
  const std::string full = "{ " + command + "\n} 2>&1";
  FILE* pipe = ::popen(full.c_str(), "r");
  if (pipe == nullptr) throw ExternalToolError("cannot spawn: " + command, "");
  ProcessResult result;
  std::array<char, 4096> buffer{};
  std::size_t n;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0) result.output.append(buffer.data(), n);
  const int status = ::pclose(pipe);
  if (status == -1) {
    result.exit_code = -1;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  }
  return result;
}

std::string expand_template(const std::string& pattern, const std::map<std::string, std::string>& tokens) {
  std::string out;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const std::size_t open = pattern.find('{', pos);
    if (open == std::string::npos) break;
    const std::size_t close = pattern.find('}', open);
    if (close == std::string::npos) break;
    out.append(pattern, pos, open - pos);
    const auto it = tokens.find(pattern.substr(open + 1, close - open - 1));
    if (it != tokens.end()) {
      out += it->second;
    } else {
      out.append(pattern, open, close - open + 1);
    }
    pos = close + 1;
  }
  out.append(pattern, pos, std::string::npos);
  return out;
}

RawPicture plane_to_raw16(const PackedPlane& plane) {
  RawPicture pic;
  pic.width = plane.rows + (plane.rows & 1u);
  pic.height = plane.cols + (plane.cols & 1u);
  pic.bytes.resize(pic.width * pic.height * 2);
  for (std::size_t y = 0; y < pic.height; ++y) {
    const std::size_t col = std::min(y, plane.cols - 1);
    for (std::size_t x = 0; x < pic.width; ++x) {
      const std::size_t row = std::min(x, plane.rows - 1);
      const double v = std::clamp(std::round(plane.sample(row, col)), 0.0, kPlaneMaxSample);
      const auto s = static_cast<std::uint16_t>(v);
      const std::size_t at = 2 * (x + pic.width * y);
      pic.bytes[at] = static_cast<std::uint8_t>(s & 0xFFu);
      pic.bytes[at + 1] = static_cast<std::uint8_t>(s >> 8);
    }
  }
  return pic;
}

ExternalEncoder::ExternalEncoder(BridgeConfig config) : config_(std::move(config)) {
  if (config_.encoder_template.empty()) throw DomainError("external encoder template is empty");
}

std::optional<ExternalEncoder> ExternalEncoder::from_environment() {
  const char* enc = std::getenv(kEncoderTemplateEnv);
  if (enc == nullptr || *enc == '\0') return std::nullopt;
  BridgeConfig config;
  config.encoder_template = enc;
  if (const char* dec = std::getenv(kDecoderTemplateEnv); dec != nullptr) config.decoder_template = dec;
  return ExternalEncoder(std::move(config));
}

fs::path ExternalEncoder::scratch_dir() const {
  static std::atomic<unsigned> counter{0};
  const fs::path base = config_.work_dir.empty() ? fs::temp_directory_path() : config_.work_dir;
  return base / ("tdvc-bridge-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
}

std::vector<std::uint8_t> ExternalEncoder::encode(const PackedPlane& plane, int qp) const {
  ScratchDir scratch(scratch_dir());
  const RawPicture pic = plane_to_raw16(plane);
  const fs::path input = scratch.path() / "plane.raw";
  const fs::path output = scratch.path() / "plane.bin";
  write_file(input, pic.bytes);
  {
    std::ofstream desc(input.string() + ".desc");
    desc << "format=gray16le\nwidth=" << pic.width << "\nheight=" << pic.height << "\nframes=1\nbit_depth=16\n"
         << "source_rows=" << plane.rows << "\nsource_cols=" << plane.cols << "\nqp=" << qp << "\n";
  }

  const std::string command = expand_template(config_.encoder_template,
                                               {{"input", shell_quote(input.string())},
                                                {"output", shell_quote(output.string())},
                                                {"qp", std::to_string(qp)},
                                                {"width", std::to_string(pic.width)},
                                                {"height", std::to_string(pic.height)},
                                                {"frames", "1"}});
  const ProcessResult result = run_command(command);
  if (result.exit_code != 0) {
    throw ExternalToolError("external encoder exited with status " + std::to_string(result.exit_code), result.output);
  }
  if (!fs::exists(output)) throw ExternalToolError("external encoder produced no output file", result.output);
  return read_file(output);
}

std::vector<double> ExternalEncoder::decode(const std::vector<std::uint8_t>& bitstream, std::size_t rows,
                                            std::size_t cols) const {
  if (config_.decoder_template.empty()) {
    throw ExternalToolError("bridged plane requires an external decoder command", "");
  }
  ScratchDir scratch(scratch_dir());
  const fs::path input = scratch.path() / "plane.bin";
  const fs::path output = scratch.path() / "plane.raw";
  write_file(input, bitstream);
  const std::size_t width = rows + (rows & 1u);
  const std::size_t height = cols + (cols & 1u);
  const std::string command = expand_template(config_.decoder_template,
                                               {{"input", shell_quote(input.string())},
                                                {"output", shell_quote(output.string())},
                                                {"width", std::to_string(width)},
                                                {"height", std::to_string(height)},
                                                {"frames", "1"}});
  const ProcessResult result = run_command(command);
  if (result.exit_code != 0) {
    throw ExternalToolError("external decoder exited with status " + std::to_string(result.exit_code), result.output);
  }
  if (!fs::exists(output)) throw ExternalToolError("external decoder produced no output file", result.output);
  const auto raw = read_file(output);
  if (raw.size() < width * height * 2) {
    throw ExternalToolError("external decoder output is " + std::to_string(raw.size()) + " bytes, expected " +
                                std::to_string(width * height * 2),
                            result.output);
  }
  std::vector<double> samples(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t at = 2 * (r + width * c);
      samples[r + rows * c] = static_cast<double>(raw[at] | (raw[at + 1] << 8));
    }
  }
  return samples;
}

}  // namespace tdvc
