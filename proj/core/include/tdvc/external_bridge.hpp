#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tdvc {

struct PackedPlane;

inline constexpr const char* kEncoderTemplateEnv = "TDVC_EXTERNAL_ENCODER";
inline constexpr const char* kDecoderTemplateEnv = "TDVC_EXTERNAL_DECODER";

// Command templates accept the tokens {input} {output} {qp} {width} {height}
// {frames}. Pictures are exported as 16-bit little-endian raw frames padded
// to even dimensions, with a `<input>.desc` sidecar.
struct BridgeConfig {
  std::string encoder_template;
  // Optional; turns a bitstream ({input}) back into a raw picture ({output}).
  std::string decoder_template;
  // Scratch directory; the system temp directory when empty.
  std::filesystem::path work_dir;
  bool fallback_to_internal = false;
};

struct ProcessResult {
  int exit_code = 0;
  std::string output;
};

// Runs `command` through /bin/sh with stdout and stderr captured together.
ProcessResult run_command(const std::string& command);

// Replaces every {name} with its value; unknown tokens are left alone.
std::string expand_template(const std::string& pattern, const std::map<std::string, std::string>& tokens);

class ExternalEncoder {
 public:
  explicit ExternalEncoder(BridgeConfig config);

  // Bridge configured from TDVC_EXTERNAL_ENCODER / TDVC_EXTERNAL_DECODER, or
  // nullopt when the encoder variable is unset or empty.
  static std::optional<ExternalEncoder> from_environment();

  const BridgeConfig& config() const noexcept { return config_; }

  // Exports the plane as one picture, runs the encoder at `qp` and returns
  // the produced bitstream. Throws ExternalToolError on failure.
  std::vector<std::uint8_t> encode(const PackedPlane& plane, int qp) const;

  // Runs the decoder command and crops the returned picture to rows x cols
  // samples in plane order.
  std::vector<double> decode(const std::vector<std::uint8_t>& bitstream, std::size_t rows, std::size_t cols) const;

 private:
  std::filesystem::path scratch_dir() const;

  BridgeConfig config_;
};

struct RawPicture {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bytes;
};

// Picture layout shared with external tools: width = plane rows, height =
// plane cols, both rounded up to even by edge replication.
RawPicture plane_to_raw16(const PackedPlane& plane);

}  // namespace tdvc
