#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tdvc/tensor.hpp"

namespace tdvc {

class ExternalEncoder;

inline constexpr int kMinQp = 0;
inline constexpr int kMaxQp = 51;
inline constexpr double kPlaneMaxSample = 65535.0;

// 16-bit grayscale picture of one factor matrix. Samples are kept in the
// factor's column-major order; each factor column forms one picture row.
// pack_factor produces integral samples; decoded planes hold the
// quantizer's reconstruction levels, which need not be integral.
struct PackedPlane {
  static constexpr unsigned kBitDepth = 16;

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> samples;
  double scale = 1.0;
  double offset = 0.0;

  double sample(std::size_t row, std::size_t col) const { return samples[row + rows * col]; }

  friend bool operator==(const PackedPlane&, const PackedPlane&) = default;
};

enum class PayloadKind : std::uint32_t {
  kInternal = 0,
  kBridged = 1,
};

const char* payload_kind_name(PayloadKind kind);

struct QuantizedPlane {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double scale = 1.0;
  double offset = 0.0;
  int qp = 4;
  PayloadKind kind = PayloadKind::kInternal;
  std::vector<std::uint8_t> payload;
  // CRC-32 of `payload`.
  std::uint32_t checksum = 0;

  double qstep() const;

  friend bool operator==(const QuantizedPlane&, const QuantizedPlane&) = default;
};

// 2^((qp - 4) / 6); throws DomainError outside [0, 51].
double qstep_for_qp(int qp);

std::uint32_t payload_checksum(const std::vector<std::uint8_t>& payload);

// Affine map of [min, max] onto [0, 65535], rounding half away from zero.
// A constant matrix maps to all-zero samples with scale 1 and the constant
// as offset.
PackedPlane pack_factor(const FactorMatrix& factor);

FactorMatrix unpack_factor(const PackedPlane& plane);

// Left-neighbour DPCM along each picture row (first sample predicted from
// 2^15) with closed-loop uniform quantization (nearest level, ties toward
// zero) and adaptive binary range coding of the residual indices.
QuantizedPlane encode_plane(const PackedPlane& plane, int qp);

// Inverse of encode_plane for internal payloads. Throws BitstreamError with
// `base_offset` added to the reported position on corrupt or truncated data.
PackedPlane decode_plane(const QuantizedPlane& plane, std::size_t base_offset = 0);

// One plane per factor matrix with the weights folded into the last (temporal)
// mode. With a bridge, the planes go through the external encoder and its
// bitstreams are stored verbatim.
std::vector<QuantizedPlane> encode_model(const KruskalModel& model, int qp, const ExternalEncoder* bridge = nullptr);

// Rebuilds a model with unit weights. Bridged planes need a bridge with a
// decoder command.
KruskalModel decode_model(const std::vector<QuantizedPlane>& planes, const ExternalEncoder* bridge = nullptr);

// Folds the weights into the last factor and resets them to one.
KruskalModel fold_weights(const KruskalModel& model);

}  // namespace tdvc
