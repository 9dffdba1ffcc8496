#include "tdvc/factor_codec.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <zlib.h>

#include "tdvc/error.hpp"
#include "tdvc/external_bridge.hpp"
#include "tdvc/range_coder.hpp"

namespace tdvc {
namespace {

constexpr double kPredictorSeed = 32768.0;
constexpr unsigned kPrefixContexts = 24;
constexpr unsigned kMaxExponent = 30;

// Context state shared by the residual encoder and decoder.
struct ResidualModels {
  std::array<BitModel, 2> zero;
  std::array<BitModel, 2> sign;
  std::array<BitModel, kPrefixContexts> prefix;
};

void encode_residual(RangeEncoder& enc, ResidualModels& m, std::int64_t q, unsigned ctx) {
  enc.encode(m.zero[ctx], q != 0 ? 1u : 0u);
  if (q == 0) return;
  enc.encode(m.sign[ctx], q < 0 ? 1u : 0u);
  // |q| >= 1 as floor(log2 |q|) in context-coded unary followed by the
  // remaining bits, equiprobable.
  const auto value = static_cast<std::uint64_t>(q < 0 ? -q : q);
  unsigned exponent = 0;
  while ((value >> (exponent + 1)) != 0) ++exponent;
  for (unsigned i = 0; i < exponent; ++i) enc.encode(m.prefix[std::min(i, kPrefixContexts - 1)], 1u);
  enc.encode(m.prefix[std::min(exponent, kPrefixContexts - 1)], 0u);
  if (exponent > 0) enc.encode_direct(static_cast<std::uint32_t>(value - (std::uint64_t{1} << exponent)), exponent);
}

std::int64_t decode_residual(RangeDecoder& dec, ResidualModels& m, unsigned ctx) {
  if (dec.decode(m.zero[ctx]) == 0) return 0;
  const bool negative = dec.decode(m.sign[ctx]) != 0;
  unsigned exponent = 0;
  while (dec.decode(m.prefix[std::min(exponent, kPrefixContexts - 1)]) != 0) {
    if (++exponent > kMaxExponent) throw BitstreamError("residual magnitude out of range", dec.absolute_offset());
  }
  std::uint64_t value = std::uint64_t{1} << exponent;
  if (exponent > 0) value += dec.decode_direct(exponent);
  const auto magnitude = static_cast<std::int64_t>(value);
  return negative ? -magnitude : magnitude;
}

double clamp_sample(double v) { return std::clamp(v, 0.0, kPlaneMaxSample); }

// Round to nearest with ties toward zero. Ties away from zero make the
// closed loop oscillate by one step around flat runs when the step is even.
std::int64_t quantize(double residual, double step) {
  const double level = std::ceil(std::abs(residual) / step - 0.5);
  return static_cast<std::int64_t>(residual < 0.0 ? -level : level);
}

void check_plane(const PackedPlane& plane) {
  if (plane.rows < 1 || plane.cols < 1) throw DomainError("plane dimensions must be positive");
  if (plane.samples.size() != plane.rows * plane.cols) throw DomainError("plane sample count mismatch");
  if (!(plane.scale > 0.0) || !std::isfinite(plane.scale) || !std::isfinite(plane.offset)) {
    throw DomainError("plane scale must be positive and offset finite");
  }
}

}  // namespace

const char* payload_kind_name(PayloadKind kind) {
  return kind == PayloadKind::kBridged ? "bridged" : "internal";
}

double qstep_for_qp(int qp) {
  if (qp < kMinQp || qp > kMaxQp) throw DomainError("QP " + std::to_string(qp) + " outside [0, 51]");
  return std::exp2((qp - 4) / 6.0);
}

double QuantizedPlane::qstep() const { return qstep_for_qp(qp); }

std::uint32_t payload_checksum(const std::vector<std::uint8_t>& payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t done = 0;
  while (done < payload.size()) {
    const std::size_t chunk = std::min<std::size_t>(payload.size() - done, 1u << 30);
    crc = crc32(crc, payload.data() + done, static_cast<uInt>(chunk));
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

PackedPlane pack_factor(const FactorMatrix& factor) {
  if (factor.rows() < 1 || factor.cols() < 1) throw DomainError("factor matrix is empty");
  if (!factor.allFinite()) throw DomainError("factor matrix contains non-finite values");
  PackedPlane plane;
  plane.rows = static_cast<std::size_t>(factor.rows());
  plane.cols = static_cast<std::size_t>(factor.cols());
  plane.samples.resize(plane.rows * plane.cols);
  const double lo = factor.minCoeff();
  const double hi = factor.maxCoeff();
  plane.offset = lo;
  if (!(hi > lo)) {
    plane.scale = 1.0;
    std::fill(plane.samples.begin(), plane.samples.end(), 0.0);
    return plane;
  }
  plane.scale = (hi - lo) / kPlaneMaxSample;
  const double gain = kPlaneMaxSample / (hi - lo);
  for (std::size_t i = 0; i < plane.samples.size(); ++i) {
    plane.samples[i] = clamp_sample(std::round((factor.data()[i] - lo) * gain));
  }
  return plane;
}

FactorMatrix unpack_factor(const PackedPlane& plane) {
  check_plane(plane);
  FactorMatrix f(static_cast<Eigen::Index>(plane.rows), static_cast<Eigen::Index>(plane.cols));
  for (std::size_t i = 0; i < plane.samples.size(); ++i) f.data()[i] = plane.offset + plane.scale * plane.samples[i];
  return f;
}

QuantizedPlane encode_plane(const PackedPlane& plane, int qp) {
  check_plane(plane);
  const double step = qstep_for_qp(qp);
  RangeEncoder enc;
  ResidualModels models;
  for (std::size_t c = 0; c < plane.cols; ++c) {
    double predictor = kPredictorSeed;
    unsigned ctx = 0;
    for (std::size_t r = 0; r < plane.rows; ++r) {
      const double residual = plane.sample(r, c) - predictor;
      const std::int64_t q = quantize(residual, step);
      encode_residual(enc, models, q, ctx);
      // Predict from the reconstruction the decoder will see.
      predictor = clamp_sample(predictor + static_cast<double>(q) * step);
      ctx = q != 0 ? 1u : 0u;
    }
  }
  enc.flush();

  QuantizedPlane out;
  out.rows = plane.rows;
  out.cols = plane.cols;
  out.scale = plane.scale;
  out.offset = plane.offset;
  out.qp = qp;
  out.kind = PayloadKind::kInternal;
  out.payload = enc.take();
  out.checksum = payload_checksum(out.payload);
  return out;
}

PackedPlane decode_plane(const QuantizedPlane& q, std::size_t base_offset) {
  if (q.kind != PayloadKind::kInternal) {
    throw ContractError("decode_plane handles internal payloads only; bridged planes need the external decoder");
  }
  if (q.rows < 1 || q.cols < 1) throw BitstreamError("plane dimensions must be positive", base_offset);
  if (payload_checksum(q.payload) != q.checksum) {
    throw BitstreamError("plane payload checksum mismatch", base_offset);
  }
  const double step = qstep_for_qp(q.qp);

  PackedPlane plane;
  plane.rows = q.rows;
  plane.cols = q.cols;
  plane.scale = q.scale;
  plane.offset = q.offset;
  plane.samples.resize(q.rows * q.cols);

  RangeDecoder dec(q.payload, base_offset);
  ResidualModels models;
  for (std::size_t c = 0; c < q.cols; ++c) {
    double predictor = kPredictorSeed;
    unsigned ctx = 0;
    for (std::size_t r = 0; r < q.rows; ++r) {
      const std::int64_t level = decode_residual(dec, models, ctx);
      predictor = clamp_sample(predictor + static_cast<double>(level) * step);
      plane.samples[r + q.rows * c] = predictor;
      ctx = level != 0 ? 1u : 0u;
    }
  }
  if (dec.consumed() != q.payload.size()) {
    throw BitstreamError("entropy payload has " + std::to_string(q.payload.size() - dec.consumed()) +
                             " unconsumed bytes",
                         base_offset + dec.consumed());
  }
  return plane;
}

KruskalModel fold_weights(const KruskalModel& model) {
  model.validate();
  KruskalModel folded = model;
  folded.factors.back() = model.factors.back() * model.weights.asDiagonal();
  folded.weights = Vector::Ones(model.weights.size());
  return folded;
}

std::vector<QuantizedPlane> encode_model(const KruskalModel& model, int qp, const ExternalEncoder* bridge) {
  qstep_for_qp(qp);
  const KruskalModel folded = fold_weights(model);
  std::vector<QuantizedPlane> planes;
  planes.reserve(folded.order());
  for (const auto& factor : folded.factors) {
    const PackedPlane packed = pack_factor(factor);
    if (bridge == nullptr) {
      planes.push_back(encode_plane(packed, qp));
      continue;
    }
    try {
      QuantizedPlane bridged;
      bridged.rows = packed.rows;
      bridged.cols = packed.cols;
      bridged.scale = packed.scale;
      bridged.offset = packed.offset;
      bridged.qp = qp;
      bridged.kind = PayloadKind::kBridged;
      bridged.payload = bridge->encode(packed, qp);
      bridged.checksum = payload_checksum(bridged.payload);
      planes.push_back(std::move(bridged));
    } catch (const ExternalToolError&) {
      if (!bridge->config().fallback_to_internal) throw;
      planes.push_back(encode_plane(packed, qp));
    }
  }
  return planes;
}

KruskalModel decode_model(const std::vector<QuantizedPlane>& planes, const ExternalEncoder* bridge) {
  if (planes.size() < 2) throw DomainError("a model needs at least two planes");
  KruskalModel model;
  for (const auto& q : planes) {
    if (q.kind == PayloadKind::kInternal) {
      model.factors.push_back(unpack_factor(decode_plane(q)));
      continue;
    }
    if (bridge == nullptr) throw ExternalToolError("bridged plane requires an external decoder", "");
    if (payload_checksum(q.payload) != q.checksum) throw BitstreamError("plane payload checksum mismatch", 0);
    PackedPlane plane;
    plane.rows = q.rows;
    plane.cols = q.cols;
    plane.scale = q.scale;
    plane.offset = q.offset;
    plane.samples = bridge->decode(q.payload, q.rows, q.cols);
    model.factors.push_back(unpack_factor(plane));
  }
  model.weights = Vector::Ones(model.factors.front().cols());
  model.validate();
  return model;
}

}  // namespace tdvc
