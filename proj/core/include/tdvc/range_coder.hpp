#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace tdvc {

// Adaptive probability of a zero bit, 11-bit fixed point.
struct BitModel {
  static constexpr unsigned kBits = 11;
  static constexpr unsigned kAdaptShift = 5;
  std::uint16_t p = 1u << (kBits - 1);
};

// Binary range coder with carry propagation. Output is a big-endian byte
// stream; flush() must be called before taking the bytes.
class RangeEncoder {
 public:
  void encode(BitModel& model, unsigned bit);
  // Equiprobable bits, most significant first.
  void encode_direct(std::uint32_t value, unsigned count);
  void flush();

  const std::vector<std::uint8_t>& bytes() const noexcept { return out_; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

// Decoder over a bounded buffer. Reading past the end throws
// BitstreamError carrying `base_offset` plus the local position.
class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data, std::size_t base_offset = 0);

  unsigned decode(BitModel& model);
  std::uint32_t decode_direct(unsigned count);

  std::size_t consumed() const noexcept { return pos_; }
  std::size_t absolute_offset() const noexcept { return base_offset_ + pos_; }

 private:
  std::uint8_t next_byte();
  void normalize();

  std::span<const std::uint8_t> data_;
  std::size_t base_offset_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace tdvc
