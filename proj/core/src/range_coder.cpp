#include "tdvc/range_coder.hpp"

#include "tdvc/error.hpp"

namespace tdvc {
namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kProbOne = 1u << BitModel::kBits;

}  // namespace

void RangeEncoder::encode(BitModel& model, unsigned bit) {
  const std::uint32_t bound = (range_ >> BitModel::kBits) * model.p;
  if (bit == 0) {
    range_ = bound;
    model.p = static_cast<std::uint16_t>(model.p + ((kProbOne - model.p) >> BitModel::kAdaptShift));
  } else {
    low_ += bound;
    range_ -= bound;
    model.p = static_cast<std::uint16_t>(model.p - (model.p >> BitModel::kAdaptShift));
  }
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_direct(std::uint32_t value, unsigned count) {
  while (count-- > 0) {
    range_ >>= 1;
    if ((value >> count) & 1u) low_ += range_;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }
}

void RangeEncoder::flush() {
  for (int i = 0; i < 5; ++i) shift_low();
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> data, std::size_t base_offset)
    : data_(data), base_offset_(base_offset) {
  if (next_byte() != 0) throw BitstreamError("range coder stream must start with a zero byte", base_offset_);
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  if (code_ == 0xFFFFFFFFu) throw BitstreamError("invalid range coder state", absolute_offset());
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= data_.size()) throw BitstreamError("entropy payload truncated", absolute_offset());
  return data_[pos_++];
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
}

unsigned RangeDecoder::decode(BitModel& model) {
  const std::uint32_t bound = (range_ >> BitModel::kBits) * model.p;
  unsigned bit;
  if (code_ < bound) {
    range_ = bound;
    model.p = static_cast<std::uint16_t>(model.p + ((kProbOne - model.p) >> BitModel::kAdaptShift));
    bit = 0;
  } else {
    code_ -= bound;
    range_ -= bound;
    model.p = static_cast<std::uint16_t>(model.p - (model.p >> BitModel::kAdaptShift));
    bit = 1;
  }
  normalize();
  return bit;
}

std::uint32_t RangeDecoder::decode_direct(unsigned count) {
  std::uint32_t value = 0;
  while (count-- > 0) {
    range_ >>= 1;
    unsigned bit = 0;
    if (code_ >= range_) {
      code_ -= range_;
      bit = 1;
    }
    value = (value << 1) | bit;
    normalize();
  }
  return value;
}

}  // namespace tdvc
