#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace tdvc {

// Single-channel image, row-major.
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> pixels;

  Frame() = default;
  Frame(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, 0) {}

  std::uint16_t at(std::size_t x, std::size_t y) const { return pixels[x + width * y]; }
  std::uint16_t& at(std::size_t x, std::size_t y) { return pixels[x + width * y]; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline double peak_for_bit_depth(unsigned bit_depth) { return bit_depth == 8 ? 255.0 : 65535.0; }

}  // namespace tdvc
