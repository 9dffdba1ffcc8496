#pragma once

#include <cstddef>
#include <cstdint>

#include "tdvc/depth_io.hpp"

namespace tdvc {

struct SyntheticSpec {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t frames = 16;
  std::size_t objects = 4;
  unsigned bit_depth = 16;
  std::uint64_t seed = 0;
};

// Depth-map-like test sequence: a planar background with constant-depth
// rectangles and discs that move along straight lines, drawn far to near.
// Deterministic given the spec.
DepthSequence synthetic_depth_sequence(const SyntheticSpec& spec);

}  // namespace tdvc
