#include "tdvc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tdvc/error.hpp"

namespace tdvc {
namespace {

struct Object {
  bool disc;
  double depth;
  double x, y;
  double vx, vy;
  double half_w, half_h;
};

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : rng_(seed) {}
  double operator()(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(rng_() >> 11) * 0x1.0p-53); }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

DepthSequence synthetic_depth_sequence(const SyntheticSpec& spec) {
  if (spec.width == 0 || spec.height == 0 || spec.frames == 0) throw DomainError("synthetic sequence needs positive dimensions");
  if (spec.bit_depth != 8 && spec.bit_depth != 16) throw DomainError("bit depth must be 8 or 16");

  Uniform u(spec.seed);
  const double w = static_cast<double>(spec.width);
  const double h = static_cast<double>(spec.height);
  const double background = u(0.1, 0.25);

  std::vector<Object> objects(spec.objects);
  for (auto& o : objects) {
    o.disc = u(0.0, 1.0) < 0.5;
    o.depth = u(0.3, 0.95);
    o.x = u(0.2 * w, 0.8 * w);
    o.y = u(0.2 * h, 0.8 * h);
    o.vx = u(-1.5, 1.5);
    o.vy = u(-1.0, 1.0);
    o.half_w = u(0.08 * w, 0.25 * w);
    o.half_h = u(0.08 * h, 0.25 * h);
  }
  std::sort(objects.begin(), objects.end(), [](const Object& a, const Object& b) { return a.depth < b.depth; });

  DepthSequence seq;
  seq.bit_depth = spec.bit_depth;
  const double peak = seq.peak();
  for (std::size_t f = 0; f < spec.frames; ++f) {
    Frame frame(spec.width, spec.height);
    const double t = static_cast<double>(f);
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x) {
        double depth = background;
        for (const auto& o : objects) {
          const double dx = (static_cast<double>(x) + 0.5 - (o.x + o.vx * t)) / o.half_w;
          const double dy = (static_cast<double>(y) + 0.5 - (o.y + o.vy * t)) / o.half_h;
          const bool inside = o.disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
          if (inside) depth = o.depth;
        }
        frame.at(x, y) = static_cast<std::uint16_t>(std::lround(depth * peak));
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace tdvc
