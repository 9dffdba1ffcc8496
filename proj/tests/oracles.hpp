#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tdvc/frame.hpp"
#include "tdvc/tensor.hpp"

namespace tdvc::test {

// Khatri-Rao product of every factor but `skip`, built entry by entry from
// K(row, r) = prod_m S^(m)(x_m, r) with the first remaining mode fastest.
inline Matrix materialized_kr(const std::vector<FactorMatrix>& f, std::size_t skip) {
  Shape shape;
  for (const auto& m : f) shape.push_back(static_cast<std::size_t>(m.rows()));
  const auto rank = f.front().cols();
  std::size_t rows = 1;
  for (std::size_t m = 0; m < f.size(); ++m) {
    if (m != skip) rows *= shape[m];
  }
  Matrix k(static_cast<Eigen::Index>(rows), rank);
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t rest = row;
    std::vector<std::size_t> idx(f.size(), 0);
    for (std::size_t m = 0; m < f.size(); ++m) {
      if (m == skip) continue;
      idx[m] = rest % shape[m];
      rest /= shape[m];
    }
    for (Eigen::Index r = 0; r < rank; ++r) {
      double v = 1.0;
      for (std::size_t m = 0; m < f.size(); ++m) {
        if (m != skip) v *= f[m](static_cast<Eigen::Index>(idx[m]), r);
      }
      k(static_cast<Eigen::Index>(row), r) = v;
    }
  }
  return k;
}

// Direct windowed statistics over every 11x11 window inside the frame, with
// an explicitly normalized 2-D Gaussian (sigma 1.5).
inline double ssim_oracle(const Frame& x, const Frame& y, double peak) {
  constexpr int kWin = 11;
  double g[kWin][kWin];
  double total = 0.0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      total += g[i][j];
    }
  const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t oy = 0; oy + kWin <= x.height; ++oy)
    for (std::size_t ox = 0; ox + kWin <= x.width; ++ox) {
      double mx = 0, my = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double w = g[i][j] / total;
          mx += w * x.at(ox + j, oy + i);
          my += w * y.at(ox + j, oy + i);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double w = g[i][j] / total;
          const double dx = x.at(ox + j, oy + i) - mx, dy = y.at(ox + j, oy + i) - my;
          vx += w * dx * dx;
          vy += w * dy * dy;
          cxy += w * dx * dy;
        }
      sum += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return sum / static_cast<double>(count);
}

}  // namespace tdvc::test
