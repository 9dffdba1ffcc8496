#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdvc/frame.hpp"

namespace tdvc {

inline constexpr double kPsnrCap = 99.0;
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct FramePair {
  const Frame& reference;
  const Frame& test;
  double peak;  // 255 or 65535
};

// 10 log10(peak^2 / MSE), capped at 99 dB (identical frames hit the cap).
double psnr(const FramePair& pair);

// Mean SSIM over every 11x11 window lying fully inside the frame (Gaussian
// weights, sigma 1.5, C1 = (0.01 peak)^2, C2 = (0.03 peak)^2).
double ssim(const FramePair& pair);

double mean_squared_error(const Frame& a, const Frame& b);

struct RDPoint {
  double bitrate_kbps = 0.0;
  double psnr_db = 0.0;
};

class RDCurve {
 public:
  RDCurve() = default;
  // Sorts by bitrate. Throws DomainError with fewer than four points,
  // non-positive or duplicate bitrates, or non-finite values.
  explicit RDCurve(std::vector<RDPoint> points);

  const std::vector<RDPoint>& points() const noexcept { return points_; }
  double min_psnr() const;
  double max_psnr() const;

 private:
  std::vector<RDPoint> points_;
};

// Least-squares cubic fit of log10(rate) against PSNR. Coefficients are in
// the shifted variable (psnr - center), lowest order first.
struct LogRateFit {
  double center = 0.0;
  double coeffs[4] = {0.0, 0.0, 0.0, 0.0};

  double operator()(double psnr_db) const;
  // Integral of the fitted polynomial over [lo, hi].
  double integral(double lo, double hi) const;
};

LogRateFit fit_log_rate(const RDCurve& curve);

// Bjontegaard delta rate in percent; negative when `test` needs less rate
// for the same PSNR. Throws DomainError when the PSNR overlap is under 3 dB.
double bd_rate(const RDCurve& anchor, const RDCurve& test);

inline constexpr double kMinBdOverlapDb = 3.0;

// One row of the rate-distortion CSV:
// scene,camera,rank,qp,bytes,bitrate_kbps,psnr_db,ssim
struct RdRow {
  std::string scene;
  std::string camera;
  int rank = 0;
  int qp = 0;
  std::size_t bytes = 0;
  double bitrate_kbps = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  // Set for grid cells that failed; metrics are then written as "nan".
  std::string error;
};

inline constexpr const char* kRdCsvHeader = "scene,camera,rank,qp,bytes,bitrate_kbps,psnr_db,ssim";

void write_rd_csv(std::ostream& out, const std::vector<RdRow>& rows);
std::vector<RdRow> read_rd_csv(std::istream& in);

struct LabeledCurve {
  std::string scene;
  std::string camera;
  int rank = 0;
  RDCurve curve;
};

// Groups rows by (scene, camera, rank) in first-appearance order; rows with
// errors are skipped.
std::vector<LabeledCurve> curves_from_rows(const std::vector<RdRow>& rows);

}  // namespace tdvc
