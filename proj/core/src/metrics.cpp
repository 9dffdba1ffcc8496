#include "tdvc/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "tdvc/error.hpp"

namespace tdvc {
namespace {

void check_pair(const FramePair& pair) {
  if (pair.reference.width != pair.test.width || pair.reference.height != pair.test.height) {
    throw DomainError("frame dimensions differ");
  }
  if (pair.reference.pixels.size() != pair.reference.width * pair.reference.height ||
      pair.test.pixels.size() != pair.test.width * pair.test.height) {
    throw DomainError("frame pixel count does not match dimensions");
  }
  if (!(pair.peak > 0.0)) throw DomainError("peak must be positive");
}

std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  const double half = (kSsimWindow - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - half;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" filtering of a row-major image.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t w, std::size_t h,
                                 const std::array<double, kSsimWindow>& k) {
  const std::size_t ow = w - kSsimWindow + 1;
  const std::size_t oh = h - kSsimWindow + 1;
  std::vector<double> horiz(ow * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < kSsimWindow; ++i) acc += k[i] * img[x + i + w * y];
      horiz[x + ow * y] = acc;
    }
  }
  std::vector<double> out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < kSsimWindow; ++i) acc += k[i] * horiz[x + ow * (y + i)];
      out[x + ow * y] = acc;
    }
  }
  return out;
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

double parse_double(const std::string& field) {
  if (field == "nan" || field.empty()) return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(field, &used);
  if (used != field.size()) throw FormatError("malformed number '" + field + "' in RD CSV");
  return v;
}

}  // namespace

double mean_squared_error(const Frame& a, const Frame& b) {
  if (a.width != b.width || a.height != b.height || a.pixels.size() != b.pixels.size()) {
    throw DomainError("frame dimensions differ");
  }
  if (a.pixels.empty()) throw DomainError("empty frame");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels.size());
}

double psnr(const FramePair& pair) {
  check_pair(pair);
  const double mse = mean_squared_error(pair.reference, pair.test);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(pair.peak * pair.peak / mse));
}

double ssim(const FramePair& pair) {
  check_pair(pair);
  const std::size_t w = pair.reference.width;
  const std::size_t h = pair.reference.height;
  if (w < kSsimWindow || h < kSsimWindow) throw DomainError("SSIM needs frames of at least 11x11");

  const double c1 = (0.01 * pair.peak) * (0.01 * pair.peak);
  const double c2 = (0.03 * pair.peak) * (0.03 * pair.peak);
  const auto kernel = gaussian_kernel();

  std::vector<double> a(w * h), b(w * h), aa(w * h), bb(w * h), ab(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    a[i] = pair.reference.pixels[i];
    b[i] = pair.test.pixels[i];
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, w, h, kernel);
  const auto mu_b = filter_valid(b, w, h, kernel);
  const auto e_aa = filter_valid(aa, w, h, kernel);
  const auto e_bb = filter_valid(bb, w, h, kernel);
  const auto e_ab = filter_valid(ab, w, h, kernel);

  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
    sum += num / den;
  }
  return sum / static_cast<double>(mu_a.size());
}

RDCurve::RDCurve(std::vector<RDPoint> points) : points_(std::move(points)) {
  if (points_.size() < 4) throw DomainError("RD curve needs at least four points");
  for (const auto& p : points_) {
    if (!std::isfinite(p.bitrate_kbps) || !std::isfinite(p.psnr_db)) throw DomainError("RD point is not finite");
    if (!(p.bitrate_kbps > 0.0)) throw DomainError("RD bitrates must be positive");
  }
  std::sort(points_.begin(), points_.end(),
            [](const RDPoint& x, const RDPoint& y) { return x.bitrate_kbps < y.bitrate_kbps; });
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].bitrate_kbps == points_[i - 1].bitrate_kbps) throw DomainError("RD curve has duplicate bitrates");
  }
}

double RDCurve::min_psnr() const {
  return std::min_element(points_.begin(), points_.end(),
                          [](const RDPoint& x, const RDPoint& y) { return x.psnr_db < y.psnr_db; })
      ->psnr_db;
}

double RDCurve::max_psnr() const {
  return std::max_element(points_.begin(), points_.end(),
                          [](const RDPoint& x, const RDPoint& y) { return x.psnr_db < y.psnr_db; })
      ->psnr_db;
}

double LogRateFit::operator()(double psnr_db) const {
  const double x = psnr_db - center;
  return coeffs[0] + x * (coeffs[1] + x * (coeffs[2] + x * coeffs[3]));
}

double LogRateFit::integral(double lo, double hi) const {
  auto antiderivative = [&](double p) {
    const double x = p - center;
    return x * (coeffs[0] + x * (coeffs[1] / 2.0 + x * (coeffs[2] / 3.0 + x * coeffs[3] / 4.0)));
  };
  return antiderivative(hi) - antiderivative(lo);
}

LogRateFit fit_log_rate(const RDCurve& curve) {
  const auto& pts = curve.points();
  LogRateFit fit;
  for (const auto& p : pts) fit.center += p.psnr_db;
  fit.center /= static_cast<double>(pts.size());

  Eigen::MatrixXd vandermonde(static_cast<Eigen::Index>(pts.size()), 4);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i].psnr_db - fit.center;
    const auto row = static_cast<Eigen::Index>(i);
    vandermonde(row, 0) = 1.0;
    vandermonde(row, 1) = x;
    vandermonde(row, 2) = x * x;
    vandermonde(row, 3) = x * x * x;
    rhs[row] = std::log10(pts[i].bitrate_kbps);
  }
  const Eigen::VectorXd c = vandermonde.colPivHouseholderQr().solve(rhs);
  if (!c.allFinite()) throw DomainError("RD curve fit is degenerate");
  for (int k = 0; k < 4; ++k) fit.coeffs[k] = c[k];
  return fit;
}

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
  const double lo = std::max(anchor.min_psnr(), test.min_psnr());
  const double hi = std::min(anchor.max_psnr(), test.max_psnr());
  if (!(hi - lo >= kMinBdOverlapDb)) {
    std::ostringstream msg;
    msg << "RD curves overlap over [" << lo << ", " << hi << "] dB; need at least " << kMinBdOverlapDb << " dB";
    throw DomainError(msg.str());
  }
  const LogRateFit fa = fit_log_rate(anchor);
  const LogRateFit ft = fit_log_rate(test);
  const double mean_diff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, mean_diff) - 1.0);
}

void write_rd_csv(std::ostream& out, const std::vector<RdRow>& rows) {
  out << kRdCsvHeader << '\n';
  for (const auto& row : rows) {
    out << row.scene << ',' << row.camera << ',' << row.rank << ',' << row.qp << ',' << row.bytes << ',';
    if (row.error.empty()) {
      out << format_double(row.bitrate_kbps) << ',' << format_double(row.psnr_db) << ',' << format_double(row.ssim);
    } else {
      out << "nan,nan,nan";
    }
    out << '\n';
  }
  if (!out) throw IoError("failed to write RD CSV");
}

std::vector<RdRow> read_rd_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("RD CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRdCsvHeader) throw FormatError("RD CSV header must be '" + std::string(kRdCsvHeader) + "'");
  std::vector<RdRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 8) throw FormatError("RD CSV line " + std::to_string(line_no) + " needs 8 fields");
    try {
      RdRow row;
      row.scene = fields[0];
      row.camera = fields[1];
      row.rank = std::stoi(fields[2]);
      row.qp = std::stoi(fields[3]);
      row.bytes = static_cast<std::size_t>(std::stoull(fields[4]));
      row.bitrate_kbps = parse_double(fields[5]);
      row.psnr_db = parse_double(fields[6]);
      row.ssim = parse_double(fields[7]);
      if (!std::isfinite(row.bitrate_kbps) || !std::isfinite(row.psnr_db)) row.error = "failed cell";
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw FormatError("RD CSV line " + std::to_string(line_no) + " is malformed");
    }
  }
  return rows;
}

std::vector<LabeledCurve> curves_from_rows(const std::vector<RdRow>& rows) {
  std::vector<LabeledCurve> out;
  std::vector<std::vector<RDPoint>> points;
  for (const auto& row : rows) {
    if (!row.error.empty()) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const LabeledCurve& c) {
      return c.scene == row.scene && c.camera == row.camera && c.rank == row.rank;
    });
    std::size_t index;
    if (it == out.end()) {
      out.push_back({row.scene, row.camera, row.rank, RDCurve{}});
      points.emplace_back();
      index = out.size() - 1;
    } else {
      index = static_cast<std::size_t>(it - out.begin());
    }
    points[index].push_back({row.bitrate_kbps, row.psnr_db});
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].curve = RDCurve(std::move(points[i]));
  return out;
}

}  // namespace tdvc
