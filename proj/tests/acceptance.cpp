#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tdvc/container.hpp"
#include "tdvc/cp_als.hpp"
#include "tdvc/error.hpp"
#include "tdvc/factor_codec.hpp"
#include "tdvc/metrics.hpp"
#include "tdvc/pipeline.hpp"
#include "tdvc/synthetic.hpp"
#include "test_util.hpp"

using namespace tdvc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

Outcome kernel_oracles() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> ext(1, 8);
  std::uniform_int_distribution<Eigen::Index> rank(1, 4);
  double worst_mttkrp = 0.0, worst_gram = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Shape shape{ext(rng), ext(rng), ext(rng)};
    const Eigen::Index r = rank(rng);
    const DenseTensor t = test::random_tensor(shape, rng);
    std::vector<FactorMatrix> f;
    for (auto e : shape) f.push_back(test::random_matrix(static_cast<Eigen::Index>(e), r, rng));
    const GramSet grams = compute_grams(f);
    for (std::size_t n = 0; n < 3; ++n) {
      const Matrix k = test::materialized_kr(f, n);
      worst_mttkrp = std::max(worst_mttkrp, test::rel_diff(mttkrp(t, f, n), matricize(t, n) * k));
      worst_gram = std::max(worst_gram, test::rel_diff(gram_hadamard(grams, n), k.transpose() * k));
    }
  }
  return {worst_mttkrp < 1e-10 && worst_gram < 1e-10,
          fmt("200 tensors, max rel err mttkrp %.2e, gram_hadamard %.2e", worst_mttkrp, worst_gram)};
}

Outcome exact_rank_recovery() {
  const DenseTensor t = test::recovery_tensor();
  int recovered = 0;
  double worst_rise = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    AlsConfig c;
    c.rank = 5;
    c.seed = seed;
    c.max_sweeps = 200;
    const auto [m, report] = cp_als(t, c);
    if (fit_error(t, m) < 1e-5) ++recovered;
    for (std::size_t i = 1; i < report.per_sweep_fit.size(); ++i) {
      worst_rise = std::max(worst_rise, report.per_sweep_fit[i] - report.per_sweep_fit[i - 1]);
    }
  }
  return {recovered >= 9 && worst_rise <= 1e-12,
          fmt("%.0f/10 seeds below 1e-5, max per-sweep fit increase %.1e", recovered, worst_rise)};
}

Outcome pairwise_perturbation() {
  std::mt19937_64 rng(303);
  const DenseTensor t = test::random_tensor({8, 7, 6}, rng);
  const KruskalModel paused = test::random_model({8, 7, 6}, 4, rng);
  const PPState state = build_pp_state(t, paused);

  bool zero_exact = true;
  for (std::size_t n = 0; n < 3; ++n) zero_exact = zero_exact && pp_mttkrp(state, paused, n) == state.first_order(n);

  KruskalModel direction = paused;
  for (auto& f : direction.factors) f = test::random_matrix(f.rows(), f.cols(), rng);
  auto error_at = [&](double eps, std::size_t n) {
    KruskalModel cur = paused;
    for (std::size_t m = 0; m < 3; ++m) cur.factors[m] += eps * direction.factors[m];
    return (pp_mttkrp(state, cur, n) - mttkrp(t, cur, n)).norm();
  };
  double ratio_lo = 1e300, ratio_hi = 0.0;
  for (std::size_t n = 0; n < 3; ++n) {
    const double ratio = error_at(1e-2, n) / error_at(5e-3, n);
    ratio_lo = std::min(ratio_lo, ratio);
    ratio_hi = std::max(ratio_hi, ratio);
  }
  const bool scaling = ratio_lo >= 3.2 && ratio_hi <= 4.8;

  const DenseTensor target = test::recovery_tensor();
  double worst_gap = 0.0;
  std::size_t exact_total = 0, pp_total = 0;
  bool fewer = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    AlsConfig c;
    c.rank = 5;
    c.seed = seed;
    const auto exact = cp_als(target, c).second;
    c.pp_enabled = true;
    const auto pp = cp_als(target, c).second;
    worst_gap = std::max(worst_gap, std::abs(pp.final_fit_error - exact.final_fit_error));
    fewer = fewer && pp.exact_mttkrp_count < exact.exact_mttkrp_count;
    exact_total += exact.exact_mttkrp_count;
    pp_total += pp.exact_mttkrp_count;
  }
  const bool paired = worst_gap <= 1e-3 && fewer;

  std::ostringstream d;
  d << "zero-perturbation bit-exact " << (zero_exact ? "yes" : "no") << ", eps ratio in ["
    << fmt("%.3f, %.3f", ratio_lo, ratio_hi) << "], 10 paired runs: max fit gap " << fmt("%.1e", worst_gap)
    << ", exact MTTKRPs " << pp_total << " (pp) vs " << exact_total << " (exact)";
  return {zero_exact && scaling && paired, d.str()};
}

Outcome codec_bounds() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> sample(0, 65535);
  bool lossless = true, bounded = true;
  for (int trial = 0; trial < 20; ++trial) {
    PackedPlane p;
    p.rows = 1 + rng() % 200;
    p.cols = 1 + rng() % 20;
    p.samples.resize(p.rows * p.cols);
    for (auto& v : p.samples) v = sample(rng);
    lossless = lossless && decode_plane(encode_plane(p, 4)) == p;
    for (int qp = kMinQp; qp <= kMaxQp; ++qp) {
      const QuantizedPlane q = encode_plane(p, qp);
      const PackedPlane d = decode_plane(q);
      for (std::size_t i = 0; i < p.samples.size(); ++i) {
        bounded = bounded && std::abs(d.samples[i] - p.samples[i]) <= q.qstep() / 2;
      }
    }
  }

  bool structural = true;
  for (int trial = 0; trial < 100; ++trial) {
    SyntheticSpec spec;
    spec.width = 8 + rng() % 16;
    spec.height = 8 + rng() % 16;
    spec.frames = 1 + rng() % 12;
    spec.seed = rng();
    const DepthSequence seq = synthetic_depth_sequence(spec);
    EncodeConfig config;
    config.rank = 1 + rng() % 4;
    config.qp = static_cast<int>(rng() % 52);
    config.group_size = 1 + static_cast<std::uint32_t>(rng() % 8);
    config.als.max_sweeps = 5;
    const auto bytes = encode_sequence(seq, config);
    const Stream s = read_stream(bytes);
    std::ostringstream sink;
    write_stream(s.header, s.groups, sink);
    const std::string text = sink.str();
    const std::vector<std::uint8_t> again(text.begin(), text.end());
    structural = structural && again == bytes && read_stream(again) == s;
  }

  SyntheticSpec spec;
  spec.width = 24;
  spec.height = 16;
  spec.frames = 12;
  EncodeConfig config;
  config.rank = 3;
  config.group_size = 4;
  const auto bytes = encode_sequence(synthetic_depth_sequence(spec), config);
  std::uniform_int_distribution<std::size_t> cut(0, bytes.size() - 1);
  int clean = 0, header_only = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = cut(rng);
    const std::span<const std::uint8_t> prefix(bytes.data(), n);
    try {
      const Stream s = read_stream(prefix);
      if (n == kStreamHeaderBytes && s.groups.empty()) ++header_only;
    } catch (const Error&) {
      ++clean;
    }
    try {
      decode_sequence(prefix);
    } catch (const Error&) {
      continue;
    }
    clean = -100000;
  }
  const bool fuzz = clean + header_only == 1000;

  std::ostringstream d;
  d << "qp4 lossless " << (lossless ? "yes" : "no") << ", error <= qstep/2 at qp 0..51 " << (bounded ? "yes" : "no")
    << ", 100 stream round-trips " << (structural ? "identical" : "differ") << ", truncation fuzz " << clean
    << " errors + " << header_only << " header-only prefixes of 1000";
  return {lossless && bounded && structural && fuzz, d.str()};
}

Outcome rd_monotonicity() {
  const std::vector<int> ranks = {1, 5, 10, 15, 20};
  const std::vector<int> qps = {2, 6, 10, 14, 20, 26, 38};
  std::vector<std::vector<std::size_t>> bytes(ranks.size(), std::vector<std::size_t>(qps.size(), 0));
  for (std::uint64_t item = 0; item < 5; ++item) {
    SyntheticSpec spec;
    spec.seed = item;
    const DepthSequence seq = synthetic_depth_sequence(spec);
    for (std::size_t r = 0; r < ranks.size(); ++r) {
      EncodeConfig config;
      config.rank = static_cast<std::size_t>(ranks[r]);
      const auto models = decompose_sequence(seq, config);
      for (std::size_t q = 0; q < qps.size(); ++q) {
        bytes[r][q] += encode_models(seq, models, config.group_size, qps[q]).size();
      }
    }
  }
  bool decreasing = true, rank_order = true;
  for (std::size_t r = 0; r < ranks.size(); ++r)
    for (std::size_t q = 1; q < qps.size(); ++q) decreasing = decreasing && bytes[r][q] < bytes[r][q - 1];
  for (std::size_t q = 0; q < qps.size(); ++q) rank_order = rank_order && bytes.back()[q] > bytes.front()[q];
  std::ostringstream d;
  d << "bytes strictly fall qp 2->38 for every rank: " << (decreasing ? "yes" : "no")
    << "; rank 20 > rank 1 at every qp: " << (rank_order ? "yes" : "no") << " (rank 1: " << bytes.front().front()
    << " -> " << bytes.front().back() << ", rank 20: " << bytes.back().front() << " -> " << bytes.back().back() << ")";
  return {decreasing && rank_order, d.str()};
}

RDCurve load_curve(const std::string& name) {
  std::ifstream in(std::string(TDVC_TEST_DATA_DIR) + "/" + name);
  if (!in) throw IoError("missing test data " + name);
  return curves_from_rows(read_rd_csv(in)).at(0).curve;
}

Outcome bjontegaard() {
  const RDCurve hevc = load_curve("ballet_cam3_hevc.csv");
  const RDCurve rank1 = load_curve("ballet_cam3_rank1.csv");
  std::vector<RDPoint> half;
  for (const auto& p : hevc.points()) half.push_back({p.bitrate_kbps / 2.0, p.psnr_db});
  const double self = bd_rate(hevc, hevc);
  const double halved = bd_rate(hevc, RDCurve(half));
  const double published = bd_rate(hevc, rank1);
  return {std::abs(self) <= 1e-9 && std::abs(halved + 50.0) <= 1e-6 && published < -30.0,
          fmt("bd(A,A) = %.2e, halved rate = %.9f%%, camera-3 HEVC anchor vs rank-1 curve = %.4f%%", self, halved, published)};
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  SyntheticSpec synth;
  synth.width = 48;
  synth.height = 32;
  synth.seed = 7;
  const DepthSequence seq = synthetic_depth_sequence(synth);
  const fs::path root = fs::temp_directory_path() / "tdvc_acceptance_determinism";
  fs::remove_all(root);
  std::string csv[2];
  for (int run = 0; run < 2; ++run) {
    SweepSpec spec;
    spec.seed = 5;
    spec.scene = "synthetic";
    spec.container_dir = root / ("run" + std::to_string(run));
    const SweepResult result = rd_sweep(seq, spec);
    std::ostringstream out;
    write_rd_csv(out, result.rows);
    csv[run] = out.str();
  }
  std::size_t files = 0;
  bool identical = csv[0] == csv[1];
  for (const auto& entry : fs::directory_iterator(root / "run0")) {
    ++files;
    identical = identical && slurp(entry.path()) == slurp(root / "run1" / entry.path().filename());
  }
  fs::remove_all(root);
  return {identical && files == 35, fmt("CSV and %.0f containers byte-identical across two sweeps", files)};
}

Outcome metric_correctness() {
  Frame a(8, 8), b(8, 8);
  for (std::size_t i = 0; i < 64; ++i) {
    a.pixels[i] = 128;
    b.pixels[i] = i % 2 ? 129 : 127;
  }
  const double p = psnr({a, b, 255.0});
  std::mt19937_64 rng(808);
  double self_gap = 0.0, oracle_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const bool deep = trial % 2 == 1;
    const int peak = deep ? 65535 : 255;
    Frame x(11 + rng() % 30, 11 + rng() % 30);
    std::uniform_int_distribution<int> d(0, peak);
    for (auto& v : x.pixels) v = static_cast<std::uint16_t>(d(rng));
    Frame y = x;
    std::normal_distribution<double> noise(0.0, peak * 0.05);
    for (auto& v : y.pixels) v = static_cast<std::uint16_t>(std::clamp(std::lround(v + noise(rng)), 0L, long(peak)));
    self_gap = std::max(self_gap, std::abs(ssim({x, x, double(peak)}) - 1.0));
    oracle_gap = std::max(oracle_gap, std::abs(ssim({x, y, double(peak)}) - test::ssim_oracle(x, y, peak)));
  }
  return {std::abs(p - 48.1308) < 5e-5 && self_gap <= 1e-12 && oracle_gap <= 1e-9,
          fmt("psnr(MSE=1, 8-bit) = %.4f dB, |ssim(x,x)-1| = %.1e, max |ssim - oracle| = %.1e over 20 pairs", p,
              self_gap, oracle_gap)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_s;
  };
  const std::vector<Criterion> criteria = {
      {"kernel oracle suite", kernel_oracles, 10.0},
      {"exact-rank recovery", exact_rank_recovery, 30.0},
      {"pairwise-perturbation fidelity", pairwise_perturbation, 0.0},
      {"codec bounds", codec_bounds, 0.0},
      {"RD monotonicity", rd_monotonicity, 60.0},
      {"Bjontegaard verification", bjontegaard, 0.0},
      {"end-to-end determinism", determinism, 0.0},
      {"metric correctness", metric_correctness, 0.0},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criteria[i].budget_s > 0.0 && secs >= criteria[i].budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", criteria[i].budget_s);
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu %s: %s (%.2f s) - %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
