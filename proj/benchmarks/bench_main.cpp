#include <benchmark/benchmark.h>

#include <random>

#include "tdvc/cp_als.hpp"
#include "tdvc/factor_codec.hpp"
#include "tdvc/metrics.hpp"
#include "tdvc/pipeline.hpp"
#include "tdvc/synthetic.hpp"

using namespace tdvc;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

DenseTensor depth_group(std::size_t side) {
  SyntheticSpec spec;
  spec.width = side;
  spec.height = side;
  spec.frames = 8;
  return build_group_tensor(synthetic_depth_sequence(spec), 0, 8);
}

KruskalModel random_model(const Shape& shape, Eigen::Index rank, std::mt19937_64& rng) {
  KruskalModel m;
  for (auto e : shape) m.factors.push_back(random_matrix(static_cast<Eigen::Index>(e), rank, rng));
  m.weights = Vector::Ones(rank);
  return m;
}

void BM_Mttkrp(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto rank = static_cast<Eigen::Index>(state.range(1));
  const DenseTensor t = depth_group(side);
  std::mt19937_64 rng(1);
  const KruskalModel m = random_model(t.shape(), rank, rng);
  for (auto _ : state) {
    for (std::size_t n = 0; n < 3; ++n) benchmark::DoNotOptimize(mttkrp(t, m, n));
  }
  state.SetItemsProcessed(state.iterations() * 3);
}
BENCHMARK(BM_Mttkrp)->Args({64, 5})->Args({64, 20})->Args({128, 20});

void BM_BuildPPState(benchmark::State& state) {
  const DenseTensor t = depth_group(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(2);
  const KruskalModel m = random_model(t.shape(), state.range(1), rng);
  for (auto _ : state) benchmark::DoNotOptimize(build_pp_state(t, m));
}
BENCHMARK(BM_BuildPPState)->Args({64, 5})->Args({64, 20});

void BM_PPMttkrp(benchmark::State& state) {
  const DenseTensor t = depth_group(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(3);
  const KruskalModel paused = random_model(t.shape(), state.range(1), rng);
  const PPState pp = build_pp_state(t, paused);
  KruskalModel cur = paused;
  for (auto& f : cur.factors) f += 1e-3 * random_matrix(f.rows(), f.cols(), rng);
  for (auto _ : state) {
    for (std::size_t n = 0; n < 3; ++n) benchmark::DoNotOptimize(pp_mttkrp(pp, cur, n));
  }
  state.SetItemsProcessed(state.iterations() * 3);
}
BENCHMARK(BM_PPMttkrp)->Args({64, 5})->Args({64, 20})->Args({128, 20});

void BM_CpAls(benchmark::State& state) {
  const DenseTensor t = depth_group(64);
  AlsConfig c;
  c.rank = static_cast<std::size_t>(state.range(0));
  c.pp_enabled = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(cp_als(t, c));
}
BENCHMARK(BM_CpAls)->Args({10, 0})->Args({10, 1})->Unit(benchmark::kMillisecond);

void BM_EncodePlane(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const PackedPlane p = pack_factor(random_matrix(state.range(0), 20, rng));
  const int qp = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(encode_plane(p, qp));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.samples.size()));
}
BENCHMARK(BM_EncodePlane)->Args({1024, 2})->Args({1024, 38});

void BM_DecodePlane(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const QuantizedPlane q = encode_plane(pack_factor(random_matrix(state.range(0), 20, rng)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(decode_plane(q));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.rows * q.cols));
}
BENCHMARK(BM_DecodePlane)->Arg(1024);

void BM_Ssim(benchmark::State& state) {
  SyntheticSpec spec;
  spec.width = spec.height = static_cast<std::size_t>(state.range(0));
  spec.frames = 2;
  const DepthSequence seq = synthetic_depth_sequence(spec);
  for (auto _ : state) benchmark::DoNotOptimize(ssim({seq.frames[0], seq.frames[1], seq.peak()}));
}
BENCHMARK(BM_Ssim)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
