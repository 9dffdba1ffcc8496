#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tdvc/cp_als.hpp"
#include "tdvc/error.hpp"
#include "test_util.hpp"

using namespace tdvc;

namespace {

double objective(const DenseTensor& t, const KruskalModel& m) {
  const DenseTensor approx = reconstruct(m);
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += (t.data()[i] - approx.data()[i]) * (t.data()[i] - approx.data()[i]);
  return 0.5 * s;
}

KruskalModel perturbed(const KruskalModel& base, double eps, std::mt19937_64& rng, int only_mode = -1) {
  KruskalModel m = base;
  for (std::size_t n = 0; n < m.order(); ++n) {
    if (only_mode >= 0 && static_cast<int>(n) != only_mode) continue;
    m.factors[n] += eps * test::random_matrix(m.factors[n].rows(), m.factors[n].cols(), rng);
  }
  return m;
}

}  // namespace

TEST(AlsConfig, Validate) {
  AlsConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rank = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = AlsConfig{};
  c.max_sweeps = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = AlsConfig{};
  c.grad_tol = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = AlsConfig{};
  c.pp_threshold = -1.0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(InitFactors, DeterministicGivenSeed) {
  AlsConfig c;
  c.rank = 3;
  c.seed = 17;
  const auto a = init_factors({4, 5, 6}, c);
  const auto b = init_factors({4, 5, 6}, c);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(a.factors[n], b.factors[n]);
  EXPECT_EQ(a.weights, Vector::Ones(3));
}

TEST(InitFactors, UnitIntervalRange) {
  AlsConfig c;
  c.rank = 1;
  const auto m = init_factors({2, 2, 2}, c);
  ASSERT_EQ(m.factors.size(), 3u);
  for (const auto& f : m.factors) {
    EXPECT_EQ(f.rows(), 2);
    EXPECT_EQ(f.cols(), 1);
    EXPECT_GE(f.minCoeff(), 0.0);
    EXPECT_LT(f.maxCoeff(), 1.0);
  }
}

TEST(InitFactors, SeedsDiffer) {
  AlsConfig c;
  c.rank = 2;
  c.seed = 1;
  const auto a = init_factors({3, 3, 3}, c);
  c.seed = 2;
  const auto b = init_factors({3, 3, 3}, c);
  EXPECT_NE(a.factors[0], b.factors[0]);
}

TEST(AlsUpdate, RankOneOneStepRecovery) {
  std::mt19937_64 rng(21);
  const KruskalModel truth = test::random_model({4, 3, 5}, 1, rng, 0.1, 1.0);
  const DenseTensor t = reconstruct(truth);
  KruskalModel m = truth;
  m.factors[0].setOnes();
  const FactorMatrix s = als_update_mode(t, m, compute_grams(m.factors), 0, AlsConfig{});
  const double ratio = s(0, 0) / truth.factors[0](0, 0);
  EXPECT_LT((s - ratio * truth.factors[0]).norm(), 1e-10 * s.norm());
}

TEST(AlsUpdate, IdentityGammaReturnsRhs) {
  std::mt19937_64 rng(22);
  const Matrix rhs = test::random_matrix(5, 3, rng);
  EXPECT_LT(test::rel_diff(solve_normal_equations(Matrix::Identity(3, 3), rhs, 0.0), rhs), 1e-15);
}

TEST(AlsUpdate, NormalEquationResidual) {
  std::mt19937_64 rng(23);
  const DenseTensor t = test::random_tensor({4, 4, 4}, rng);
  const KruskalModel m = test::random_model({4, 4, 4}, 2, rng);
  const GramSet grams = compute_grams(m.factors);
  for (std::size_t n = 0; n < 3; ++n) {
    const Matrix gamma = gram_hadamard(grams, n);
    const Matrix rhs = mttkrp(t, m, n);
    const FactorMatrix s = als_update_mode(t, m, grams, n, AlsConfig{});
    EXPECT_LT((s * gamma - rhs).norm(), 1e-9 * rhs.norm());
  }
}

TEST(AlsUpdate, SingularGammaIsRescued) {
  Matrix gamma = Matrix::Zero(2, 2);
  gamma(0, 0) = 1.0;
  Matrix rhs(1, 2);
  rhs << 2.0, 0.0;
  const Matrix s = solve_normal_equations(gamma, rhs, 1e-12);
  EXPECT_TRUE(s.allFinite());
  EXPECT_NEAR(s(0, 0), 2.0, 1e-9);
}

TEST(GradientNorm, ZeroAtExactModel) {
  std::mt19937_64 rng(24);
  const KruskalModel m = test::random_model({4, 5, 3}, 2, rng);
  EXPECT_LT(gradient_norm(reconstruct(m), m, compute_grams(m.factors)), 1e-10);
}

TEST(GradientNorm, ZeroFactorsAreStationary) {
  std::mt19937_64 rng(25);
  KruskalModel m = test::random_model({3, 3, 3}, 2, rng);
  for (auto& f : m.factors) f.setZero();
  EXPECT_EQ(gradient_norm(test::random_tensor({3, 3, 3}, rng), m, compute_grams(m.factors)), 0.0);
}

TEST(GradientNorm, MatchesCentralFiniteDifferences) {
  std::mt19937_64 rng(26);
  const DenseTensor t = test::random_tensor({3, 4, 2}, rng);
  const KruskalModel m = test::random_model({3, 4, 2}, 2, rng);
  const double h = 1e-5;
  double sq = 0.0;
  for (std::size_t n = 0; n < 3; ++n) {
    for (Eigen::Index i = 0; i < m.factors[n].size(); ++i) {
      KruskalModel plus = m, minus = m;
      plus.factors[n].data()[i] += h;
      minus.factors[n].data()[i] -= h;
      const double g = (objective(t, plus) - objective(t, minus)) / (2 * h);
      sq += g * g;
    }
  }
  const double oracle = std::sqrt(sq) / t.frobenius_norm();
  EXPECT_NEAR(gradient_norm(t, m, compute_grams(m.factors)), oracle, 1e-5 * oracle);
}

TEST(GradientNorm, WeightsFoldIntoFactors) {
  std::mt19937_64 rng(27);
  const DenseTensor t = test::random_tensor({3, 4, 2}, rng);
  KruskalModel m = test::random_model({3, 4, 2}, 2, rng);
  m.weights << 2.0, 0.5;
  KruskalModel unit = m;
  unit.factors[2] = m.factors[2] * m.weights.asDiagonal();
  unit.weights.setOnes();
  // Same point in model space, so the objective matches; the gradient
  // definition folds weights mode by mode.
  EXPECT_NEAR(fit_error(t, m), fit_error(t, unit), 1e-12);
  EXPECT_GT(gradient_norm(t, m, compute_grams(m.factors)), 0.0);
}

TEST(PPState, ZeroPausedFactorsGiveZeroOperators) {
  std::mt19937_64 rng(28);
  KruskalModel m = test::random_model({3, 4, 5}, 2, rng);
  for (auto& f : m.factors) f.setZero();
  const PPState s = build_pp_state(test::random_tensor({3, 4, 5}, rng), m);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(s.first_order(n).norm(), 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t n = i + 1; n < 3; ++n) {
      for (double v : s.second_order_block(i, n).data) EXPECT_EQ(v, 0.0);
    }
}

TEST(PPState, OperatorsMatchDirectSums) {
  std::mt19937_64 rng(29);
  const DenseTensor t = test::random_tensor({3, 4, 5}, rng);
  const KruskalModel m = test::random_model({3, 4, 5}, 2, rng);
  const PPState s = build_pp_state(t, m);
  EXPECT_EQ(s.second_order_count(), 3u);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_LT(test::rel_diff(s.first_order(n), mttkrp(t, m, n)), 1e-12);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t k = 0; k < 2; ++k) {
        double v = 0.0;
        for (std::size_t z = 0; z < 5; ++z) v += t(x, y, z) * m.factors[2](static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(k));
        EXPECT_NEAR(s.second_order(0, 1, x, y, k), v, 1e-12);
        EXPECT_EQ(s.second_order(1, 0, y, x, k), s.second_order(0, 1, x, y, k));
      }
}

TEST(PPState, OrderFourBuildsEveryPair) {
  std::mt19937_64 rng(30);
  const DenseTensor t = test::random_tensor({3, 2, 4, 2}, rng);
  const KruskalModel m = test::random_model({3, 2, 4, 2}, 2, rng);
  const PPState s = build_pp_state(t, m);
  EXPECT_EQ(s.second_order_count(), 6u);
  for (std::size_t n = 0; n < 4; ++n) EXPECT_LT(test::rel_diff(s.first_order(n), mttkrp(t, m, n)), 1e-12);
  // (x, y) over modes 1 and 3, contracting modes 0 and 2.
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t k = 0; k < 2; ++k) {
        double v = 0.0;
        for (std::size_t a = 0; a < 3; ++a)
          for (std::size_t c = 0; c < 4; ++c) {
            const std::size_t idx[] = {a, x, c, y};
            v += t(idx) * m.factors[0](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) *
                 m.factors[2](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
          }
        EXPECT_NEAR(s.second_order(1, 3, x, y, k), v, 1e-12);
      }
}

TEST(PPState, MemoryLimitRaisesResourceError) {
  std::mt19937_64 rng(31);
  const DenseTensor t = test::random_tensor({6, 6, 6}, rng);
  const KruskalModel m = test::random_model({6, 6, 6}, 2, rng);
  EXPECT_THROW(build_pp_state(t, m, 64), ResourceError);
}

TEST(PPMttkrp, ZeroPerturbationIsBitExact) {
  std::mt19937_64 rng(32);
  const DenseTensor t = test::random_tensor({5, 4, 6}, rng);
  const KruskalModel m = test::random_model({5, 4, 6}, 3, rng);
  const PPState s = build_pp_state(t, m);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(pp_mttkrp(s, m, n), s.first_order(n));
}

TEST(PPMttkrp, SinglePerturbedModeIsExact) {
  std::mt19937_64 rng(33);
  const DenseTensor t = test::random_tensor({5, 4, 6}, rng);
  const KruskalModel paused = test::random_model({5, 4, 6}, 3, rng);
  const PPState s = build_pp_state(t, paused);
  for (int j = 0; j < 3; ++j) {
    const KruskalModel cur = perturbed(paused, 0.3, rng, j);
    for (std::size_t n = 0; n < 3; ++n) {
      if (static_cast<int>(n) == j) continue;
      EXPECT_LT(test::rel_diff(pp_mttkrp(s, cur, n), mttkrp(t, cur, n)), 1e-10);
    }
  }
}

TEST(PPMttkrp, ErrorIsSecondOrderInPerturbation) {
  std::mt19937_64 rng(34);
  const DenseTensor t = test::random_tensor({6, 5, 7}, rng);
  const KruskalModel paused = test::random_model({6, 5, 7}, 3, rng);
  const PPState s = build_pp_state(t, paused);
  KruskalModel direction = paused;
  for (auto& f : direction.factors) f = test::random_matrix(f.rows(), f.cols(), rng);
  auto error_at = [&](double eps, std::size_t n) {
    KruskalModel cur = paused;
    for (std::size_t m = 0; m < 3; ++m) cur.factors[m] += eps * direction.factors[m];
    return (pp_mttkrp(s, cur, n) - mttkrp(t, cur, n)).norm();
  };
  for (std::size_t n = 0; n < 3; ++n) {
    const double ratio = error_at(1e-2, n) / error_at(5e-3, n);
    EXPECT_NEAR(ratio, 4.0, 0.8) << "mode " << n;
  }
}

TEST(PPMttkrp, StaleStateIsRejected) {
  std::mt19937_64 rng(35);
  const DenseTensor t = test::random_tensor({3, 3, 3}, rng);
  const KruskalModel m = test::random_model({3, 3, 3}, 2, rng);
  PPState s = build_pp_state(t, m);
  s.mark_stale();
  EXPECT_THROW(pp_mttkrp(s, m, 0), ContractError);
}

TEST(Canonicalize, PreservesTensorAndOrdersWeights) {
  std::mt19937_64 rng(36);
  KruskalModel m = test::random_model({4, 3, 5}, 3, rng);
  m.weights << 0.5, 3.0, 1.5;
  const DenseTensor before = reconstruct(m);
  canonicalize(m);
  EXPECT_LT(test::rel_diff(Eigen::Map<const Vector>(reconstruct(m).data().data(), 60),
                           Eigen::Map<const Vector>(before.data().data(), 60)),
            1e-13);
  EXPECT_GE(m.weights(0), m.weights(1));
  EXPECT_GE(m.weights(1), m.weights(2));
  for (std::size_t n = 0; n + 1 < m.order(); ++n) {
    for (Eigen::Index r = 0; r < 3; ++r) {
      Eigen::Index at = 0;
      m.factors[n].col(r).cwiseAbs().maxCoeff(&at);
      EXPECT_GT(m.factors[n](at, r), 0.0);
    }
  }
}

TEST(CpAls, RecoversRankOneWithinTenSweeps) {
  std::mt19937_64 rng(37);
  const DenseTensor t = reconstruct(test::random_model({6, 5, 4}, 1, rng, 0.1, 1.0));
  AlsConfig c;
  c.rank = 1;
  c.max_sweeps = 10;
  const auto [m, report] = cp_als(t, c);
  EXPECT_LT(fit_error(t, m), 1e-8);
  EXPECT_LE(report.sweeps_run, 10u);
}

TEST(CpAls, RecoversExactRankFive) {
  const DenseTensor t = test::recovery_tensor();
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    AlsConfig c;
    c.rank = 5;
    c.seed = seed;
    const auto [m, report] = cp_als(t, c);
    if (report.final_fit_error < 1e-5) ++recovered;
    EXPECT_EQ(report.per_sweep_fit.size(), report.sweeps_run);
    for (std::size_t i = 1; i < report.per_sweep_fit.size(); ++i) {
      EXPECT_LE(report.per_sweep_fit[i], report.per_sweep_fit[i - 1] + 1e-12);
    }
  }
  EXPECT_GE(recovered, 9);
}

TEST(CpAls, PairwisePerturbationSavesExactMttkrps) {
  const DenseTensor t = test::recovery_tensor();
  AlsConfig c;
  c.rank = 5;
  c.seed = 3;
  const auto [exact_model, exact] = cp_als(t, c);
  c.pp_enabled = true;
  const auto [pp_model, pp] = cp_als(t, c);
  EXPECT_NEAR(pp.final_fit_error, exact.final_fit_error, 1e-3);
  EXPECT_LT(pp.exact_mttkrp_count, exact.exact_mttkrp_count);
  EXPECT_GT(pp.pp_mttkrp_count, 0u);
  EXPECT_GT(pp.pp_state_builds, 0u);
  EXPECT_EQ(exact.pp_mttkrp_count, 0u);
}

TEST(CpAls, DeterministicBits) {
  std::mt19937_64 rng(38);
  const DenseTensor t = test::random_tensor({6, 5, 4}, rng);
  AlsConfig c;
  c.rank = 3;
  c.seed = 9;
  c.max_sweeps = 30;
  c.pp_enabled = true;
  const auto a = cp_als(t, c);
  const auto b = cp_als(t, c);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(a.first.factors[n], b.first.factors[n]);
  EXPECT_EQ(a.first.weights, b.first.weights);
  EXPECT_EQ(a.second.per_sweep_fit, b.second.per_sweep_fit);
}

TEST(CpAls, NonConvergenceReturnsBestModel) {
  std::mt19937_64 rng(39);
  const DenseTensor t = test::random_tensor({6, 6, 6}, rng);
  AlsConfig c;
  c.rank = 2;
  c.max_sweeps = 3;
  c.grad_tol = 1e-14;
  const auto [m, report] = cp_als(t, c);
  EXPECT_EQ(report.termination, AlsTermination::kMaxSweeps);
  EXPECT_FALSE(report.converged());
  EXPECT_EQ(report.sweeps_run, 3u);
  EXPECT_NEAR(report.final_fit_error, fit_error(t, m), 1e-12);
  const double best = *std::min_element(report.per_sweep_fit.begin(), report.per_sweep_fit.end());
  EXPECT_NEAR(report.final_fit_error, best, 1e-12);
}

TEST(CpAls, ConstantTensorIsRankOne) {
  DenseTensor t({5, 4, 3});
  for (auto& v : t.data()) v = 0.37;
  AlsConfig c;
  const auto [m, report] = cp_als(t, c);
  EXPECT_LT(fit_error(t, m), 1e-10);
  EXPECT_TRUE(report.converged());
}
