#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "tdvc/tensor.hpp"

namespace tdvc {

struct AlsConfig {
  std::size_t rank = 1;
  std::size_t max_sweeps = 200;
  // Relative gradient norm (divided by ||t||_F) below which a run stops.
  double grad_tol = 1e-6;
  std::uint64_t seed = 0;
  bool pp_enabled = false;
  // Maximum relative factor change ||dS||_F / ||S_p||_F tolerated by the
  // pairwise-perturbation approximation.
  double pp_threshold = 0.1;
  // Perturbation sweeps allowed before the operators are rebuilt.
  std::size_t pp_recompute_after = 10;
  // Normal equations are shifted by ridge * trace(Gamma) / R.
  double ridge = 1e-12;
  // Upper bound on the memory the second-order operators may occupy.
  std::size_t pp_memory_limit_bytes = std::size_t{2} << 30;

  void validate() const;
};

enum class AlsTermination {
  kGradient,   // relative gradient below grad_tol
  kStall,      // fit change below 1e-12 for 10 consecutive sweeps
  kMaxSweeps,  // budget exhausted; best model returned
};

struct AlsReport {
  std::size_t sweeps_run = 0;
  double final_grad_norm = 0.0;
  double final_fit_error = 0.0;
  std::size_t exact_mttkrp_count = 0;
  std::size_t pp_mttkrp_count = 0;
  std::size_t pp_state_builds = 0;
  std::vector<double> per_sweep_fit;
  AlsTermination termination = AlsTermination::kMaxSweeps;

  bool converged() const noexcept { return termination != AlsTermination::kMaxSweeps; }
};

// Operators cached at the paused factors S_p for pairwise perturbation.
class PPState {
 public:
  PPState() = default;

  std::size_t order() const noexcept { return paused_factors_.size(); }
  std::size_t rank() const noexcept { return rank_; }
  bool stale() const noexcept { return stale_; }
  void mark_stale() noexcept { stale_ = true; }

  const std::vector<FactorMatrix>& paused_factors() const noexcept { return paused_factors_; }

  // M_p^(n): a_n x R.
  const Matrix& first_order(std::size_t mode) const { return first_order_.at(mode); }

  // Entry (x, y, k) of the second-order operator for modes (i, n): x indexes
  // mode i, y indexes mode n. Each unordered pair is stored once.
  double second_order(std::size_t i, std::size_t n, std::size_t x, std::size_t y, std::size_t k) const;

  // Storage for the pair {min(i,n), max(i,n)}, laid out as
  // (a_min x a_max x R) with the first index fastest.
  const PartialContraction& second_order_block(std::size_t i, std::size_t n) const;

  std::size_t second_order_count() const noexcept { return second_order_.size(); }

  // Distinct partial contractions evaluated while building.
  std::size_t contractions_computed() const noexcept { return contractions_computed_; }

 private:
  friend PPState build_pp_state(const DenseTensor&, const KruskalModel&, std::size_t);

  std::size_t pair_index(std::size_t i, std::size_t n) const;

  std::vector<FactorMatrix> paused_factors_;
  std::vector<Matrix> first_order_;
  std::vector<PartialContraction> second_order_;
  std::size_t rank_ = 0;
  std::size_t contractions_computed_ = 0;
  bool stale_ = false;
};

// Seeded uniform [0,1) factors with unit weights.
KruskalModel init_factors(const Shape& shape, const AlsConfig& config);

// Solves S_new Gamma^(n) = M^(n) with a ridge-regularized symmetric solve.
// The model weights are treated as folded into the returned matrix.
FactorMatrix als_update_mode(const DenseTensor& t, const KruskalModel& model, const GramSet& grams,
                             std::size_t mode, const AlsConfig& config);

// Same update from a precomputed right-hand side.
FactorMatrix solve_normal_equations(const Matrix& gamma, const Matrix& rhs, double ridge);

// sqrt(sum_n ||S~^(n) Gamma^(n) - M^(n)||_F^2) / ||t||_F, where S~^(n) is
// factor n with the weights folded in. Equals the plain gradient of
// 0.5 ||t - [[S^(1)..S^(N)]]||^2 when all weights are one.
double gradient_norm(const DenseTensor& t, const KruskalModel& model, const GramSet& grams);

// Builds every first- and second-order operator with a dimension-tree
// schedule: each distinct partial contraction is evaluated once. Throws
// ResourceError when the second-order operators would exceed
// `memory_limit_bytes`.
PPState build_pp_state(const DenseTensor& t, const KruskalModel& model,
                       std::size_t memory_limit_bytes = std::size_t{2} << 30);

// Approximate MTTKRP for `mode` from cached operators and the current
// factor displacements. Throws ContractError on a stale state.
Matrix pp_mttkrp(const PPState& state, const KruskalModel& model, std::size_t mode);

// Flips column signs so the largest-magnitude entry of every column in the
// leading N-1 modes is positive (compensating in the last mode) and orders
// components by descending weight.
void canonicalize(KruskalModel& model);

std::pair<KruskalModel, AlsReport> cp_als(const DenseTensor& t, const AlsConfig& config);

}  // namespace tdvc
