#include "tdvc/cp_als.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "tdvc/error.hpp"

namespace tdvc {
namespace {

constexpr double kStallDelta = 1e-12;
constexpr std::size_t kStallSweeps = 10;

// Scales columns of `effective` to unit norm and returns the scales.
Vector normalize_columns(FactorMatrix& effective) {
  Vector scales(effective.cols());
  for (Eigen::Index r = 0; r < effective.cols(); ++r) {
    const double norm = effective.col(r).norm();
    scales[r] = norm;
    if (norm > 0.0) effective.col(r) /= norm;
  }
  return scales;
}

double relative_change(const FactorMatrix& now, const FactorMatrix& before) {
  const double base = before.norm();
  const double diff = (now - before).norm();
  return base > 0.0 ? diff / base : diff;
}

}  // namespace

void AlsConfig::validate() const {
  if (rank < 1) throw DomainError("rank must be at least 1");
  if (max_sweeps < 1) throw DomainError("max_sweeps must be at least 1");
  if (!(grad_tol > 0.0) || !(pp_threshold > 0.0) || !(ridge > 0.0)) {
    throw DomainError("ALS thresholds must be positive");
  }
  if (pp_recompute_after < 1) throw DomainError("pp_recompute_after must be at least 1");
}

KruskalModel init_factors(const Shape& shape, const AlsConfig& config) {
  config.validate();
  if (shape.size() < 2) throw DomainError("tensor order must be at least 2");
  std::mt19937_64 rng(config.seed);
  KruskalModel model;
  const auto rank = static_cast<Eigen::Index>(config.rank);
  for (std::size_t extent : shape) {
    if (extent == 0) throw DomainError("tensor extents must be positive");
    FactorMatrix f(static_cast<Eigen::Index>(extent), rank);
    for (Eigen::Index r = 0; r < rank; ++r) {
      for (Eigen::Index i = 0; i < f.rows(); ++i) {
        // 53 random bits -> [0, 1), independent of the library's distributions.
        f(i, r) = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      }
    }
    model.factors.push_back(std::move(f));
  }
  model.weights = Vector::Ones(rank);
  return model;
}

FactorMatrix solve_normal_equations(const Matrix& gamma, const Matrix& rhs, double ridge) {
  const Eigen::Index rank = gamma.rows();
  const double shift = ridge * gamma.trace() / static_cast<double>(rank);
  Matrix regularized = gamma;
  regularized.diagonal().array() += shift;

  // S Gamma = M  <=>  Gamma S^T = M^T for symmetric Gamma.
  FactorMatrix solution;
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() == Eigen::Success) {
    solution = llt.solve(rhs.transpose()).transpose();
  }
  if (solution.size() == 0 || !solution.allFinite()) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(regularized);
    solution = cod.solve(rhs.transpose()).transpose();
  }
  if (!solution.allFinite()) {
    throw ConvergenceError("normal equations singular beyond ridge rescue (trace " +
                           std::to_string(gamma.trace()) + ", rank " + std::to_string(rank) + ")");
  }
  return solution;
}

FactorMatrix als_update_mode(const DenseTensor& t, const KruskalModel& model, const GramSet& grams,
                             std::size_t mode, const AlsConfig& config) {
  if (grams.size() != model.order()) throw DomainError("Gram set does not match model order");
  const Matrix rhs = mttkrp(t, model.factors, mode);
  return solve_normal_equations(gram_hadamard(grams, mode), rhs, config.ridge);
}

double gradient_norm(const DenseTensor& t, const KruskalModel& model, const GramSet& grams) {
  model.validate();
  if (grams.size() != model.order()) throw DomainError("Gram set does not match model order");
  double sum = 0.0;
  for (std::size_t n = 0; n < model.order(); ++n) {
    const Matrix effective = model.factors[n] * model.weights.asDiagonal();
    const Matrix component = effective * gram_hadamard(grams, n) - mttkrp(t, model.factors, n);
    sum += component.squaredNorm();
  }
  const double norm = t.frobenius_norm();
  return norm > 0.0 ? std::sqrt(sum) / norm : std::sqrt(sum);
}

// ---------------------------------------------------------------------------
// Pairwise perturbation

std::size_t PPState::pair_index(std::size_t i, std::size_t n) const {
  const std::size_t order = paused_factors_.size();
  if (i == n || i >= order || n >= order) throw DomainError("invalid mode pair");
  const std::size_t a = std::min(i, n);
  const std::size_t b = std::max(i, n);
  // Row-major enumeration of the strict upper triangle.
  return a * order - a * (a + 1) / 2 + (b - a - 1);
}

const PartialContraction& PPState::second_order_block(std::size_t i, std::size_t n) const {
  return second_order_[pair_index(i, n)];
}

double PPState::second_order(std::size_t i, std::size_t n, std::size_t x, std::size_t y, std::size_t k) const {
  const PartialContraction& block = second_order_block(i, n);
  const std::size_t lo = i < n ? x : y;
  const std::size_t hi = i < n ? y : x;
  const std::size_t plane = block.extents[0] * block.extents[1];
  const std::size_t offset = lo + block.extents[0] * hi;
  return block.rank == 0 ? block.data[offset] : block.data[offset + plane * k];
}

PPState build_pp_state(const DenseTensor& t, const KruskalModel& model, std::size_t memory_limit_bytes) {
  model.validate();
  if (model.shape() != t.shape()) throw DomainError("model shape does not match tensor");
  const std::size_t order = t.order();
  if (order > 63) throw DomainError("tensor order too large for pairwise perturbation");
  const std::size_t rank = model.rank();

  std::size_t second_order_bytes = 0;
  for (std::size_t a = 0; a < order; ++a) {
    for (std::size_t b = a + 1; b < order; ++b) {
      second_order_bytes += t.extent(a) * t.extent(b) * rank * sizeof(double);
    }
  }
  if (second_order_bytes > memory_limit_bytes) {
    throw ResourceError("pairwise-perturbation operators need " + std::to_string(second_order_bytes) +
                        " bytes (limit " + std::to_string(memory_limit_bytes) +
                        "); split the sequence into smaller frame groups");
  }

  PPState state;
  state.paused_factors_ = model.factors;
  state.rank_ = rank;

  // Dimension tree: a set of contracted modes is reached from the set minus
  // its smallest-extent member, so shared prefixes are contracted once.
  const PartialContraction raw = as_partial(t);
  std::map<std::uint64_t, PartialContraction> memo;
  auto members_of = [&](std::uint64_t mask) {
    std::vector<std::size_t> members;
    for (std::size_t m = 0; m < order; ++m) {
      if (mask & (std::uint64_t{1} << m)) members.push_back(m);
    }
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return t.extent(a) > t.extent(b); });
    return members;
  };
  auto contracted = [&](auto&& self, std::uint64_t mask) -> const PartialContraction& {
    if (mask == 0) return raw;
    if (auto it = memo.find(mask); it != memo.end()) return it->second;
    const auto members = members_of(mask);
    const std::size_t last = members.back();
    const PartialContraction& parent = self(self, mask & ~(std::uint64_t{1} << last));
    PartialContraction next = contract_mode(parent, last, model.factors[last]);
    ++state.contractions_computed_;
    return memo.emplace(mask, std::move(next)).first->second;
  };

  const std::uint64_t all = (order == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << order) - 1);
  for (std::size_t a = 0; a < order; ++a) {
    for (std::size_t b = a + 1; b < order; ++b) {
      const std::uint64_t mask = all & ~(std::uint64_t{1} << a) & ~(std::uint64_t{1} << b);
      state.second_order_.push_back(contracted(contracted, mask));
    }
  }
  for (std::size_t n = 0; n < order; ++n) {
    const PartialContraction& p = contracted(contracted, all & ~(std::uint64_t{1} << n));
    state.first_order_.push_back(
        Eigen::Map<const Matrix>(p.data.data(), static_cast<Eigen::Index>(t.extent(n)),
                                 static_cast<Eigen::Index>(rank)));
  }
  return state;
}

Matrix pp_mttkrp(const PPState& state, const KruskalModel& model, std::size_t mode) {
  if (state.stale()) throw ContractError("pairwise-perturbation state is stale");
  if (mode >= state.order()) throw DomainError("mode out of range");
  if (model.order() != state.order() || model.rank() != state.rank()) {
    throw DomainError("model does not match pairwise-perturbation state");
  }
  Matrix approx = state.first_order(mode);
  const auto rank = static_cast<Eigen::Index>(state.rank());
  const auto rows_n = approx.rows();
  for (std::size_t i = 0; i < state.order(); ++i) {
    if (i == mode) continue;
    const FactorMatrix delta = model.factors[i] - state.paused_factors()[i];
    if ((delta.array() == 0.0).all()) continue;
    const PartialContraction& block = state.second_order_block(i, mode);
    const auto rows_i = delta.rows();
    const Eigen::Index plane = rows_i * rows_n;
    for (Eigen::Index k = 0; k < rank; ++k) {
      const double* base = block.data.data() + (block.rank == 0 ? 0 : plane * k);
      if (i < mode) {
        // Block is (a_i x a_n): contract over its rows.
        Eigen::Map<const Matrix> b(base, rows_i, rows_n);
        approx.col(k).noalias() += b.transpose() * delta.col(k);
      } else {
        Eigen::Map<const Matrix> b(base, rows_n, rows_i);
        approx.col(k).noalias() += b * delta.col(k);
      }
    }
  }
  return approx;
}

// ---------------------------------------------------------------------------
// Driver

void canonicalize(KruskalModel& model) {
  model.validate();
  const std::size_t order = model.order();
  const Eigen::Index rank = static_cast<Eigen::Index>(model.rank());
  for (Eigen::Index r = 0; r < rank; ++r) {
    for (std::size_t n = 0; n + 1 < order; ++n) {
      auto column = model.factors[n].col(r);
      Eigen::Index at = 0;
      column.cwiseAbs().maxCoeff(&at);
      if (column[at] < 0.0) {
        column *= -1.0;
        model.factors[order - 1].col(r) *= -1.0;
      }
    }
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(rank));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return model.weights[a] > model.weights[b]; });
  KruskalModel sorted = model;
  for (Eigen::Index r = 0; r < rank; ++r) {
    const Eigen::Index src = perm[static_cast<std::size_t>(r)];
    sorted.weights[r] = model.weights[src];
    for (std::size_t n = 0; n < order; ++n) sorted.factors[n].col(r) = model.factors[n].col(src);
  }
  model = std::move(sorted);
}

std::pair<KruskalModel, AlsReport> cp_als(const DenseTensor& t, const AlsConfig& config) {
  config.validate();
  const std::size_t order = t.order();
  const double tensor_norm = t.frobenius_norm();
  const double norm_scale = tensor_norm > 0.0 ? tensor_norm : 1.0;

  KruskalModel model = init_factors(t.shape(), config);
  for (auto& f : model.factors) normalize_columns(f);
  GramSet grams = compute_grams(model.factors);

  AlsReport report;
  KruskalModel best = model;
  double best_fit = std::numeric_limits<double>::infinity();
  std::size_t stall_run = 0;
  double previous_fit = std::numeric_limits<double>::infinity();

  std::optional<PPState> pp;
  std::size_t pp_sweeps = 0;

  auto rebuild_pp = [&] {
    pp = build_pp_state(t, model, config.pp_memory_limit_bytes);
    report.exact_mttkrp_count += order;
    ++report.pp_state_builds;
    pp_sweeps = 0;
  };

  for (std::size_t sweep = 0; sweep < config.max_sweeps; ++sweep) {
    const bool pp_sweep = pp.has_value() && !pp->stale();
    const std::vector<FactorMatrix> before = model.factors;
    double surrogate = 0.0;

    for (std::size_t n = 0; n < order; ++n) {
      Matrix rhs;
      if (pp.has_value() && !pp->stale()) {
        rhs = pp_mttkrp(*pp, model, n);
        ++report.pp_mttkrp_count;
      } else {
        rhs = mttkrp(t, model.factors, n);
        ++report.exact_mttkrp_count;
      }
      const Matrix gamma = gram_hadamard(grams, n);
      const Matrix effective = model.factors[n] * model.weights.asDiagonal();
      surrogate += (effective * gamma - rhs).squaredNorm();

      FactorMatrix updated = solve_normal_equations(gamma, rhs, config.ridge);
      model.weights = normalize_columns(updated);
      model.factors[n] = std::move(updated);
      grams[n] = model.factors[n].transpose() * model.factors[n];

      if (pp.has_value() && !pp->stale() &&
          relative_change(model.factors[n], pp->paused_factors()[n]) > config.pp_threshold) {
        pp->mark_stale();
      }
    }

    const double fit = fit_error(t, model);
    report.per_sweep_fit.push_back(fit);
    report.sweeps_run = sweep + 1;
    if (fit < best_fit) {
      best_fit = fit;
      best = model;
    }

    if (std::abs(previous_fit - fit) < kStallDelta) {
      ++stall_run;
    } else {
      stall_run = 0;
    }
    previous_fit = fit;

    if (std::sqrt(surrogate) / norm_scale < config.grad_tol) {
      // The in-sweep gradients are evaluated at intermediate iterates (and
      // from approximate MTTKRPs in perturbation sweeps); confirm exactly.
      report.exact_mttkrp_count += order;
      if (gradient_norm(t, model, grams) < config.grad_tol) {
        best = model;
        report.termination = AlsTermination::kGradient;
        break;
      }
    }
    if (stall_run >= kStallSweeps) {
      report.termination = AlsTermination::kStall;
      break;
    }

    if (!config.pp_enabled) continue;
    if (pp_sweep) {
      ++pp_sweeps;
      if (!pp->stale() && pp_sweeps >= config.pp_recompute_after) rebuild_pp();
    } else {
      double change = 0.0;
      for (std::size_t n = 0; n < order; ++n) change = std::max(change, relative_change(model.factors[n], before[n]));
      if (change < config.pp_threshold) rebuild_pp();
    }
  }

  model = std::move(best);
  grams = compute_grams(model.factors);
  report.final_fit_error = fit_error(t, model);
  report.final_grad_norm = gradient_norm(t, model, grams);
  canonicalize(model);
  return {std::move(model), std::move(report)};
}

}  // namespace tdvc
