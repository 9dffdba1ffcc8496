#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tdvc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Shape = std::vector<std::size_t>;

// Column r of a factor matrix is the mode-n vector of rank-one term r.
using FactorMatrix = Matrix;

// Dense order-N tensor stored with the first index varying fastest.
// Modes are addressed 0-based throughout the library.
class DenseTensor {
 public:
  DenseTensor() = default;

  // Zero-filled tensor.
  explicit DenseTensor(Shape shape);

  // Throws DomainError when the data length disagrees with the shape or any
  // value is not finite.
  DenseTensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double operator()(std::span<const std::size_t> index) const { return data_[linear_index(index)]; }
  double& operator()(std::span<const std::size_t> index) { return data_[linear_index(index)]; }

  // Three-index access for the order-3 tensors the codec works with.
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[i + shape_[0] * (j + shape_[1] * k)];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[i + shape_[0] * (j + shape_[1] * k)];
  }

  std::size_t linear_index(std::span<const std::size_t> index) const;

  double frobenius_norm() const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Shape& shape);

// Rank-R CP model: t ~ sum_r weights[r] * s_r^(1) o ... o s_r^(N).
struct KruskalModel {
  std::vector<FactorMatrix> factors;
  Vector weights;

  std::size_t order() const noexcept { return factors.size(); }
  std::size_t rank() const noexcept { return factors.empty() ? 0 : static_cast<std::size_t>(factors.front().cols()); }
  Shape shape() const;

  // Throws DomainError when factor column counts disagree, weights have the
  // wrong length, or anything is non-finite.
  void validate() const;
};

// A^(i) = S^(i)^T S^(i) for every mode.
using GramSet = std::vector<Matrix>;

GramSet compute_grams(std::span<const FactorMatrix> factors);

// Mode-n unfolding: a_n x prod(other extents), remaining indices linearized
// with the smallest remaining mode fastest.
Matrix matricize(const DenseTensor& t, std::size_t mode);

DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape);

// Column-wise Kronecker product of every matrix except `skip`, with rows
// ordered to match the matricize column linearization (first listed mode
// fastest).
Matrix khatri_rao(std::span<const FactorMatrix> mats, std::optional<std::size_t> skip = std::nullopt);

// Elementwise product of all Grams except mode `skip`.
Matrix gram_hadamard(const GramSet& grams, std::size_t skip);

// Matricized tensor times Khatri-Rao product X_(n) K^(n) of the factor
// matrices (weights excluded). K^(n) is never materialized.
Matrix mttkrp(const DenseTensor& t, std::span<const FactorMatrix> factors, std::size_t mode);

inline Matrix mttkrp(const DenseTensor& t, const KruskalModel& model, std::size_t mode) {
  return mttkrp(t, model.factors, mode);
}

DenseTensor reconstruct(const KruskalModel& model);

// ||t - [[model]]||_F / ||t||_F, or the absolute norm when t is zero.
double fit_error(const DenseTensor& t, const KruskalModel& model);

// Intermediate of a partial contraction: the tensor with some modes
// contracted against factor columns. Uncontracted modes keep their original
// relative order (first fastest); when `rank` is nonzero the rank index is
// the slowest dimension.
struct PartialContraction {
  std::vector<std::size_t> modes;
  std::vector<std::size_t> extents;
  std::size_t rank = 0;
  std::vector<double> data;
};

PartialContraction as_partial(const DenseTensor& t);

// Contracts original mode `mode` of `p` with `factor` (extent x R), keeping
// the rank index batched.
PartialContraction contract_mode(const PartialContraction& p, std::size_t mode, const FactorMatrix& factor);

}  // namespace tdvc
