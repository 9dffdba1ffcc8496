#include "tdvc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tdvc/error.hpp"

namespace tdvc {
namespace {

void check_shape(const Shape& shape) {
  if (shape.size() < 2) throw DomainError("tensor order must be at least 2");
  for (std::size_t extent : shape) {
    if (extent == 0) throw DomainError("tensor extents must be positive");
  }
}

void check_mode(std::size_t mode, std::size_t order) {
  if (mode >= order) {
    throw DomainError("mode " + std::to_string(mode) + " out of range for order " + std::to_string(order));
  }
}

void check_factors(const Shape& shape, std::span<const FactorMatrix> factors) {
  if (factors.size() != shape.size()) throw DomainError("factor count does not match tensor order");
  const auto rank = factors.front().cols();
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (factors[n].cols() != rank) throw DomainError("factor matrices disagree on rank");
    if (static_cast<std::size_t>(factors[n].rows()) != shape[n]) {
      throw DomainError("factor " + std::to_string(n) + " rows do not match tensor extent");
    }
  }
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != element_count(shape_)) throw DomainError("tensor data length does not match shape");
  for (double v : data_) {
    if (!std::isfinite(v)) throw DomainError("tensor contains non-finite values");
  }
}

std::size_t DenseTensor::linear_index(std::span<const std::size_t> index) const {
  std::size_t linear = 0;
  for (std::size_t n = shape_.size(); n-- > 0;) linear = linear * shape_[n] + index[n];
  return linear;
}

double DenseTensor::frobenius_norm() const {
  double sum = 0.0;
  for (double v : data_) sum += v * v;
  return std::sqrt(sum);
}

Shape KruskalModel::shape() const {
  Shape s;
  s.reserve(factors.size());
  for (const auto& f : factors) s.push_back(static_cast<std::size_t>(f.rows()));
  return s;
}

void KruskalModel::validate() const {
  if (factors.size() < 2) throw DomainError("Kruskal model needs at least two factors");
  const auto r = factors.front().cols();
  if (r < 1) throw DomainError("Kruskal model rank must be positive");
  for (const auto& f : factors) {
    if (f.cols() != r) throw DomainError("factor matrices disagree on rank");
    if (f.rows() < 1) throw DomainError("factor matrices need at least one row");
    if (!f.allFinite()) throw DomainError("factor matrix contains non-finite values");
  }
  if (weights.size() != r) throw DomainError("weight vector length does not match rank");
  if (!weights.allFinite()) throw DomainError("weights contain non-finite values");
}

GramSet compute_grams(std::span<const FactorMatrix> factors) {
  GramSet grams;
  grams.reserve(factors.size());
  for (const auto& f : factors) grams.push_back(f.transpose() * f);
  return grams;
}

Matrix matricize(const DenseTensor& t, std::size_t mode) {
  check_mode(mode, t.order());
  const auto& shape = t.shape();
  const std::size_t mid = shape[mode];
  const std::size_t left = element_count(Shape(shape.begin(), shape.begin() + static_cast<std::ptrdiff_t>(mode)));
  const std::size_t right = t.size() / (left * mid);
  Matrix out(static_cast<Eigen::Index>(mid), static_cast<Eigen::Index>(left * right));
  const auto data = t.data();
  for (std::size_t rgt = 0; rgt < right; ++rgt) {
    for (std::size_t x = 0; x < mid; ++x) {
      const double* src = data.data() + left * (x + mid * rgt);
      for (std::size_t l = 0; l < left; ++l) {
        out(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(l + left * rgt)) = src[l];
      }
    }
  }
  return out;
}

DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape) {
  check_shape(shape);
  check_mode(mode, shape.size());
  const std::size_t mid = shape[mode];
  const std::size_t total = element_count(shape);
  if (static_cast<std::size_t>(m.rows()) != mid || static_cast<std::size_t>(m.cols()) * mid != total) {
    throw DomainError("matrix dimensions inconsistent with fold shape");
  }
  const std::size_t left = element_count(Shape(shape.begin(), shape.begin() + static_cast<std::ptrdiff_t>(mode)));
  const std::size_t right = total / (left * mid);
  std::vector<double> data(total);
  for (std::size_t rgt = 0; rgt < right; ++rgt) {
    for (std::size_t x = 0; x < mid; ++x) {
      double* dst = data.data() + left * (x + mid * rgt);
      for (std::size_t l = 0; l < left; ++l) {
        dst[l] = m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(l + left * rgt));
      }
    }
  }
  return DenseTensor(shape, std::move(data));
}

Matrix khatri_rao(std::span<const FactorMatrix> mats, std::optional<std::size_t> skip) {
  std::vector<const FactorMatrix*> kept;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    if (!skip || *skip != i) kept.push_back(&mats[i]);
  }
  if (kept.empty()) throw DomainError("Khatri-Rao product of an empty list");
  const Eigen::Index rank = kept.front()->cols();
  for (const auto* m : kept) {
    if (m->cols() != rank) throw DomainError("Khatri-Rao inputs disagree on column count");
  }
  Matrix out = Matrix::Ones(1, rank);
  for (const auto* m : kept) {
    const Eigen::Index prev = out.rows();
    Matrix next(prev * m->rows(), rank);
    for (Eigen::Index r = 0; r < rank; ++r) {
      for (Eigen::Index x = 0; x < m->rows(); ++x) {
        next.col(r).segment(x * prev, prev) = out.col(r) * (*m)(x, r);
      }
    }
    out = std::move(next);
  }
  return out;
}

Matrix gram_hadamard(const GramSet& grams, std::size_t skip) {
  check_mode(skip, grams.size());
  if (grams.size() < 2) throw DomainError("Gram set needs at least two modes");
  const Eigen::Index rank = grams.front().rows();
  Matrix out = Matrix::Ones(rank, rank);
  for (std::size_t i = 0; i < grams.size(); ++i) {
    if (i == skip) continue;
    if (grams[i].rows() != rank || grams[i].cols() != rank) throw DomainError("Gram matrices disagree on rank");
    out.array() *= grams[i].array();
  }
  return out;
}

PartialContraction as_partial(const DenseTensor& t) {
  PartialContraction p;
  p.modes.resize(t.order());
  std::iota(p.modes.begin(), p.modes.end(), std::size_t{0});
  p.extents = t.shape();
  p.data.assign(t.data().begin(), t.data().end());
  return p;
}

PartialContraction contract_mode(const PartialContraction& p, std::size_t mode, const FactorMatrix& factor) {
  const auto it = std::find(p.modes.begin(), p.modes.end(), mode);
  if (it == p.modes.end()) throw DomainError("mode already contracted");
  const auto pos = static_cast<std::size_t>(it - p.modes.begin());
  const std::size_t mid = p.extents[pos];
  if (static_cast<std::size_t>(factor.rows()) != mid) throw DomainError("factor rows do not match contracted extent");
  const std::size_t rank = static_cast<std::size_t>(factor.cols());
  if (p.rank != 0 && p.rank != rank) throw DomainError("factor rank does not match batched rank");

  std::size_t left = 1;
  for (std::size_t i = 0; i < pos; ++i) left *= p.extents[i];
  std::size_t right = 1;
  for (std::size_t i = pos + 1; i < p.extents.size(); ++i) right *= p.extents[i];

  PartialContraction q;
  q.modes = p.modes;
  q.modes.erase(q.modes.begin() + static_cast<std::ptrdiff_t>(pos));
  q.extents = p.extents;
  q.extents.erase(q.extents.begin() + static_cast<std::ptrdiff_t>(pos));
  q.rank = rank;
  q.data.assign(left * right * rank, 0.0);

  using ConstMap = Eigen::Map<const Matrix>;
  using StridedMap = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
  const auto L = static_cast<Eigen::Index>(left);
  const auto M = static_cast<Eigen::Index>(mid);
  const auto Rt = static_cast<Eigen::Index>(right);
  const auto R = static_cast<Eigen::Index>(rank);

  if (p.rank == 0) {
    if (left == 1) {
      // (right x R) = (mid x right)^T (mid x R)
      ConstMap src(p.data.data(), M, Rt);
      Eigen::Map<Matrix> dst(q.data.data(), Rt, R);
      dst.noalias() = src.transpose() * factor;
    } else {
      for (std::size_t rgt = 0; rgt < right; ++rgt) {
        ConstMap src(p.data.data() + left * mid * rgt, L, M);
        StridedMap dst(q.data.data() + left * rgt, L, R, Eigen::OuterStride<>(L * Rt));
        dst.noalias() = src * factor;
      }
    }
    return q;
  }

  for (std::size_t r = 0; r < rank; ++r) {
    const double* src_r = p.data.data() + left * mid * right * r;
    double* dst_r = q.data.data() + left * right * r;
    const auto column = factor.col(static_cast<Eigen::Index>(r));
    if (left == 1) {
      ConstMap src(src_r, M, Rt);
      Eigen::Map<Vector> dst(dst_r, Rt);
      dst.noalias() = src.transpose() * column;
    } else {
      for (std::size_t rgt = 0; rgt < right; ++rgt) {
        ConstMap src(src_r + left * mid * rgt, L, M);
        Eigen::Map<Vector> dst(dst_r + left * rgt, L);
        dst.noalias() = src * column;
      }
    }
  }
  return q;
}

Matrix mttkrp(const DenseTensor& t, std::span<const FactorMatrix> factors, std::size_t mode) {
  check_mode(mode, t.order());
  check_factors(t.shape(), factors);

  // Contract the largest extents first so intermediates shrink fastest.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < t.order(); ++i) {
    if (i != mode) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return t.extent(a) > t.extent(b); });

  PartialContraction p = contract_mode(as_partial(t), order.front(), factors[order.front()]);
  for (std::size_t k = 1; k < order.size(); ++k) p = contract_mode(p, order[k], factors[order[k]]);
  return Eigen::Map<const Matrix>(p.data.data(), static_cast<Eigen::Index>(t.extent(mode)), factors[0].cols());
}

DenseTensor reconstruct(const KruskalModel& model) {
  model.validate();
  const Matrix rest = khatri_rao(model.factors, 0);
  const Matrix unfolded = model.factors[0] * model.weights.asDiagonal() * rest.transpose();
  return DenseTensor(model.shape(), std::vector<double>(unfolded.data(), unfolded.data() + unfolded.size()));
}

double fit_error(const DenseTensor& t, const KruskalModel& model) {
  if (model.shape() != t.shape()) throw DomainError("model shape does not match tensor");
  const DenseTensor approx = reconstruct(model);
  double diff = 0.0;
  const auto a = t.data();
  const auto b = approx.data();
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double norm = t.frobenius_norm();
  return norm > 0.0 ? std::sqrt(diff) / norm : std::sqrt(diff);
}

}  // namespace tdvc
