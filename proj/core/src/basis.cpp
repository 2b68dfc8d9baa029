#include "tpsmooth/basis.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "tpsmooth/errors.hpp"

namespace tpsmooth {

namespace {

// Cumulative integral of the unit-knot cubic B-spline at integer offsets
// 0..4, from the B-spline integral recurrence.
constexpr double kCumulative[5] = {0.0, 1.0 / 24.0, 12.0 / 24.0, 23.0 / 24.0,
                                   1.0};

}  // namespace

MarginalBasis::MarginalBasis(int dim) : dim_(dim) {
  if (dim < 4) throw validation_error("marginal basis needs at least 4 functions");
  const int intervals = dim - 3;
  spacing_ = 1.0 / intervals;
  knots_.resize(dim + 4);
  for (int i = 0; i < dim + 4; ++i) knots_[i] = (i - 3) * spacing_;
  averages_.resize(dim);
  for (int i = 0; i < dim; ++i) {
    const int lo = std::max(0, 3 - i);
    const int hi = std::min(4, dim - i);
    averages_[i] = spacing_ * (kCumulative[hi] - kCumulative[lo]);
  }
}

MarginalBasis::Support MarginalBasis::eval(double x) const {
  if (!(x >= 0.0 && x <= 1.0))
    throw validation_error("basis evaluation point outside [0,1]");
  // Interval containing x; x = 1 belongs to the last one.
  int cell = std::min(static_cast<int>(x / spacing_), dim_ - 4);
  const int span = cell + 3;  // knot index with knots_[span] <= x <= knots_[span+1]

  // Banded Cox-de Boor recurrence over the four active functions.
  std::array<double, 4> values{1.0, 0.0, 0.0, 0.0};
  std::array<double, 4> left{}, right{};
  for (int j = 1; j <= 3; ++j) {
    left[j] = x - knots_[span + 1 - j];
    right[j] = knots_[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
  return Support{cell, values};
}

Eigen::VectorXd MarginalBasis::eval_dense(double x) const {
  const Support s = eval(x);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  for (int k = 0; k < 4; ++k) out[s.offset + k] = s.value[k];
  return out;
}

SparseRow design_row(std::span<const MarginalBasis> bases,
                     std::span<const double> x) {
  const int p = static_cast<int>(bases.size());
  if (static_cast<int>(x.size()) != p)
    throw validation_error("design_row: point dimension does not match bases");

  std::vector<MarginalBasis::Support> supports(p);
  std::vector<int> dims(p);
  for (int j = 0; j < p; ++j) {
    supports[j] = bases[j].eval(x[j]);
    dims[j] = bases[j].dim();
  }
  const auto strides = tensor::strides(dims);

  index_t nnz = 1;
  for (int j = 0; j < p; ++j) nnz *= 4;

  SparseRow row;
  row.index.reserve(nnz);
  row.value.reserve(nnz);

  // Odometer over the 4^p local digits; last coordinate fastest, which keeps
  // global indices ascending.
  std::vector<int> digit(p, 0);
  index_t base = 0;
  for (int j = 0; j < p; ++j) base += supports[j].offset * strides[j];
  for (;;) {
    index_t idx = base;
    double v = 1.0;
    for (int j = 0; j < p; ++j) {
      idx += digit[j] * strides[j];
      v *= supports[j].value[digit[j]];
    }
    row.index.push_back(idx);
    row.value.push_back(v);
    int j = p - 1;
    while (j >= 0 && digit[j] == 3) digit[j--] = 0;
    if (j < 0) break;
    ++digit[j];
  }
  return row;
}

std::vector<int> TensorDesign::dims() const {
  std::vector<int> out(bases_.size());
  for (std::size_t j = 0; j < bases_.size(); ++j) out[j] = bases_[j].dim();
  return out;
}

TensorDesign::TensorDesign(std::vector<MarginalBasis> bases,
                           const Eigen::MatrixXd& points,
                           const Eigen::VectorXd& y)
    : bases_(std::move(bases)) {
  const int p = static_cast<int>(bases_.size());
  if (p == 0) throw validation_error("tensor design needs at least one basis");
  if (points.rows() == 0) throw validation_error("tensor design: empty data");
  if (points.cols() != p)
    throw validation_error("tensor design: point dimension does not match bases");
  if (y.size() != points.rows())
    throw validation_error("tensor design: response length does not match data");

  coef_dim_ = 1;
  for (const auto& b : bases_) coef_dim_ *= b.dim();

  const index_t n = points.rows();
  row_ptr_.reserve(n + 1);
  row_ptr_.push_back(0);
  bty_ = Eigen::VectorXd::Zero(coef_dim_);

  std::vector<double> x(p);
  for (index_t i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      x[j] = points(i, j);
      if (!(x[j] >= 0.0 && x[j] <= 1.0))
        throw validation_error("tensor design: coordinate outside [0,1] in row " +
                               std::to_string(i));
    }
    SparseRow r = design_row(bases_, x);
    col_.insert(col_.end(), r.index.begin(), r.index.end());
    val_.insert(val_.end(), r.value.begin(), r.value.end());
    row_ptr_.push_back(static_cast<index_t>(col_.size()));
    for (std::size_t k = 0; k < r.index.size(); ++k)
      bty_[r.index[k]] += r.value[k] * y[i];
  }

  // Accumulate the Gram matrix. Dense scratch when D is small, hashed
  // accumulation of the upper triangle otherwise.
  std::vector<Eigen::Triplet<double>> triplets;
  if (coef_dim_ <= 2048) {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(coef_dim_, coef_dim_);
    for (index_t i = 0; i < n; ++i) {
      for (index_t a = row_ptr_[i]; a < row_ptr_[i + 1]; ++a)
        for (index_t b = a; b < row_ptr_[i + 1]; ++b)
          dense(col_[a], col_[b]) += val_[a] * val_[b];
    }
    for (index_t r = 0; r < coef_dim_; ++r)
      for (index_t c = r; c < coef_dim_; ++c)
        if (dense(r, c) != 0.0) {
          triplets.emplace_back(r, c, dense(r, c));
          if (c != r) triplets.emplace_back(c, r, dense(r, c));
        }
  } else {
    std::unordered_map<std::uint64_t, double> acc;
    acc.reserve(static_cast<std::size_t>(n) * 8);
    for (index_t i = 0; i < n; ++i) {
      for (index_t a = row_ptr_[i]; a < row_ptr_[i + 1]; ++a)
        for (index_t b = a; b < row_ptr_[i + 1]; ++b)
          acc[static_cast<std::uint64_t>(col_[a]) * coef_dim_ + col_[b]] +=
              val_[a] * val_[b];
    }
    triplets.reserve(2 * acc.size());
    for (const auto& [key, v] : acc) {
      const index_t r = static_cast<index_t>(key / coef_dim_);
      const index_t c = static_cast<index_t>(key % coef_dim_);
      triplets.emplace_back(r, c, v);
      if (c != r) triplets.emplace_back(c, r, v);
    }
  }
  btb_.resize(coef_dim_, coef_dim_);
  btb_.setFromTriplets(triplets.begin(), triplets.end());
  btb_.makeCompressed();
}

SparseRow TensorDesign::row(index_t i) const {
  SparseRow out;
  out.index.assign(col_.begin() + row_ptr_[i], col_.begin() + row_ptr_[i + 1]);
  out.value.assign(val_.begin() + row_ptr_[i], val_.begin() + row_ptr_[i + 1]);
  return out;
}

double TensorDesign::row_dot(index_t i, const Eigen::VectorXd& b) const {
  double acc = 0.0;
  for (index_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
    acc += val_[k] * b[col_[k]];
  return acc;
}

Eigen::VectorXd TensorDesign::apply(const Eigen::VectorXd& b) const {
  if (b.size() != coef_dim_)
    throw validation_error("tensor design: coefficient length mismatch");
  Eigen::VectorXd out(n());
  for (index_t i = 0; i < n(); ++i) out[i] = row_dot(i, b);
  return out;
}

}  // namespace tpsmooth
