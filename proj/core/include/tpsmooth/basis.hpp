#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <span>
#include <vector>

#include "tpsmooth/tensor.hpp"

namespace tpsmooth {

using tensor::index_t;

// Cubic B-spline basis covering [0,1] with equidistant knots extended three
// steps beyond each boundary (no clamping), so a second-difference penalty
// keeps {constant, linear} as its null space. `dim` basis functions span
// dim - 3 interior intervals.
class MarginalBasis {
 public:
  explicit MarginalBasis(int dim);

  int dim() const { return dim_; }
  double knot_spacing() const { return spacing_; }
  const std::vector<double>& knots() const { return knots_; }

  // Exact integrals of each basis function over [0,1]; positive, palindromic,
  // summing to one.
  const Eigen::VectorXd& averages() const { return averages_; }

  // The at-most-four nonzero basis values at x, and the index of the first.
  struct Support {
    int offset;
    std::array<double, 4> value;
  };
  Support eval(double x) const;

  // All dim basis values at x (zeros outside the active window).
  Eigen::VectorXd eval_dense(double x) const;

 private:
  int dim_;
  double spacing_;
  std::vector<double> knots_;
  Eigen::VectorXd averages_;
};

struct SparseRow {
  std::vector<index_t> index;  // ascending
  std::vector<double> value;
};

// One row of the tensor-product design matrix at the point x; at most 4^p
// nonzeros, summing to one. Coordinate 0 is the slowest-varying index.
SparseRow design_row(std::span<const MarginalBasis> bases,
                     std::span<const double> x);

// The assembled n x D tensor-product design: rows in compressed sparse form
// plus the cached cross-products the sampler needs.
class TensorDesign {
 public:
  TensorDesign(std::vector<MarginalBasis> bases, const Eigen::MatrixXd& points,
               const Eigen::VectorXd& y);

  int p() const { return static_cast<int>(bases_.size()); }
  index_t n() const { return static_cast<index_t>(row_ptr_.size()) - 1; }
  index_t coef_dim() const { return coef_dim_; }
  const std::vector<MarginalBasis>& bases() const { return bases_; }
  std::vector<int> dims() const;

  const Eigen::SparseMatrix<double>& btb() const { return btb_; }
  const Eigen::VectorXd& bty() const { return bty_; }

  SparseRow row(index_t i) const;
  double row_dot(index_t i, const Eigen::VectorXd& b) const;

  // B * b, the fitted values for a coefficient vector.
  Eigen::VectorXd apply(const Eigen::VectorXd& b) const;

 private:
  std::vector<MarginalBasis> bases_;
  index_t coef_dim_ = 0;
  std::vector<index_t> row_ptr_;
  std::vector<index_t> col_;
  std::vector<double> val_;
  Eigen::SparseMatrix<double> btb_;
  Eigen::VectorXd bty_;
};

}  // namespace tpsmooth
