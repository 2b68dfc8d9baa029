#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "tpsmooth/priors.hpp"
#include "tpsmooth/tensor.hpp"

namespace tpsmooth {

using tensor::index_t;

// Second-order difference penalty of one marginal basis together with its
// symmetric eigendecomposition. Eigenvalues are ascending; the two null
// directions (constant and linear) are clamped to exactly zero and their
// count is verified rather than assumed.
class MarginalPenalty {
 public:
  explicit MarginalPenalty(int dim);

  int dim() const { return dim_; }
  const Eigen::MatrixXd& matrix() const { return k_; }
  const Eigen::MatrixXd& eigenvectors() const { return q_; }
  const Eigen::VectorXd& eigenvalues() const { return gamma_; }

 private:
  int dim_;
  Eigen::MatrixXd k_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd gamma_;
};

// Joint eigenstructure of the Kronecker-sum penalty K(tau^2) = sum_j K_j /
// tau_j^2. The D-long diagonal table gamma_{j,l} is addressed through the
// mixed-radix digits of l instead of being materialized, and the positive
// index set D+ (indices where some gamma_{j,l} > 0) is characterized by "any
// digit >= 2" since each marginal contributes exactly two null directions.
class PenaltyEigenstructure {
 public:
  explicit PenaltyEigenstructure(std::vector<MarginalPenalty> marginals);

  int p() const { return static_cast<int>(marginals_.size()); }
  index_t coef_dim() const { return coef_dim_; }
  index_t positive_count() const { return positive_count_; }
  const std::vector<MarginalPenalty>& marginals() const { return marginals_; }
  std::vector<int> dims() const;

  // gamma_{j,l}: eigenvalue of the j-th marginal selected by digit j of l.
  double gamma(int j, index_t l) const;

  // log pseudo-determinant of K(e^rho): sum over D+ of
  // log(gamma_{1,l} e^{-rho_1} + ... + gamma_{p,l} e^{-rho_p}).
  double log_pseudo_det(const Eigen::VectorXd& rho) const;

  // K_j as a D x D sparse matrix (identity Kronecker embedding of the
  // marginal penalty). Used for precision assembly, not for quadratic forms.
  Eigen::SparseMatrix<double> embedded_penalty(int j) const;

 private:
  std::vector<MarginalPenalty> marginals_;
  index_t coef_dim_ = 0;
  index_t positive_count_ = 0;
};

// The vector (b' K_1 b, ..., b' K_p b), computed matrix-free from second
// differences along each mode.
struct QuadraticForms {
  Eigen::VectorXd value;
};

QuadraticForms quadratic_forms(const PenaltyEigenstructure& es,
                               const Eigen::VectorXd& b);

// Log full conditional of the log-smoothing variances rho given b, up to its
// additive constant:
//   1/2 log pseudo-det K(e^rho) - 1/2 sum_j (b'K_j b) e^{-rho_j} + log q(rho).
double log_fcp_rho(const PenaltyEigenstructure& es, const Eigen::VectorXd& rho,
                   const QuadraticForms& qf, const SmoothingPrior& prior);

struct RhoDerivatives {
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Gradient and Hessian of log_fcp_rho, assembled in one pass over D+.
RhoDerivatives grad_hess_rho(const PenaltyEigenstructure& es,
                             const Eigen::VectorXd& rho,
                             const QuadraticForms& qf,
                             const SmoothingPrior& prior);

}  // namespace tpsmooth
