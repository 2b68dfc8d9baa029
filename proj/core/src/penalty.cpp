#include "tpsmooth/penalty.hpp"

#include <cmath>
#include <string>

#include "tpsmooth/errors.hpp"

namespace tpsmooth {

MarginalPenalty::MarginalPenalty(int dim) : dim_(dim) {
  if (dim < 4) throw validation_error("difference penalty needs dimension >= 4");

  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(dim - 2, dim);
  for (int r = 0; r < dim - 2; ++r) {
    d2(r, r) = 1.0;
    d2(r, r + 1) = -2.0;
    d2(r, r + 2) = 1.0;
  }
  k_ = d2.transpose() * d2;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k_);
  if (solver.info() != Eigen::Success)
    throw numerical_error("marginal penalty eigendecomposition failed");
  q_ = solver.eigenvectors();
  gamma_ = solver.eigenvalues();

  // Clamp the null space to exactly zero and insist on rank dim - 2; a
  // misclassified rank would silently corrupt every pseudo-determinant.
  const double eps = 1e-10 * gamma_[dim - 1];
  int zeros = 0;
  for (int i = 0; i < dim; ++i) {
    if (gamma_[i] < eps) {
      gamma_[i] = 0.0;
      ++zeros;
    }
  }
  if (zeros != 2)
    throw numerical_error("difference penalty nullity is " +
                          std::to_string(zeros) + ", expected 2 (dim " +
                          std::to_string(dim) + ")");
}

PenaltyEigenstructure::PenaltyEigenstructure(
    std::vector<MarginalPenalty> marginals)
    : marginals_(std::move(marginals)) {
  if (marginals_.empty())
    throw validation_error("eigenstructure needs at least one marginal penalty");
  coef_dim_ = 1;
  index_t nullity = 1;
  for (const auto& m : marginals_) {
    coef_dim_ *= m.dim();
    nullity *= 2;
  }
  positive_count_ = coef_dim_ - nullity;
}

std::vector<int> PenaltyEigenstructure::dims() const {
  std::vector<int> out(marginals_.size());
  for (std::size_t j = 0; j < marginals_.size(); ++j) out[j] = marginals_[j].dim();
  return out;
}

double PenaltyEigenstructure::gamma(int j, index_t l) const {
  index_t stride = 1;
  for (int k = p() - 1; k > j; --k) stride *= marginals_[k].dim();
  const int digit = static_cast<int>((l / stride) % marginals_[j].dim());
  return marginals_[j].eigenvalues()[digit];
}

double PenaltyEigenstructure::log_pseudo_det(const Eigen::VectorXd& rho) const {
  const int np = p();
  if (rho.size() != np)
    throw validation_error("log_pseudo_det: rho length mismatch");

  // Marginal eigenvalues pre-scaled by e^{-rho_j}.
  std::vector<const double*> ev(np);
  std::vector<Eigen::VectorXd> scaled(np);
  for (int j = 0; j < np; ++j) {
    scaled[j] = marginals_[j].eigenvalues() * std::exp(-rho[j]);
    ev[j] = scaled[j].data();
  }

  std::vector<int> digit(np, 0);
  double acc = 0.0;
  for (index_t l = 0; l < coef_dim_; ++l) {
    bool in_positive = false;
    double s = 0.0;
    for (int j = 0; j < np; ++j) {
      s += ev[j][digit[j]];
      in_positive = in_positive || digit[j] >= 2;
    }
    if (in_positive) acc += std::log(s);
    int j = np - 1;
    while (j >= 0 && digit[j] == marginals_[j].dim() - 1) digit[j--] = 0;
    if (j >= 0) ++digit[j];
  }
  return acc;
}

Eigen::SparseMatrix<double> PenaltyEigenstructure::embedded_penalty(int j) const {
  const auto dims = this->dims();
  const auto strides = tensor::strides(dims);
  const int dj = dims[j];
  const Eigen::MatrixXd& kj = marginals_[j].matrix();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(coef_dim_) * 5);
  for (index_t l = 0; l < coef_dim_; ++l) {
    const int ij = static_cast<int>((l / strides[j]) % dj);
    const int lo = std::max(0, ij - 2);
    const int hi = std::min(dj - 1, ij + 2);
    for (int i2 = lo; i2 <= hi; ++i2) {
      const double v = kj(ij, i2);
      if (v != 0.0)
        triplets.emplace_back(l, l + (i2 - ij) * strides[j], v);
    }
  }
  Eigen::SparseMatrix<double> out(coef_dim_, coef_dim_);
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

QuadraticForms quadratic_forms(const PenaltyEigenstructure& es,
                               const Eigen::VectorXd& b) {
  if (b.size() != es.coef_dim())
    throw validation_error("quadratic_forms: coefficient length mismatch");
  const auto dims = es.dims();
  QuadraticForms qf;
  qf.value.resize(es.p());
  for (int j = 0; j < es.p(); ++j)
    qf.value[j] = tensor::second_diff_quadform(b, dims, j);
  return qf;
}

double log_fcp_rho(const PenaltyEigenstructure& es, const Eigen::VectorXd& rho,
                   const QuadraticForms& qf, const SmoothingPrior& prior) {
  double acc = 0.5 * es.log_pseudo_det(rho);
  for (int j = 0; j < es.p(); ++j)
    acc -= 0.5 * qf.value[j] * std::exp(-rho[j]);
  return acc + prior.log_kernel(rho);
}

RhoDerivatives grad_hess_rho(const PenaltyEigenstructure& es,
                             const Eigen::VectorXd& rho,
                             const QuadraticForms& qf,
                             const SmoothingPrior& prior) {
  const int np = es.p();
  if (rho.size() != np || qf.value.size() != np)
    throw validation_error("grad_hess_rho: dimension mismatch");

  std::vector<Eigen::VectorXd> scaled(np);
  std::vector<const double*> ev(np);
  for (int j = 0; j < np; ++j) {
    scaled[j] = es.marginals()[j].eigenvalues() * std::exp(-rho[j]);
    ev[j] = scaled[j].data();
  }

  RhoDerivatives out;
  out.grad = Eigen::VectorXd::Zero(np);
  out.hess = Eigen::MatrixXd::Zero(np, np);
  std::vector<double> ratio(np);
  std::vector<int> digit(np, 0);

  for (index_t l = 0; l < es.coef_dim(); ++l) {
    bool in_positive = false;
    double s = 0.0;
    for (int j = 0; j < np; ++j) {
      s += ev[j][digit[j]];
      in_positive = in_positive || digit[j] >= 2;
    }
    if (in_positive) {
      for (int j = 0; j < np; ++j) ratio[j] = ev[j][digit[j]] / s;
      for (int j = 0; j < np; ++j) {
        const double r = ratio[j];
        out.grad[j] -= 0.5 * r;
        out.hess(j, j) -= 0.5 * (r * r - r);
        for (int k = j + 1; k < np; ++k) out.hess(j, k) -= 0.5 * r * ratio[k];
      }
    }
    int j = np - 1;
    while (j >= 0 && digit[j] == es.marginals()[j].dim() - 1) digit[j--] = 0;
    if (j >= 0) ++digit[j];
  }

  const SmoothingPrior::Derivs pd = prior.kernel_derivs(rho);
  for (int j = 0; j < np; ++j) {
    const double qe = qf.value[j] * std::exp(-rho[j]);
    out.grad[j] += 0.5 * qe + pd.grad[j];
    out.hess(j, j) += -0.5 * qe + pd.hess_diag[j];
    for (int k = j + 1; k < np; ++k) out.hess(k, j) = out.hess(j, k);
  }
  return out;
}

}  // namespace tpsmooth
