#include "tpsmooth/priors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "tpsmooth/basis.hpp"
#include "tpsmooth/errors.hpp"
#include "tpsmooth/penalty.hpp"
#include "tpsmooth/rng.hpp"

namespace tpsmooth {

SmoothingPrior::SmoothingPrior(Kind kind, Eigen::VectorXd a, Eigen::VectorXd b)
    : kind_(kind), a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() == 0) throw validation_error("smoothing prior needs p >= 1");
  if ((a_.array() <= 0.0).any() || (b_.size() > 0 && (b_.array() <= 0.0).any()))
    throw validation_error("smoothing prior hyperparameters must be positive");
}

SmoothingPrior SmoothingPrior::inverse_gamma(Eigen::VectorXd alpha,
                                             Eigen::VectorXd beta) {
  if (alpha.size() != beta.size())
    throw validation_error("inverse gamma prior: alpha/beta length mismatch");
  return SmoothingPrior(Kind::inverse_gamma, std::move(alpha), std::move(beta));
}

SmoothingPrior SmoothingPrior::inverse_gamma(int p, double alpha, double beta) {
  return inverse_gamma(Eigen::VectorXd::Constant(p, alpha),
                       Eigen::VectorXd::Constant(p, beta));
}

SmoothingPrior SmoothingPrior::weibull(Eigen::VectorXd rate) {
  return SmoothingPrior(Kind::weibull, std::move(rate), Eigen::VectorXd());
}

SmoothingPrior SmoothingPrior::weibull(int p, double rate) {
  return weibull(Eigen::VectorXd::Constant(p, rate));
}

double SmoothingPrior::log_kernel(const Eigen::VectorXd& rho) const {
  if (rho.size() != p()) throw validation_error("log_kernel: rho length mismatch");
  double acc = 0.0;
  if (kind_ == Kind::inverse_gamma) {
    for (int j = 0; j < p(); ++j)
      acc += -a_[j] * rho[j] - b_[j] * std::exp(-rho[j]);
  } else {
    for (int j = 0; j < p(); ++j)
      acc += 0.5 * rho[j] - std::sqrt(a_[j]) * std::exp(0.5 * rho[j]);
  }
  return acc;
}

SmoothingPrior::Derivs SmoothingPrior::kernel_derivs(
    const Eigen::VectorXd& rho) const {
  if (rho.size() != p())
    throw validation_error("kernel_derivs: rho length mismatch");
  Derivs out;
  out.grad.resize(p());
  out.hess_diag.resize(p());
  if (kind_ == Kind::inverse_gamma) {
    for (int j = 0; j < p(); ++j) {
      const double be = b_[j] * std::exp(-rho[j]);
      out.grad[j] = -a_[j] + be;
      out.hess_diag[j] = -be;
    }
  } else {
    for (int j = 0; j < p(); ++j) {
      const double se = std::sqrt(a_[j]) * std::exp(0.5 * rho[j]);
      out.grad[j] = 0.5 - 0.5 * se;
      out.hess_diag[j] = -0.25 * se;
    }
  }
  return out;
}

double SmoothingPrior::sample_tau2(int j, Rng& rng) const {
  if (kind_ == Kind::inverse_gamma) return rng.inverse_gamma(a_[j], b_[j]);
  return rng.weibull_half(a_[j]);
}

namespace {

// Median sd of the fitted surface over prior draws at a fixed rate. The RNG
// is re-seeded per call so every rate sees identical underlying uniforms.
double median_prior_sd(const PenaltyEigenstructure& es,
                       const TensorDesign& design, double rate,
                       const PriorScalingOptions& opts) {
  const int p = es.p();
  const index_t dim = es.coef_dim();
  const auto dims = es.dims();
  const index_t n = design.n();

  Rng rng(opts.seed);
  std::vector<double> sds;
  sds.reserve(opts.mc_draws);
  Eigen::VectorXd theta(dim);
  std::vector<double> precision(p);

  for (int draw = 0; draw < opts.mc_draws; ++draw) {
    for (int j = 0; j < p; ++j) precision[j] = 1.0 / rng.weibull_half(rate);

    // Spectral coordinates: independent normals on the penalized subspace,
    // null directions pinned to zero.
    std::vector<int> digit(p, 0);
    for (index_t l = 0; l < dim; ++l) {
      double s = 0.0;
      bool in_positive = false;
      for (int j = 0; j < p; ++j) {
        s += es.marginals()[j].eigenvalues()[digit[j]] * precision[j];
        in_positive = in_positive || digit[j] >= 2;
      }
      theta[l] = in_positive ? rng.normal() / std::sqrt(s) : 0.0;
      int j = p - 1;
      while (j >= 0 && digit[j] == dims[j] - 1) digit[j--] = 0;
      if (j >= 0) ++digit[j];
    }

    Eigen::VectorXd b = theta;
    for (int j = 0; j < p; ++j)
      tensor::mode_multiply(b, dims, j, es.marginals()[j].eigenvectors());

    const Eigen::VectorXd f = design.apply(b);
    const double mean = f.mean();
    sds.push_back(std::sqrt((f.array() - mean).square().sum() / (n - 1)));
  }

  std::nth_element(sds.begin(), sds.begin() + sds.size() / 2, sds.end());
  double med = sds[sds.size() / 2];
  if (sds.size() % 2 == 0) {
    auto lower = std::max_element(sds.begin(), sds.begin() + sds.size() / 2);
    med = 0.5 * (med + *lower);
  }
  return med;
}

}  // namespace

double prior_scaling(const PenaltyEigenstructure& es,
                     const TensorDesign& design,
                     const PriorScalingOptions& opts) {
  if (!(opts.target_sd > 0.0))
    throw validation_error("prior scaling: target sd must be positive");
  if (design.n() < 2)
    throw numerical_error("prior scaling: sd undefined for fewer than 2 design points");
  if (design.p() != es.p() || design.coef_dim() != es.coef_dim())
    throw validation_error("prior scaling: design and eigenstructure disagree");

  double lo = opts.log_rate_lo;
  double hi = opts.log_rate_hi;
  const double sd_lo = median_prior_sd(es, design, std::exp(lo), opts);
  const double sd_hi = median_prior_sd(es, design, std::exp(hi), opts);
  // Larger rates shrink tau^2 and with it the prior sd, so the objective is
  // decreasing in the rate.
  if (!(sd_lo > opts.target_sd && sd_hi < opts.target_sd)) {
    std::ostringstream msg;
    msg << "prior scaling bracket failure: sd(" << std::exp(lo) << ") = " << sd_lo
        << ", sd(" << std::exp(hi) << ") = " << sd_hi << ", target "
        << opts.target_sd;
    throw numerical_error(msg.str());
  }

  for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (median_prior_sd(es, design, std::exp(mid), opts) > opts.target_sd)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace tpsmooth
