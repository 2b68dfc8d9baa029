#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace tpsmooth {

class PenaltyEigenstructure;
class TensorDesign;
class Rng;

// Smoothing-variance prior, one independent component per coordinate. Both
// variants are expressed through their log-kernel in rho = log(tau^2), which
// is what the Metropolis-Hastings update consumes.
//
//   Inverse Gamma(alpha, beta):   log q(rho) = -alpha rho - beta e^{-rho}
//   Weibull(shape 1/2, rate l):   log q(rho) = rho/2 - sqrt(l) e^{rho/2}
//
// Additive constants are dropped; only differences of the kernel matter.
class SmoothingPrior {
 public:
  enum class Kind { inverse_gamma, weibull };

  static SmoothingPrior inverse_gamma(Eigen::VectorXd alpha,
                                      Eigen::VectorXd beta);
  static SmoothingPrior inverse_gamma(int p, double alpha, double beta);
  static SmoothingPrior weibull(Eigen::VectorXd rate);
  static SmoothingPrior weibull(int p, double rate);

  Kind kind() const { return kind_; }
  int p() const { return static_cast<int>(a_.size()); }
  const Eigen::VectorXd& alpha() const { return a_; }
  const Eigen::VectorXd& beta() const { return b_; }
  const Eigen::VectorXd& rate() const { return a_; }

  double log_kernel(const Eigen::VectorXd& rho) const;

  // First and second derivatives of the log-kernel per coordinate; the
  // components are independent, so the Hessian is diagonal.
  struct Derivs {
    Eigen::VectorXd grad;
    Eigen::VectorXd hess_diag;
  };
  Derivs kernel_derivs(const Eigen::VectorXd& rho) const;

  // One draw of tau^2 for coordinate j.
  double sample_tau2(int j, Rng& rng) const;

 private:
  SmoothingPrior(Kind kind, Eigen::VectorXd a, Eigen::VectorXd b);
  Kind kind_;
  Eigen::VectorXd a_;  // alpha (IG) or rate (Weibull)
  Eigen::VectorXd b_;  // beta (IG), unused for Weibull
};

struct PriorScalingOptions {
  double target_sd = 1.0;      // scale of standardized responses
  int mc_draws = 200;          // prior draws per bisection evaluation
  std::uint64_t seed = 20240901;  // fixed so the result is reproducible
  double log_rate_lo = -20.0;
  double log_rate_hi = 20.0;
};

// Chooses one shared Weibull rate so that the Monte Carlo median (over prior
// draws of tau^2 and of coefficients from the penalized subspace) of the
// empirical sd of the fitted surface at the design points hits the target.
// Bisection on the log-rate; every evaluation reuses the same random stream,
// which makes the objective exactly monotone.
double prior_scaling(const PenaltyEigenstructure& es, const TensorDesign& design,
                     const PriorScalingOptions& opts = {});

}  // namespace tpsmooth
