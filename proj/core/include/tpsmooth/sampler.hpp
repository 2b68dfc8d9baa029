#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "tpsmooth/basis.hpp"
#include "tpsmooth/penalty.hpp"
#include "tpsmooth/priors.hpp"
#include "tpsmooth/rng.hpp"

namespace tpsmooth {

struct SamplerConfig {
  long iterations = 1200;
  long burn_in = 200;
  double hessian_delta = std::numbers::inv_pi;  // eigenvalue ceiling -delta
  int newton_steps = 100;  // deterministic ascent steps before MH kicks in
  std::uint64_t seed = 0;
  Eigen::VectorXd initial_rho;  // empty means zeros
  long thinning = 1;

  void validate(int p) const;
};

struct ChainState {
  Eigen::VectorXd b;
  Eigen::VectorXd rho;
  double sigma2 = 1.0;
  QuadraticForms qf;
};

struct ChainTimings {
  double coefficients = 0.0;
  double sigma2 = 0.0;
  double rho = 0.0;
  double total = 0.0;
};

struct ChainOutput {
  Eigen::MatrixXd b_samples;       // draws x D, standardized scale
  Eigen::MatrixXd rho_samples;     // draws x p
  Eigen::VectorXd sigma2_samples;  // draws, standardized scale
  long mh_proposals = 0;
  long mh_accepts = 0;
  long mh_auto_rejects = 0;
  double y_mean = 0.0;
  double y_sd = 1.0;
  ChainTimings timings;

  double acceptance_rate() const {
    return mh_proposals > 0 ? static_cast<double>(mh_accepts) / mh_proposals : 0.0;
  }
};

// Eigenvalues of a symmetric matrix clamped to at most -delta, so the Newton
// proposal covariance -H^{-1} is always valid.
Eigen::MatrixXd modify_hessian(const Eigen::MatrixXd& h, double delta);

// A log-density with derivatives, as the adaptive MH machinery sees it.
struct TayloredTarget {
  std::function<double(const Eigen::VectorXd&)> log_density;
  std::function<RhoDerivatives(const Eigen::VectorXd&)> derivatives;
};

// Proposal mean of the local Gaussian approximation at `position`:
// position - Hmod^{-1} u. This is the z = 0 proposal.
Eigen::VectorXd taylored_proposal_mean(const TayloredTarget& target,
                                       const Eigen::VectorXd& position,
                                       double delta);

struct MhStep {
  Eigen::VectorXd position;
  bool accepted = false;
  bool auto_rejected = false;  // non-finite target at the proposal
};

// One Metropolis-Hastings step with a Gaussian proposal built from the local
// gradient and modified Hessian; the reverse density uses the approximation
// recomputed at the proposal.
MhStep taylored_mh_step(const TayloredTarget& target,
                        const Eigen::VectorXd& current, double delta, Rng& rng);

// Damped Newton-Raphson ascent step (step-halving, up to 10 halvings); never
// decreases the target.
Eigen::VectorXd newton_raphson_step(const TayloredTarget& target,
                                    const Eigen::VectorXd& current,
                                    double delta);

// Sparse Cholesky workspace for the coefficient precision
// B'B/sigma^2 + sum_j e^{-rho_j} K_j. The fill-reducing permutation and
// symbolic factorization are computed once from the union pattern; numeric
// refreshes happen every iteration.
class PrecisionSolver {
 public:
  PrecisionSolver(const TensorDesign& design, const PenaltyEigenstructure& es);

  void factorize(double sigma2, const Eigen::VectorXd& rho);

  // Solves P x = rhs for the current factorization.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  // mean + P^{-1/2} z with z standard normal: one exact draw from
  // N(mean, P^{-1}).
  Eigen::VectorXd sample(const Eigen::VectorXd& mean, Rng& rng) const;

  index_t dim() const { return pattern_.rows(); }

 private:
  void assemble(double sigma2, const Eigen::VectorXd& rho);

  Eigen::SparseMatrix<double> pattern_;
  Eigen::SparseMatrix<double> btb_;
  std::vector<Eigen::SparseMatrix<double>> penalties_;
  std::vector<std::vector<index_t>> value_map_;  // btb first, then penalties
  std::vector<index_t> diag_pos_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

// One inverse gamma draw for the residual variance given the current fit.
double draw_sigma2(double rss, index_t n, Rng& rng);

// Runs one chain: standardizes y, then per iteration draws coefficients,
// residual variance, and the log-smoothing variances (Newton-Raphson for the
// first `newton_steps` iterations, adaptive MH afterwards). Deterministic
// given the seed.
ChainOutput run_chain(const TensorDesign& design,
                      const PenaltyEigenstructure& es,
                      const SmoothingPrior& prior, const SamplerConfig& config,
                      const Eigen::VectorXd& y);

}  // namespace tpsmooth
