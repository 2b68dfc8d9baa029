#include "tpsmooth/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "tpsmooth/errors.hpp"

namespace tpsmooth {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Residual variance floor on the standardized scale, so exact or
// near-perfect fits do not drive 1/sigma^2 past double range.
constexpr double kSigma2Floor = 1e-30;

double half_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return llt.matrixLLT().diagonal().array().log().sum();
}

struct LocalGaussian {
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> llt;  // of -Hmod, the proposal precision
  bool finite = false;
};

LocalGaussian local_approximation(const TayloredTarget& target,
                                  const Eigen::VectorXd& position,
                                  double delta) {
  LocalGaussian out;
  const RhoDerivatives d = target.derivatives(position);
  if (!d.grad.allFinite() || !d.hess.allFinite()) return out;
  const Eigen::MatrixXd a = -modify_hessian(d.hess, delta);
  out.llt.compute(a);
  if (out.llt.info() != Eigen::Success) return out;
  out.mean = position + out.llt.solve(d.grad);
  out.finite = out.mean.allFinite();
  return out;
}

double log_proposal_density(const LocalGaussian& g, const Eigen::VectorXd& x) {
  // 2*pi constant omitted; it cancels between forward and reverse densities.
  const Eigen::VectorXd w = g.llt.matrixU() * (x - g.mean);
  return half_log_det(g.llt) - 0.5 * w.squaredNorm();
}

}  // namespace

void SamplerConfig::validate(int p) const {
  if (iterations < 1) throw validation_error("sampler: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations)
    throw validation_error("sampler: burn-in must lie in [0, iterations)");
  if (!(hessian_delta > 0.0))
    throw validation_error("sampler: hessian delta must be positive");
  if (thinning < 1) throw validation_error("sampler: thinning must be >= 1");
  if (newton_steps < 0)
    throw validation_error("sampler: newton step count must be >= 0");
  if (initial_rho.size() != 0 && initial_rho.size() != p)
    throw validation_error("sampler: initial rho length mismatch");
}

Eigen::MatrixXd modify_hessian(const Eigen::MatrixXd& h, double delta) {
  if (h.rows() != h.cols()) throw validation_error("modify_hessian: not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success)
    throw numerical_error("modify_hessian: eigendecomposition failed");
  Eigen::VectorXd lambda = solver.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    lambda[i] = std::min(lambda[i], -delta);
  return solver.eigenvectors() * lambda.asDiagonal() *
         solver.eigenvectors().transpose();
}

Eigen::VectorXd taylored_proposal_mean(const TayloredTarget& target,
                                       const Eigen::VectorXd& position,
                                       double delta) {
  const LocalGaussian g = local_approximation(target, position, delta);
  if (!g.finite)
    throw numerical_error("taylored proposal: non-finite local approximation");
  return g.mean;
}

MhStep taylored_mh_step(const TayloredTarget& target,
                        const Eigen::VectorXd& current, double delta,
                        Rng& rng) {
  MhStep step;
  step.position = current;

  const LocalGaussian fwd = local_approximation(target, current, delta);
  if (!fwd.finite)
    throw numerical_error("taylored MH: non-finite approximation at current state");

  Eigen::VectorXd z(current.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  const Eigen::VectorXd proposal =
      fwd.mean + fwd.llt.matrixU().solve(z);

  const double lp_current = target.log_density(current);
  const double lp_proposal = target.log_density(proposal);
  if (!std::isfinite(lp_proposal)) {
    step.auto_rejected = true;
    return step;
  }
  const LocalGaussian rev = local_approximation(target, proposal, delta);
  if (!rev.finite) {
    step.auto_rejected = true;
    return step;
  }

  const double log_alpha = (lp_proposal - lp_current) +
                           (log_proposal_density(rev, current) -
                            log_proposal_density(fwd, proposal));
  if (std::log(rng.uniform()) < log_alpha) {
    step.position = proposal;
    step.accepted = true;
  }
  return step;
}

Eigen::VectorXd newton_raphson_step(const TayloredTarget& target,
                                    const Eigen::VectorXd& current,
                                    double delta) {
  const LocalGaussian g = local_approximation(target, current, delta);
  if (!g.finite)
    throw numerical_error("newton step: non-finite local approximation");
  const double lp0 = target.log_density(current);
  Eigen::VectorXd direction = g.mean - current;
  double scale = 1.0;
  for (int halving = 0; halving <= 10; ++halving) {
    const Eigen::VectorXd candidate = current + scale * direction;
    const double lp = target.log_density(candidate);
    if (std::isfinite(lp) && lp >= lp0) return candidate;
    scale *= 0.5;
  }
  return current;
}

PrecisionSolver::PrecisionSolver(const TensorDesign& design,
                                 const PenaltyEigenstructure& es)
    : btb_(design.btb()) {
  if (design.coef_dim() != es.coef_dim())
    throw validation_error("precision solver: design and penalty dimensions disagree");

  const int p = es.p();
  penalties_.reserve(p);
  for (int j = 0; j < p; ++j) penalties_.push_back(es.embedded_penalty(j));

  // Union pattern; absolute values so no entry can cancel away structurally.
  Eigen::SparseMatrix<double> pat = btb_.cwiseAbs();
  for (const auto& k : penalties_) pat += k.cwiseAbs();
  pat.makeCompressed();
  pattern_ = pat;

  auto build_map = [this](const Eigen::SparseMatrix<double>& m) {
    std::vector<index_t> map;
    map.reserve(m.nonZeros());
    for (int col = 0; col < m.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(m, col); it; ++it) {
        const auto* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col];
        const auto* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col + 1];
        const auto* pos = std::lower_bound(begin, end, it.row());
        map.push_back(pos - pattern_.innerIndexPtr());
      }
    }
    return map;
  };
  value_map_.push_back(build_map(btb_));
  for (const auto& k : penalties_) value_map_.push_back(build_map(k));

  diag_pos_.resize(pattern_.rows());
  for (int col = 0; col < pattern_.outerSize(); ++col) {
    const auto* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col];
    const auto* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col + 1];
    const auto* pos = std::lower_bound(begin, end, col);
    diag_pos_[col] = pos - pattern_.innerIndexPtr();
  }

  llt_.analyzePattern(pattern_);
}

void PrecisionSolver::assemble(double sigma2, const Eigen::VectorXd& rho) {
  double* values = pattern_.valuePtr();
  std::fill(values, values + pattern_.nonZeros(), 0.0);
  {
    const double* src = btb_.valuePtr();
    const auto& map = value_map_[0];
    const double w = 1.0 / sigma2;
    for (std::size_t k = 0; k < map.size(); ++k) values[map[k]] += w * src[k];
  }
  for (std::size_t j = 0; j < penalties_.size(); ++j) {
    const double* src = penalties_[j].valuePtr();
    const auto& map = value_map_[j + 1];
    const double w = std::exp(-rho[static_cast<Eigen::Index>(j)]);
    for (std::size_t k = 0; k < map.size(); ++k) values[map[k]] += w * src[k];
  }
}

void PrecisionSolver::factorize(double sigma2, const Eigen::VectorXd& rho) {
  if (rho.size() != static_cast<Eigen::Index>(penalties_.size()))
    throw validation_error("precision solver: rho length mismatch");
  if (!(sigma2 > 0.0))
    throw validation_error("precision solver: sigma2 must be positive");

  assemble(sigma2, rho);
  // Overflowed weights would sail through the factorization as NaN.
  for (index_t k = 0; k < pattern_.nonZeros(); ++k) {
    if (!std::isfinite(pattern_.valuePtr()[k])) {
      std::ostringstream msg;
      msg << "coefficient precision is not finite (sigma2 = " << sigma2
          << ", rho = [" << rho.transpose() << "])";
      throw numerical_error(msg.str());
    }
  }
  llt_.factorize(pattern_);
  if (llt_.info() == Eigen::Success) return;

  // Near-singular early iterations: retry with escalating diagonal jitter.
  double mean_diag = 0.0;
  for (index_t i = 0; i < dim(); ++i)
    mean_diag += pattern_.valuePtr()[diag_pos_[i]];
  mean_diag /= static_cast<double>(dim());

  double jitter = 1e-10 * mean_diag;
  for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10.0) {
    assemble(sigma2, rho);
    for (index_t i = 0; i < dim(); ++i)
      pattern_.valuePtr()[diag_pos_[i]] += jitter;
    llt_.factorize(pattern_);
    if (llt_.info() == Eigen::Success) return;
  }

  std::ostringstream msg;
  msg << "coefficient precision factorization failed (sigma2 = " << sigma2
      << ", rho = [" << rho.transpose() << "])";
  throw numerical_error(msg.str());
}

Eigen::VectorXd PrecisionSolver::solve(const Eigen::VectorXd& rhs) const {
  return llt_.solve(rhs);
}

Eigen::VectorXd PrecisionSolver::sample(const Eigen::VectorXd& mean,
                                        Rng& rng) const {
  Eigen::VectorXd z(dim());
  for (index_t i = 0; i < dim(); ++i) z[i] = rng.normal();
  const Eigen::VectorXd w = llt_.matrixU().solve(z);
  return mean + llt_.permutationPinv() * w;
}

double draw_sigma2(double rss, index_t n, Rng& rng) {
  if (n < 1) throw validation_error("draw_sigma2: needs n >= 1");
  if (!(rss > 0.0))
    throw numerical_error("degenerate fit: residual sum of squares is zero");
  return rng.inverse_gamma(0.5 * static_cast<double>(n), 0.5 * rss);
}

ChainOutput run_chain(const TensorDesign& design,
                      const PenaltyEigenstructure& es,
                      const SmoothingPrior& prior, const SamplerConfig& config,
                      const Eigen::VectorXd& y) {
  const int p = es.p();
  config.validate(p);
  if (prior.p() != p) throw validation_error("run_chain: prior dimension mismatch");
  if (y.size() != design.n()) throw validation_error("run_chain: response length mismatch");
  const index_t n = design.n();
  const index_t dim = design.coef_dim();

  ChainOutput out;
  out.y_mean = y.mean();
  const double var = n > 1 ? (y.array() - out.y_mean).square().sum() / (n - 1) : 0.0;
  out.y_sd = var > 0.0 ? std::sqrt(var) : 1.0;

  const Eigen::VectorXd y_std = (y.array() - out.y_mean) / out.y_sd;
  Eigen::VectorXd bty_std = Eigen::VectorXd::Zero(dim);
  for (index_t i = 0; i < n; ++i) {
    const SparseRow r = design.row(i);
    for (std::size_t k = 0; k < r.index.size(); ++k)
      bty_std[r.index[k]] += r.value[k] * y_std[i];
  }

  ChainState state;
  state.rho = config.initial_rho.size() ? config.initial_rho
                                        : Eigen::VectorXd::Zero(p);
  state.sigma2 = 1.0;

  PrecisionSolver solver(design, es);
  Rng rng(config.seed);

  const long kept = (config.iterations - config.burn_in + config.thinning - 1) /
                    config.thinning;
  out.b_samples.resize(kept, dim);
  out.rho_samples.resize(kept, p);
  out.sigma2_samples.resize(kept);

  const TayloredTarget rho_target{
      [&](const Eigen::VectorXd& r) {
        return log_fcp_rho(es, r, state.qf, prior);
      },
      [&](const Eigen::VectorXd& r) {
        return grad_hess_rho(es, r, state.qf, prior);
      }};

  const auto t_start = Clock::now();
  long stored = 0;
  for (long t = 0; t < config.iterations; ++t) {
    auto t0 = Clock::now();
    try {
      solver.factorize(state.sigma2, state.rho);
    } catch (const numerical_error& e) {
      throw numerical_error("iteration " + std::to_string(t) + ": " + e.what());
    }
    const Eigen::VectorXd mu = solver.solve(bty_std / state.sigma2);
    state.b = solver.sample(mu, rng);
    state.qf = quadratic_forms(es, state.b);
    out.timings.coefficients += seconds_since(t0);

    t0 = Clock::now();
    const double rss = (y_std - design.apply(state.b)).squaredNorm();
    try {
      state.sigma2 = std::max(draw_sigma2(rss, n, rng), kSigma2Floor);
    } catch (const numerical_error& e) {
      throw numerical_error("iteration " + std::to_string(t) + ": " + e.what());
    }
    out.timings.sigma2 += seconds_since(t0);

    t0 = Clock::now();
    if (t < config.newton_steps) {
      state.rho = newton_raphson_step(rho_target, state.rho, config.hessian_delta);
    } else {
      const MhStep step =
          taylored_mh_step(rho_target, state.rho, config.hessian_delta, rng);
      state.rho = step.position;
      ++out.mh_proposals;
      if (step.accepted) ++out.mh_accepts;
      if (step.auto_rejected) ++out.mh_auto_rejects;
    }
    out.timings.rho += seconds_since(t0);

    if (t >= config.burn_in && (t - config.burn_in) % config.thinning == 0) {
      out.b_samples.row(stored) = state.b;
      out.rho_samples.row(stored) = state.rho;
      out.sigma2_samples[stored] = state.sigma2;
      ++stored;
    }
  }
  out.timings.total = seconds_since(t_start);
  return out;
}

}  // namespace tpsmooth
