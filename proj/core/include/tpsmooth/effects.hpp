#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tpsmooth/basis.hpp"

namespace tpsmooth {

// Coefficients of the main effect of coordinate `coord`: the tensor smooth
// with every other coordinate integrated out. Computed by contracting the
// coefficient tensor with the basis averages along all dropped modes; the
// result lives in the span of the retained marginal basis.
Eigen::VectorXd main_effect_coefs(const Eigen::VectorXd& b, int coord,
                                  std::span<const MarginalBasis> bases);

// Coefficients of the two-way interaction of two distinct coordinates, with
// the remaining p - 2 coordinates integrated out. The output is indexed with
// the lower coordinate slowest-varying.
Eigen::VectorXd interaction_coefs(const Eigen::VectorXd& b, int coord_a,
                                  int coord_b,
                                  std::span<const MarginalBasis> bases);

struct Bands {
  double level = 0.95;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Eigen::VectorXd pointwise_lo, pointwise_hi;
  Eigen::VectorXd simultaneous_lo, simultaneous_hi;
  double critical = 0.0;  // max-statistic quantile behind the simultaneous band
};

// Pointwise bands are per-point empirical quantiles; simultaneous bands are
// mean +- q sd(t) with q the level-quantile of max_t |f_s(t) - mean(t)|/sd(t)
// over the sampled curves. Needs at least 100 curves.
Bands credible_bands(const Eigen::MatrixXd& curves /* draws x points */,
                     double level = 0.95);

struct EffectResult {
  std::vector<int> coords;        // one (main effect) or two (interaction)
  Eigen::MatrixXd coef_samples;   // draws x reduced dimension
  Eigen::MatrixXd grid;           // points x coords.size(), unit scale
  Bands bands;
};

// Effect extraction over the whole coefficient sample, evaluated on a
// uniform grid (two-dimensional grids are row-major over [grid_a, grid_b]).
EffectResult main_effect(const Eigen::MatrixXd& b_samples, int coord,
                         std::span<const MarginalBasis> bases,
                         int grid_points = 200, double level = 0.95);

EffectResult interaction(const Eigen::MatrixXd& b_samples, int coord_a,
                         int coord_b, std::span<const MarginalBasis> bases,
                         int grid_points = 60, double level = 0.95);

}  // namespace tpsmooth
