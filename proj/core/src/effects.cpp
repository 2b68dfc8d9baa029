#include "tpsmooth/effects.hpp"

#include <algorithm>
#include <cmath>

#include "tpsmooth/errors.hpp"
#include "tpsmooth/stats.hpp"
#include "tpsmooth/tensor.hpp"

namespace tpsmooth {

namespace {

std::vector<int> basis_dims(std::span<const MarginalBasis> bases) {
  std::vector<int> dims(bases.size());
  for (std::size_t j = 0; j < bases.size(); ++j) dims[j] = bases[j].dim();
  return dims;
}

// Contracts every mode not in `keep` with its basis averages. Modes are
// contracted from the back so remaining indices stay valid.
Eigen::VectorXd contract_dropped(const Eigen::VectorXd& b,
                                 std::span<const MarginalBasis> bases,
                                 std::vector<int> keep) {
  std::vector<int> dims = basis_dims(bases);
  Eigen::VectorXd work = b;
  for (int k = static_cast<int>(bases.size()) - 1; k >= 0; --k) {
    if (std::find(keep.begin(), keep.end(), k) != keep.end()) continue;
    work = tensor::mode_contract(work, dims, k, bases[k].averages());
    dims.erase(dims.begin() + k);
  }
  return work;
}

Eigen::MatrixXd basis_on_grid(const MarginalBasis& basis, int points) {
  Eigen::MatrixXd g(points, basis.dim());
  for (int i = 0; i < points; ++i) {
    const double x = points > 1 ? static_cast<double>(i) / (points - 1) : 0.5;
    g.row(i) = basis.eval_dense(x);
  }
  return g;
}

}  // namespace

Eigen::VectorXd main_effect_coefs(const Eigen::VectorXd& b, int coord,
                                  std::span<const MarginalBasis> bases) {
  const int p = static_cast<int>(bases.size());
  if (coord < 0 || coord >= p)
    throw validation_error("main effect coordinate out of range");
  const auto dims = basis_dims(bases);
  if (b.size() != tensor::total_size(dims))
    throw validation_error("main effect: coefficient length mismatch");
  return contract_dropped(b, bases, {coord});
}

Eigen::VectorXd interaction_coefs(const Eigen::VectorXd& b, int coord_a,
                                  int coord_b,
                                  std::span<const MarginalBasis> bases) {
  const int p = static_cast<int>(bases.size());
  if (coord_a < 0 || coord_a >= p || coord_b < 0 || coord_b >= p)
    throw validation_error("interaction coordinate out of range");
  if (coord_a == coord_b)
    throw validation_error("interaction needs two distinct coordinates");
  const auto dims = basis_dims(bases);
  if (b.size() != tensor::total_size(dims))
    throw validation_error("interaction: coefficient length mismatch");
  return contract_dropped(b, bases, {coord_a, coord_b});
}

Bands credible_bands(const Eigen::MatrixXd& curves, double level) {
  const Eigen::Index draws = curves.rows();
  const Eigen::Index points = curves.cols();
  if (draws < 100)
    throw validation_error("credible bands need at least 100 sampled curves");
  if (!(level > 0.0 && level < 1.0))
    throw validation_error("band level must lie in (0,1)");

  Bands out;
  out.level = level;
  out.mean = curves.colwise().mean();
  out.sd.resize(points);
  for (Eigen::Index t = 0; t < points; ++t) {
    out.sd[t] = std::sqrt(
        (curves.col(t).array() - out.mean[t]).square().sum() / (draws - 1));
  }

  const double lo_prob = 0.5 * (1.0 - level);
  out.pointwise_lo.resize(points);
  out.pointwise_hi.resize(points);
  std::vector<double> column(draws);
  for (Eigen::Index t = 0; t < points; ++t) {
    for (Eigen::Index s = 0; s < draws; ++s) column[s] = curves(s, t);
    std::sort(column.begin(), column.end());
    out.pointwise_lo[t] = quantile_sorted(column, lo_prob);
    out.pointwise_hi[t] = quantile_sorted(column, 1.0 - lo_prob);
  }

  std::vector<double> max_ratio(draws, 0.0);
  for (Eigen::Index s = 0; s < draws; ++s) {
    double m = 0.0;
    for (Eigen::Index t = 0; t < points; ++t) {
      if (out.sd[t] > 0.0)
        m = std::max(m, std::abs(curves(s, t) - out.mean[t]) / out.sd[t]);
    }
    max_ratio[s] = m;
  }
  out.critical = quantile(std::move(max_ratio), level);
  out.simultaneous_lo = out.mean - out.critical * out.sd;
  out.simultaneous_hi = out.mean + out.critical * out.sd;
  return out;
}

EffectResult main_effect(const Eigen::MatrixXd& b_samples, int coord,
                         std::span<const MarginalBasis> bases, int grid_points,
                         double level) {
  if (grid_points < 2) throw validation_error("effect grid needs >= 2 points");
  EffectResult out;
  out.coords = {coord};

  const int d = bases[static_cast<std::size_t>(coord)].dim();
  out.coef_samples.resize(b_samples.rows(), d);
  for (Eigen::Index s = 0; s < b_samples.rows(); ++s)
    out.coef_samples.row(s) =
        main_effect_coefs(b_samples.row(s).transpose(), coord, bases);

  const Eigen::MatrixXd g = basis_on_grid(bases[coord], grid_points);
  out.grid.resize(grid_points, 1);
  for (int i = 0; i < grid_points; ++i)
    out.grid(i, 0) = static_cast<double>(i) / (grid_points - 1);

  const Eigen::MatrixXd curves = out.coef_samples * g.transpose();
  out.bands = credible_bands(curves, level);
  return out;
}

EffectResult interaction(const Eigen::MatrixXd& b_samples, int coord_a,
                         int coord_b, std::span<const MarginalBasis> bases,
                         int grid_points, double level) {
  if (grid_points < 2) throw validation_error("effect grid needs >= 2 points");
  const int lo = std::min(coord_a, coord_b);
  const int hi = std::max(coord_a, coord_b);

  EffectResult out;
  out.coords = {lo, hi};
  const int d_lo = bases[static_cast<std::size_t>(lo)].dim();
  const int d_hi = bases[static_cast<std::size_t>(hi)].dim();
  out.coef_samples.resize(b_samples.rows(), d_lo * d_hi);
  for (Eigen::Index s = 0; s < b_samples.rows(); ++s)
    out.coef_samples.row(s) =
        interaction_coefs(b_samples.row(s).transpose(), lo, hi, bases);

  const Eigen::MatrixXd g_lo = basis_on_grid(bases[lo], grid_points);
  const Eigen::MatrixXd g_hi = basis_on_grid(bases[hi], grid_points);

  out.grid.resize(grid_points * grid_points, 2);
  for (int a = 0; a < grid_points; ++a)
    for (int c = 0; c < grid_points; ++c) {
      out.grid(a * grid_points + c, 0) = static_cast<double>(a) / (grid_points - 1);
      out.grid(a * grid_points + c, 1) = static_cast<double>(c) / (grid_points - 1);
    }

  Eigen::MatrixXd curves(b_samples.rows(), grid_points * grid_points);
  for (Eigen::Index s = 0; s < b_samples.rows(); ++s) {
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                         Eigen::RowMajor>>
        coef(out.coef_samples.row(s).data(), d_lo, d_hi);
    const Eigen::MatrixXd surface = g_lo * coef * g_hi.transpose();
    for (int a = 0; a < grid_points; ++a)
      for (int c = 0; c < grid_points; ++c)
        curves(s, a * grid_points + c) = surface(a, c);
  }
  out.bands = credible_bands(curves, level);
  return out;
}

}  // namespace tpsmooth
