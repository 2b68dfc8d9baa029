#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

Eigen::VectorXd dense_bspline_basis(const std::vector<double>& knots,
                                    int degree, int n_basis, double x) {
  const int n_knots = static_cast<int>(knots.size());
  // Order-0 indicators; the domain's last interval is closed on the right.
  std::vector<double> current(n_knots - 1, 0.0);
  const double lo = knots[degree];
  const double hi = knots[n_basis];
  for (int i = 0; i + 1 < n_knots; ++i) {
    const bool top = knots[i] < hi && hi <= knots[i + 1];
    if ((knots[i] <= x && x < knots[i + 1]) || (x == hi && top))
      current[i] = 1.0;
  }
  (void)lo;
  for (int k = 1; k <= degree; ++k) {
    std::vector<double> next(n_knots - 1 - k, 0.0);
    for (int i = 0; i + k + 1 < n_knots; ++i) {
      double left = 0.0, right = 0.0;
      if (knots[i + k] > knots[i])
        left = (x - knots[i]) / (knots[i + k] - knots[i]) * current[i];
      if (knots[i + k + 1] > knots[i + 1])
        right = (knots[i + k + 1] - x) / (knots[i + k + 1] - knots[i + 1]) *
                current[i + 1];
      next[i] = left + right;
    }
    current = std::move(next);
  }
  Eigen::VectorXd out(n_basis);
  for (int i = 0; i < n_basis; ++i) out[i] = current[i];
  return out;
}

Eigen::MatrixXd dense_design(const std::vector<std::vector<double>>& knots,
                             int degree, const std::vector<int>& dims,
                             const Eigen::MatrixXd& points) {
  const int p = static_cast<int>(dims.size());
  Eigen::Index total = 1;
  for (int d : dims) total *= d;
  Eigen::MatrixXd out(points.rows(), total);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::MatrixXd row = Eigen::MatrixXd::Ones(1, 1);
    for (int j = 0; j < p; ++j) {
      const Eigen::VectorXd vals =
          dense_bspline_basis(knots[j], degree, dims[j], points(i, j));
      row = kron(row, vals.transpose());
    }
    out.row(i) = row.row(0);
  }
  return out;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::MatrixXd second_diff_penalty_dense(int dim) {
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(dim - 2, dim);
  for (int r = 0; r < dim - 2; ++r) {
    d2(r, r) = 1.0;
    d2(r, r + 1) = -2.0;
    d2(r, r + 2) = 1.0;
  }
  return d2.transpose() * d2;
}

Eigen::MatrixXd embed_penalty_dense(const std::vector<int>& dims, int mode,
                                    const Eigen::MatrixXd& marginal) {
  const int p = static_cast<int>(dims.size());
  Eigen::Index total = 1;
  for (int d : dims) total *= d;
  std::vector<Eigen::Index> strides(p);
  Eigen::Index s = 1;
  for (int j = p - 1; j >= 0; --j) {
    strides[j] = s;
    s *= dims[j];
  }
  auto digit = [&](Eigen::Index flat, int j) {
    return static_cast<int>((flat / strides[j]) % dims[j]);
  };
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(total, total);
  for (Eigen::Index r = 0; r < total; ++r)
    for (Eigen::Index c = 0; c < total; ++c) {
      bool same = true;
      for (int j = 0; j < p && same; ++j)
        if (j != mode && digit(r, j) != digit(c, j)) same = false;
      if (same) out(r, c) = marginal(digit(r, mode), digit(c, mode));
    }
  return out;
}

DenseLogPdet dense_log_pseudo_det(const Eigen::MatrixXd& m, double rel_eps) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  const Eigen::VectorXd ev = solver.eigenvalues();
  const double cutoff = rel_eps * ev.cwiseAbs().maxCoeff();
  DenseLogPdet out{0.0, 0};
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > cutoff) {
      out.value += std::log(ev[i]);
      ++out.positive;
    }
  }
  return out;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
    const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd j(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    j.col(i) = (g(hi) - g(lo)) / (2.0 * h);
  }
  return 0.5 * (j + j.transpose());
}

double midpoint(const std::function<double(double)>& f, int points) {
  double acc = 0.0;
  const double h = 1.0 / points;
  for (int i = 0; i < points; ++i) acc += f((i + 0.5) * h);
  return acc * h;
}

void simpson_nodes(int subintervals, std::vector<double>& nodes,
                   std::vector<double>& weights) {
  if (subintervals % 2 != 0)
    throw std::invalid_argument("simpson needs an even subinterval count");
  const double h = 1.0 / subintervals;
  nodes.resize(subintervals + 1);
  weights.resize(subintervals + 1);
  for (int i = 0; i <= subintervals; ++i) {
    nodes[i] = i * h;
    double w = (i == 0 || i == subintervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    weights[i] = w * h / 3.0;
  }
}

double gammp(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammp domain");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    // series
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int it = 0; it < 500; ++it) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // continued fraction for Q, then P = 1 - Q
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

double inverse_gamma_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return 1.0 - gammp(shape, scale / x);
}

double ks_statistic(std::vector<double> sample,
                    const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs((i + 1) / n - f));
    d = std::max(d, std::abs(i / n - f));
  }
  return d;
}

}  // namespace oracle
