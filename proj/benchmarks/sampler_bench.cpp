#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <vector>

#include "tpsmooth/basis.hpp"
#include "tpsmooth/penalty.hpp"
#include "tpsmooth/pipeline.hpp"
#include "tpsmooth/priors.hpp"
#include "tpsmooth/rng.hpp"
#include "tpsmooth/sampler.hpp"

namespace {

using namespace tpsmooth;

struct Problem {
  std::vector<MarginalBasis> bases;
  PenaltyEigenstructure es;
  TensorDesign design;
  Eigen::VectorXd y;
};

Problem make_problem(int p, int d, long n, std::uint64_t seed) {
  std::vector<MarginalBasis> bases;
  std::vector<MarginalPenalty> penalties;
  for (int j = 0; j < p; ++j) {
    bases.emplace_back(d);
    penalties.emplace_back(d);
  }
  PenaltyEigenstructure es(std::move(penalties));

  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  std::vector<double> point(p);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      x(i, j) = rng.uniform();
      point[j] = x(i, j);
    }
    y[i] = test_function_f1(point) + 0.5 * rng.normal();
  }
  TensorDesign design(bases, x, y);
  return Problem{std::move(bases), std::move(es), std::move(design), std::move(y)};
}

void BM_LogPseudoDet(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  std::vector<MarginalPenalty> penalties;
  for (int j = 0; j < p; ++j) penalties.emplace_back(d);
  PenaltyEigenstructure es(std::move(penalties));
  Rng rng(7);
  Eigen::VectorXd rho(p);
  for (int j = 0; j < p; ++j) rho[j] = 2.0 * rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(es.log_pseudo_det(rho));
  }
}
BENCHMARK(BM_LogPseudoDet)->Args({2, 10})->Args({3, 10})->Args({4, 10})->Args({5, 10});

void BM_GradHessRho(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  std::vector<MarginalPenalty> penalties;
  for (int j = 0; j < p; ++j) penalties.emplace_back(d);
  PenaltyEigenstructure es(std::move(penalties));
  Rng rng(7);
  Eigen::VectorXd rho(p), b(es.coef_dim());
  for (int j = 0; j < p; ++j) rho[j] = 2.0 * rng.normal();
  for (index_t i = 0; i < es.coef_dim(); ++i) b[i] = rng.normal();
  const QuadraticForms qf = quadratic_forms(es, b);
  const SmoothingPrior prior = SmoothingPrior::weibull(p, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_hess_rho(es, rho, qf, prior));
  }
}
BENCHMARK(BM_GradHessRho)->Args({3, 10})->Args({5, 10});

void BM_CoefficientDraw(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const long n = state.range(2);
  Problem prob = make_problem(p, d, n, 11);
  PrecisionSolver solver(prob.design, prob.es);
  Rng rng(3);
  const Eigen::VectorXd rho = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd rhs = prob.design.bty();
  for (auto _ : state) {
    solver.factorize(0.25, rho);
    const Eigen::VectorXd mu = solver.solve(rhs * 4.0);
    benchmark::DoNotOptimize(solver.sample(mu, rng));
  }
}
BENCHMARK(BM_CoefficientDraw)->Args({3, 10, 10000})->Unit(benchmark::kMillisecond);

// The headline scenario: 1,200 iterations at p = 3, d = 10, n = 10^4.
void BM_FullChain(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const long n = state.range(2);
  Problem prob = make_problem(p, d, n, 19);
  const SmoothingPrior prior = SmoothingPrior::weibull(p, 1.0);
  SamplerConfig config;
  config.iterations = 1200;
  config.burn_in = 200;
  config.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        run_chain(prob.design, prob.es, prior, config, prob.y));
  }
}
BENCHMARK(BM_FullChain)
    ->Args({2, 5, 10000})
    ->Args({3, 5, 10000})
    ->Args({3, 10, 10000})
    ->Unit(benchmark::kSecond)
    ->Iterations(1);

}  // namespace
