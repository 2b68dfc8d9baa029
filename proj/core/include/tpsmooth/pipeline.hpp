#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tpsmooth/basis.hpp"
#include "tpsmooth/diagnostics.hpp"
#include "tpsmooth/io.hpp"

namespace tpsmooth {

enum class PriorChoice { weibull_scaled, weibull, inverse_gamma };

std::string to_string(PriorChoice choice);
PriorChoice prior_choice_from_string(const std::string& s);

// Everything a fit run needs; round-trips through a key = value map, which is
// also what gets hashed into the output manifest.
struct FitConfig {
  std::string input;
  std::vector<std::string> coords;
  std::string response;
  std::vector<int> basis_dims = {10};  // broadcast over coordinates
  PriorChoice prior = PriorChoice::weibull_scaled;
  std::vector<double> weibull_rate = {1.0};  // shared or one per coordinate
  double ig_alpha = 0.001;
  double ig_beta = 0.001;
  double scaling_target = 1.0;
  int scaling_points = 2000;  // design subsample cap for prior scaling
  long iterations = 1200;
  long burn_in = 200;
  long thinning = 1;
  int chains = 1;
  std::uint64_t seed = 1;
  int newton_steps = 100;
  double hessian_delta = std::numbers::inv_pi;
  std::vector<std::string> effects;  // "name" or "nameA:nameB"
  std::string output_dir;

  static FitConfig from_map(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_map() const;
  void validate() const;
};

struct FitResult {
  std::filesystem::path dir;
  std::vector<SummaryRow> diagnostics;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> acceptance_rates;
  double seconds_total = 0.0;
};

// Runs the full pipeline: ingest, build, (optionally) prior-scale, sample all
// chains, and write samples + manifest + diagnostics + requested effects into
// config.output_dir.
FitResult run_fit(const FitConfig& config);

// A fit reloaded from disk; the manifest hash is verified against the stored
// configuration before anything else is read.
struct LoadedFit {
  std::map<std::string, std::string> config;
  std::vector<std::string> coord_names;
  std::vector<int> basis_dims;
  int p = 0;
  int chains = 0;
  long kept = 0;  // per chain
  long burn_in = 0;
  long thinning = 1;
  index_t coef_dim = 0;
  double y_mean = 0.0;
  double y_sd = 1.0;
  std::vector<RescaleRecord> rescale;
  std::vector<MarginalBasis> bases;
  Eigen::MatrixXd b;       // (chains * kept) x D, chain-major
  Eigen::MatrixXd rho;     // (chains * kept) x p
  Eigen::VectorXd sigma2;  // chains * kept
};

LoadedFit load_fit(const std::filesystem::path& dir);

// Effect/trace/slice emission on the original coordinate and response scales.
void emit_effect(const LoadedFit& fit, const std::string& request,
                 const std::filesystem::path& out_base, int grid_points = 0,
                 double level = 0.95, bool subtract_mean = false);
void emit_trace(const LoadedFit& fit, const std::string& param,
                const std::filesystem::path& csv_path);
void emit_slice(const LoadedFit& fit,
                const std::map<std::string, double>& fixed, int grid_points,
                const std::filesystem::path& csv_path);

// Writes the Table-style diagnostics for a reloaded fit.
std::vector<SummaryRow> fit_diagnostics(const LoadedFit& fit,
                                        const std::vector<std::string>& params);

double test_function_f1(std::span<const double> x);
double test_function_f2(std::span<const double> x);

struct SimScenario {
  std::string test_function = "f1";  // f1 | f2 (f2 needs p = 3) | zero
  int p = 2;
  long n = 10000;
  int basis_dim = 5;
  double sigma = 0.5;
  int replicates = 1;
  std::uint64_t seed = 1;
  PriorChoice prior = PriorChoice::weibull_scaled;
  double scaling_target = 1.0;
  int scaling_points = 2000;
  long iterations = 1200;
  long burn_in = 200;
  std::string output_dir;  // optional replicate-level CSV

  void validate() const;
};

struct SimReplicate {
  int replicate = 0;
  double mse = 0.0;
  double seconds = 0.0;
  double acceptance = 0.0;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd rho_median;
};

// Uniform designs on the unit cube, Gaussian noise, one chain per replicate;
// records the MSE of the posterior-mean fit at the design points and the
// sampling wall time.
std::vector<SimReplicate> simulate(const SimScenario& scenario);

}  // namespace tpsmooth
