#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "tpsmooth/diagnostics.hpp"
#include "tpsmooth/errors.hpp"
#include "tpsmooth/io.hpp"
#include "tpsmooth/pipeline.hpp"

namespace {

using tpsmooth::FitConfig;
using tpsmooth::SimScenario;

// `key = value` config file merged with explicit command line overrides; the
// overrides win.
FitConfig assemble_fit_config(const std::string& config_path,
                              const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = tpsmooth::read_config_file(config_path);
  for (const auto& [key, value] : overrides) kv[key] = value;
  return FitConfig::from_map(kv);
}

std::map<std::string, double> parse_slice_spec(const std::string& spec) {
  std::map<std::string, double> fixed;
  std::string item;
  std::istringstream is(spec);
  while (std::getline(is, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw tpsmooth::validation_error("slice spec needs name=value pairs: " + spec);
    const std::string name = item.substr(0, eq);
    fixed[name] = std::stod(item.substr(eq + 1));
  }
  if (fixed.empty())
    throw tpsmooth::validation_error("empty slice spec");
  return fixed;
}

int run(int argc, char** argv) {
  CLI::App app{"Bayesian anisotropic tensor-product P-spline smoothing"};
  app.require_subcommand(1);

  // fit ---------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Fit a tensor-product smooth to a CSV");
  std::string fit_config_path;
  std::vector<std::string> fit_sets;
  fit->add_option("--config", fit_config_path, "key = value configuration file");
  fit->add_option("--set", fit_sets, "override a config key, e.g. --set seed=7");
  std::map<std::string, std::string> overrides;
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--input", "input"},
           {"--coords", "coords"},
           {"--response", "response"},
           {"--basis-dims", "basis_dims"},
           {"--prior", "prior"},
           {"--iterations", "iterations"},
           {"--burn-in", "burn_in"},
           {"--thinning", "thinning"},
           {"--chains", "chains"},
           {"--seed", "seed"},
           {"--effects", "effects"},
           {"--output-dir", "output_dir"}}) {
    fit->add_option_function<std::string>(
        flag, [&overrides, key = key](const std::string& v) { overrides[key] = v; },
        "overrides config key " + key);
  }

  // simulate ------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate",
                                 "Simulation harness: uniform designs, known "
                                 "test function, MSE and timing per replicate");
  SimScenario scenario;
  sim->add_option("--function", scenario.test_function, "f1 (isotropic) or f2 (anisotropic, p=3)");
  sim->add_option("--p", scenario.p, "domain dimension");
  sim->add_option("--n", scenario.n, "sample size");
  sim->add_option("--d", scenario.basis_dim, "marginal basis dimension");
  sim->add_option("--sigma", scenario.sigma, "noise standard deviation");
  sim->add_option("--replicates", scenario.replicates, "number of replicates");
  sim->add_option("--seed", scenario.seed, "base seed");
  sim->add_option("--iterations", scenario.iterations, "MCMC iterations");
  sim->add_option("--burn-in", scenario.burn_in, "burn-in iterations");
  std::string sim_prior = "weibull-ps";
  sim->add_option("--prior", sim_prior, "weibull-ps, weibull or inverse-gamma");
  sim->add_option("--output-dir", scenario.output_dir, "where to write replicate CSV");

  // effects -------------------------------------------------------------
  auto* eff = app.add_subcommand("effects",
                                 "Extract main effects / interactions with bands "
                                 "from fit artifacts");
  std::string eff_fit_dir, eff_out_dir;
  std::vector<std::string> eff_requests;
  int eff_grid = 0;
  double eff_level = 0.95;
  bool eff_center = false;
  eff->add_option("--fit", eff_fit_dir, "fit artifact directory")->required();
  eff->add_option("--request", eff_requests,
                  "coordinate name, or two names joined by ':'")
      ->required();
  eff->add_option("--grid", eff_grid, "grid points per axis (default 200 / 60)");
  eff->add_option("--level", eff_level, "credible level (default 0.95)");
  eff->add_flag("--center", eff_center, "subtract the effect's overall level");
  eff->add_option("--out", eff_out_dir, "output directory (default: fit dir)");

  // diagnose ------------------------------------------------------------
  auto* diag = app.add_subcommand("diagnose", "MCMC summaries and convergence diagnostics");
  std::string diag_fit_dir, diag_csv;
  std::vector<std::string> diag_params;
  diag->add_option("--fit", diag_fit_dir, "fit artifact directory")->required();
  diag->add_option("--param", diag_params,
                   "parameter names (sigma2, rho_<coord>, b_<k>); default picks "
                   "a representative set");
  diag->add_option("--csv", diag_csv, "also write the table as CSV here");

  // plotdata ------------------------------------------------------------
  auto* plot = app.add_subcommand("plotdata",
                                  "Emit plot-ready CSVs: traces, slices, effects "
                                  "on original scales");
  std::string plot_fit_dir, plot_out_dir;
  std::vector<std::string> plot_traces, plot_effects, plot_slices;
  int plot_grid = 0;
  plot->add_option("--fit", plot_fit_dir, "fit artifact directory")->required();
  plot->add_option("--trace", plot_traces, "parameter traces to emit");
  plot->add_option("--slice", plot_slices,
                   "fixed coordinates, e.g. x1=0.5,x2=3 (grid over the rest)");
  plot->add_option("--effect", plot_effects, "effect requests as in `effects`");
  plot->add_option("--grid", plot_grid, "grid points per free axis");
  plot->add_option("--out", plot_out_dir, "output directory (default: fit dir)");

  CLI11_PARSE(app, argc, argv);

  if (fit->parsed()) {
    for (const auto& s : fit_sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw tpsmooth::validation_error("--set expects key=value, got " + s);
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    const FitConfig config = assemble_fit_config(fit_config_path, overrides);
    const tpsmooth::FitResult result = tpsmooth::run_fit(config);
    std::cout << "fit written to " << result.dir.string() << "\n";
    if (std::isfinite(result.lambda))
      std::cout << "prior-scaled weibull rate: " << result.lambda << "\n";
    for (std::size_t c = 0; c < result.acceptance_rates.size(); ++c)
      std::cout << "chain " << c << " MH acceptance: "
                << result.acceptance_rates[c] << "\n";
    if (!result.diagnostics.empty())
      std::cout << tpsmooth::summary_table(result.diagnostics);
    return 0;
  }

  if (sim->parsed()) {
    scenario.prior = tpsmooth::prior_choice_from_string(sim_prior);
    const auto reps = tpsmooth::simulate(scenario);
    std::cout << "replicate  mse        seconds    acceptance\n";
    for (const auto& r : reps)
      std::printf("%9d  %-9.5f  %-9.2f  %-9.3f\n", r.replicate, r.mse,
                  r.seconds, r.acceptance);
    return 0;
  }

  if (eff->parsed()) {
    const auto fit_data = tpsmooth::load_fit(eff_fit_dir);
    const std::filesystem::path out_dir =
        eff_out_dir.empty() ? std::filesystem::path(eff_fit_dir)
                            : std::filesystem::path(eff_out_dir);
    std::filesystem::create_directories(out_dir);
    for (const auto& request : eff_requests) {
      std::string stem = "effect_" + request;
      std::replace(stem.begin(), stem.end(), ':', '_');
      tpsmooth::emit_effect(fit_data, request, out_dir / stem, eff_grid,
                            eff_level, eff_center);
      std::cout << "wrote " << (out_dir / stem).string() << ".csv\n";
    }
    return 0;
  }

  if (diag->parsed()) {
    const auto fit_data = tpsmooth::load_fit(diag_fit_dir);
    const auto rows = tpsmooth::fit_diagnostics(fit_data, diag_params);
    std::cout << tpsmooth::summary_table(rows);
    if (!diag_csv.empty())
      tpsmooth::write_text_file(diag_csv, tpsmooth::summary_csv(rows));
    return 0;
  }

  if (plot->parsed()) {
    const auto fit_data = tpsmooth::load_fit(plot_fit_dir);
    const std::filesystem::path out_dir =
        plot_out_dir.empty() ? std::filesystem::path(plot_fit_dir)
                             : std::filesystem::path(plot_out_dir);
    std::filesystem::create_directories(out_dir);
    for (const auto& param : plot_traces) {
      const auto path = out_dir / ("trace_" + param + ".csv");
      tpsmooth::emit_trace(fit_data, param, path);
      std::cout << "wrote " << path.string() << "\n";
    }
    for (std::size_t i = 0; i < plot_slices.size(); ++i) {
      const auto path = out_dir / ("slice_" + std::to_string(i) + ".csv");
      tpsmooth::emit_slice(fit_data, parse_slice_spec(plot_slices[i]), plot_grid,
                           path);
      std::cout << "wrote " << path.string() << "\n";
    }
    for (const auto& request : plot_effects) {
      std::string stem = "effect_" + request;
      std::replace(stem.begin(), stem.end(), ':', '_');
      tpsmooth::emit_effect(fit_data, request, out_dir / stem, plot_grid, 0.95,
                            false);
      std::cout << "wrote " << (out_dir / stem).string() << ".csv\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tpsmooth::numerical_error& e) {
    std::cerr << "numerical breakdown: " << e.what() << "\n";
    return 2;
  } catch (const tpsmooth::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
