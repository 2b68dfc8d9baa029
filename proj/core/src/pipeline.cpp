#include "tpsmooth/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "tpsmooth/effects.hpp"
#include "tpsmooth/errors.hpp"
#include "tpsmooth/penalty.hpp"
#include "tpsmooth/priors.hpp"
#include "tpsmooth/rng.hpp"
#include "tpsmooth/sampler.hpp"
#include "tpsmooth/stats.hpp"

namespace tpsmooth {

namespace {

using nlohmann::json;

int thread_limit() {
  if (const char* env = std::getenv("TPSMOOTH_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(int count, const std::function<void(int)>& fn) {
  const int workers = std::min(count, thread_limit());
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw validation_error("config: cannot parse '" + v + "' for " + key);
  }
}

long parse_long(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw validation_error("config: cannot parse '" + v + "' for " + key);
  }
}

std::uint64_t parse_seed(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::uint64_t d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw validation_error("config: cannot parse '" + v + "' for " + key);
  }
}

// "name" or "nameA:nameB" -> coordinate indices, validated against names.
std::vector<int> parse_effect_request(const std::string& request,
                                      const std::vector<std::string>& names) {
  const auto parts = split(request, ':');
  if (parts.empty() || parts.size() > 2)
    throw validation_error("effect request '" + request +
                           "' must name one coordinate or two separated by ':'");
  std::vector<int> idx;
  for (const auto& part : parts) {
    const auto it = std::find(names.begin(), names.end(), part);
    if (it == names.end())
      throw validation_error("effect request '" + request +
                             "' names unknown coordinate '" + part + "'");
    idx.push_back(static_cast<int>(it - names.begin()));
  }
  if (idx.size() == 2 && idx[0] == idx[1])
    throw validation_error("effect request '" + request +
                           "' repeats a coordinate");
  return idx;
}

std::vector<int> broadcast_dims(const std::vector<int>& dims, int p) {
  if (dims.size() == 1) return std::vector<int>(p, dims[0]);
  return dims;
}

std::vector<MarginalBasis> build_bases(const std::vector<int>& dims) {
  std::vector<MarginalBasis> bases;
  bases.reserve(dims.size());
  for (int d : dims) bases.emplace_back(d);
  return bases;
}

PenaltyEigenstructure build_eigenstructure(const std::vector<int>& dims) {
  std::vector<MarginalPenalty> penalties;
  penalties.reserve(dims.size());
  for (int d : dims) penalties.emplace_back(d);
  return PenaltyEigenstructure(std::move(penalties));
}

// Weibull rate via prior scaling on an (at most scaling_points long)
// deterministic subsample of the design.
double scale_weibull_rate(const PenaltyEigenstructure& es,
                          const std::vector<MarginalBasis>& bases,
                          const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          double target_sd, int scaling_points) {
  PriorScalingOptions opts;
  opts.target_sd = target_sd;
  const index_t n = x.rows();
  if (n <= scaling_points) {
    TensorDesign design(bases, x, y);
    return prior_scaling(es, design, opts);
  }
  const index_t stride = (n + scaling_points - 1) / scaling_points;
  const index_t m = (n + stride - 1) / stride;
  Eigen::MatrixXd xs(m, x.cols());
  Eigen::VectorXd ys(m);
  for (index_t i = 0, r = 0; i < n; i += stride, ++r) {
    xs.row(r) = x.row(i);
    ys[r] = y[i];
  }
  TensorDesign design(bases, xs, ys);
  return prior_scaling(es, design, opts);
}

struct BuiltPrior {
  SmoothingPrior prior;
  double lambda = std::numeric_limits<double>::quiet_NaN();
};

BuiltPrior build_prior(PriorChoice choice, const std::vector<double>& weibull_rate,
                       double ig_alpha, double ig_beta, double scaling_target,
                       int scaling_points, const PenaltyEigenstructure& es,
                       const std::vector<MarginalBasis>& bases,
                       const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const int p = es.p();
  switch (choice) {
    case PriorChoice::inverse_gamma:
      return {SmoothingPrior::inverse_gamma(p, ig_alpha, ig_beta)};
    case PriorChoice::weibull: {
      Eigen::VectorXd rates(p);
      for (int j = 0; j < p; ++j)
        rates[j] = weibull_rate.size() == 1 ? weibull_rate[0]
                                            : weibull_rate[static_cast<std::size_t>(j)];
      return {SmoothingPrior::weibull(rates)};
    }
    case PriorChoice::weibull_scaled: {
      const double lambda = scale_weibull_rate(es, bases, x, y, scaling_target,
                                               scaling_points);
      return {SmoothingPrior::weibull(p, lambda), lambda};
    }
  }
  throw validation_error("unknown prior choice");
}

std::string effect_file_stem(const std::string& request) {
  std::string stem = "effect_" + request;
  std::replace(stem.begin(), stem.end(), ':', '_');
  return stem;
}

void emit_effect_core(const Eigen::MatrixXd& b_samples,
                      std::span<const MarginalBasis> bases,
                      const std::vector<std::string>& coord_names,
                      const std::vector<RescaleRecord>& rescale, double y_mean,
                      double y_sd, const std::string& request,
                      const std::filesystem::path& out_base, int grid_points,
                      double level, bool subtract_mean) {
  const auto idx = parse_effect_request(request, coord_names);
  EffectResult res;
  if (idx.size() == 1) {
    res = main_effect(b_samples, idx[0], bases,
                      grid_points > 0 ? grid_points : 200, level);
  } else {
    res = interaction(b_samples, idx[0], idx[1], bases,
                      grid_points > 0 ? grid_points : 60, level);
  }

  // Back to the original response scale; optional removal of the overall
  // level (integrated effects keep it otherwise).
  const double center = subtract_mean ? res.bands.mean.mean() : 0.0;
  const double shift = subtract_mean ? 0.0 : y_mean;
  auto rescale_value = [&](double v) { return (v - center) * y_sd + shift; };

  std::ostringstream csv;
  csv << std::setprecision(10);
  for (int c : res.coords) csv << coord_names[static_cast<std::size_t>(c)] << ',';
  csv << "mean,pointwise_lo,pointwise_hi,simultaneous_lo,simultaneous_hi\n";
  for (Eigen::Index i = 0; i < res.grid.rows(); ++i) {
    for (std::size_t a = 0; a < res.coords.size(); ++a)
      csv << from_unit(rescale[static_cast<std::size_t>(res.coords[a])],
                       res.grid(i, static_cast<Eigen::Index>(a)))
          << ',';
    csv << rescale_value(res.bands.mean[i]) << ','
        << rescale_value(res.bands.pointwise_lo[i]) << ','
        << rescale_value(res.bands.pointwise_hi[i]) << ','
        << rescale_value(res.bands.simultaneous_lo[i]) << ','
        << rescale_value(res.bands.simultaneous_hi[i]) << '\n';
  }
  auto csv_path = out_base;
  csv_path += ".csv";
  write_text_file(csv_path, csv.str());

  json meta;
  meta["coords"] = json::array();
  for (int c : res.coords)
    meta["coords"].push_back(coord_names[static_cast<std::size_t>(c)]);
  meta["level"] = res.bands.level;
  meta["grid_points"] = res.grid.rows();
  meta["critical"] = res.bands.critical;
  meta["centered"] = subtract_mean;
  meta["draws"] = b_samples.rows();
  auto json_path = out_base;
  json_path += ".json";
  write_text_file(json_path, meta.dump(2) + "\n");
}

std::vector<Eigen::VectorXd> chain_columns(const Eigen::MatrixXd& samples,
                                           Eigen::Index column, int chains,
                                           long kept) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(chains);
  for (int c = 0; c < chains; ++c)
    out.push_back(samples.col(column).segment(static_cast<Eigen::Index>(c) * kept,
                                              kept));
  return out;
}

// Resolves a parameter name (sigma2, rho_<k>, rho_<coord>, b_<k>) to per-chain
// traces.
std::vector<Eigen::VectorXd> traces_for(const LoadedFit& fit,
                                        const std::string& param) {
  if (param == "sigma2") {
    std::vector<Eigen::VectorXd> out;
    for (int c = 0; c < fit.chains; ++c)
      out.push_back(fit.sigma2.segment(static_cast<Eigen::Index>(c) * fit.kept,
                                       fit.kept));
    return out;
  }
  if (param.rfind("rho_", 0) == 0) {
    const std::string tail = param.substr(4);
    const auto it =
        std::find(fit.coord_names.begin(), fit.coord_names.end(), tail);
    Eigen::Index j;
    if (it != fit.coord_names.end()) {
      j = it - fit.coord_names.begin();
    } else {
      try {
        j = std::stol(tail) - 1;
      } catch (const std::exception&) {
        throw validation_error("unknown trace parameter '" + param + "'");
      }
      if (j < 0 || j >= fit.p)
        throw validation_error("trace parameter '" + param + "' out of range");
    }
    return chain_columns(fit.rho, j, fit.chains, fit.kept);
  }
  if (param.rfind("b_", 0) == 0) {
    Eigen::Index k;
    try {
      k = std::stol(param.substr(2)) - 1;
    } catch (const std::exception&) {
      throw validation_error("unknown trace parameter '" + param + "'");
    }
    if (k < 0 || k >= fit.coef_dim)
      throw validation_error("trace parameter '" + param + "' out of range");
    return chain_columns(fit.b, k, fit.chains, fit.kept);
  }
  throw validation_error("unknown trace parameter '" + param + "'");
}

std::vector<std::string> default_diag_params(const std::vector<std::string>& coords,
                                             index_t coef_dim) {
  std::vector<std::string> params;
  params.push_back("b_1");
  if (coef_dim > 2) params.push_back("b_" + std::to_string(coef_dim / 2 + 1));
  if (coef_dim > 1) params.push_back("b_" + std::to_string(coef_dim));
  params.push_back("sigma2");
  for (const auto& c : coords) params.push_back("rho_" + c);
  return params;
}

}  // namespace

std::string to_string(PriorChoice choice) {
  switch (choice) {
    case PriorChoice::weibull_scaled:
      return "weibull-ps";
    case PriorChoice::weibull:
      return "weibull";
    case PriorChoice::inverse_gamma:
      return "inverse-gamma";
  }
  return "?";
}

PriorChoice prior_choice_from_string(const std::string& s) {
  if (s == "weibull-ps") return PriorChoice::weibull_scaled;
  if (s == "weibull") return PriorChoice::weibull;
  if (s == "inverse-gamma") return PriorChoice::inverse_gamma;
  throw validation_error("unknown prior '" + s +
                         "' (expected weibull-ps, weibull or inverse-gamma)");
}

FitConfig FitConfig::from_map(const std::map<std::string, std::string>& kv) {
  FitConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "input") {
      cfg.input = value;
    } else if (key == "coords") {
      cfg.coords = value.empty() ? std::vector<std::string>{} : split(value, ',');
    } else if (key == "response") {
      cfg.response = value;
    } else if (key == "basis_dims") {
      cfg.basis_dims.clear();
      for (const auto& part : split(value, ','))
        cfg.basis_dims.push_back(static_cast<int>(parse_long(part, key)));
    } else if (key == "prior") {
      cfg.prior = prior_choice_from_string(value);
    } else if (key == "weibull_rate") {
      cfg.weibull_rate.clear();
      for (const auto& part : split(value, ','))
        cfg.weibull_rate.push_back(parse_double(part, key));
    } else if (key == "ig_alpha") {
      cfg.ig_alpha = parse_double(value, key);
    } else if (key == "ig_beta") {
      cfg.ig_beta = parse_double(value, key);
    } else if (key == "scaling_target") {
      cfg.scaling_target = parse_double(value, key);
    } else if (key == "scaling_points") {
      cfg.scaling_points = static_cast<int>(parse_long(value, key));
    } else if (key == "iterations") {
      cfg.iterations = parse_long(value, key);
    } else if (key == "burn_in") {
      cfg.burn_in = parse_long(value, key);
    } else if (key == "thinning") {
      cfg.thinning = parse_long(value, key);
    } else if (key == "chains") {
      cfg.chains = static_cast<int>(parse_long(value, key));
    } else if (key == "seed") {
      cfg.seed = parse_seed(value, key);
    } else if (key == "newton_steps") {
      cfg.newton_steps = static_cast<int>(parse_long(value, key));
    } else if (key == "hessian_delta") {
      cfg.hessian_delta = parse_double(value, key);
    } else if (key == "effects") {
      cfg.effects = value.empty() ? std::vector<std::string>{} : split(value, ',');
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else {
      throw validation_error("config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

std::map<std::string, std::string> FitConfig::to_map() const {
  std::map<std::string, std::string> kv;
  kv["input"] = input;
  kv["coords"] = join(coords, ',');
  kv["response"] = response;
  {
    std::vector<std::string> parts;
    for (int d : basis_dims) parts.push_back(std::to_string(d));
    kv["basis_dims"] = join(parts, ',');
  }
  kv["prior"] = to_string(prior);
  {
    std::vector<std::string> parts;
    for (double r : weibull_rate) parts.push_back(format_double(r));
    kv["weibull_rate"] = join(parts, ',');
  }
  kv["ig_alpha"] = format_double(ig_alpha);
  kv["ig_beta"] = format_double(ig_beta);
  kv["scaling_target"] = format_double(scaling_target);
  kv["scaling_points"] = std::to_string(scaling_points);
  kv["iterations"] = std::to_string(iterations);
  kv["burn_in"] = std::to_string(burn_in);
  kv["thinning"] = std::to_string(thinning);
  kv["chains"] = std::to_string(chains);
  kv["seed"] = std::to_string(seed);
  kv["newton_steps"] = std::to_string(newton_steps);
  kv["hessian_delta"] = format_double(hessian_delta);
  kv["effects"] = join(effects, ',');
  kv["output_dir"] = output_dir;
  return kv;
}

void FitConfig::validate() const {
  if (input.empty()) throw validation_error("config: input path is required");
  if (coords.empty()) throw validation_error("config: coords is required");
  for (std::size_t a = 0; a < coords.size(); ++a)
    for (std::size_t b = a + 1; b < coords.size(); ++b)
      if (coords[a] == coords[b])
        throw validation_error("config: duplicate coordinate '" + coords[a] + "'");
  if (response.empty()) throw validation_error("config: response is required");
  if (output_dir.empty()) throw validation_error("config: output_dir is required");
  const int p = static_cast<int>(coords.size());
  if (basis_dims.empty() ||
      (basis_dims.size() != 1 && basis_dims.size() != static_cast<std::size_t>(p)))
    throw validation_error("config: basis_dims needs one entry or one per coordinate");
  for (int d : basis_dims)
    if (d < 4) throw validation_error("config: basis dimensions must be >= 4");
  if (weibull_rate.empty() ||
      (weibull_rate.size() != 1 &&
       weibull_rate.size() != static_cast<std::size_t>(p)))
    throw validation_error("config: weibull_rate needs one entry or one per coordinate");
  for (double r : weibull_rate)
    if (!(r > 0.0)) throw validation_error("config: weibull_rate must be positive");
  if (!(ig_alpha > 0.0 && ig_beta > 0.0))
    throw validation_error("config: inverse gamma hyperparameters must be positive");
  if (!(scaling_target > 0.0))
    throw validation_error("config: scaling_target must be positive");
  if (scaling_points < 2)
    throw validation_error("config: scaling_points must be >= 2");
  if (iterations < 1) throw validation_error("config: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations)
    throw validation_error("config: burn_in must lie in [0, iterations)");
  if (thinning < 1) throw validation_error("config: thinning must be >= 1");
  if (chains < 1) throw validation_error("config: chains must be >= 1");
  if (newton_steps < 0)
    throw validation_error("config: newton_steps must be >= 0");
  if (!(hessian_delta > 0.0))
    throw validation_error("config: hessian_delta must be positive");
  for (const auto& request : effects) parse_effect_request(request, coords);
}

FitResult run_fit(const FitConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();

  const Dataset ds = ingest_csv(config.input, config.coords, config.response);
  const int p = static_cast<int>(config.coords.size());
  const auto dims = broadcast_dims(config.basis_dims, p);
  const auto bases = build_bases(dims);
  const TensorDesign design(bases, ds.x, ds.y);
  const PenaltyEigenstructure es = build_eigenstructure(dims);

  const BuiltPrior built =
      build_prior(config.prior, config.weibull_rate, config.ig_alpha,
                  config.ig_beta, config.scaling_target, config.scaling_points,
                  es, bases, ds.x, ds.y);

  SamplerConfig base;
  base.iterations = config.iterations;
  base.burn_in = config.burn_in;
  base.thinning = config.thinning;
  base.newton_steps = config.newton_steps;
  base.hessian_delta = config.hessian_delta;

  std::vector<ChainOutput> outputs(config.chains);
  parallel_for(config.chains, [&](int c) {
    SamplerConfig sc = base;
    sc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
    outputs[static_cast<std::size_t>(c)] = run_chain(design, es, built.prior, sc, ds.y);
  });

  const long kept = outputs[0].sigma2_samples.size();
  const index_t coef_dim = design.coef_dim();

  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);

  Eigen::MatrixXd all_b(static_cast<Eigen::Index>(config.chains) * kept, coef_dim);
  Eigen::MatrixXd all_rho(static_cast<Eigen::Index>(config.chains) * kept, p);
  Eigen::VectorXd all_sigma2(static_cast<Eigen::Index>(config.chains) * kept);
  for (int c = 0; c < config.chains; ++c) {
    const auto& out = outputs[static_cast<std::size_t>(c)];
    all_b.middleRows(static_cast<Eigen::Index>(c) * kept, kept) = out.b_samples;
    all_rho.middleRows(static_cast<Eigen::Index>(c) * kept, kept) = out.rho_samples;
    all_sigma2.segment(static_cast<Eigen::Index>(c) * kept, kept) =
        out.sigma2_samples;
  }
  write_matrix(dir / "samples_b.bin", all_b);
  write_matrix(dir / "samples_rho.bin", all_rho);
  write_matrix(dir / "samples_sigma2.bin", all_sigma2);

  // Trace CSVs for the variance parameters.
  {
    std::ostringstream rho_csv, s2_csv;
    rho_csv << std::setprecision(10) << "iteration,chain";
    for (const auto& c : config.coords) rho_csv << ",rho_" << c;
    rho_csv << '\n';
    s2_csv << std::setprecision(10) << "iteration,chain,sigma2\n";
    for (int c = 0; c < config.chains; ++c) {
      for (long i = 0; i < kept; ++i) {
        const long iter = config.burn_in + i * config.thinning;
        rho_csv << iter << ',' << c;
        for (int j = 0; j < p; ++j)
          rho_csv << ',' << all_rho(static_cast<Eigen::Index>(c) * kept + i, j);
        rho_csv << '\n';
        s2_csv << iter << ',' << c << ','
               << all_sigma2[static_cast<Eigen::Index>(c) * kept + i] << '\n';
      }
    }
    write_text_file(dir / "rho_trace.csv", rho_csv.str());
    write_text_file(dir / "sigma2_trace.csv", s2_csv.str());
  }

  FitResult result;
  result.dir = dir;
  result.lambda = built.lambda;
  for (const auto& out : outputs)
    result.acceptance_rates.push_back(out.acceptance_rate());

  // Diagnostics need at least 100 retained draws per chain.
  if (kept >= 100) {
    for (const auto& param : default_diag_params(config.coords, coef_dim)) {
      std::vector<Eigen::VectorXd> chains;
      for (int c = 0; c < config.chains; ++c) {
        if (param == "sigma2") {
          chains.push_back(all_sigma2.segment(static_cast<Eigen::Index>(c) * kept, kept));
        } else if (param.rfind("rho_", 0) == 0) {
          const auto it = std::find(config.coords.begin(), config.coords.end(),
                                    param.substr(4));
          chains.push_back(
              all_rho.col(it - config.coords.begin())
                  .segment(static_cast<Eigen::Index>(c) * kept, kept));
        } else {
          const Eigen::Index k = std::stol(param.substr(2)) - 1;
          chains.push_back(
              all_b.col(k).segment(static_cast<Eigen::Index>(c) * kept, kept));
        }
      }
      result.diagnostics.push_back(summarize(param, chains));
    }
  }
  write_text_file(dir / "diagnostics.csv", summary_csv(result.diagnostics));
  write_text_file(dir / "diagnostics.txt", summary_table(result.diagnostics));

  // Manifest: everything needed to reload and validate the artifacts. Kept
  // free of timestamps and timings so identical runs write identical bytes.
  const auto config_map = config.to_map();
  json manifest;
  manifest["format"] = "tpsmooth-fit";
  manifest["format_version"] = 1;
  manifest["config"] = config_map;
  {
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << config_hash(config_map);
    manifest["config_hash"] = h.str();
  }
  manifest["p"] = p;
  manifest["n"] = design.n();
  manifest["coef_dim"] = coef_dim;
  manifest["basis_dims"] = dims;
  manifest["chains"] = config.chains;
  manifest["kept_per_chain"] = kept;
  manifest["standardization"] = {{"mean", outputs[0].y_mean},
                                 {"sd", outputs[0].y_sd}};
  manifest["rescale"] = json::array();
  for (int j = 0; j < p; ++j)
    manifest["rescale"].push_back({{"name", config.coords[static_cast<std::size_t>(j)]},
                                   {"min", ds.rescale[static_cast<std::size_t>(j)].min},
                                   {"max", ds.rescale[static_cast<std::size_t>(j)].max}});
  manifest["dropped_rows"] = ds.dropped_rows;
  if (std::isfinite(built.lambda)) manifest["lambda"] = built.lambda;
  manifest["acceptance_rates"] = result.acceptance_rates;
  {
    std::vector<long> rejects;
    for (const auto& out : outputs) rejects.push_back(out.mh_auto_rejects);
    manifest["mh_auto_rejects"] = rejects;
  }
  manifest["files"] = {{"b", "samples_b.bin"},
                       {"rho", "samples_rho.bin"},
                       {"sigma2", "samples_sigma2.bin"}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  // Wall-clock detail lives outside the deterministic manifest.
  {
    json timings = json::array();
    for (const auto& out : outputs)
      timings.push_back({{"coefficients", out.timings.coefficients},
                         {"sigma2", out.timings.sigma2},
                         {"rho", out.timings.rho},
                         {"total", out.timings.total}});
    write_text_file(dir / "timings.json", timings.dump(2) + "\n");
  }

  for (const auto& request : config.effects)
    emit_effect_core(all_b, bases, config.coords, ds.rescale, outputs[0].y_mean,
                     outputs[0].y_sd, request, dir / effect_file_stem(request),
                     0, 0.95, false);

  result.seconds_total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

LoadedFit load_fit(const std::filesystem::path& dir) {
  const json manifest = json::parse(read_text_file(dir / "manifest.json"));
  if (manifest.value("format", "") != "tpsmooth-fit")
    throw validation_error(dir.string() + " does not hold a fit manifest");

  LoadedFit fit;
  fit.config = manifest.at("config").get<std::map<std::string, std::string>>();
  {
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << config_hash(fit.config);
    if (manifest.at("config_hash").get<std::string>() != h.str())
      throw validation_error(
          "manifest config hash mismatch: the artifact configuration drifted");
  }
  fit.p = manifest.at("p").get<int>();
  fit.chains = manifest.at("chains").get<int>();
  fit.kept = manifest.at("kept_per_chain").get<long>();
  fit.coef_dim = manifest.at("coef_dim").get<index_t>();
  fit.basis_dims = manifest.at("basis_dims").get<std::vector<int>>();
  fit.y_mean = manifest.at("standardization").at("mean").get<double>();
  fit.y_sd = manifest.at("standardization").at("sd").get<double>();
  for (const auto& r : manifest.at("rescale")) {
    fit.coord_names.push_back(r.at("name").get<std::string>());
    fit.rescale.push_back(
        RescaleRecord{r.at("min").get<double>(), r.at("max").get<double>()});
  }
  fit.burn_in = parse_long(fit.config.at("burn_in"), "burn_in");
  fit.thinning = parse_long(fit.config.at("thinning"), "thinning");
  fit.bases = build_bases(fit.basis_dims);

  const Eigen::Index rows = static_cast<Eigen::Index>(fit.chains) * fit.kept;
  fit.b = read_matrix(dir / "samples_b.bin", rows, fit.coef_dim);
  fit.rho = read_matrix(dir / "samples_rho.bin", rows, fit.p);
  fit.sigma2 = read_matrix(dir / "samples_sigma2.bin", rows, 1).col(0);
  return fit;
}

void emit_effect(const LoadedFit& fit, const std::string& request,
                 const std::filesystem::path& out_base, int grid_points,
                 double level, bool subtract_mean) {
  emit_effect_core(fit.b, fit.bases, fit.coord_names, fit.rescale, fit.y_mean,
                   fit.y_sd, request, out_base, grid_points, level,
                   subtract_mean);
}

void emit_trace(const LoadedFit& fit, const std::string& param,
                const std::filesystem::path& csv_path) {
  const auto chains = traces_for(fit, param);
  std::ostringstream csv;
  csv << std::setprecision(10) << "iteration,chain," << param << '\n';
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (Eigen::Index i = 0; i < chains[c].size(); ++i)
      csv << fit.burn_in + i * fit.thinning << ',' << c << ',' << chains[c][i]
          << '\n';
  write_text_file(csv_path, csv.str());
}

void emit_slice(const LoadedFit& fit,
                const std::map<std::string, double>& fixed, int grid_points,
                const std::filesystem::path& csv_path) {
  const int p = fit.p;
  std::vector<int> free_coords;
  Eigen::VectorXd unit_point(p);
  for (int j = 0; j < p; ++j) {
    const auto it = fixed.find(fit.coord_names[static_cast<std::size_t>(j)]);
    if (it == fixed.end()) {
      free_coords.push_back(j);
      unit_point[j] = 0.0;
    } else {
      const double u = to_unit(fit.rescale[static_cast<std::size_t>(j)], it->second);
      if (!(u >= 0.0 && u <= 1.0))
        throw validation_error("slice value for '" + it->first +
                               "' lies outside the data range");
      unit_point[j] = u;
    }
  }
  for (const auto& [name, value] : fixed)
    if (std::find(fit.coord_names.begin(), fit.coord_names.end(), name) ==
        fit.coord_names.end())
      throw validation_error("slice fixes unknown coordinate '" + name + "'");
  if (free_coords.empty())
    throw validation_error("slice request fixes all coordinates; leave 1 or 2 free");
  if (free_coords.size() > 2)
    throw validation_error("slice needs 1 or 2 free coordinates; fix " +
                           std::to_string(free_coords.size() - 2) + " more");

  if (grid_points <= 1) grid_points = free_coords.size() == 1 ? 200 : 60;
  const Eigen::Index draws = fit.b.rows();
  const bool bands = draws >= 100;

  std::ostringstream csv;
  csv << std::setprecision(10);
  for (int j : free_coords) csv << fit.coord_names[static_cast<std::size_t>(j)] << ',';
  csv << "mean,pointwise_lo,pointwise_hi\n";

  const Eigen::Index total = free_coords.size() == 1
                                 ? grid_points
                                 : static_cast<Eigen::Index>(grid_points) * grid_points;
  std::vector<double> values(static_cast<std::size_t>(draws));
  std::vector<double> x(static_cast<std::size_t>(p));
  for (Eigen::Index g = 0; g < total; ++g) {
    for (int j = 0; j < p; ++j) x[static_cast<std::size_t>(j)] = unit_point[j];
    if (free_coords.size() == 1) {
      x[static_cast<std::size_t>(free_coords[0])] =
          static_cast<double>(g) / (grid_points - 1);
    } else {
      x[static_cast<std::size_t>(free_coords[0])] =
          static_cast<double>(g / grid_points) / (grid_points - 1);
      x[static_cast<std::size_t>(free_coords[1])] =
          static_cast<double>(g % grid_points) / (grid_points - 1);
    }
    const SparseRow row = design_row(fit.bases, x);
    for (Eigen::Index s = 0; s < draws; ++s) {
      double acc = 0.0;
      for (std::size_t k = 0; k < row.index.size(); ++k)
        acc += row.value[k] * fit.b(s, row.index[k]);
      values[static_cast<std::size_t>(s)] = acc * fit.y_sd + fit.y_mean;
    }
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / draws;
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = lo;
    if (bands) {
      std::sort(values.begin(), values.end());
      lo = quantile_sorted(values, 0.025);
      hi = quantile_sorted(values, 0.975);
    }
    for (std::size_t a = 0; a < free_coords.size(); ++a)
      csv << from_unit(fit.rescale[static_cast<std::size_t>(free_coords[a])],
                       x[static_cast<std::size_t>(free_coords[a])])
          << ',';
    csv << mean << ',' << lo << ',' << hi << '\n';
  }
  write_text_file(csv_path, csv.str());
}

std::vector<SummaryRow> fit_diagnostics(const LoadedFit& fit,
                                        const std::vector<std::string>& params) {
  if (fit.kept < 100)
    throw validation_error("diagnostics need at least 100 retained draws per chain");
  std::vector<std::string> wanted = params;
  if (wanted.empty()) wanted = default_diag_params(fit.coord_names, fit.coef_dim);
  std::vector<SummaryRow> rows;
  rows.reserve(wanted.size());
  for (const auto& param : wanted)
    rows.push_back(summarize(param, traces_for(fit, param)));
  return rows;
}

double test_function_f1(std::span<const double> x) {
  double norm2 = 0.0;
  for (double v : x) norm2 += v * v;
  return std::sin(2.0 * std::numbers::pi * std::sqrt(norm2));
}

double test_function_f2(std::span<const double> x) {
  if (x.size() != 3)
    throw validation_error("anisotropic test function needs p = 3");
  const double r2 = 3.0 * x[0] * x[0] + x[1] * x[1] + x[2] * x[2] / 3.0;
  return std::sin(2.0 * std::numbers::pi * std::sqrt(r2));
}

void SimScenario::validate() const {
  if (test_function != "f1" && test_function != "f2" && test_function != "zero")
    throw validation_error("simulate: test_function must be f1, f2 or zero");
  if (test_function == "f2" && p != 3)
    throw validation_error("simulate: f2 requires p = 3");
  if (p < 1) throw validation_error("simulate: p must be >= 1");
  if (n < 2) throw validation_error("simulate: n must be >= 2");
  if (basis_dim < 4) throw validation_error("simulate: basis_dim must be >= 4");
  if (!(sigma >= 0.0)) throw validation_error("simulate: sigma must be >= 0");
  if (replicates < 1) throw validation_error("simulate: replicates must be >= 1");
  if (iterations < 1 || burn_in < 0 || burn_in >= iterations)
    throw validation_error("simulate: bad iteration budget");
}

std::vector<SimReplicate> simulate(const SimScenario& scenario) {
  scenario.validate();
  const int p = scenario.p;
  const std::vector<int> dims(static_cast<std::size_t>(p), scenario.basis_dim);
  const auto bases = build_bases(dims);
  const PenaltyEigenstructure es = build_eigenstructure(dims);

  std::vector<SimReplicate> results(static_cast<std::size_t>(scenario.replicates));
  parallel_for(scenario.replicates, [&](int r) {
    Rng data_rng(derive_seed(scenario.seed, 2 * static_cast<std::uint64_t>(r)));
    Eigen::MatrixXd x(scenario.n, p);
    for (index_t i = 0; i < scenario.n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = data_rng.uniform();

    Eigen::VectorXd f_true(scenario.n);
    std::vector<double> point(static_cast<std::size_t>(p));
    for (index_t i = 0; i < scenario.n; ++i) {
      for (int j = 0; j < p; ++j) point[static_cast<std::size_t>(j)] = x(i, j);
      if (scenario.test_function == "f1")
        f_true[i] = test_function_f1(point);
      else if (scenario.test_function == "f2")
        f_true[i] = test_function_f2(point);
      else
        f_true[i] = 0.0;
    }
    Eigen::VectorXd y = f_true;
    if (scenario.sigma > 0.0)
      for (index_t i = 0; i < scenario.n; ++i)
        y[i] += scenario.sigma * data_rng.normal();

    const TensorDesign design(bases, x, y);
    const BuiltPrior built =
        build_prior(scenario.prior, {1.0}, 0.001, 0.001, scenario.scaling_target,
                    scenario.scaling_points, es, bases, x, y);

    SamplerConfig sc;
    sc.iterations = scenario.iterations;
    sc.burn_in = scenario.burn_in;
    sc.seed = derive_seed(scenario.seed, 2 * static_cast<std::uint64_t>(r) + 1);
    const ChainOutput out = run_chain(design, es, built.prior, sc, y);

    const Eigen::VectorXd b_mean = out.b_samples.colwise().mean();
    const Eigen::VectorXd fitted =
        (design.apply(b_mean).array() * out.y_sd + out.y_mean).matrix();
    SimReplicate rep;
    rep.replicate = r;
    rep.mse = (fitted - f_true).squaredNorm() / static_cast<double>(scenario.n);
    rep.seconds = out.timings.total;
    rep.acceptance = out.acceptance_rate();
    rep.lambda = built.lambda;
    rep.rho_median.resize(p);
    for (int j = 0; j < p; ++j) {
      std::vector<double> col(out.rho_samples.col(j).data(),
                              out.rho_samples.col(j).data() +
                                  out.rho_samples.rows());
      rep.rho_median[j] = median(std::move(col));
    }
    results[static_cast<std::size_t>(r)] = std::move(rep);
  });

  if (!scenario.output_dir.empty()) {
    const std::filesystem::path dir(scenario.output_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    csv << std::setprecision(10) << "replicate,mse,seconds,acceptance,lambda";
    for (int j = 1; j <= p; ++j) csv << ",rho_median_" << j;
    csv << '\n';
    for (const auto& rep : results) {
      csv << rep.replicate << ',' << rep.mse << ',' << rep.seconds << ','
          << rep.acceptance << ',' << rep.lambda;
      for (int j = 0; j < p; ++j) csv << ',' << rep.rho_median[j];
      csv << '\n';
    }
    write_text_file(dir / "simulate_results.csv", csv.str());

    json meta;
    meta["test_function"] = scenario.test_function;
    meta["p"] = scenario.p;
    meta["n"] = scenario.n;
    meta["basis_dim"] = scenario.basis_dim;
    meta["sigma"] = scenario.sigma;
    meta["replicates"] = scenario.replicates;
    meta["seed"] = scenario.seed;
    meta["prior"] = to_string(scenario.prior);
    meta["iterations"] = scenario.iterations;
    meta["burn_in"] = scenario.burn_in;
    write_text_file(dir / "simulate_manifest.json", meta.dump(2) + "\n");
  }
  return results;
}

}  // namespace tpsmooth
