#include "tpsmooth/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "tpsmooth/errors.hpp"
#include "tpsmooth/stats.hpp"

namespace tpsmooth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<Eigen::VectorXd> split_in_half(
    const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const Eigen::Index half = c.size() / 2;
    out.push_back(c.head(half));
    out.push_back(c.tail(half));  // odd lengths drop the middle draw
  }
  return out;
}

// Pooled average ranks mapped through the normal quantile function with the
// (r - 3/8)/(S + 1/4) plotting position.
std::vector<Eigen::VectorXd> rank_normalize(
    const std::vector<Eigen::VectorXd>& chains) {
  std::size_t total = 0;
  for (const auto& c : chains) total += c.size();

  struct Entry {
    double value;
    std::size_t chain;
    Eigen::Index pos;
  };
  std::vector<Entry> entries;
  entries.reserve(total);
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (Eigen::Index i = 0; i < chains[c].size(); ++i)
      entries.push_back({chains[c][i], c, i});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  std::vector<Eigen::VectorXd> out(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c)
    out[c].resize(chains[c].size());

  const double denom = static_cast<double>(total) + 0.25;
  std::size_t i = 0;
  while (i < total) {
    std::size_t j = i;
    while (j + 1 < total && entries[j + 1].value == entries[i].value) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    const double z = inverse_normal_cdf((avg_rank - 0.375) / denom);
    for (std::size_t k = i; k <= j; ++k)
      out[entries[k].chain][entries[k].pos] = z;
    i = j + 1;
  }
  return out;
}

double chain_variance(const Eigen::VectorXd& c) {
  const double m = c.mean();
  return (c.array() - m).square().sum() / (c.size() - 1);
}

// Autocovariance at the given lag, divisor n.
double autocovariance(const Eigen::VectorXd& c, Eigen::Index lag) {
  const double m = c.mean();
  double acc = 0.0;
  for (Eigen::Index i = 0; i + lag < c.size(); ++i)
    acc += (c[i] - m) * (c[i + lag] - m);
  return acc / static_cast<double>(c.size());
}

}  // namespace

// Reductions over chains happen in sorted order so that permuting chain
// labels reproduces results bit-exactly.
double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  const auto m = static_cast<double>(chains.size());
  if (chains.size() < 2) return kNaN;
  const auto n = static_cast<double>(chains[0].size());

  std::vector<double> variances, means;
  for (const auto& c : chains) {
    means.push_back(c.mean());
    variances.push_back(chain_variance(c));
  }
  const double within = sorted_sum(variances) / m;
  if (!(within > 0.0)) return kNaN;
  const double grand = sorted_sum(means) / m;
  std::vector<double> sq;
  for (double v : means) sq.push_back((v - grand) * (v - grand));
  const double between = n * sorted_sum(sq) / (m - 1.0);
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  const std::size_t m = chains.size();
  const Eigen::Index n = chains[0].size();
  if (n < 4) return kNaN;

  std::vector<double> means, acov0;
  for (const auto& c : chains) {
    means.push_back(c.mean());
    acov0.push_back(autocovariance(c, 0));
  }
  const double mean_var = sorted_sum(acov0) / m * static_cast<double>(n) / (n - 1.0);

  double var_plus = mean_var * (n - 1.0) / n;
  if (m > 1) {
    const double grand = sorted_sum(means) / m;
    std::vector<double> sq;
    for (double v : means) sq.push_back((v - grand) * (v - grand));
    var_plus += sorted_sum(sq) / (m - 1.0);
  }
  if (!(var_plus > 0.0)) return kNaN;

  auto mean_acov = [&](Eigen::Index lag) {
    std::vector<double> acc;
    for (const auto& c : chains) acc.push_back(autocovariance(c, lag));
    return sorted_sum(acc) / m;
  };

  // Geyer's initial positive sequence over paired lags.
  std::vector<double> rho(n, 0.0);
  Eigen::Index t = 0;
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) &&
         rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = 1.0 - (mean_var - mean_acov(t)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t] = rho_even;
      rho[t + 1] = rho_odd;
    }
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0.0) rho[max_t] = rho_even;

  // Initial monotone sequence.
  t = 0;
  while (t <= max_t - 4) {
    t += 2;
    if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
      rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
      rho[t + 1] = rho[t];
    }
  }

  const double total = static_cast<double>(m) * static_cast<double>(n);
  double tau = -1.0 + 2.0 * std::accumulate(rho.begin(), rho.begin() + max_t, 0.0) +
               rho[max_t];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

SummaryRow summarize(const std::string& name,
                     const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw validation_error("summarize: no chains");
  for (const auto& c : chains)
    if (c.size() < 100)
      throw validation_error("summarize: every chain needs at least 100 draws");

  std::vector<double> pooled;
  for (const auto& c : chains)
    pooled.insert(pooled.end(), c.data(), c.data() + c.size());

  SummaryRow row;
  row.name = name;
  const double n_total = static_cast<double>(pooled.size());
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  // Moments over the sorted pool: chain-label permutations change nothing.
  row.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n_total;
  double ss = 0.0;
  for (double v : sorted) ss += (v - row.mean) * (v - row.mean);
  row.sd = std::sqrt(ss / (n_total - 1.0));
  row.mad = mad(sorted);
  row.median = quantile_sorted(sorted, 0.5);
  row.q05 = quantile_sorted(sorted, 0.05);
  row.q95 = quantile_sorted(sorted, 0.95);

  if (sorted.front() == sorted.back()) {
    row.degenerate = true;
    row.rhat = row.ess_bulk = row.ess_tail = kNaN;
    return row;
  }

  const auto split = split_in_half(chains);
  const auto z = rank_normalize(split);
  row.rhat = split_rhat(z);
  row.ess_bulk = effective_sample_size(z);

  auto indicator_ess = [&](double threshold) {
    std::vector<Eigen::VectorXd> ind;
    ind.reserve(split.size());
    bool varies = false;
    for (const auto& c : split) {
      Eigen::VectorXd v(c.size());
      for (Eigen::Index i = 0; i < c.size(); ++i)
        v[i] = c[i] <= threshold ? 1.0 : 0.0;
      if (v.minCoeff() != v.maxCoeff()) varies = true;
      ind.push_back(std::move(v));
    }
    return varies ? effective_sample_size(ind) : kNaN;
  };
  row.ess_tail = std::min(indicator_ess(row.q05), indicator_ess(row.q95));
  return row;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  os << "name,mean,median,sd,mad,q05,q95,rhat,ess_bulk,ess_tail\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.name << ',' << r.mean << ',' << r.median << ',' << r.sd << ','
       << r.mad << ',' << r.q05 << ',' << r.q95 << ',' << r.rhat << ','
       << r.ess_bulk << ',' << r.ess_tail << '\n';
  }
  return os.str();
}

std::string summary_table(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "parameter" << std::right;
  for (const char* col : {"mean", "median", "sd", "mad", "q05", "q95", "rhat",
                          "ess_bulk", "ess_tail"})
    os << std::setw(11) << col;
  os << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << std::left << std::setw(14) << r.name << std::right;
    os << std::setw(11) << r.mean << std::setw(11) << r.median << std::setw(11)
       << r.sd << std::setw(11) << r.mad << std::setw(11) << r.q05
       << std::setw(11) << r.q95;
    os << std::setprecision(4) << std::setw(11) << r.rhat << std::setprecision(3);
    os << std::setw(11) << std::setprecision(1) << r.ess_bulk << std::setw(11)
       << r.ess_tail << std::setprecision(3);
    os << '\n';
  }
  return os.str();
}

}  // namespace tpsmooth
