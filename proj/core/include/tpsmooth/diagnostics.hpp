#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace tpsmooth {

// One row of the MCMC summary table: location/scale summaries of the pooled
// draws plus rank-normalized split-Rhat and bulk/tail effective sample sizes.
struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double mad = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  double rhat = 0.0;      // NaN when undefined (constant trace)
  double ess_bulk = 0.0;  // NaN when undefined
  double ess_tail = 0.0;  // NaN when undefined
  bool degenerate = false;
};

// Computes the summary row for one scalar parameter across chains. Chains are
// split in half; Rhat and bulk ESS work on rank-normalized split draws, tail
// ESS on the 5%/95% indicator sequences. Requires every chain to hold at
// least 100 draws.
SummaryRow summarize(const std::string& name,
                     const std::vector<Eigen::VectorXd>& chains);

// Split-Rhat and ESS on already-prepared chains; exposed for verification.
double split_rhat(const std::vector<Eigen::VectorXd>& chains);
double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);

std::string summary_csv(std::span<const SummaryRow> rows);
std::string summary_table(std::span<const SummaryRow> rows);

}  // namespace tpsmooth
