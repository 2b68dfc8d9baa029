#pragma once

#include <vector>

namespace tpsmooth {

// Empirical quantile with median-unbiased interpolation (the h = (n + 1/3)p
// + 1/3 plotting position). This convention is frozen across the library:
// summaries, bands, and exported tables all use it.
double quantile(std::vector<double> values, double prob);
double quantile_sorted(const std::vector<double>& sorted, double prob);

double median(std::vector<double> values);

// Median absolute deviation scaled by 1.4826 (consistent for the normal sd).
double mad(const std::vector<double>& values);

// Inverse standard normal CDF (Wichura's PPND16 rational approximation).
double inverse_normal_cdf(double p);

}  // namespace tpsmooth
