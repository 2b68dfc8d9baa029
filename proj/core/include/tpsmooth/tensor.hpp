#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace tpsmooth::tensor {

using index_t = std::int64_t;

// Coordinate 0 is the slowest-varying index throughout: a multi-index
// (i_0, ..., i_{p-1}) maps to l = ((i_0 d_1 + i_1) d_2 + i_2) ... , matching
// the Kronecker order of marginal factors.
std::vector<index_t> strides(std::span<const int> dims);

index_t total_size(std::span<const int> dims);

// Mixed-radix digits of a flat index.
std::vector<int> decompose(index_t flat, std::span<const int> dims);

// In-place mode product: every fiber of x along `mode` is replaced by M times
// that fiber. M must be square of size dims[mode].
void mode_multiply(Eigen::VectorXd& x, std::span<const int> dims, int mode,
                   const Eigen::MatrixXd& m);

// Contracts one mode with a weight vector, dropping it from the shape.
// Remaining modes keep their original relative order.
Eigen::VectorXd mode_contract(const Eigen::VectorXd& x,
                              std::span<const int> dims, int mode,
                              const Eigen::VectorXd& weights);

// Sum of squared second differences taken along `mode`, i.e. the quadratic
// form of the mode's difference-penalty Kronecker embedding. Never forms the
// embedded matrix.
double second_diff_quadform(const Eigen::VectorXd& x,
                            std::span<const int> dims, int mode);

}  // namespace tpsmooth::tensor
