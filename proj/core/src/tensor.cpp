#include "tpsmooth/tensor.hpp"

#include "tpsmooth/errors.hpp"

namespace tpsmooth::tensor {

std::vector<index_t> strides(std::span<const int> dims) {
  std::vector<index_t> out(dims.size());
  index_t s = 1;
  for (int j = static_cast<int>(dims.size()) - 1; j >= 0; --j) {
    out[j] = s;
    s *= dims[j];
  }
  return out;
}

index_t total_size(std::span<const int> dims) {
  index_t s = 1;
  for (int d : dims) s *= d;
  return s;
}

std::vector<int> decompose(index_t flat, std::span<const int> dims) {
  std::vector<int> digits(dims.size());
  for (int j = static_cast<int>(dims.size()) - 1; j >= 0; --j) {
    digits[j] = static_cast<int>(flat % dims[j]);
    flat /= dims[j];
  }
  return digits;
}

void mode_multiply(Eigen::VectorXd& x, std::span<const int> dims, int mode,
                   const Eigen::MatrixXd& m) {
  const index_t total = total_size(dims);
  if (x.size() != total) throw validation_error("mode_multiply: length mismatch");
  const auto str = strides(dims);
  const int dj = dims[mode];
  if (m.rows() != dj || m.cols() != dj)
    throw validation_error("mode_multiply: matrix does not match mode size");
  const index_t stride = str[mode];
  const index_t block = stride * dj;
  Eigen::VectorXd fiber(dj);
  for (index_t start = 0; start < total; start += block) {
    for (index_t off = 0; off < stride; ++off) {
      double* base = x.data() + start + off;
      for (int i = 0; i < dj; ++i) fiber[i] = base[i * stride];
      Eigen::VectorXd res = m * fiber;
      for (int i = 0; i < dj; ++i) base[i * stride] = res[i];
    }
  }
}

Eigen::VectorXd mode_contract(const Eigen::VectorXd& x,
                              std::span<const int> dims, int mode,
                              const Eigen::VectorXd& weights) {
  const index_t total = total_size(dims);
  if (x.size() != total) throw validation_error("mode_contract: length mismatch");
  const int dj = dims[mode];
  if (weights.size() != dj)
    throw validation_error("mode_contract: weight vector does not match mode size");
  const auto str = strides(dims);
  const index_t stride = str[mode];
  const index_t block = stride * dj;
  Eigen::VectorXd out(total / dj);
  for (index_t start = 0, o = 0; start < total; start += block) {
    for (index_t off = 0; off < stride; ++off, ++o) {
      const double* base = x.data() + start + off;
      double acc = 0.0;
      for (int i = 0; i < dj; ++i) acc += weights[i] * base[i * stride];
      out[o] = acc;
    }
  }
  return out;
}

double second_diff_quadform(const Eigen::VectorXd& x,
                            std::span<const int> dims, int mode) {
  const index_t total = total_size(dims);
  if (x.size() != total) throw validation_error("second_diff_quadform: length mismatch");
  const auto str = strides(dims);
  const int dj = dims[mode];
  const index_t stride = str[mode];
  const index_t block = stride * dj;
  double acc = 0.0;
  for (index_t start = 0; start < total; start += block) {
    for (index_t off = 0; off < stride; ++off) {
      const double* base = x.data() + start + off;
      for (int i = 0; i + 2 < dj; ++i) {
        const double s = base[i * stride] - 2.0 * base[(i + 1) * stride] +
                         base[(i + 2) * stride];
        acc += s * s;
      }
    }
  }
  return acc;
}

}  // namespace tpsmooth::tensor
