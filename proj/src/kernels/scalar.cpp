#include <algorithm>
#include <cmath>

#include "gridlin/kernels.hpp"

namespace gridlin::kernels {
namespace {

double abs_rel_error_sum_scalar(const double* est, const double* truth, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(est[i] - truth[i]) / std::abs(truth[i]);
  return acc;
}

double squared_deviation_sum_scalar(const double* v, double target, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - target;
    acc += d * d;
  }
  return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void abs2_scalar(const std::complex<double>* z, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double re = z[i].real();
    const double im = z[i].imag();
    out[i] = re * re + im * im;
  }
}

void projected_step_scalar(const double* x, const double* g, double alpha, const double* lo,
                           const double* hi, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double step = alpha * g[i];
    const double y = x[i] - step;
    out[i] = std::min(std::max(y, lo[i]), hi[i]);
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table table{abs_rel_error_sum_scalar, squared_deviation_sum_scalar, dot_scalar,
                           abs2_scalar, projected_step_scalar};
  return table;
}

}  // namespace gridlin::kernels
