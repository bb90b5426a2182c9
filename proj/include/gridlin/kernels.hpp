#pragma once

// Data-parallel inner loops used by the metrics, the VVC controller and the
// operating-point bookkeeping. Each kernel has a scalar reference and an AVX2
// variant; the active table is chosen once at first use from CPUID, and can
// be pinned with GRIDLIN_KERNELS=scalar|avx2.
//
// Element-wise kernels are bit-identical across variants. Reductions differ
// only in summation order.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace gridlin::kernels {

enum class Isa { Scalar, Avx2 };

struct Table {
  /// sum_i |est_i - truth_i| / |truth_i|
  double (*abs_rel_error_sum)(const double* est, const double* truth, std::size_t n);
  /// sum_i (v_i - target)^2
  double (*squared_deviation_sum)(const double* v, double target, std::size_t n);
  /// sum_i a_i * b_i
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// out_i = |z_i|^2
  void (*abs2)(const std::complex<double>* z, double* out, std::size_t n);
  /// out_i = clamp(x_i - alpha * g_i, lo_i, hi_i)
  void (*projected_step)(const double* x, const double* g, double alpha, const double* lo,
                         const double* hi, double* out, std::size_t n);
};

const Table& scalar_table();
/// Null when the binary was built without AVX2 support.
const Table* avx2_table();

bool cpu_has_avx2();
Isa active_isa();
std::string_view to_string(Isa isa);
const Table& table_for(Isa isa);
const Table& active();

// Span conveniences over the active table.
double abs_rel_error_sum(std::span<const double> est, std::span<const double> truth);
double squared_deviation_sum(std::span<const double> v, double target);
double dot(std::span<const double> a, std::span<const double> b);
void abs2(std::span<const std::complex<double>> z, std::span<double> out);
void projected_step(std::span<const double> x, std::span<const double> g, double alpha,
                    std::span<const double> lo, std::span<const double> hi, std::span<double> out);

}  // namespace gridlin::kernels
