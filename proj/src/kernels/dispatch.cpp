#include <cstdlib>
#include <string>

#include "gridlin/error.hpp"
#include "gridlin/kernels.hpp"

namespace gridlin::kernels {

#if !defined(GRIDLIN_HAVE_AVX2)
const Table* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(GRIDLIN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

namespace {

Isa select_isa() {
  if (const char* forced = std::getenv("GRIDLIN_KERNELS")) {
    const std::string want(forced);
    if (want == "scalar") return Isa::Scalar;
    if (want == "avx2" && cpu_has_avx2() && avx2_table() != nullptr) return Isa::Avx2;
  }
  return cpu_has_avx2() && avx2_table() != nullptr ? Isa::Avx2 : Isa::Scalar;
}

void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::DimensionMismatch, "kernel operands differ in length");
}

}  // namespace

Isa active_isa() {
  static const Isa isa = select_isa();
  return isa;
}

const Table& table_for(Isa isa) {
  if (isa == Isa::Avx2) {
    if (const Table* t = avx2_table(); t != nullptr && cpu_has_avx2()) return *t;
    throw Error(ErrorCode::InvalidInput, "AVX2 kernels are not available on this machine");
  }
  return scalar_table();
}

const Table& active() {
  static const Table& table = table_for(active_isa());
  return table;
}

double abs_rel_error_sum(std::span<const double> est, std::span<const double> truth) {
  require_same(est.size(), truth.size());
  return active().abs_rel_error_sum(est.data(), truth.data(), est.size());
}

double squared_deviation_sum(std::span<const double> v, double target) {
  return active().squared_deviation_sum(v.data(), target, v.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void abs2(std::span<const std::complex<double>> z, std::span<double> out) {
  require_same(z.size(), out.size());
  active().abs2(z.data(), out.data(), z.size());
}

void projected_step(std::span<const double> x, std::span<const double> g, double alpha,
                    std::span<const double> lo, std::span<const double> hi, std::span<double> out) {
  require_same(x.size(), g.size());
  require_same(x.size(), lo.size());
  require_same(x.size(), hi.size());
  require_same(x.size(), out.size());
  active().projected_step(x.data(), g.data(), alpha, lo.data(), hi.data(), out.data(), x.size());
}

}  // namespace gridlin::kernels
