// Compiled with -mavx2 (no FMA, so element-wise results match the scalar path).
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "gridlin/kernels.hpp"

namespace gridlin::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline __m256d vabs(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

double abs_rel_error_sum_avx2(const double* est, const double* truth, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = _mm256_loadu_pd(est + i);
    const __m256d t = _mm256_loadu_pd(truth + i);
    acc = _mm256_add_pd(acc, _mm256_div_pd(vabs(_mm256_sub_pd(e, t)), vabs(t)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::abs(est[i] - truth[i]) / std::abs(truth[i]);
  return total;
}

double squared_deviation_sum_avx2(const double* v, double target, std::size_t n) {
  const __m256d tgt = _mm256_set1_pd(target);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(v + i), tgt);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = v[i] - target;
    total += d * d;
  }
  return total;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void abs2_avx2(const std::complex<double>* z, double* out, std::size_t n) {
  const auto* raw = reinterpret_cast<const double*>(z);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(raw + 2 * i);
    const __m256d b = _mm256_loadu_pd(raw + 2 * i + 4);
    // hadd interleaves lanes as [z0, z2, z1, z3]; restore the order.
    const __m256d sums = _mm256_hadd_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b));
    _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(sums, 0b11011000));
  }
  for (; i < n; ++i) {
    const double re = z[i].real();
    const double im = z[i].imag();
    out[i] = re * re + im * im;
  }
}

void projected_step_avx2(const double* x, const double* g, double alpha, const double* lo,
                         const double* hi, double* out, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d y = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(a, _mm256_loadu_pd(g + i)));
    const __m256d clipped = _mm256_min_pd(_mm256_max_pd(y, _mm256_loadu_pd(lo + i)), _mm256_loadu_pd(hi + i));
    _mm256_storeu_pd(out + i, clipped);
  }
  for (; i < n; ++i) {
    const double step = alpha * g[i];
    const double y = x[i] - step;
    out[i] = std::min(std::max(y, lo[i]), hi[i]);
  }
}

}  // namespace

const Table* avx2_table() {
  static const Table table{abs_rel_error_sum_avx2, squared_deviation_sum_avx2, dot_avx2, abs2_avx2,
                           projected_step_avx2};
  return &table;
}

}  // namespace gridlin::kernels
