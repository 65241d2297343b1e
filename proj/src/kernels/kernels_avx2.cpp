#include "qsdsim/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <algorithm>
#include <limits>

#define QSDSIM_AVX2 __attribute__((target("avx2")))

namespace qsdsim::kernels {
namespace {

QSDSIM_AVX2 void affine_gather(std::span<double> x, std::span<const std::int32_t> k, std::span<const double> slopes,
                               std::span<const double> intercepts) {
  const std::size_t n = x.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(k.data() + i));
    const __m256d a = _mm256_i32gather_pd(slopes.data(), idx, 8);
    const __m256d b = _mm256_i32gather_pd(intercepts.data(), idx, 8);
    const __m256d v = _mm256_loadu_pd(x.data() + i);
    _mm256_storeu_pd(x.data() + i, _mm256_add_pd(_mm256_mul_pd(a, v), b));
  }
  for (; i < n; ++i) {
    const double ax = slopes[static_cast<std::size_t>(k[i])] * x[i];
    x[i] = ax + intercepts[static_cast<std::size_t>(k[i])];
  }
}

QSDSIM_AVX2 void select_outcomes(std::span<const double> u, std::span<const double> cdf,
                                 std::span<std::int32_t> out) {
  const std::size_t cuts = cdf.empty() ? 0 : cdf.size() - 1;
  const std::size_t n = u.size();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(u.data() + i);
    __m256d count = _mm256_setzero_pd();
    for (std::size_t j = 0; j < cuts; ++j) {
      const __m256d ge = _mm256_cmp_pd(v, _mm256_set1_pd(cdf[j]), _CMP_GE_OQ);
      count = _mm256_add_pd(count, _mm256_and_pd(ge, one));
    }
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out.data() + i), _mm256_cvtpd_epi32(count));
  }
  for (; i < n; ++i) {
    std::int32_t c = 0;
    for (std::size_t j = 0; j < cuts; ++j) c += (u[i] >= cdf[j]) ? 1 : 0;
    out[i] = c;
  }
}

QSDSIM_AVX2 void subtract_linear(std::span<double> acc, std::span<const double> x, double c0, double c1) {
  const __m256d vc0 = _mm256_set1_pd(c0);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const std::size_t n = acc.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_add_pd(vc0, _mm256_mul_pd(vc1, _mm256_loadu_pd(x.data() + i)));
    _mm256_storeu_pd(acc.data() + i, _mm256_sub_pd(_mm256_loadu_pd(acc.data() + i), r));
  }
  for (; i < n; ++i) {
    const double cx = c1 * x[i];
    const double r = c0 + cx;
    acc[i] = acc[i] - r;
  }
}

QSDSIM_AVX2 void add_constant(std::span<double> acc, double c) {
  const __m256d vc = _mm256_set1_pd(c);
  const std::size_t n = acc.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(acc.data() + i, _mm256_add_pd(_mm256_loadu_pd(acc.data() + i), vc));
  for (; i < n; ++i) acc[i] = acc[i] + c;
}

QSDSIM_AVX2 double max_value(std::span<const double> v) {
  const std::size_t n = v.size();
  __m256d m = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_loadu_pd(v.data() + i));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, m);
  double r = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
  for (; i < n; ++i) r = std::max(r, v[i]);
  return r;
}

QSDSIM_AVX2 double sum(std::span<const double> v) {
  const std::size_t n = v.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(v.data() + i));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (int j = 0; i < n; ++i, ++j) lane[j] += v[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

QSDSIM_AVX2 double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i)));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (int j = 0; i < n; ++i, ++j) {
    const double p = a[i] * b[i];
    lane[j] += p;
  }
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

const KernelTable& avx2_table() noexcept {
  static const KernelTable table{affine_gather, select_outcomes, subtract_linear, add_constant, max_value, sum, dot};
  return table;
}

}  // namespace qsdsim::kernels

#else

namespace qsdsim::kernels {
const KernelTable& avx2_table() noexcept { return scalar_table(); }
}  // namespace qsdsim::kernels

#endif
