#include "qsdsim/kernels.hpp"

#include <algorithm>
#include <limits>

namespace qsdsim::kernels {
namespace {

void affine_gather(std::span<double> x, std::span<const std::int32_t> k, std::span<const double> slopes,
                   std::span<const double> intercepts) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = slopes[static_cast<std::size_t>(k[i])];
    const double b = intercepts[static_cast<std::size_t>(k[i])];
    const double ax = a * x[i];
    x[i] = ax + b;
  }
}

void select_outcomes(std::span<const double> u, std::span<const double> cdf, std::span<std::int32_t> out) {
  const std::size_t cuts = cdf.empty() ? 0 : cdf.size() - 1;
  for (std::size_t i = 0; i < u.size(); ++i) {
    std::int32_t k = 0;
    for (std::size_t j = 0; j < cuts; ++j) k += (u[i] >= cdf[j]) ? 1 : 0;
    out[i] = k;
  }
}

void subtract_linear(std::span<double> acc, std::span<const double> x, double c0, double c1) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double cx = c1 * x[i];
    const double r = c0 + cx;
    acc[i] = acc[i] - r;
  }
}

void add_constant(std::span<double> acc, double c) {
  for (double& a : acc) a = a + c;
}

double max_value(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  return m;
}

// Blocked 4-lane order shared with the AVX2 variant.
double sum(std::span<const double> v) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= v.size(); i += 4)
    for (int j = 0; j < 4; ++j) lane[j] += v[i + j];
  for (int j = 0; i < v.size(); ++i, ++j) lane[j] += v[i];
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= a.size(); i += 4)
    for (int j = 0; j < 4; ++j) {
      const double p = a[i + j] * b[i + j];
      lane[j] += p;
    }
  for (int j = 0; i < a.size(); ++i, ++j) {
    const double p = a[i] * b[i];
    lane[j] += p;
  }
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{affine_gather, select_outcomes, subtract_linear, add_constant, max_value, sum, dot};
  return table;
}

}  // namespace qsdsim::kernels
