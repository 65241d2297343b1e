#include <cstring>
#include <vector>

#include "doctest.h"
#include "qsdsim/kernels.hpp"
#include "qsdsim/rng.hpp"

using namespace qsdsim;
namespace k = qsdsim::kernels;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<double> draws(RandomStream& s, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * s.uniform();
  return v;
}

}  // namespace

TEST_CASE("scalar and avx2 kernels agree bit for bit") {
  if (!k::isa_supported(k::Isa::avx2)) {
    MESSAGE("avx2 unavailable; only the scalar table is exercised");
    return;
  }
  const auto& s = k::scalar_table();
  const auto& v = k::avx2_table();
  RandomStream rng(99, 0);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 31u, 64u, 1001u}) {
    CAPTURE(n);
    const std::vector<double> slopes{0.5, 0.5, 1.0, 0.25}, intercepts{-1.0, 1.0, 0.0, 0.3};
    std::vector<std::int32_t> idx(n);
    for (auto& i : idx) i = static_cast<std::int32_t>(rng() % 4);
    auto x1 = draws(rng, n, -2.0, 2.0), x2 = x1;
    s.affine_gather(x1, idx, slopes, intercepts);
    v.affine_gather(x2, idx, slopes, intercepts);
    CHECK(same_bits(x1, x2));

    const std::vector<double> cdf{0.1, 0.35, 0.35, 0.9, 1.0};
    auto u = draws(rng, n, 0.0, 1.0);
    if (n > 2) u[1] = 0.35;
    std::vector<std::int32_t> o1(n), o2(n);
    s.select_outcomes(u, cdf, o1);
    v.select_outcomes(u, cdf, o2);
    CHECK(o1 == o2);

    auto acc1 = draws(rng, n, -5.0, 0.0), acc2 = acc1;
    const auto xs = draws(rng, n, -2.0, 2.0);
    s.subtract_linear(acc1, xs, 0.1, 0.05);
    v.subtract_linear(acc2, xs, 0.1, 0.05);
    CHECK(same_bits(acc1, acc2));
    s.add_constant(acc1, -0.7);
    v.add_constant(acc2, -0.7);
    CHECK(same_bits(acc1, acc2));

    const auto w = draws(rng, n, -3.0, 3.0);
    CHECK(s.max_value(w) == v.max_value(w));
    const double s1 = s.sum(w), s2 = v.sum(w);
    CHECK(std::memcmp(&s1, &s2, sizeof s1) == 0);
    const double d1 = s.dot(w, xs), d2 = v.dot(w, xs);
    CHECK(std::memcmp(&d1, &d2, sizeof d1) == 0);
  }
}

TEST_CASE("scalar kernels compute the documented values") {
  const auto& s = k::scalar_table();
  std::vector<double> x{1.0, -2.0, 0.5};
  std::vector<std::int32_t> idx{0, 1, 1};
  const std::vector<double> a{0.5, 0.5}, b{1.0, -1.0};
  s.affine_gather(x, idx, a, b);
  CHECK(x == std::vector<double>{1.5, -2.0, -0.75});

  std::vector<std::int32_t> out(4);
  const std::vector<double> u{0.0, 0.49, 0.5, 0.999}, cdf{0.5, 1.0};
  s.select_outcomes(u, cdf, out);
  CHECK(out == std::vector<std::int32_t>{0, 0, 1, 1});

  const std::vector<double> w{1, 2, 3, 4, 5, 6, 7};
  CHECK(s.sum(w) == 28.0);
  CHECK(s.dot(w, w) == 140.0);
  CHECK(s.max_value(w) == 7.0);
}

TEST_CASE("isa selection can be forced") {
  const auto before = k::active_isa();
  k::set_active_isa(k::Isa::scalar);
  CHECK(k::active_isa() == k::Isa::scalar);
  CHECK(&k::active() == &k::scalar_table());
  k::set_active_isa(before);
}
