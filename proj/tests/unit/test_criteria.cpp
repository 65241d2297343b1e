#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "qsdsim/criteria.hpp"
#include "qsdsim/error.hpp"
#include "qsdsim/models.hpp"

using namespace qsdsim;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_parameter;
}

std::vector<double> integer_times(std::size_t n) {
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = static_cast<double>(k);
  return t;
}

}  // namespace

TEST_CASE("alpha reduces to gamma without B and C") {
  for (double g : {0.1, 0.5, 2.0})
    for (double d : {0.5, 1.0, 4.0}) CHECK(alpha_explicit(g, 1.0, 0.0, 1.0, d) == g);
}

TEST_CASE("alpha never exceeds gamma_A") {
  RandomStream rng(11, 0);
  for (int k = 0; k < 1000; ++k) {
    const double g = 0.01 + 3.0 * rng.uniform();
    const double ca = 1.0 + 10.0 * rng.uniform();
    const double cb = 5.0 * rng.uniform();
    const double cc = 1.0 + 1e-6 + 10.0 * rng.uniform();
    const double d = 0.1 + 5.0 * rng.uniform();
    const double a = alpha_explicit(g, ca, cb, cc, d);
    CHECK(a > 0.0);
    CHECK(a <= g);
  }
}

TEST_CASE("alpha rejects bad constants") {
  CHECK(code_of([] { alpha_explicit(1.0, 0.5, 0.0, 1.0, 1.0); }) == ErrorCode::invalid_constants);
  CHECK(code_of([] { alpha_explicit(1.0, 1.0, -1.0, 1.0, 1.0); }) == ErrorCode::invalid_constants);
  CHECK(code_of([] { alpha_explicit(1.0, 1.0, 0.0, 0.9, 1.0); }) == ErrorCode::invalid_constants);
  CHECK(code_of([] { alpha_explicit(0.0, 1.0, 0.0, 1.0, 1.0); }) == ErrorCode::invalid_constants);
  CHECK(code_of([] { alpha_explicit(1.0, 1.0, 0.5, 1.0, 1.0); }) == ErrorCode::degenerate_constants);
}

TEST_CASE("beta and kappa") {
  const auto bk = beta_kappa(0.0, 2.0);
  CHECK(bk.beta == 0.75);
  CHECK(bk.kappa == 0.0);
  for (double cb : {0.1, 1.0, 3.0}) CHECK(beta_kappa(cb, 2.0).kappa == doctest::Approx(4.0 * cb).epsilon(1e-14));
  CHECK(code_of([] { beta_kappa(1.0, 1.0); }) == ErrorCode::degenerate_constants);
}

TEST_CASE("contraction constants") {
  const auto c = as_contraction_constants(1.0, 1.0, 1.0, 0.0, 1.0, TimeKind::continuous);
  CHECK(c.C_B == doctest::Approx(std::numbers::e).epsilon(1e-14));
  CHECK(c.C_C == doctest::Approx((1.0 + std::numbers::e) * (1.0 + std::numbers::e)).epsilon(1e-14));
  const auto flat = as_contraction_constants(1.0, 1.0, 0.0, 0.0, 1.0, TimeKind::discrete);
  CHECK(flat.C_B == 0.0);
  CHECK(flat.C_C == 1.0);
  // Bernoulli demo: C0 = 1, gamma = ln 2, osc 0.2, Lipschitz 0.05, dbar 4.
  const auto bern = as_contraction_constants(1.0, std::log(2.0), 0.05, 0.2, 4.0, TimeKind::discrete);
  const double a = std::exp(0.2) * 0.05 / 0.5;
  CHECK(bern.C_B == doctest::Approx(a * std::exp(4.0 * a)).epsilon(1e-14));
}

TEST_CASE("cftk transfer") {
  const auto t = cftk_transfer(1.0, 2.0, 0.5);
  CHECK(t.accepted);
  CHECK(t.C_A == 1.0);
  CHECK(t.gamma_A == 1.5);
  const auto r = cftk_transfer(1.0, 0.5, 0.5);
  CHECK_FALSE(r.accepted);
  CHECK(r.margin == 0.0);
}

TEST_CASE("Fenchel-Legendre transform of finite laws") {
  for (double q : {0.1, 0.3, 0.7}) {
    const FiniteLaw law{{1.0, q}, {0.5, 1.0 - q}};
    CHECK(fenchel_legendre(law, 1.0) == doctest::Approx(std::log(1.0 / q)).epsilon(1e-14));
    const double m = q + 0.5 * (1.0 - q);
    CHECK(fenchel_legendre(law, m) == 0.0);
    CHECK(std::isinf(fenchel_legendre(law, 1.0 + 1e-9)));
    // Convex and increasing above the mean.
    double prev = 0.0;
    for (int k = 1; k < 20; ++k) {
      const double x0 = m + (1.0 - m) * (k - 1) / 20.0, x1 = m + (1.0 - m) * k / 20.0,
                   x2 = m + (1.0 - m) * (k + 1) / 20.0;
      const double f0 = fenchel_legendre(law, x0), f1 = fenchel_legendre(law, x1), f2 = fenchel_legendre(law, x2);
      CHECK(f1 >= prev - 1e-12);
      CHECK(f1 <= 0.5 * (f0 + f2) + 1e-9);
      prev = f1;
    }
  }
  // Bernoulli(1/2) on {0, 1}: closed form x ln 2x + (1-x) ln 2(1-x).
  const FiniteLaw coin{{0.0, 0.5}, {1.0, 0.5}};
  for (double x : {0.6, 0.75, 0.9}) {
    const double exact = x * std::log(2.0 * x) + (1.0 - x) * std::log(2.0 * (1.0 - x));
    CHECK(fenchel_legendre(coin, x) == doctest::Approx(exact).epsilon(1e-9));
  }
  CHECK(code_of([] { fenchel_legendre({{1.5, 1.0}}, 0.5); }) == ErrorCode::invalid_parameter);
}

TEST_CASE("irf condition") {
  const FiniteLaw law{{1.0, 0.1}, {0.5, 0.9}};
  const auto v = irf_condition(law, 1.0);
  CHECK(v.holds);
  CHECK(v.q == 0.1);
  CHECK(v.margin == doctest::Approx(std::exp(-1.0) - 0.1));
  CHECK(v.epsilon > 0.0);
  CHECK(v.chi > 0.0);
  CHECK(fenchel_legendre(law, 1.0 - v.epsilon) - 1.0 == doctest::Approx(v.chi));
  CHECK_FALSE(irf_condition({{1.0, 0.5}, {0.5, 0.5}}, 1.0).holds);
  // The mixture model's Lipschitz law.
  const auto mix = identity_half_mixture(0.1).lipschitz_law();
  CHECK(irf_condition(mix, 1.0).holds);
}

TEST_CASE("theta eigenvalue") {
  CHECK(theta_eig(0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  for (double q : {-3.0, 0.5, 2.0}) CHECK(theta_eig(q, q) == doctest::Approx(q).epsilon(1e-14));
  RandomStream rng(5, 0);
  for (int k = 0; k < 500; ++k) {
    const double a = 10.0 * rng.uniform() - 5.0, b = 10.0 * rng.uniform() - 5.0;
    const double tr = a + b - 2.0, det = (a - 1.0) * (b - 1.0) - 1.0;
    const double top = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
    CHECK(std::abs(theta_eig(a, b) - top) <= 1e-12);
  }
}

TEST_CASE("bistable gamma and threshold") {
  CHECK(std::abs(bistable_gamma(2.0, -1.0, 1e4) - 1.0) <= 1e-3);
  CHECK(bistable_gamma(2.0, -1.0, 0.0) < 0.0);
  const auto t = r_threshold(2.0, -1.0, 10.0, 0.5);
  REQUIRE(t.r.has_value());
  CHECK(t.gamma_at_r > 0.0);
  CHECK(bistable_gamma(2.0, -1.0, *t.r - 0.5) <= 0.0);
  CHECK_FALSE(r_threshold(2.0, -1.0, 1.0, 0.5).r.has_value());
  CHECK(code_of([] { r_threshold(-1.0, -1.0, 1.0, 0.5); }) == ErrorCode::invalid_parameter);
}

TEST_CASE("proof constants") {
  const auto pc = proof_constants(1.0, 1.0, 0.0, 1.0, 2.0);
  CHECK(pc.beta == 0.5);
  CHECK(pc.kappa == 0.0);
  CHECK(pc.C0 == 1.0);
  CHECK(pc.C1 == 2.0);
  CHECK(pc.growth == 2.0);
  CHECK(pc.alpha == 1.0);
  const auto g = proof_constants(0.7, 1.5, 0.2, 2.0, 4.0);
  CHECK(g.alpha == doctest::Approx(0.7 * std::log(1.0 / g.beta) / std::log(g.growth)).epsilon(1e-14));
  CHECK(g.C1 > g.C0);
  const auto b = complete_bundle({0.7, 1.5, 0.2, 2.0, 1.0, 4.0});
  CHECK(b.alpha == g.alpha);
  CHECK(b.kappa == g.kappa);
}

TEST_CASE("fit_log_linear recovers an exponential") {
  std::vector<double> t, v;
  for (int k = 0; k < 10; ++k) {
    t.push_back(k);
    v.push_back(3.0 * std::exp(-0.4 * k));
  }
  const auto c = fit_log_linear(t, v);
  CHECK(c.slope == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(std::exp(c.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(c.r_squared == doctest::Approx(1.0));
  CHECK(std::isnan(fit_log_linear({0.0, 1.0}, {0.0, 1.0}).slope));
}

TEST_CASE("default pairs") {
  const auto p = default_pairs(bernoulli_convolution());
  CHECK(p.size() == 56);
  const auto q = default_pairs(bistable_pdmp(2.0, -1.0, 1.0).model);
  CHECK(q.size() == 16 * 15);
  for (const auto& pr : default_pairs(bernoulli_punctured())) CHECK(pr.x.x() != 0.0);
}

TEST_CASE("synchronous Bernoulli (A)-curve is 2^-n") {
  const auto model = bernoulli_convolution();
  const auto pairs = default_pairs(model);
  const auto times = integer_times(10);
  const auto rep = estimate_A(couple_synchronous(model), penalty_demo(), std::span(pairs).first(6), times, 200, 3);
  CHECK(rep.gamma_A == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  CHECK(rep.C_A == doctest::Approx(1.0).epsilon(1e-10));
  const auto ex = estimate_A_exact(model, penalty_demo(), std::span(pairs).first(6), 10);
  for (const auto& c : ex.curves)
    for (std::size_t k = 0; k < c.values.size(); ++k)
      CHECK(c.values[k] == doctest::Approx(std::ldexp(1.0, -static_cast<int>(k))).epsilon(1e-12));
}

TEST_CASE("|x|/2 witness stays at one half") {
  const auto model = bernoulli_punctured();
  const std::vector<StatePair> pairs{{State::scalar(1.0 / 3.0), State::scalar(-1.4)},
                                     {State::scalar(1.5), State::scalar(1.0 / 3.0)}};
  const auto rep = estimate_A_exact(model, penalty_counterexample_abs(), pairs, 12);
  CHECK(rep.warnings.empty());
  for (const auto& w : rep.witness)
    for (std::size_t k = 1; k < w.values.size(); ++k) CHECK(w.values[k] == 0.5);
}

TEST_CASE("exact B stays below the closed-form bound") {
  const auto model = bernoulli_convolution();
  const auto pen = penalty_demo();
  const auto pairs = default_pairs(model);
  const auto rep = estimate_B_exact(model, pen, pairs, 12);
  const auto cb = as_contraction_constants(1.0, std::log(2.0), pen.lipschitz(), pen.oscillation(), 4.0,
                                           TimeKind::discrete);
  CHECK(rep.C_B > 0.0);
  CHECK(rep.C_B <= cb.C_B);
  const auto flat = estimate_B_exact(model, PenaltyField::constant_survival(0.8), pairs, 8);
  CHECK(flat.C_B == 0.0);
}

TEST_CASE("constant penalty gives trivial B, C, H") {
  const auto model = bernoulli_convolution();
  const auto pen = PenaltyField::constant_survival(0.8);
  const auto pairs = default_pairs(model);
  const auto times = integer_times(6);
  const auto b = estimate_B(model, pen, std::span(pairs).first(4), times, 100, 1);
  CHECK(b.C_B == doctest::Approx(0.0).epsilon(1e-12));
  const auto c = estimate_C(couple_synchronous(model), pen, std::span(pairs).first(4), times, 100, 1);
  CHECK(c.C_C == doctest::Approx(1.0).epsilon(1e-12));
  const auto grid = default_grid(model, 8);
  const auto h = estimate_H(model, pen, grid, times, 100, 1);
  CHECK(h.C_H == doctest::Approx(1.0).epsilon(1e-12));
  const auto he = estimate_H_exact(model, pen, grid, 6);
  CHECK(he.C_H == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Monte Carlo B and H agree with enumeration") {
  const auto model = bernoulli_convolution();
  const auto pen = penalty_demo();
  const std::vector<StatePair> pairs{{State::scalar(-1.5), State::scalar(1.5)}};
  const auto times = integer_times(8);
  const auto mc = estimate_B(model, pen, pairs, times, 4000, 9);
  const auto ex = estimate_B_exact(model, pen, pairs, 8);
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK(std::abs(mc.curves[0].values[k] - ex.curves[0].values[k]) <= 4.0 * mc.curves[0].stderr_[k] + 1e-12);
  const std::vector<State> grid{State::scalar(-1.5), State::scalar(1.5)};
  const auto hm = estimate_H(model, pen, grid, times, 4000, 9);
  const auto he = estimate_H_exact(model, pen, grid, 8);
  CHECK(std::abs(hm.C_H - he.C_H) <= 4.0 * hm.stderr_ + 1e-12);
}

TEST_CASE("equivalence cross-check on the Bernoulli demo") {
  const auto model = bernoulli_convolution();
  const auto pen = penalty_demo();
  const auto pairs = default_pairs(model, 4);
  const auto times = integer_times(12);
  const auto a = estimate_A(couple_synchronous(model), pen, pairs, times, 500, 2);
  const auto b = estimate_B_exact(model, pen, pairs, 12);
  const auto h = estimate_H_exact(model, pen, default_grid(model, 8), 12);
  const auto eq = cross_check_equivalence(a, b, h);
  CHECK(eq.a_decays);
  CHECK(eq.aprime);
  CHECK(eq.b_bounded);
  CHECK(eq.h_bounded);
  CHECK(eq.consistent);
}

TEST_CASE("merge coupling (C) on the bistable system") {
  const auto sys = bistable_pdmp(2.0, -1.0, 1.0);
  const auto pairs = default_pairs(sys.model, 2);
  const std::vector<double> times{0.5, 1.0, 2.0};
  const auto c = estimate_C(couple_pdmp_merge(sys.model), sys.penalty, std::span(pairs).first(3), times, 300, 4);
  CHECK(c.C_C >= 1.0);
  CHECK(std::isfinite(c.C_C));
}
