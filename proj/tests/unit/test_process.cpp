#include <cmath>
#include <numeric>

#include "doctest.h"
#include "qsdsim/error.hpp"
#include "qsdsim/metric.hpp"
#include "qsdsim/models.hpp"
#include "qsdsim/process.hpp"

using namespace qsdsim;

TEST_CASE("Bernoulli steps by hand") {
  const auto m = bernoulli_convolution();
  CHECK(m.step(0.0, 1) == 1.0);
  CHECK(m.step(m.step(-2.0, 1), 1) == 1.0);
  CHECK(m.step(2.0, 0) == 0.0);
  const auto traj = simulate_discrete(m, 0.7, 0, RandomStream(1, 0));
  REQUIRE(traj.states.size() == 1);
  CHECK(traj.states[0].x() == 0.7);
  CHECK_THROWS_AS(simulate_discrete(m, 2.5, 3, RandomStream(1, 0)), Error);
}

TEST_CASE("Bernoulli kernel keeps [-2, 2]") {
  const auto m = bernoulli_convolution();
  RandomStream rng(2, 0);
  std::size_t redraws = 0;
  double x = -2.0;
  for (int k = 0; k < 10000; ++k) {
    x = m.sample_step(x, rng, redraws);
    REQUIRE(std::abs(x) <= 2.0);
  }
  CHECK(redraws == 0);
}

TEST_CASE("discrete weights") {
  const auto m = bernoulli_convolution();
  const auto t0 = simulate_discrete(m, 0.3, 0, RandomStream(1, 0));
  CHECK(weight_discrete(t0, penalty_demo()) == 1.0);
  const auto t5 = simulate_discrete(m, 0.3, 5, RandomStream(1, 0));
  CHECK(weight_discrete(t5, PenaltyField::constant_survival(0.5)) == doctest::Approx(std::pow(0.5, 5)).epsilon(1e-14));
  Trajectory manual;
  manual.times = {0, 1};
  manual.states = {State::scalar(1.0), State::scalar(1.5)};
  CHECK(weight_discrete(manual, penalty_counterexample_abs()) == 0.5);
  manual.times.push_back(2);
  manual.states.push_back(State::scalar(1.75));
  CHECK(weight_discrete(manual, penalty_counterexample_abs()) == 0.375);
  CHECK_THROWS_AS(weight_discrete(manual, PenaltyField::constant_rate(1.0)), Error);
}

TEST_CASE("discrete weights are multiplicative along concatenated paths") {
  const auto m = bernoulli_convolution();
  const auto pen = penalty_demo();
  const auto traj = simulate_discrete(m, -1.1, 20, RandomStream(3, 0));
  Trajectory head, tail;
  for (std::size_t k = 0; k <= 8; ++k) {
    head.times.push_back(k);
    head.states.push_back(traj.states[k]);
  }
  for (std::size_t k = 8; k <= 20; ++k) {
    tail.times.push_back(k - 8);
    tail.states.push_back(traj.states[k]);
  }
  CHECK(weight_discrete(traj, pen) ==
        doctest::Approx(weight_discrete(head, pen) * weight_discrete(tail, pen)).epsilon(1e-14));
}

TEST_CASE("enumerate_paths") {
  const auto m = bernoulli_convolution();
  const auto one = enumerate_paths(m, Rational(0), 1);
  REQUIRE(one.size() == 2);
  CHECK(one[0].prob == make_rational(1, 2));
  const auto three = enumerate_paths(m, make_rational(1, 3), 3);
  CHECK(three.size() == 8);
  Rational total = 0;
  for (const auto& p : three) total += p.prob;
  CHECK(total == 1);
  const auto two = enumerate_paths(m, Rational(0), 2);
  std::vector<Rational> ends;
  for (const auto& p : two) {
    ends.push_back(p.states.back());
    CHECK(p.prob == make_rational(1, 4));
  }
  CHECK(ends == std::vector<Rational>{make_rational(-3, 2), make_rational(1, 2), make_rational(-1, 2),
                                      make_rational(3, 2)});
  CHECK_THROWS_AS(enumerate_paths(m, Rational(0), 21), Error);
  const DiscreteModel sampled("gauss", [](double x, RandomStream& r) { return 0.5 * x + r.uniform() - 0.5; },
                              StateSpace::closed(-2, 2));
  try {
    enumerate_paths(sampled, Rational(0), 2);
    FAIL("expected unsupported-model");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsupported_model);
  }
}

TEST_CASE("exact Feynman-Kac on the |x|/2 counter-example") {
  const auto m = bernoulli_punctured();
  const auto p = penalty_counterexample_abs();
  for (const auto& x : {make_rational(1, 3), make_rational(-7, 5), make_rational(3, 2)}) {
    const auto num = exact_feynman_kac_curve(m, p, x, 12, [](const Rational& v) { return v; });
    const auto den = exact_feynman_kac_curve(m, p, x, 12, [](const Rational&) { return Rational(1); });
    for (std::size_t n = 1; n <= 12; ++n) {
      CAPTURE(n);
      CHECK(Rational(num[n] / den[n]) == Rational(x / 2));
      const auto prod = exact_path_expectation(m, x, n, [](const std::vector<Rational>& s) {
        Rational r = 1;
        for (std::size_t k = 1; k + 1 < s.size(); ++k) r *= abs(s[k]);
        return r;
      });
      CHECK(prod == 1);
    }
  }
  const auto conservative = exact_feynman_kac(bernoulli_convolution(), PenaltyField::constant_survival(1.0),
                                              Rational(0), 6, [](const Rational&) { return Rational(1); });
  CHECK(conservative == 1);
}

TEST_CASE("rational indicator penalty needs exact states") {
  const auto p = penalty_counterexample_rational();
  CHECK(p.exact(make_rational(1, 3)) == make_rational(1, 2));
  CHECK(p.exact(make_rational(-1, 3)) == 1);
  try {
    (void)p(State::scalar(0.5));
    FAIL("expected requires-exact-arithmetic");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::requires_exact_arithmetic);
  }
  // p(X_1) = 1/2 exactly when theta_1 = +1.
  const auto m = bernoulli_convolution();
  for (const auto& x : {Rational(-2), make_rational(-5, 7), make_rational(1, 3), make_rational(19, 10)}) {
    CHECK(p.exact(m.step_exact(x, 1)) == make_rational(1, 2));
    CHECK(p.exact(m.step_exact(x, 0)) == 1);
  }
}

TEST_CASE("Monte Carlo mean of Z f(X) agrees with enumeration") {
  const auto m = bernoulli_convolution();
  const auto pen = penalty_demo();
  const std::vector<double> times{0, 3, 7, 12};
  const std::size_t N = 100000;
  const auto pop = propagate(m, pen, replicate(State::scalar(0.4), N), {21, 0}, times);
  const auto exact = enumerated_feynman_kac_curve(m, pen, 0.4, 12, [](double x) { return x; });
  for (std::size_t k = 0; k < times.size(); ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double v = std::exp(pop.log_z[k][i]) * pop.x[k][i];
      s += v;
      s2 += v * v;
    }
    const double mean = s / N, se = std::sqrt(std::max(0.0, s2 / N - mean * mean) / N);
    CHECK(std::abs(mean - exact[static_cast<std::size_t>(times[k])]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("engine matches single-trajectory simulation and is worker-count independent") {
  const auto m = bernoulli_convolution();
  const auto pen = penalty_demo();
  const std::vector<double> times{0, 5, 9};
  std::vector<State> starts;
  for (int i = 0; i < 9000; ++i) starts.push_back(State::scalar(-2.0 + 4.0 * i / 9000.0));
  const auto a = propagate(m, pen, starts, {5, 100}, times, {1, 4096});
  const auto b = propagate(m, pen, starts, {5, 100}, times, {3, 1000});
  CHECK(a.x == b.x);
  CHECK(a.log_z == b.log_z);
  for (std::size_t i : {0u, 4095u, 4096u, 8999u}) {
    const auto traj = simulate_discrete(m, starts[i].x(), 9, RandomStream(5, 100 + i));
    CHECK(traj.states[9].x() == a.x[2][i]);
    CHECK(log_weights_discrete(traj, pen)[9] == a.log_z[2][i]);
  }
}

TEST_CASE("punctured space never reaches zero") {
  const auto m = bernoulli_punctured();
  const auto pop = propagate(m, penalty_counterexample_abs(), replicate(State::scalar(0.5), 20000), {1, 0},
                             std::vector<double>{30});
  CHECK(pop.redraws == 0);
  for (double x : pop.x[0]) {
    REQUIRE(x != 0.0);
    REQUIRE(std::abs(x) < 2.0);
  }
}

TEST_CASE("synchronous coupling halves the distance exactly") {
  const auto coupled = couple_synchronous(bernoulli_convolution());
  std::vector<double> times(41);
  std::iota(times.begin(), times.end(), 0.0);
  const auto pop = simulate_coupled(coupled, penalty_demo(), State::scalar(-2.0), State::scalar(2.0), 64, {9, 0}, times);
  for (std::size_t n = 0; n <= 40; ++n)
    for (std::size_t i = 0; i < 64; ++i) REQUIRE(std::abs(pop.first.x[n][i] - pop.second.x[n][i]) == std::ldexp(4.0, -static_cast<int>(n)));
  const auto same = simulate_coupled(coupled, penalty_demo(), State::scalar(0.3), State::scalar(0.3), 16, {9, 0}, times);
  CHECK(same.first.x == same.second.x);
}

TEST_CASE("iterated contractions never increase the coupled distance") {
  const auto coupled = couple_synchronous(identity_half_mixture(0.3));
  std::vector<double> times(21);
  std::iota(times.begin(), times.end(), 0.0);
  const auto pop = simulate_coupled(coupled, penalty_affine_oscillation(1.0), State::scalar(-1.5), State::scalar(1.0),
                                    256, {4, 0}, times);
  for (std::size_t n = 1; n <= 20; ++n)
    for (std::size_t i = 0; i < 256; ++i)
      REQUIRE(std::abs(pop.first.x[n][i] - pop.second.x[n][i]) <= std::abs(pop.first.x[n - 1][i] - pop.second.x[n - 1][i]));
}

TEST_CASE("iterated_functions validation and Lipschitz law") {
  CHECK_THROWS_AS(iterated_functions({{[](double x) { return 2 * x; }, 2.0, 1.0, std::nullopt}}), Error);
  const auto m = identity_half_mixture(0.25);
  const auto law = m.lipschitz_law();
  REQUIRE(law.size() == 2);
  CHECK(law[1].first == 1.0);
  CHECK(law[1].second == 0.25);
  const auto single = iterated_functions({{[](double x) { return 0.5 * x + 1.0; }, 0.5, 1.0, std::nullopt}});
  double x = -2.0;
  std::size_t r = 0;
  RandomStream rng(1, 0);
  for (int k = 0; k < 60; ++k) x = single.sample_step(x, rng, r);
  CHECK(x == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("2x2 matrix exponential against a Taylor series") {
  const std::vector<std::array<double, 4>> mats{{-1, 1, 0, -2}, {-1, 3, -3, -1}, {-2, 1, 0, -2}, {0.3, -0.2, 0.5, -1.1}};
  for (const auto& A : mats) {
    for (double t : {0.0, 0.01, 0.7, 3.0}) {
      std::array<double, 4> term{1, 0, 0, 1}, sum = term;
      for (int k = 1; k < 80; ++k) {
        const std::array<double, 4> next{(A[0] * term[0] + A[1] * term[2]) * t / k, (A[0] * term[1] + A[1] * term[3]) * t / k,
                                         (A[2] * term[0] + A[3] * term[2]) * t / k, (A[2] * term[1] + A[3] * term[3]) * t / k};
        term = next;
        for (int c = 0; c < 4; ++c) sum[c] += term[c];
      }
      const auto E = expm2(A, t);
      for (int c = 0; c < 4; ++c) CHECK(E[c] == doctest::Approx(sum[c]).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("linear flows") {
  const PdmpModel decay("decay", 1, {0.0}, std::vector<LinearField>{{{-1, 0, 0, 0}, {0, 0}}}, 2.0);
  for (double t : {0.1, 1.0, 4.0}) CHECK(std::abs(decay.flow(0, {1.3, 0}, t)[0] - 1.3 * std::exp(-t)) <= 1e-9);
  const PdmpModel slow("slow", 1, {-1e-12, 1e-12, 1e-12, -1e-12},
                       std::vector<LinearField>{{{-1, 0, 0, 0}, {0, 0}}, {{-1, 0, 0, 0}, {0.5, 0}}}, 2.0);
  const auto traj = simulate_pdmp(slow, State::with_mode(1.0, 0), 3.0, RandomStream(1, 0));
  CHECK(traj.segments.size() == 1);
  CHECK(traj.states.back().mode == 0);
  CHECK_THROWS_AS(simulate_pdmp(slow, State::with_mode(3.0, 0), 3.0, RandomStream(1, 0)), Error);
}

TEST_CASE("switched linear: line a R is invariant and radius holds") {
  const auto m = switched_linear({-1, 1, 0, -2}, {1, 0}, uniform_two_mode_rates(1.0));
  CHECK(m.radius() > 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto traj = simulate_pdmp(m, State::planar(0.4, 0.0, i % 2), 20.0, RandomStream(8, i));
    for (const auto& seg : traj.segments) CHECK(std::abs(seg.start.pos[1]) <= 1e-12);
    CHECK(std::abs(traj.states.back().pos[1]) <= 1e-12);
  }
  CHECK(monotonicity_rate(m, 1000, 1) > 0.7);
  const auto neg = switched_linear({-1, 0, 0, -1}, {0.5, 0.2}, uniform_two_mode_rates(1.0));
  CHECK(monotonicity_rate(neg, 1000, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(switched_linear({1, 0, 0, -2}, {1, 0}, uniform_two_mode_rates(1.0)), Error);
}

TEST_CASE("bistable flows") {
  const auto sys = bistable_pdmp(2.0, -1.0, 0.0);
  CHECK(sys.model.flow(1, {0.0, 0.0}, 5.0)[0] == 0.0);
  CHECK(sys.model.flow(0, {0.0, 0.0}, 5.0)[0] == 0.0);
  // y = 1/x^2 solves y' = 2 - 2 p y, so x(t)^2 = 1 / (1/p + (1/x0^2 - 1/p) e^{-2pt}).
  for (double p : {2.0, -1.0}) {
    const int mode = p > 0 ? 1 : 0;
    for (double t : {0.3, 2.0, 7.5}) {
      const double x0 = 0.5;
      const double y = 1.0 / p + (1.0 / (x0 * x0) - 1.0 / p) * std::exp(-2.0 * p * t);
      CHECK(std::abs(sys.model.flow(mode, {x0, 0.0}, t)[0] - 1.0 / std::sqrt(y)) <= 1e-7);
    }
  }
  CHECK_THROWS_AS(bistable_pdmp(-1.0, -1.0, 0.0), Error);
  CHECK_THROWS_AS(bistable_pdmp(1.0, 1.0, 0.0), Error);
}

TEST_CASE("bistable sign invariance") {
  const auto sys = bistable_pdmp(2.0, -1.0, 0.0);
  std::vector<double> times;
  for (int k = 1; k <= 30; ++k) times.push_back(k);
  const auto pos = propagate(sys.model, sys.penalty, replicate(State::with_mode(0.5, 1), 500), {3, 0}, times);
  const auto neg = propagate(sys.model, sys.penalty, replicate(State::with_mode(-0.5, 0), 500), {3, 0}, times);
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t i = 0; i < 500; ++i) {
      REQUIRE(pos.x[k][i] > 0.0);
      REQUIRE(neg.x[k][i] < 0.0);
      REQUIRE(std::abs(pos.x[k][i]) <= std::sqrt(2.0) * (1 + 1e-12));
    }
}

TEST_CASE("continuous weights") {
  const PdmpModel still("still", 1, {-1e-12, 1e-12, 1e-12, -1e-12},
                        std::vector<LinearField>{{{-1, 0, 0, 0}, {0.7, 0}}, {{-1, 0, 0, 0}, {0.7, 0}}}, 2.0);
  const auto traj = simulate_pdmp(still, State::with_mode(0.7, 0), 2.5, RandomStream(1, 0));
  CHECK(weight_continuous(traj, PenaltyField::constant_rate(0.0), still) == 1.0);
  const auto lin = PenaltyField::linear("rho=x", PenaltyKind::continuous_rho, 0.0, 1.0, 0.0, 2.0);
  CHECK(std::abs(weight_continuous(traj, lin, still) - std::exp(-0.7 * 2.5)) <= 1e-9);
  CHECK_THROWS_AS(weight_continuous(traj, penalty_demo(), still), Error);

  const auto sys = bistable_pdmp(2.0, -1.0, 0.8);
  const auto path = simulate_pdmp(sys.model, State::with_mode(0.3, 1), 6.0, RandomStream(4, 2));
  double plus_time = 0.0;
  for (const auto& seg : path.segments)
    if (seg.mode == 1) plus_time += seg.t1 - seg.t0;
  CHECK(weight_continuous(path, sys.penalty, sys.model) == doctest::Approx(std::exp(-0.8 * plus_time)).epsilon(1e-13));
}

TEST_CASE("Simpson weight matches a closed-form integral of the linear flow") {
  const auto m = switched_linear({-1, 1, 0, -2}, {1, 0}, uniform_two_mode_rates(1.0));
  const auto pen = PenaltyField(PenaltyField::Info{"x1", PenaltyKind::continuous_rho, 1, 1, 0, 10, true},
                                [](const State& s) { return 2.0 + s.pos[0]; });
  // Mode 0: x(t) = e^{At} x0, the first coordinate integral of e^{At} x0.
  const Vec2 x0{0.3, -0.4};
  double integral = 0.0;
  const double t = 1.7;
  m.flow_integrate(0, x0, t, [&](const Vec2& p, int mode) { return pen(State::planar(p[0], p[1], mode)); }, integral);
  // A^{-1} (e^{At} - I) x0 with A = [[-1,1],[0,-2]], A^{-1} = [[-1,-1/2],[0,-1/2]].
  const auto E = expm2({-1, 1, 0, -2}, t);
  const double d0 = (E[0] - 1) * x0[0] + E[1] * x0[1], d1 = E[2] * x0[0] + (E[3] - 1) * x0[1];
  const double exact = 2.0 * t + (-d0 - 0.5 * d1);
  CHECK(std::abs(integral - exact) <= 1e-8);
}

TEST_CASE("holding times have mean 1/|Q_ii|") {
  const auto m = switched_linear({-1, 1, 0, -2}, {1, 0}, {-2.0, 2.0, 0.5, -0.5});
  double sum[2] = {0, 0};
  double sum2[2] = {0, 0};
  int count[2] = {0, 0};
  for (int i = 0; i < 400; ++i) {
    const auto traj = simulate_pdmp(m, State::planar(0, 0, 0), 200.0, RandomStream(6, i));
    for (std::size_t s = 0; s + 1 < traj.segments.size(); ++s) {
      const auto& seg = traj.segments[s];
      const double h = seg.t1 - seg.t0;
      sum[seg.mode] += h;
      sum2[seg.mode] += h * h;
      ++count[seg.mode];
    }
  }
  const double expect[2] = {0.5, 2.0};
  for (int k = 0; k < 2; ++k) {
    const double mean = sum[k] / count[k];
    const double se = std::sqrt((sum2[k] / count[k] - mean * mean) / count[k]);
    CHECK(std::abs(mean - expect[k]) <= 3.0 * se);
  }
}

TEST_CASE("merge coupling: marginals and post-merge behaviour") {
  const auto m = switched_linear({-1, 1, 0, -2}, {1, 0}, uniform_two_mode_rates(1.0));
  const auto pen = penalty_switched_demo(m.radius());
  const auto coupled = couple_pdmp_merge(m);
  const std::vector<double> times{1.0, 4.0};
  const State x = State::planar(0.5, 0.0, 0), y = State::planar(0.0, 0.5, 1);
  const std::size_t N = 2000;
  const auto pair = simulate_coupled(coupled, pen, x, y, N, {13, 0}, times);
  // The first copy is driven exactly like a plain population on the same streams.
  const auto plain_x = propagate(m, pen, replicate(x, N), {13, 0}, times);
  CHECK(pair.first.x == plain_x.x);
  CHECK(pair.first.log_z == plain_x.log_z);
  // The second copy matches an independent simulation from y in law (two-sample W1, 3 sigma via replicates).
  const std::size_t M = 300;
  const auto small = simulate_coupled(coupled, pen, x, y, M, {13, 0}, times);
  const auto plain_y = propagate(m, pen, replicate(y, M), {14, 0}, times);
  const auto d = pdmp_metric(m.radius());
  const double observed = w1_discrete(small.second.conditional(1), plain_y.conditional(1), d).distance;
  std::vector<double> null_draws;
  for (int r = 0; r < 8; ++r) {
    const auto a = propagate(m, pen, replicate(y, M), {100 + static_cast<std::uint64_t>(r), 0}, times);
    const auto b = propagate(m, pen, replicate(y, M), {200 + static_cast<std::uint64_t>(r), 0}, times);
    null_draws.push_back(w1_discrete(a.conditional(1), b.conditional(1), d).distance);
  }
  double mean = 0.0, var = 0.0;
  for (double v : null_draws) mean += v / null_draws.size();
  for (double v : null_draws) var += (v - mean) * (v - mean) / (null_draws.size() - 1);
  CHECK(observed <= mean + 3.0 * std::sqrt(var) + 1e-12);
  // After merging, modes agree and the distance contracts at rate 1 (A has spectral abscissa -1).
  for (std::size_t i = 0; i < N; ++i) {
    if (pair.merge_time[i] <= 1.0) {
      CHECK(pair.first.mode[1][i] == pair.second.mode[1][i]);
    }
  }
  const auto same = simulate_coupled(coupled, pen, x, State::planar(0.0, 0.5, 0), 100, {1, 0}, times);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(same.merge_time[i] == 0.0);
    const double d0 = std::hypot(0.5, 0.5);
    const double dt = std::hypot(same.first.x[1][i] - same.second.x[1][i], same.first.y[1][i] - same.second.y[1][i]);
    CHECK(dt <= std::exp(-monotonicity_rate(m, 200, 3) * 4.0) * d0 * (1 + 1e-9));
  }
}
