#include <cmath>
#include <numeric>

#include "doctest.h"
#include "qsdsim/error.hpp"
#include "qsdsim/estimators.hpp"
#include "qsdsim/models.hpp"

using namespace qsdsim;

namespace {

double mean_x(const WeightedEnsemble& e) { return e.expectation([](const State& s) { return s.x(); }); }

// Delta-method standard error of a self-normalized mean.
double self_normalized_se(const WeightedEnsemble& e) {
  const double m = mean_x(e);
  double v = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) v += e.weight(i) * e.weight(i) * (e.point(i).x() - m) * (e.point(i).x() - m);
  return std::sqrt(v);
}

double exact_ratio(const DiscreteModel& m, const PenaltyField& p, double x0, std::size_t n) {
  const auto num = enumerated_feynman_kac_curve(m, p, x0, n, [](double x) { return x; });
  const auto den = enumerated_feynman_kac_curve(m, p, x0, n, [](double) { return 1.0; });
  return num[n] / den[n];
}

}  // namespace

TEST_CASE("conditional_law trivial cases") {
  const AnyModel m = bernoulli_convolution();
  const auto plain = conditional_law(m, PenaltyField::constant_survival(1.0), State::scalar(0.5), 6, 500, 3);
  for (double w : plain.ensemble.weights()) CHECK(w == doctest::Approx(1.0 / 500).epsilon(1e-12));
  CHECK(plain.ess == doctest::Approx(500.0));
  CHECK(plain.log_mean_z == doctest::Approx(0.0).epsilon(1e-15));
  const auto pair = conditional_law(m, PenaltyField::constant_survival(0.3), State::scalar(0.5), 4, 2, 3);
  CHECK(pair.ensemble.weight(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pair.ensemble.weight(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(conditional_law(m, penalty_demo(), State::scalar(0.5), 4, 1, 3), Error);
  CHECK_THROWS_AS(conditional_law(m, penalty_demo(), State::scalar(0.5), 2.5, 10, 3), Error);
}

TEST_CASE("conditional_law agrees with enumeration") {
  const auto dm = bernoulli_convolution();
  const AnyModel m = dm;
  const auto pen = penalty_demo();
  int inside = 0, total = 0;
  for (std::size_t n : {4u, 8u, 12u})
    for (double x0 : {-1.3, 0.0, 1.9})
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto law = conditional_law(m, pen, State::scalar(x0), static_cast<double>(n), 4000, seed);
        const double err = std::abs(mean_x(law.ensemble) - exact_ratio(dm, pen, x0, n));
        inside += err <= 3.0 * self_normalized_se(law.ensemble);
        ++total;
      }
  CHECK(inside >= total - 2);
}

TEST_CASE("smc_conditional_law") {
  const auto dm = bernoulli_convolution();
  const AnyModel m = dm;
  const auto pen = penalty_demo();
  const auto a = conditional_law(m, pen, State::scalar(0.7), 6, 1000, 11);
  const auto b = smc_conditional_law(m, pen, State::scalar(0.7), 6, 1000, 7, 11);
  CHECK(a.ensemble.points() == b.ensemble.points());
  CHECK(a.ensemble.weights() == b.ensemble.weights());
  // Replicate spread as the error scale, since resampling inflates variance.
  std::vector<double> means;
  for (std::uint64_t seed = 1; seed <= 30; ++seed)
    means.push_back(mean_x(smc_conditional_law(m, pen, State::scalar(0.7), 10, 2000, 2, seed).ensemble));
  const double mu = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  double var = 0.0;
  for (double v : means) var += (v - mu) * (v - mu) / (means.size() - 1);
  CHECK(std::abs(mu - exact_ratio(dm, pen, 0.7, 10)) <= 3.0 * std::sqrt(var / means.size()));
  // Constant survival: normalizer is exact and weights uniform.
  const auto c = smc_conditional_law(m, PenaltyField::constant_survival(0.5), State::scalar(0.7), 9, 300, 2, 4);
  CHECK(c.log_mean_z == doctest::Approx(9 * std::log(0.5)).epsilon(1e-12));
  for (double w : c.ensemble.weights()) CHECK(w == doctest::Approx(1.0 / 300).epsilon(1e-12));
  CHECK_THROWS_AS(smc_conditional_law(m, pen, State::scalar(0.7), 9, 300, 0, 4), Error);
}

TEST_CASE("survival_curve and estimate_lambda0") {
  const AnyModel m = bernoulli_convolution();
  const std::vector<double> times{0, 1, 2, 5, 10, 20};
  const auto c = survival_curve(m, PenaltyField::constant_survival(0.8), State::scalar(-1.0), times, 100, 1);
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(c.estimate[k] == doctest::Approx(std::pow(0.8, times[k])).epsilon(1e-12));
    CHECK(c.stderr_[k] <= 1e-8);
  }
  CHECK(c.estimate[0] == 1.0);
  const auto fit = estimate_lambda0(c);
  CHECK(fit.lambda0 == doctest::Approx(-std::log(0.8)).epsilon(1e-12));
  CHECK(fit.window_lo == 5.0);
  const auto two = estimate_lambda0(c, std::make_pair(10.0, 20.0));
  CHECK(two.points == 2);
  CHECK(two.lambda0 == doctest::Approx(-std::log(0.8)).epsilon(1e-13));

  const auto demo = survival_curve(m, penalty_demo(), State::scalar(-1.0), times, 4000, 2);
  for (std::size_t k = 1; k < times.size(); ++k) {
    CHECK(demo.estimate[k] > 0.0);
    CHECK(demo.estimate[k] <= demo.estimate[k - 1] + 2.0 * demo.stderr_[k]);
  }

  SurvivalCurve bad{{1, 2, 3}, {0.5, 0.0, 0.1}, {0, 0, 0}, {1, 1, 1}};
  try {
    estimate_lambda0(bad, std::make_pair(1.0, 3.0));
    FAIL("expected invalid-curve");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_curve);
  }
  CHECK_THROWS_AS(estimate_lambda0(bad, std::make_pair(1.0, 1.0)), Error);
}

TEST_CASE("lambda0 from the exact Bernoulli curve is window-stable") {
  const auto dm = bernoulli_convolution();
  const auto curve = enumerated_feynman_kac_curve(dm, penalty_demo(), 0.3, 14, [](double) { return 1.0; });
  SurvivalCurve sc;
  for (std::size_t n = 0; n <= 14; ++n) {
    sc.times.push_back(static_cast<double>(n));
    sc.estimate.push_back(curve[n]);
    sc.stderr_.push_back(0.0);
    sc.samples.push_back(0);
  }
  const double a = estimate_lambda0(sc, std::make_pair(6.0, 14.0)).lambda0;
  const double b = estimate_lambda0(sc, std::make_pair(9.0, 14.0)).lambda0;
  const double c = estimate_lambda0(sc).lambda0;
  CHECK(std::abs(a - b) <= 1e-3);
  CHECK(std::abs(b - c) <= 1e-3);
}

TEST_CASE("estimate_eta") {
  const AnyModel m = bernoulli_convolution();
  const auto grid = default_grid(m);
  REQUIRE(grid.size() == 64);
  CHECK(grid.front().x() == -2.0);
  CHECK(grid.back().x() == 2.0);
  const auto ref = WeightedEnsemble::uniform(grid);
  const auto flat = estimate_eta(m, PenaltyField::constant_survival(0.8), grid, 10, -std::log(0.8), 50, 1, ref);
  for (double v : flat.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  const auto demo = estimate_eta(m, penalty_demo(), grid, 12, 0.195, 500, 1, ref);
  double mass = 0.0;
  for (double v : demo.values) {
    CHECK(v > 0.2);
    mass += v / 64.0;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  // p decreases in x, so survival (and eta) decreases in x.
  for (std::size_t k = 1; k < demo.values.size(); ++k) CHECK(demo.values[k] < demo.values[k - 1]);
  bool interp = false;
  CHECK(demo.at(grid[5], interp) == demo.values[5]);
  CHECK_FALSE(interp);
  const double mid = demo.at(State::scalar(0.5 * (grid[5].x() + grid[6].x())), interp);
  CHECK(interp);
  CHECK(mid == doctest::Approx(0.5 * (demo.values[5] + demo.values[6])));
}

TEST_CASE("resampling") {
  const auto mu = WeightedEnsemble::from_scalars(std::vector<double>{3, 1, 2}, std::vector<double>{0.5, 0.25, 0.25});
  const auto idx = systematic_resample(mu, 4, 0.5);
  CHECK(idx == std::vector<std::size_t>{1, 2, 0, 0});
  RandomStream rng(1, 0);
  const auto many = multinomial_resample(mu, 40000, rng);
  const double frac = std::count(many.begin(), many.end(), 0u) / 40000.0;
  CHECK(std::abs(frac - 0.5) <= 4.0 * std::sqrt(0.25 / 40000));
  CHECK_THROWS_AS(systematic_resample(mu, 4, 1.0), Error);
}

TEST_CASE("qsd_fixed_point on Bernoulli") {
  const AnyModel m = bernoulli_convolution();
  QsdOptions opts;
  opts.compute_eta = false;
  const auto flat = qsd_fixed_point(m, PenaltyField::constant_survival(0.8), 5, 4000, 0.01, 30, 1, opts);
  CHECK(flat.converged);
  CHECK(flat.lambda0 == doctest::Approx(-std::log(0.8)).epsilon(1e-12));
  std::vector<double> u;
  for (int i = 0; i <= 2000; ++i) u.push_back(-2.0 + 4.0 * i / 2000);
  CHECK(w1_quantile(flat.measure, WeightedEnsemble::from_scalars(u, std::vector<double>(u.size(), 1.0 / u.size()))) <= 0.05);

  QsdOptions left = opts, right = opts;
  left.initial = WeightedEnsemble::dirac(State::scalar(-2.0));
  right.initial = WeightedEnsemble::dirac(State::scalar(2.0));
  const auto a = qsd_fixed_point(m, penalty_demo(), 5, 4000, 0.01, 30, 2, left);
  const auto b = qsd_fixed_point(m, penalty_demo(), 5, 4000, 0.01, 30, 2, right);
  CHECK(a.converged);
  CHECK(w1_quantile(a.measure, b.measure) <= 0.03);
  CHECK(a.measure.normalized());
  CHECK(a.lambda0 > 0.1);
  CHECK(a.lambda0 < 0.3);
  CHECK(quasi_stationarity_residual(m, penalty_demo(), a.measure, 5, 8, 9) <= 0.02);

  const auto stuck = qsd_fixed_point(m, penalty_demo(), 5, 500, 1e-9, 2, 2, left);
  CHECK_FALSE(stuck.converged);
  CHECK(stuck.iterations == 2);
  CHECK_THROWS_AS(qsd_fixed_point(m, penalty_demo(), 0, 500, 0.01, 2, 2), Error);
}

TEST_CASE("nu_q and the Q-process") {
  const AnyModel m = bernoulli_convolution();
  QsdOptions opts;
  opts.eta_particles = 1000;
  const auto flat = qsd_fixed_point(m, PenaltyField::constant_survival(0.8), 5, 2000, 0.01, 30, 1, opts);
  const auto nq_flat = nu_q(flat);
  for (std::size_t i = 0; i < nq_flat.measure.size(); ++i)
    CHECK(nq_flat.measure.weight(i) == doctest::Approx(flat.measure.weight(i)).epsilon(1e-12));

  const auto demo = qsd_fixed_point(m, penalty_demo(), 5, 4000, 0.01, 30, 1, opts);
  const auto nq = nu_q(demo);
  CHECK(nq.interpolated);
  CHECK(nq.measure.normalized());
  for (double w : nq.measure.weights()) CHECK(w > 0.0);

  const auto q_const = q_process_marginal(m, PenaltyField::constant_survival(0.8), State::scalar(1.0), 3, 9, 200, 5);
  for (double w : q_const.weights()) CHECK(w == doctest::Approx(1.0 / 200).epsilon(1e-12));
  const auto same_time = q_process_marginal(m, penalty_demo(), State::scalar(1.0), 6, 6.0, 300, 5);
  const auto cond = conditional_law(m, penalty_demo(), State::scalar(1.0), 6, 300, 5);
  CHECK(same_time.points() == cond.ensemble.points());
  CHECK(same_time.weights() == cond.ensemble.weights());

  const auto stationary = q_process_marginal(m, penalty_demo(), nq.measure, 10, 40.0, 10000, 7);
  CHECK(w1_quantile(stationary, nq.measure) <= 0.05);
}

TEST_CASE("quasi_ergodic") {
  const AnyModel m = bernoulli_convolution();
  const auto one = quasi_ergodic(m, penalty_demo(), State::scalar(0.25), 1, 10, 1);
  for (const auto& p : one.points()) CHECK(p.x() == 0.25);
  const auto plain = quasi_ergodic(m, PenaltyField::constant_survival(1.0), State::scalar(0.25), 3, 10, 1);
  CHECK(plain.size() == 30);
  for (double w : plain.weights()) CHECK(w == doctest::Approx(1.0 / 30).epsilon(1e-12));
  const auto pop = propagate(m, PenaltyField::constant_survival(1.0), replicate(State::scalar(0.25), 10), {1, 0},
                             std::vector<double>{0, 1, 2});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 10; ++i) CHECK(plain.point(k * 10 + i).x() == pop.x[k][i]);
}

TEST_CASE("continuous-time estimators on the bistable system") {
  const auto sys = bistable_pdmp(2.0, -1.0, 0.5);
  const AnyModel m = sys.model;
  const auto law = conditional_law(m, sys.penalty, State::with_mode(0.5, 1), 3.0, 200, 1);
  for (const auto& p : law.ensemble.points()) CHECK(p.x() > 0.0);
  const std::vector<double> times{0.0, 1.0, 2.0, 4.0};
  const auto c = survival_curve(m, sys.penalty, State::with_mode(0.5, 1), times, 400, 1);
  CHECK(c.estimate[0] == 1.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    CHECK(c.estimate[k] < c.estimate[k - 1]);
    CHECK(c.estimate[k] >= std::exp(-0.5 * times[k]));
  }
  const auto occ = quasi_ergodic(m, sys.penalty, State::with_mode(0.5, 1), 2.0, 20, 1, {}, 0.25);
  CHECK(occ.size() == 160);
}

TEST_CASE("estimators are independent of worker count") {
  const AnyModel m = bernoulli_convolution();
  const auto a = conditional_law(m, penalty_demo(), State::scalar(0.1), 9, 10000, 4, {1, 4096});
  const auto b = conditional_law(m, penalty_demo(), State::scalar(0.1), 9, 10000, 4, {4, 777});
  CHECK(a.ensemble.weights() == b.ensemble.weights());
  CHECK(a.log_mean_z == b.log_mean_z);
}
