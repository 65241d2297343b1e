#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qsdsim/error.hpp"
#include "qsdsim/estimators.hpp"
#include "qsdsim/kernels.hpp"

namespace qsdsim {

namespace {

// Stream bases: epochs of one estimator occupy disjoint 2^32 blocks.
constexpr std::uint64_t kEpochShift = 32;
constexpr std::uint64_t kResampleStream = kAuxiliaryStreamBase + 101;
constexpr std::uint64_t kResidualBase = std::uint64_t{7} << kEpochShift;

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  require(std::isfinite(m), ErrorCode::numerical_underflow, "all log-weights are -inf after rescaling");
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] - m);
  return m + std::log(kernels::active().sum(e));
}

bool discrete_model(const AnyModel& model) { return std::holds_alternative<DiscreteModel>(model); }

void check_time(const AnyModel& model, double t, const char* what) {
  require(std::isfinite(t) && t >= 0.0, ErrorCode::invalid_parameter, std::string(what) + " must be >= 0");
  if (discrete_model(model))
    require(t == std::floor(t), ErrorCode::invalid_parameter, std::string(what) + " must be an integer step count");
}

std::vector<State> pick(const WeightedEnsemble& mu, std::span<const std::size_t> idx) {
  std::vector<State> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(mu.point(i));
  return out;
}

WeightedEnsemble weighted_states(std::vector<State> states, std::span<const double> log_w) {
  return WeightedEnsemble::from_log_weights(std::move(states), log_w);
}

}  // namespace

BoundedMetric default_metric(const AnyModel& model) {
  if (const auto* dm = std::get_if<DiscreteModel>(&model)) return absolute_metric(dm->space().diameter());
  return pdmp_metric(std::get<PdmpModel>(model).radius());
}

std::vector<State> default_grid(const AnyModel& model, std::size_t points) {
  require(points >= 2, ErrorCode::invalid_parameter, "grid needs at least two points");
  std::vector<State> grid;
  if (const auto* dm = std::get_if<DiscreteModel>(&model)) {
    const auto& sp = dm->space();
    const double nudge = 1e-9 * sp.diameter();
    for (std::size_t k = 0; k < points; ++k) {
      double x = sp.lo + sp.diameter() * static_cast<double>(k) / static_cast<double>(points - 1);
      if (k == 0 && sp.open_lo) x += nudge;
      if (k + 1 == points && sp.open_hi) x -= nudge;
      for (double e : sp.excluded)
        if (x == e) x += nudge;
      grid.push_back(State::scalar(x));
    }
    return grid;
  }
  const auto& pm = std::get<PdmpModel>(model);
  const double b = pm.state_bound();
  for (int m = 0; m < pm.modes(); ++m) {
    if (pm.dim() == 1) {
      for (std::size_t k = 0; k < points; ++k)
        grid.push_back(State::with_mode(-b + 2.0 * b * static_cast<double>(k) / static_cast<double>(points - 1), m));
    } else {
      const double h = 0.999 * b / std::sqrt(2.0);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) grid.push_back(State::planar(-h + 2.0 * h * i / 7.0, -h + 2.0 * h * j / 7.0, m));
    }
  }
  return grid;
}

std::vector<std::size_t> systematic_resample(const WeightedEnsemble& mu, std::size_t n, double u) {
  require(n >= 1, ErrorCode::invalid_parameter, "resample size must be >= 1");
  require(u >= 0.0 && u < 1.0, ErrorCode::invalid_parameter, "offset must lie in [0, 1)");
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return state_less(mu.point(a), mu.point(b)); });
  std::vector<std::size_t> out;
  out.reserve(n);
  const double total = mu.total_weight();
  double cum = 0.0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = (static_cast<double>(k) + u) / static_cast<double>(n) * total;
    while (j + 1 < order.size() && cum + mu.weight(order[j]) <= target) {
      cum += mu.weight(order[j]);
      ++j;
    }
    out.push_back(order[j]);
  }
  return out;
}

std::vector<std::size_t> multinomial_resample(const WeightedEnsemble& mu, std::size_t n, RandomStream& rng) {
  require(n >= 1, ErrorCode::invalid_parameter, "resample size must be >= 1");
  std::vector<double> cdf(mu.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) cdf[i] = cum += mu.weight(i);
  std::vector<std::size_t> out(n);
  for (auto& o : out) {
    const double u = rng.uniform() * cum;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    o = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), mu.size() - 1);
  }
  return out;
}

ConditionalLaw conditional_law(const AnyModel& model, const PenaltyField& penalty, const State& x0, double t,
                               std::size_t n, std::uint64_t seed, const EngineOptions& opts) {
  require(n >= 2, ErrorCode::invalid_parameter, "need N >= 2 particles");
  check_time(model, t, "t");
  const double times[] = {t};
  const auto pop = propagate(model, penalty, replicate(x0, n), {seed, 0}, times, opts);
  ConditionalLaw out;
  out.log_mean_z = log_sum_exp(pop.log_z[0]) - std::log(static_cast<double>(n));
  out.ensemble = pop.conditional(0);
  out.ess = out.ensemble.effective_sample_size();
  return out;
}

ConditionalLaw smc_conditional_law(const AnyModel& model, const PenaltyField& penalty, const State& x0, double t,
                                   std::size_t n, double resample_every, std::uint64_t seed,
                                   const EngineOptions& opts) {
  require(n >= 2, ErrorCode::invalid_parameter, "need N >= 2 particles");
  require(resample_every > 0.0, ErrorCode::invalid_parameter, "resample_every must be positive");
  check_time(model, t, "t");
  check_time(model, resample_every, "resample_every");
  std::vector<State> starts = replicate(x0, n);
  double log_norm = 0.0;
  for (std::uint64_t epoch = 0;; ++epoch) {
    const double t0 = std::min(static_cast<double>(epoch) * resample_every, t);
    const double t1 = std::min(static_cast<double>(epoch + 1) * resample_every, t);
    const double times[] = {t1 - t0};
    const auto pop = propagate(model, penalty, starts, {seed, epoch << kEpochShift}, times, opts);
    log_norm += log_sum_exp(pop.log_z[0]) - std::log(static_cast<double>(n));
    auto ens = pop.conditional(0);
    if (t1 >= t) {
      ConditionalLaw out;
      out.log_mean_z = log_norm;
      out.ess = ens.effective_sample_size();
      out.ensemble = std::move(ens);
      return out;
    }
    RandomStream rng(seed, kResampleStream + epoch);
    starts = pick(ens, multinomial_resample(ens, n, rng));
  }
}

SurvivalCurve survival_curve(const AnyModel& model, const PenaltyField& penalty, const State& x0,
                             std::span<const double> times, std::size_t n, std::uint64_t seed,
                             const EngineOptions& opts) {
  require(n >= 2, ErrorCode::invalid_parameter, "need N >= 2 particles");
  const auto pop = propagate(model, penalty, replicate(x0, n), {seed, 0}, times, opts);
  SurvivalCurve c;
  c.times.assign(times.begin(), times.end());
  const auto& kt = kernels::active();
  std::vector<double> z(n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) z[i] = std::exp(pop.log_z[k][i]);
    const double mean = kt.sum(z) / static_cast<double>(n);
    const double second = kt.dot(z, z) / static_cast<double>(n);
    const double var = std::max(0.0, second - mean * mean) * static_cast<double>(n) / static_cast<double>(n - 1);
    c.estimate.push_back(mean);
    c.stderr_.push_back(std::sqrt(var / static_cast<double>(n)));
    c.samples.push_back(n);
  }
  return c;
}

Lambda0Fit estimate_lambda0(const SurvivalCurve& curve, std::optional<std::pair<double, double>> window) {
  require(curve.times.size() == curve.estimate.size(), ErrorCode::invalid_curve, "times and estimates differ");
  require(!curve.times.empty(), ErrorCode::invalid_curve, "empty curve");
  Lambda0Fit fit;
  if (window) {
    fit.window_lo = window->first;
    fit.window_hi = window->second;
  } else {
    fit.window_lo = curve.times[curve.times.size() / 2];
    fit.window_hi = curve.times.back();
  }
  std::vector<double> ts, ys;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const double t = curve.times[k];
    if (t < fit.window_lo || t > fit.window_hi) continue;
    require(curve.estimate[k] > 0.0 && std::isfinite(curve.estimate[k]), ErrorCode::invalid_curve,
            "nonpositive survival estimate at t = " + std::to_string(t));
    ts.push_back(t);
    ys.push_back(-std::log(curve.estimate[k]));
  }
  fit.points = ts.size();
  require(ts.size() >= 2, ErrorCode::invalid_curve, "fewer than two curve points in the window");
  const double k = static_cast<double>(ts.size());
  const double mt = std::accumulate(ts.begin(), ts.end(), 0.0) / k;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - mt) * (ts[i] - mt);
    sxy += (ts[i] - mt) * (ys[i] - my);
  }
  require(sxx > 0.0, ErrorCode::invalid_curve, "window holds a single time");
  fit.lambda0 = sxy / sxx;
  if (ts.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double r = ys[i] - my - fit.lambda0 * (ts[i] - mt);
      ssr += r * r;
    }
    fit.stderr_ = std::sqrt(ssr / (k - 2.0) / sxx);
  }
  return fit;
}

double EtaTable::at(const State& x, bool& interpolated) const {
  require(!grid.empty(), ErrorCode::invalid_parameter, "empty eta grid");
  if (x.dim == 1) {
    std::size_t lo = grid.size(), hi = grid.size();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const State& g = grid[k];
      if (g.dim != 1 || g.mode != x.mode) continue;
      if (g.pos[0] == x.pos[0]) return values[k];
      if (g.pos[0] < x.pos[0] && (lo == grid.size() || g.pos[0] > grid[lo].pos[0])) lo = k;
      if (g.pos[0] > x.pos[0] && (hi == grid.size() || g.pos[0] < grid[hi].pos[0])) hi = k;
    }
    require(lo < grid.size() || hi < grid.size(), ErrorCode::invalid_state, "no eta grid point in this mode");
    interpolated = true;
    if (lo == grid.size()) return values[hi];
    if (hi == grid.size()) return values[lo];
    const double a = (x.pos[0] - grid[lo].pos[0]) / (grid[hi].pos[0] - grid[lo].pos[0]);
    return (1.0 - a) * values[lo] + a * values[hi];
  }
  std::size_t best = grid.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const State& g = grid[k];
    if (g.mode != x.mode) continue;
    const double d = std::hypot(g.pos[0] - x.pos[0], g.pos[1] - x.pos[1]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  require(best < grid.size(), ErrorCode::invalid_state, "no eta grid point in this mode");
  if (best_d != 0.0) interpolated = true;
  return values[best];
}

EtaTable estimate_eta(const AnyModel& model, const PenaltyField& penalty, std::span<const State> grid, double t,
                      double lambda0, std::size_t n, std::uint64_t seed, const WeightedEnsemble& reference,
                      const EngineOptions& opts) {
  require(!grid.empty(), ErrorCode::invalid_parameter, "empty eta grid");
  require(n >= 2, ErrorCode::invalid_parameter, "need N >= 2 particles");
  check_time(model, t, "t");
  EtaTable table;
  table.grid.assign(grid.begin(), grid.end());
  table.t = t;
  const double times[] = {t};
  for (const State& g : grid) {
    const auto curve = survival_curve(model, penalty, g, times, n, seed, opts);
    const double scale = std::exp(lambda0 * t);
    table.values.push_back(scale * curve.estimate[0]);
    table.stderr_.push_back(scale * curve.stderr_[0]);
  }
  bool interpolated = false;
  double mass = 0.0;
  const auto ref = reference.normalized_copy();
  for (std::size_t i = 0; i < ref.size(); ++i) mass += ref.weight(i) * table.at(ref.point(i), interpolated);
  require(mass > 0.0 && std::isfinite(mass), ErrorCode::numerical_underflow, "eta integrates to zero");
  table.normalization = 1.0 / mass;
  for (auto& v : table.values) v /= mass;
  for (auto& s : table.stderr_) s /= mass;
  return table;
}

QsdEstimate qsd_fixed_point(const AnyModel& model, const PenaltyField& penalty, double t0, std::size_t n, double tol,
                            std::size_t max_iter, std::uint64_t seed, const QsdOptions& options) {
  require(t0 >= 1.0, ErrorCode::invalid_parameter, "t0 must be at least one time unit");
  check_time(model, t0, "t0");
  require(tol > 0.0, ErrorCode::invalid_parameter, "tol must be positive");
  require(n >= 2 && max_iter >= 1, ErrorCode::invalid_parameter, "need N >= 2 and max_iter >= 1");
  require(options.replicas >= 1, ErrorCode::invalid_parameter, "replicas must be >= 1");
  const BoundedMetric d = options.metric ? *options.metric : default_metric(model);
  const WeightedEnsemble start =
      options.initial ? options.initial->normalized_copy() : WeightedEnsemble::uniform(default_grid(model));
  const double offset = RandomStream(seed, kResampleStream).uniform();
  std::vector<State> atoms = pick(start, systematic_resample(start, n, offset));

  QsdEstimate est;
  const double times[] = {t0};
  for (std::size_t it = 1; it <= max_iter; ++it) {
    std::vector<State> starts;
    starts.reserve(n * options.replicas);
    for (const auto& a : atoms) starts.insert(starts.end(), options.replicas, a);
    const auto pop = propagate(model, penalty, starts, {seed, 0}, times, options.engine);
    est.log_normalizations.push_back(log_sum_exp(pop.log_z[0]) - std::log(static_cast<double>(starts.size())));
    const auto image = pop.conditional(0);
    auto next = pick(image, systematic_resample(image, n, offset));
    const double step = w1(WeightedEnsemble::uniform(atoms), WeightedEnsemble::uniform(next), d);
    est.steps.push_back(step);
    atoms = std::move(next);
    est.iterations = it;
    est.final_step = step;
    if (step < tol) {
      est.converged = true;
      break;
    }
  }
  est.measure = WeightedEnsemble::uniform(atoms);

  const auto& ln = est.log_normalizations;
  const std::size_t first = ln.size() / 2;
  const double k = static_cast<double>(ln.size() - first);
  double mean = 0.0;
  for (std::size_t i = first; i < ln.size(); ++i) mean += ln[i] / k;
  double var = 0.0;
  for (std::size_t i = first; i < ln.size(); ++i) var += (ln[i] - mean) * (ln[i] - mean);
  est.lambda0 = std::max(0.0, -mean / t0);
  est.lambda0_stderr = k > 1.0 ? std::sqrt(var / (k - 1.0) / k) / t0 : 0.0;

  if (options.compute_eta) {
    const auto grid = options.eta_grid.empty() ? default_grid(model) : options.eta_grid;
    double te = options.eta_time ? *options.eta_time : 4.0 * t0;
    if (discrete_model(model)) te = std::round(te);
    const std::size_t m = options.eta_particles ? *options.eta_particles : std::min<std::size_t>(n, 4096);
    est.eta = estimate_eta(model, penalty, grid, te, est.lambda0, m, seed ^ 0x5bd1e995u, est.measure, options.engine);
  }
  return est;
}

double quasi_stationarity_residual(const AnyModel& model, const PenaltyField& penalty, const WeightedEnsemble& nu,
                                   double t0, std::size_t replicas, std::uint64_t seed,
                                   std::optional<BoundedMetric> metric, const EngineOptions& opts) {
  require(replicas >= 1, ErrorCode::invalid_parameter, "replicas must be >= 1");
  check_time(model, t0, "t0");
  const BoundedMetric d = metric ? *metric : default_metric(model);
  const auto ref = nu.normalized_copy();
  std::vector<State> starts;
  std::vector<double> prior;
  starts.reserve(ref.size() * replicas);
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (std::size_t r = 0; r < replicas; ++r) {
      starts.push_back(ref.point(i));
      prior.push_back(std::log(ref.weight(i)));
    }
  const double times[] = {t0};
  const auto pop = propagate(model, penalty, starts, {seed, kResidualBase}, times, opts);
  std::vector<double> lw(starts.size());
  for (std::size_t i = 0; i < lw.size(); ++i) lw[i] = prior[i] + pop.log_z[0][i];
  return w1(weighted_states(pop.states(0), lw), ref, d);
}

namespace {

WeightedEnsemble q_marginal_from(const AnyModel& model, const PenaltyField& penalty, std::span<const State> starts,
                                 double s, std::optional<double> horizon, std::uint64_t seed,
                                 const EngineOptions& opts) {
  check_time(model, s, "s");
  const double T = horizon ? *horizon : 4.0 * s;
  check_time(model, T, "T");
  require(T >= s, ErrorCode::invalid_parameter, "horizon T must be >= s");
  std::vector<double> times{s};
  if (T > s) times.push_back(T);
  const auto pop = propagate(model, penalty, starts, {seed, 0}, times, opts);
  return weighted_states(pop.states(0), pop.log_z.back());
}

}  // namespace

WeightedEnsemble q_process_marginal(const AnyModel& model, const PenaltyField& penalty, const State& x0, double s,
                                    std::optional<double> horizon, std::size_t n, std::uint64_t seed,
                                    const EngineOptions& opts) {
  require(n >= 2, ErrorCode::invalid_parameter, "need N >= 2 particles");
  return q_marginal_from(model, penalty, replicate(x0, n), s, horizon, seed, opts);
}

WeightedEnsemble q_process_marginal(const AnyModel& model, const PenaltyField& penalty,
                                    const WeightedEnsemble& initial, double s, std::optional<double> horizon,
                                    std::size_t n, std::uint64_t seed, const EngineOptions& opts) {
  require(n >= 2, ErrorCode::invalid_parameter, "need N >= 2 particles");
  const double u = RandomStream(seed, kResampleStream).uniform();
  const auto starts = pick(initial, systematic_resample(initial, n, u));
  return q_marginal_from(model, penalty, starts, s, horizon, seed, opts);
}

WeightedEnsemble quasi_ergodic(const AnyModel& model, const PenaltyField& penalty, const State& x0, double t,
                               std::size_t n, std::uint64_t seed, const EngineOptions& opts, double occupation_step) {
  require(n >= 2, ErrorCode::invalid_parameter, "need N >= 2 particles");
  require(t >= 1.0, ErrorCode::invalid_parameter, "t must be at least one time unit");
  check_time(model, t, "t");
  std::vector<double> visits;
  if (discrete_model(model)) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(t); ++k) visits.push_back(static_cast<double>(k));
  } else {
    require(occupation_step > 0.0, ErrorCode::invalid_parameter, "occupation step must be positive");
    const auto m = static_cast<std::size_t>(std::ceil(t / occupation_step));
    for (std::size_t j = 0; j < m; ++j) visits.push_back((static_cast<double>(j) + 0.5) * t / static_cast<double>(m));
  }
  std::vector<double> times = visits;
  times.push_back(t);
  const auto pop = propagate(model, penalty, replicate(x0, n), {seed, 0}, times, opts);
  std::vector<State> pts;
  std::vector<double> lw;
  pts.reserve(n * visits.size());
  lw.reserve(n * visits.size());
  for (std::size_t k = 0; k < visits.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back(pop.state(k, i));
      lw.push_back(pop.log_z.back()[i]);
    }
  return weighted_states(std::move(pts), lw);
}

NuQ nu_q(const QsdEstimate& qsd) {
  require(qsd.eta.has_value(), ErrorCode::invalid_parameter, "the QSD estimate carries no eta table");
  NuQ out;
  const auto& mu = qsd.measure;
  std::vector<double> w(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double e = qsd.eta->at(mu.point(i), out.interpolated);
    require(e > 0.0 && std::isfinite(e), ErrorCode::numerical_underflow, "eta is not positive on the QSD support");
    w[i] = mu.weight(i) * e;
  }
  out.measure = WeightedEnsemble(mu.points(), std::move(w)).normalized_copy();
  return out;
}

}  // namespace qsdsim
