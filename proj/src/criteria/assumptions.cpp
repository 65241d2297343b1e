#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>

#include "qsdsim/criteria.hpp"
#include "qsdsim/error.hpp"

namespace qsdsim {

namespace {

std::vector<double> chebyshev(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = mid + half * std::cos((2.0 * static_cast<double>(k) + 1.0) * std::numbers::pi / (2.0 * static_cast<double>(n)));
  return out;
}

std::vector<State> pair_nodes(const AnyModel& model, std::size_t n) {
  std::vector<State> nodes;
  if (const auto* dm = std::get_if<DiscreteModel>(&model)) {
    for (double x : chebyshev(dm->space().lo, dm->space().hi, n))
      if (dm->space().contains(x)) nodes.push_back(State::scalar(x));
    return nodes;
  }
  const auto& pm = std::get<PdmpModel>(model);
  const double b = pm.state_bound();
  const auto c = chebyshev(-b, b, n);
  for (int m = 0; m < pm.modes(); ++m) {
    for (std::size_t k = 0; k < n; ++k) {
      if (pm.dim() == 1) {
        nodes.push_back(State::with_mode(c[k], m));
      } else {
        // Spread over the inscribed square.
        const double h = 1.0 / std::sqrt(2.0);
        nodes.push_back(State::planar(h * c[k], h * c[(k + 3) % n], m));
      }
    }
  }
  return nodes;
}

BoundedMetric metric_or_default(const AnyModel& model, const std::optional<BoundedMetric>& metric) {
  return metric ? *metric : default_metric(model);
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Standard error of a sample mean.
double mean_stderr(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(std::max(0.0, ss / static_cast<double>(n - 1)) / static_cast<double>(n));
}

// Z_i / max Z on one observation row.
std::vector<double> scaled_z(std::span<const double> log_z) {
  const double top = *std::max_element(log_z.begin(), log_z.end());
  std::vector<double> z(log_z.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::isfinite(top) ? std::exp(log_z[i] - top) : 0.0;
  return z;
}

std::vector<double> unscaled_z(std::span<const double> log_z) {
  std::vector<double> z(log_z.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::exp(log_z[i]);
  return z;
}

void check_times(std::span<const double> times, std::size_t n) {
  require(!times.empty(), ErrorCode::invalid_parameter, "need at least one time");
  require(n >= 2, ErrorCode::invalid_parameter, "need at least two particles");
}

// Indices of distinct states among the pair endpoints.
struct NodeIndex {
  std::vector<State> nodes;
  std::size_t of(const State& s) {
    for (std::size_t k = 0; k < nodes.size(); ++k)
      if (nodes[k] == s) return k;
    nodes.push_back(s);
    return nodes.size() - 1;
  }
};

void summarize_fit(AssumptionReport& rep) {
  double worst_rate = std::numeric_limits<double>::infinity();
  double worst_se = 0.0, top_intercept = 0.0;
  bool any = false;
  for (const auto& c : rep.curves) {
    if (!std::isfinite(c.slope)) {
      rep.warnings.push_back("pair " + std::to_string(c.pair) + ": fewer than two positive values, not fitted");
      continue;
    }
    any = true;
    if (-c.slope < worst_rate) {
      worst_rate = -c.slope;
      worst_se = c.slope_stderr;
    }
    top_intercept = std::max(top_intercept, c.intercept);
    rep.min_r_squared = std::min(rep.min_r_squared, c.r_squared);
  }
  if (!any) {
    rep.warnings.push_back("no curve could be fitted");
    return;
  }
  rep.gamma_A = worst_rate;
  rep.gamma_A_stderr = worst_se;
  rep.C_A = std::max(1.0, std::exp(top_intercept));
}

}  // namespace

std::vector<StatePair> default_pairs(const AnyModel& model, std::size_t nodes) {
  require(nodes >= 2, ErrorCode::invalid_parameter, "need at least two nodes");
  const auto pts = pair_nodes(model, nodes);
  std::vector<StatePair> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (i != j && !(pts[i] == pts[j])) out.push_back({pts[i], pts[j]});
  return out;
}

PairCurve fit_log_linear(std::vector<double> times, std::vector<double> values, std::vector<double> stderrs) {
  require(times.size() == values.size(), ErrorCode::invalid_curve, "times and values differ in length");
  PairCurve c;
  c.times = std::move(times);
  c.values = std::move(values);
  c.stderr_ = stderrs.empty() ? std::vector<double>(c.values.size(), 0.0) : std::move(stderrs);
  std::vector<double> ts, ls;
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    if (c.values[k] > 0.0 && std::isfinite(c.values[k])) {
      ts.push_back(c.times[k]);
      ls.push_back(std::log(c.values[k]));
    }
  }
  if (ts.size() < 2) {
    c.slope = std::numeric_limits<double>::quiet_NaN();
    c.slope_stderr = std::numeric_limits<double>::quiet_NaN();
    c.intercept = std::numeric_limits<double>::quiet_NaN();
    c.r_squared = 0.0;
    return c;
  }
  const double m = static_cast<double>(ts.size());
  const double tm = mean(ts), lm = mean(ls);
  double stt = 0.0, stl = 0.0, sll = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    stt += (ts[k] - tm) * (ts[k] - tm);
    stl += (ts[k] - tm) * (ls[k] - lm);
    sll += (ls[k] - lm) * (ls[k] - lm);
  }
  require(stt > 0.0, ErrorCode::invalid_curve, "all fitted times coincide");
  c.slope = stl / stt;
  c.intercept = lm - c.slope * tm;
  double ssr = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double r = ls[k] - c.intercept - c.slope * ts[k];
    ssr += r * r;
  }
  c.slope_stderr = ts.size() > 2 ? std::sqrt(ssr / (m - 2.0) / stt) : 0.0;
  c.r_squared = sll > 0.0 ? std::max(0.0, 1.0 - ssr / sll) : 1.0;
  return c;
}

AssumptionReport estimate_A(const CoupledModel& coupled, const PenaltyField& penalty, std::span<const StatePair> pairs,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            std::optional<BoundedMetric> metric, const EngineOptions& opts) {
  check_times(times, n);
  const auto d = metric_or_default(coupled.model, metric);
  AssumptionReport rep;
  rep.tag = AssumptionTag::A;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [x, y] = pairs[p];
    const double d0 = d(x, y);
    if (!(d0 > 0.0)) {
      ++rep.skipped;
      rep.warnings.push_back("pair " + std::to_string(p) + " has d(x, y) = 0; skipped");
      continue;
    }
    const auto cp = simulate_coupled(coupled, penalty, x, y, n, {seed, 0}, times, opts);
    std::vector<double> vals, ses;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto z = scaled_z(cp.first.log_z[k]);
      std::vector<double> u(n);
      for (std::size_t i = 0; i < n; ++i) u[i] = z[i] * d(cp.first.state(k, i), cp.second.state(k, i)) / d0;
      const double vbar = mean(z), ubar = mean(u);
      if (!(vbar > 0.0)) {
        vals.push_back(0.0);
        ses.push_back(0.0);
        continue;
      }
      const double r = ubar / vbar;
      // Delta method for a ratio of means.
      std::vector<double> resid(n);
      for (std::size_t i = 0; i < n; ++i) resid[i] = u[i] - r * z[i];
      double ss = 0.0;
      for (double e : resid) ss += e * e;
      vals.push_back(r);
      ses.push_back(std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1))) / vbar);
    }
    auto c = fit_log_linear({times.begin(), times.end()}, std::move(vals), std::move(ses));
    c.pair = p;
    rep.pairs.push_back(pairs[p]);
    rep.curves.push_back(std::move(c));
  }
  summarize_fit(rep);
  return rep;
}

namespace {

template <class Num>
struct JointOps {
  const DiscreteModel& model;
  const PenaltyField& penalty;
  bool exact;

  Num step(const Num& x, std::size_t b) const {
    if constexpr (std::is_same_v<Num, Rational>) {
      return model.step_exact(x, b);
    } else {
      return model.step(x, b);
    }
  }
  Num prob(std::size_t b) const {
    if constexpr (std::is_same_v<Num, Rational>) {
      return model.branches()[b].prob_q;
    } else {
      return model.branches()[b].prob;
    }
  }
  Num p(const Num& x) const {
    if constexpr (std::is_same_v<Num, Rational>) {
      return penalty.exact(x);
    } else {
      return penalty(State::scalar(x));
    }
  }
  bool contains(const Num& x) const { return model.space().contains(x); }
  static Num absval(const Num& x) {
    if constexpr (std::is_same_v<Num, Rational>) {
      return abs(x);
    } else {
      return std::abs(x);
    }
  }
  static double to_double(const Num& x) {
    if constexpr (std::is_same_v<Num, Rational>) {
      return x.get_d();
    } else {
      return x;
    }
  }
};

void check_enumerable(const DiscreteModel& model, const PenaltyField& penalty, std::size_t n) {
  require(model.finite(), ErrorCode::unsupported_model, "enumeration needs a finite noise law");
  require(penalty.kind() == PenaltyKind::discrete_p, ErrorCode::invalid_penalty, "discrete penalty required");
  double leaves = std::pow(static_cast<double>(model.branches().size()), static_cast<double>(n));
  require(leaves <= static_cast<double>(kDefaultPathCap), ErrorCode::instance_too_large,
          "path count exceeds the enumeration cap");
}

bool use_rational(const DiscreteModel& model, const PenaltyField& penalty) {
  if (model.all_affine() && penalty.has_exact()) return true;
  if (penalty.requires_exact())
    throw Error(ErrorCode::requires_exact_arithmetic, "penalty needs exact states but the model is not affine");
  return false;
}

// Per depth k: E[Z^X_k d_k], E[Z^X_k], E[Z^X_k X_k], E[Z^Y_k], E[Z^Y_k Y_k]
// under the synchronous coupling (both copies take the same branch).
template <class Num>
void joint_curves(const JointOps<Num>& ops, const Num& x0, const Num& y0, std::size_t n, PairCurve& a,
                  PairCurve& w) {
  std::vector<Num> zd(n + 1, Num(0)), zx(n + 1, Num(0)), zxx(n + 1, Num(0)), zy(n + 1, Num(0)),
      zyy(n + 1, Num(0));
  const auto& branches = ops.model.branches();
  auto rec = [&](auto&& self, const Num& x, const Num& y, const Num& mx, const Num& my, std::size_t k) -> void {
    zd[k] += mx * JointOps<Num>::absval(x - y);
    zx[k] += mx;
    zxx[k] += mx * x;
    zy[k] += my;
    zyy[k] += my * y;
    if (k == n) return;
    const Num nx = mx * ops.p(x), ny = my * ops.p(y);
    for (std::size_t b = 0; b < branches.size(); ++b) {
      const Num pb = ops.prob(b);
      if (pb == 0) continue;
      Num x1 = ops.step(x, b), y1 = ops.step(y, b);
      require(ops.contains(x1) && ops.contains(y1), ErrorCode::unsupported_model,
              "synchronous coupling leaves the state space");
      self(self, x1, y1, nx * pb, ny * pb, k + 1);
    }
  };
  rec(rec, x0, y0, Num(1), Num(1), 0);
  const Num d0 = JointOps<Num>::absval(x0 - y0);
  std::vector<double> av, wv, times;
  for (std::size_t k = 0; k <= n; ++k) {
    times.push_back(static_cast<double>(k));
    if (zx[k] == 0 || zy[k] == 0) {
      av.push_back(0.0);
      wv.push_back(0.0);
      continue;
    }
    Num ratio = zd[k] / (zx[k] * d0);
    Num wit = JointOps<Num>::absval(zxx[k] / zx[k] - zyy[k] / zy[k]) / d0;
    av.push_back(JointOps<Num>::to_double(ratio));
    wv.push_back(JointOps<Num>::to_double(wit));
  }
  a = fit_log_linear(times, av);
  w = fit_log_linear(times, wv);
}

template <class Num>
std::vector<double> survival_enum(const JointOps<Num>& ops, const Num& x0, std::size_t n) {
  std::vector<Num> z(n + 1, Num(0));
  const auto& branches = ops.model.branches();
  auto rec = [&](auto&& self, const Num& x, const Num& m, std::size_t k) -> void {
    z[k] += m;
    if (k == n) return;
    const Num nm = m * ops.p(x);
    // Conditioned on staying in the state space, as in the sampler.
    Num total = 0;
    for (std::size_t b = 0; b < branches.size(); ++b)
      if (ops.contains(ops.step(x, b))) total += ops.prob(b);
    require(total > 0, ErrorCode::invalid_state, "every branch leaves the state space");
    for (std::size_t b = 0; b < branches.size(); ++b) {
      Num x1 = ops.step(x, b);
      if (!ops.contains(x1) || ops.prob(b) == 0) continue;
      self(self, x1, nm * ops.prob(b) / total, k + 1);
    }
  };
  rec(rec, x0, Num(1), 0);
  std::vector<double> out;
  for (const auto& v : z) out.push_back(JointOps<Num>::to_double(v));
  return out;
}

std::vector<double> enum_survival(const DiscreteModel& model, const PenaltyField& penalty, double x0, std::size_t n) {
  require(model.space().contains(x0), ErrorCode::invalid_state, "start outside the state space");
  if (use_rational(model, penalty))
    return survival_enum(JointOps<Rational>{model, penalty, true}, to_rational(x0), n);
  return survival_enum(JointOps<double>{model, penalty, false}, x0, n);
}

}  // namespace

AssumptionReport estimate_A_exact(const DiscreteModel& model, const PenaltyField& penalty,
                                  std::span<const StatePair> pairs, std::size_t n) {
  check_enumerable(model, penalty, n);
  const bool exact = use_rational(model, penalty);
  AssumptionReport rep;
  rep.tag = AssumptionTag::A;
  if (!exact) rep.warnings.push_back("double-precision enumeration (penalty has no exact form)");
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double x = pairs[p].x.x(), y = pairs[p].y.x();
    require(model.space().contains(x) && model.space().contains(y), ErrorCode::invalid_state,
            "pair outside the state space");
    if (x == y) {
      ++rep.skipped;
      continue;
    }
    PairCurve a, w;
    if (exact) {
      joint_curves(JointOps<Rational>{model, penalty, true}, to_rational(x), to_rational(y), n, a, w);
    } else {
      joint_curves(JointOps<double>{model, penalty, false}, x, y, n, a, w);
    }
    a.pair = w.pair = p;
    rep.pairs.push_back(pairs[p]);
    rep.curves.push_back(std::move(a));
    rep.witness.push_back(std::move(w));
  }
  summarize_fit(rep);
  return rep;
}

namespace {

// B curve for one pair from the two survival curves.
PairCurve b_curve(std::span<const double> times, std::span<const double> ex, std::span<const double> ey,
                  std::span<const double> se, double d0) {
  std::vector<double> vals, ses;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(ex[k] > 0.0)) {
      vals.push_back(std::numeric_limits<double>::infinity());
      ses.push_back(0.0);
      continue;
    }
    vals.push_back(std::abs(ex[k] - ey[k]) / (d0 * ex[k]));
    ses.push_back(se.empty() ? 0.0 : se[k] / (d0 * ex[k]));
  }
  PairCurve c;
  c.times.assign(times.begin(), times.end());
  c.values = std::move(vals);
  c.stderr_ = std::move(ses);
  c.slope = c.slope_stderr = c.intercept = 0.0;
  return c;
}

void summarize_max(AssumptionReport& rep, double& field) {
  field = 0.0;
  for (const auto& c : rep.curves) {
    for (std::size_t k = 0; k < c.values.size(); ++k) {
      if (c.values[k] > field) {
        field = c.values[k];
        rep.stderr_ = c.stderr_[k];
      }
    }
  }
}

}  // namespace

AssumptionReport estimate_B(const AnyModel& model, const PenaltyField& penalty, std::span<const StatePair> pairs,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            std::optional<BoundedMetric> metric, const EngineOptions& opts) {
  check_times(times, n);
  const auto d = metric_or_default(model, metric);
  AssumptionReport rep;
  rep.tag = AssumptionTag::B;
  NodeIndex idx;
  std::vector<std::pair<std::size_t, std::size_t>> ends;
  for (const auto& pr : pairs) ends.emplace_back(idx.of(pr.x), idx.of(pr.y));
  // One population per distinct start, all on the same streams.
  std::vector<std::vector<std::vector<double>>> z(idx.nodes.size());
  for (std::size_t s = 0; s < idx.nodes.size(); ++s) {
    const auto starts = replicate(idx.nodes[s], n);
    const auto pop = propagate(model, penalty, starts, {seed, 0}, times, opts);
    for (std::size_t k = 0; k < times.size(); ++k) z[s].push_back(unscaled_z(pop.log_z[k]));
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double d0 = d(pairs[p].x, pairs[p].y);
    if (!(d0 > 0.0)) {
      ++rep.skipped;
      continue;
    }
    const auto [a, b] = ends[p];
    std::vector<double> ex, ey, se;
    for (std::size_t k = 0; k < times.size(); ++k) {
      ex.push_back(mean(z[a][k]));
      ey.push_back(mean(z[b][k]));
      std::vector<double> diff(n);
      for (std::size_t i = 0; i < n; ++i) diff[i] = z[a][k][i] - z[b][k][i];
      se.push_back(mean_stderr(diff));
    }
    auto c = b_curve(times, ex, ey, se, d0);
    c.pair = p;
    rep.pairs.push_back(pairs[p]);
    rep.curves.push_back(std::move(c));
  }
  summarize_max(rep, rep.C_B);
  return rep;
}

AssumptionReport estimate_B_exact(const DiscreteModel& model, const PenaltyField& penalty,
                                  std::span<const StatePair> pairs, std::size_t n) {
  check_enumerable(model, penalty, n);
  AssumptionReport rep;
  rep.tag = AssumptionTag::B;
  std::vector<double> times(n + 1);
  for (std::size_t k = 0; k <= n; ++k) times[k] = static_cast<double>(k);
  NodeIndex idx;
  std::vector<std::pair<std::size_t, std::size_t>> ends;
  for (const auto& pr : pairs) ends.emplace_back(idx.of(pr.x), idx.of(pr.y));
  std::vector<std::vector<double>> curves;
  for (const auto& s : idx.nodes) curves.push_back(enum_survival(model, penalty, s.x(), n));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double d0 = std::abs(pairs[p].x.x() - pairs[p].y.x());
    if (!(d0 > 0.0)) {
      ++rep.skipped;
      continue;
    }
    auto c = b_curve(times, curves[ends[p].first], curves[ends[p].second], {}, d0);
    c.pair = p;
    rep.pairs.push_back(pairs[p]);
    rep.curves.push_back(std::move(c));
  }
  summarize_max(rep, rep.C_B);
  return rep;
}

AssumptionReport estimate_C(const CoupledModel& coupled, const PenaltyField& penalty, std::span<const StatePair> pairs,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            const EngineOptions& opts) {
  check_times(times, n);
  AssumptionReport rep;
  rep.tag = AssumptionTag::C;
  double worst = std::numeric_limits<double>::infinity(), worst_se = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto cp = simulate_coupled(coupled, penalty, pairs[p].x, pairs[p].y, n, {seed, 0}, times, opts);
    PairCurve c;
    c.pair = p;
    c.times.assign(times.begin(), times.end());
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto zx = scaled_z(cp.first.log_z[k]);
      const auto zy = scaled_z(cp.second.log_z[k]);
      const double mx = mean(zx), my = mean(zy);
      std::vector<double> m(n);
      for (std::size_t i = 0; i < n; ++i) m[i] = std::min(zx[i] / mx, zy[i] / my);
      c.values.push_back(mean(m));
      c.stderr_.push_back(mean_stderr(m));
      if (c.values.back() < worst) {
        worst = c.values.back();
        worst_se = c.stderr_.back();
      }
    }
    rep.pairs.push_back(pairs[p]);
    rep.curves.push_back(std::move(c));
  }
  if (std::isfinite(worst)) {
    rep.C_C = worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
    // Delta method for 1 / m.
    rep.stderr_ = worst > 0.0 ? worst_se / (worst * worst) : 0.0;
  }
  return rep;
}

namespace {

// Running sup over s <= t of max_x E_x Z_s / min_y E_y Z_s.
void h_from_curves(AssumptionReport& rep, std::span<const double> times, const std::vector<std::vector<double>>& e,
                   const std::vector<std::vector<double>>& se) {
  PairCurve c;
  c.times.assign(times.begin(), times.end());
  double run = 0.0, run_se = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::size_t hi = 0, lo = 0;
    for (std::size_t g = 1; g < e.size(); ++g) {
      if (e[g][k] > e[hi][k]) hi = g;
      if (e[g][k] < e[lo][k]) lo = g;
    }
    double ratio = e[lo][k] > 0.0 ? e[hi][k] / e[lo][k] : std::numeric_limits<double>::infinity();
    double rse = 0.0;
    if (!se.empty() && e[lo][k] > 0.0) {
      const double a = se[hi][k] / e[hi][k], b = se[lo][k] / e[lo][k];
      rse = ratio * std::sqrt(a * a + b * b);
    }
    if (ratio > run) {
      run = ratio;
      run_se = rse;
    }
    c.values.push_back(run);
    c.stderr_.push_back(run_se);
  }
  rep.C_H = run;
  rep.stderr_ = run_se;
  rep.curves.push_back(std::move(c));
}

}  // namespace

AssumptionReport estimate_H(const AnyModel& model, const PenaltyField& penalty, std::span<const State> grid,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            const EngineOptions& opts) {
  check_times(times, n);
  require(grid.size() >= 2, ErrorCode::invalid_parameter, "need at least two grid points");
  AssumptionReport rep;
  rep.tag = AssumptionTag::H;
  std::vector<std::vector<double>> e(grid.size()), se(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto sc = survival_curve(model, penalty, grid[g], times, n, seed, opts);
    e[g] = sc.estimate;
    se[g] = sc.stderr_;
  }
  h_from_curves(rep, times, e, se);
  return rep;
}

AssumptionReport estimate_H_exact(const DiscreteModel& model, const PenaltyField& penalty,
                                  std::span<const State> grid, std::size_t n) {
  check_enumerable(model, penalty, n);
  require(grid.size() >= 2, ErrorCode::invalid_parameter, "need at least two grid points");
  AssumptionReport rep;
  rep.tag = AssumptionTag::H;
  std::vector<double> times(n + 1);
  for (std::size_t k = 0; k <= n; ++k) times[k] = static_cast<double>(k);
  std::vector<std::vector<double>> e;
  for (const auto& s : grid) e.push_back(enum_survival(model, penalty, s.x(), n));
  h_from_curves(rep, times, e, {});
  return rep;
}

namespace {

// Max over pairs of the curves at each time, with the standard error at the argmax.
void envelope(const AssumptionReport& r, std::vector<double>& vals, std::vector<double>& ses) {
  vals.clear();
  ses.clear();
  if (r.curves.empty()) return;
  const std::size_t m = r.curves.front().values.size();
  vals.assign(m, -std::numeric_limits<double>::infinity());
  ses.assign(m, 0.0);
  for (const auto& c : r.curves) {
    for (std::size_t k = 0; k < std::min(m, c.values.size()); ++k) {
      if (c.values[k] > vals[k]) {
        vals[k] = c.values[k];
        ses[k] = c.stderr_.empty() ? 0.0 : c.stderr_[k];
      }
    }
  }
}

bool stops_growing(const AssumptionReport& r) {
  std::vector<double> v, s;
  envelope(r, v, s);
  if (v.size() < 3) return true;
  const std::size_t mid = v.size() / 2;
  double first = v[0], second = v[mid], se = s[mid];
  for (std::size_t k = 0; k <= mid; ++k) first = std::max(first, v[k]);
  for (std::size_t k = mid; k < v.size(); ++k) {
    if (v[k] > second) {
      second = v[k];
      se = s[k];
    }
  }
  if (!std::isfinite(second)) return false;
  // A convergent curve gains less over the second half than over the first.
  const double early = first - v[0];
  const double late = second - first;
  return late <= 0.5 * std::max(early, 0.0) + 3.0 * se + 1e-12 * std::abs(first);
}

}  // namespace

EquivalenceReport cross_check_equivalence(const AssumptionReport& a, const AssumptionReport& b,
                                          const AssumptionReport& h) {
  EquivalenceReport out;
  out.a_decays = !a.curves.empty() && a.gamma_A - 3.0 * a.gamma_A_stderr > 0.0;
  std::vector<double> v, s;
  envelope(a, v, s);
  if (v.size() >= 2) {
    const auto& t = a.curves.front().times;
    std::size_t first = 0;
    while (first < t.size() && !(t[first] > 0.0)) ++first;
    out.aprime = first < v.size() && v.back() < 0.5 * v[first];
  }
  out.b_bounded = stops_growing(b);
  out.h_bounded = stops_growing(h);
  const bool via_b = out.aprime && out.b_bounded;
  const bool via_h = out.aprime && out.h_bounded;
  out.consistent = out.a_decays == via_b && out.a_decays == via_h;
  out.notes.push_back(std::string("(A) ") + (out.a_decays ? "decays" : "does not decay"));
  out.notes.push_back(std::string("(A') ") + (out.aprime ? "holds" : "fails"));
  out.notes.push_back(std::string("(B) ") + (out.b_bounded ? "bounded" : "growing"));
  out.notes.push_back(std::string("(H) ") + (out.h_bounded ? "bounded" : "growing"));
  if (!out.consistent) out.notes.push_back("estimates disagree with the equivalence; increase N or the time range");
  return out;
}

}  // namespace qsdsim
