#include <cmath>
#include <set>

#include "cli_internal.hpp"
#include "qsdsim/criteria.hpp"
#include "qsdsim/error.hpp"
#include "qsdsim/estimators.hpp"
#include "qsdsim/models.hpp"

namespace qsdsim::cli {

namespace {

const std::set<std::string> kEstimators{"conditional-law", "survival",     "qsd",          "w1-decay",
                                        "assumption-A",    "assumption-B", "assumption-C", "assumption-H",
                                        "exact-curve"};

const std::set<std::string> kCustomKeys{"model", "estimator", "penalty", "x0", "y0", "t",
                                        "times", "N",         "t0",      "tol", "max_iter", "n"};

void bad(const std::string& what) { throw Error(ErrorCode::invalid_config, "custom: " + what); }

void expect_number(const Json& j, const char* key) {
  if (j.contains(key) && !j.at(key).is_number()) bad(std::string(key) + " must be a number");
}

void expect_count(const Json& j, const char* key) {
  if (j.contains(key) && !(j.at(key).is_number_integer() && j.at(key).get<std::int64_t>() >= 0)) bad(std::string(key) + " must be a nonnegative integer");
}

State parse_state(const Json& j, const AnyModel& model) {
  const bool planar = !is_discrete(model) && std::get<PdmpModel>(model).dim() == 2;
  if (j.is_number()) {
    if (planar) bad("planar models need {\"x\", \"y\", \"mode\"} states");
    return is_discrete(model) ? State::scalar(j.get<double>()) : State::with_mode(j.get<double>(), 0);
  }
  if (!j.is_object() || !j.contains("x") || !j.at("x").is_number()) bad("a state is a number or {\"x\", ...}");
  for (const auto& [k, v] : j.items())
    if (k != "x" && k != "y" && k != "mode") bad("unknown state field '" + k + "'");
  const double x = j.at("x").get<double>();
  const int mode = j.value("mode", is_discrete(model) ? State::kNoMode : 0);
  if (planar) return State::planar(x, j.value("y", 0.0), mode);
  if (is_discrete(model)) return State::scalar(x);
  return State::with_mode(x, mode);
}

PenaltyField parse_penalty(const Json& j, const ModelCatalogEntry& entry) {
  if (j.is_null()) return entry.penalty;
  const auto kind = j.value("kind", std::string{});
  const bool discrete = is_discrete(entry.model);
  if (kind == "constant-survival" && discrete) return PenaltyField::constant_survival(j.at("c").get<double>());
  if (kind == "constant-rate" && !discrete) return PenaltyField::constant_rate(j.at("r").get<double>());
  if (kind == "mode-rates" && !discrete) return PenaltyField::mode_rates("custom-mode", j.at("rates").get<std::vector<double>>());
  if (kind == "linear" && discrete) {
    const auto& sp = std::get<DiscreteModel>(entry.model).space();
    return PenaltyField::linear("custom-linear", PenaltyKind::discrete_p, j.at("c0").get<double>(),
                                j.at("c1").get<double>(), sp.lo, sp.hi);
  }
  bad("penalty kind '" + kind + "' is not available for this model");
  return entry.penalty;
}

std::vector<double> times_of(const Json& c, double fallback_end, bool discrete) {
  if (c.contains("times")) return c.at("times").get<std::vector<double>>();
  std::vector<double> t;
  const double step = discrete ? 1.0 : fallback_end / 20.0;
  for (int k = 0; k <= 20; ++k) t.push_back(discrete ? k : k * step);
  return t;
}

void curve_table(Results& r, const AssumptionReport& rep, const std::string& file) {
  Table t{file, 1, {"pair", "t", "value", "stderr"}, {}};
  for (std::size_t p = 0; p < rep.curves.size(); ++p)
    for (std::size_t k = 0; k < rep.curves[p].values.size(); ++k)
      t.add({std::to_string(p), num(rep.curves[p].times[k]), num(rep.curves[p].values[k]),
             k < rep.curves[p].stderr_.size() ? num(rep.curves[p].stderr_[k]) : "0"});
  r.tables.push_back(std::move(t));
}

}  // namespace

void validate_custom(const Json& c) {
  if (!c.is_object()) bad("must be an object");
  for (const auto& [k, v] : c.items())
    if (!kCustomKeys.count(k)) bad("unknown field '" + k + "'");
  if (!c.contains("model") || !c.at("model").is_string()) bad("model (string) is required");
  if (!c.contains("estimator") || !c.at("estimator").is_string() || !kEstimators.count(c.at("estimator")))
    bad("estimator must be one of conditional-law, survival, qsd, w1-decay, assumption-A, assumption-B, "
        "assumption-C, assumption-H, exact-curve");
  for (const char* k : {"t", "t0", "tol"}) expect_number(c, k);
  for (const char* k : {"N", "max_iter", "n"}) expect_count(c, k);
  if (c.contains("times")) {
    if (!c.at("times").is_array() || c.at("times").empty()) bad("times must be a nonempty array");
    for (const auto& v : c.at("times"))
      if (!v.is_number()) bad("times must hold numbers");
  }
  if (c.contains("penalty") && !c.at("penalty").is_object()) bad("penalty must be an object");
  catalog_entry(c.at("model").get<std::string>());
}

Results run_custom(const Context& ctx, const Json& c) {
  Results r;
  const auto entry = catalog_entry(c.at("model").get<std::string>());
  const auto pen = parse_penalty(c.value("penalty", Json()), entry);
  const auto& model = entry.model;
  const bool discrete = is_discrete(model);
  const EngineOptions eng{ctx.workers, 4096};
  const std::size_t N = c.value("N", std::size_t{10000});
  const auto est = c.at("estimator").get<std::string>();
  const bool needs_x0 = est.rfind("assumption-", 0) != 0 && est != "qsd";
  if (needs_x0 && !c.contains("x0") && !discrete) bad("x0 is required for PDMP models");
  const State x0 = c.contains("x0") ? parse_state(c.at("x0"), model) : State::scalar(0.0);
  const std::string mname = entry.name;
  Json params = c;
  params.erase("model");
  params.erase("estimator");

  if (est == "conditional-law") {
    const double t = c.value("t", 10.0);
    const auto law = conditional_law(model, pen, x0, t, N, ctx.seed, eng);
    Table tb{"conditional_law.csv", 1, {"x", "y", "mode", "weight"}, {}};
    const auto m = law.ensemble.merged().normalized_copy();
    for (std::size_t i = 0; i < m.size(); ++i)
      tb.add({num(m.point(i).pos[0]), num(m.point(i).pos[1]), std::to_string(m.point(i).mode), num(m.weight(i))});
    r.tables.push_back(std::move(tb));
    const double mean = law.ensemble.expectation([](const State& s) { return s.x(); });
    r.estimate("conditional_mean_x", mean, 0.0, N, ctx.seed, mname, pen.name(), params);
    r.estimate("ess", law.ess, 0.0, N, ctx.seed, mname, pen.name(), params);
  } else if (est == "survival") {
    const auto times = times_of(c, 20.0, discrete);
    const auto sc = survival_curve(model, pen, x0, times, N, ctx.seed, eng);
    Table tb{"survival.csv", 1, {"t", "survival", "stderr"}, {}};
    for (std::size_t k = 0; k < times.size(); ++k) tb.add({num(times[k]), num(sc.estimate[k]), num(sc.stderr_[k])});
    r.tables.push_back(std::move(tb));
    const auto fit = estimate_lambda0(sc);
    r.estimate("lambda0", fit.lambda0, fit.stderr_, N, ctx.seed, mname, pen.name(), params);
  } else if (est == "qsd") {
    QsdOptions opts;
    opts.engine = eng;
    opts.compute_eta = false;
    const auto q = qsd_fixed_point(model, pen, c.value("t0", 5.0), N, c.value("tol", 0.01),
                                   c.value("max_iter", std::size_t{50}), ctx.seed, opts);
    r.converged = q.converged;
    Table tb{"qsd_measure.csv", 1, {"x", "y", "mode", "weight"}, {}};
    const auto m = q.measure.merged().normalized_copy();
    for (std::size_t i = 0; i < m.size(); ++i)
      tb.add({num(m.point(i).pos[0]), num(m.point(i).pos[1]), std::to_string(m.point(i).mode), num(m.weight(i))});
    r.tables.push_back(std::move(tb));
    r.estimate("lambda0", q.lambda0, q.lambda0_stderr, N, ctx.seed, mname, pen.name(), params);
    r.estimate("final_step", q.final_step, 0.0, N, ctx.seed, mname, pen.name(), params);
    r.check("fixed point converged", q.converged, std::to_string(q.iterations) + " iterations");
  } else if (est == "w1-decay") {
    if (!c.contains("y0")) bad("w1-decay needs y0");
    const State y0 = parse_state(c.at("y0"), model);
    const auto times = times_of(c, 20.0, discrete);
    const auto px = propagate(model, pen, replicate(x0, N), {ctx.seed, 0}, times, eng);
    const auto py = propagate(model, pen, replicate(y0, N), {ctx.seed, 0}, times, eng);
    Table tb{"w1_decay.csv", 1, {"t", "w1"}, {}};
    std::vector<double> w;
    for (std::size_t k = 0; k < times.size(); ++k) {
      w.push_back(w1(px.conditional(k), py.conditional(k), entry.metric));
      tb.add({num(times[k]), num(w.back())});
    }
    r.tables.push_back(std::move(tb));
    const auto fit = fit_log_linear(times, w);
    r.estimate("w1_log_slope", fit.slope, fit.slope_stderr, N, ctx.seed, mname, pen.name(), params);
  } else if (est == "exact-curve") {
    if (!discrete) bad("exact-curve needs a discrete model");
    const auto& dm = std::get<DiscreteModel>(model);
    const std::size_t n = c.value("n", std::size_t{10});
    Table tb{"exact_curve.csv", 1, {"n", "numerator", "denominator", "conditional_mean"}, {}};
    if (ctx.arithmetic == "rational") {
      const Rational x = to_rational(x0.x());
      const auto nu = exact_feynman_kac_curve(dm, pen, x, n, [](const Rational& v) { return v; });
      const auto de = exact_feynman_kac_curve(dm, pen, x, n, [](const Rational&) { return Rational(1); });
      for (std::size_t k = 0; k <= n; ++k)
        tb.add({std::to_string(k), nu[k].get_str(), de[k].get_str(), Rational(nu[k] / de[k]).get_str()});
      r.estimate("conditional_mean_x", Rational(nu[n] / de[n]).get_d(), 0.0, 0, ctx.seed, mname, pen.name(), params);
    } else {
      if (pen.requires_exact())
        throw Error(ErrorCode::requires_exact_arithmetic, "penalty '" + pen.name() + "' needs arithmetic = rational");
      const auto nu = enumerated_feynman_kac_curve(dm, pen, x0.x(), n, [](double v) { return v; });
      const auto de = enumerated_feynman_kac_curve(dm, pen, x0.x(), n, [](double) { return 1.0; });
      for (std::size_t k = 0; k <= n; ++k) tb.add({std::to_string(k), num(nu[k]), num(de[k]), num(nu[k] / de[k])});
      r.estimate("conditional_mean_x", nu[n] / de[n], 0.0, 0, ctx.seed, mname, pen.name(), params);
    }
    r.tables.push_back(std::move(tb));
  } else {
    const auto pairs = default_pairs(model);
    const auto times = times_of(c, 10.0, discrete);
    const auto coupled = discrete ? couple_synchronous(std::get<DiscreteModel>(model))
                                  : couple_pdmp_merge(std::get<PdmpModel>(model));
    AssumptionReport rep;
    if (est == "assumption-A") {
      rep = estimate_A(coupled, pen, pairs, times, N, ctx.seed, entry.metric, eng);
      r.estimate("gamma_A", rep.gamma_A, rep.gamma_A_stderr, N, ctx.seed, mname, pen.name(), params);
      r.estimate("C_A", rep.C_A, 0.0, N, ctx.seed, mname, pen.name(), params);
    } else if (est == "assumption-B") {
      rep = estimate_B(model, pen, pairs, times, N, ctx.seed, entry.metric, eng);
      r.estimate("C_B", rep.C_B, rep.stderr_, N, ctx.seed, mname, pen.name(), params);
    } else if (est == "assumption-C") {
      rep = estimate_C(coupled, pen, pairs, times, N, ctx.seed, eng);
      r.estimate("C_C", rep.C_C, rep.stderr_, N, ctx.seed, mname, pen.name(), params);
    } else {
      const auto grid = default_grid(model, 8);
      rep = estimate_H(model, pen, grid, times, N, ctx.seed, eng);
      r.estimate("C_H", rep.C_H, rep.stderr_, N, ctx.seed, mname, pen.name(), params);
    }
    curve_table(r, rep, "curves.csv");
    for (const auto& w : rep.warnings) r.notes.push_back(w);
  }
  return r;
}

}  // namespace qsdsim::cli
