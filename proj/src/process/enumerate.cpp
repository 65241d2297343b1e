#include <cmath>

#include "qsdsim/error.hpp"
#include "qsdsim/process.hpp"

namespace qsdsim {
namespace {

void check_enumerable(const DiscreteModel& model, std::size_t n, std::size_t cap) {
  require(model.finite(), ErrorCode::unsupported_model, "enumeration needs a finite noise law");
  const std::size_t k = model.branches().size();
  std::size_t leaves = 1;
  for (std::size_t i = 0; i < n; ++i) {
    require(leaves <= cap / k, ErrorCode::instance_too_large,
            std::to_string(k) + "^" + std::to_string(n) + " paths exceed the cap of " + std::to_string(cap));
    leaves *= k;
  }
}

void check_exact(const DiscreteModel& model) {
  if (!model.all_affine())
    throw Error(ErrorCode::requires_exact_arithmetic, "exact enumeration needs affine branches with rational data");
}

// Branch probabilities conditioned on staying in the state space.
template <class Num, class Step, class Contains, class Prob>
std::vector<std::pair<Num, Num>> children(const DiscreteModel& model, const Num& x, Step step, Contains contains,
                                          Prob prob) {
  std::vector<std::pair<Num, Num>> out;
  Num total = 0;
  for (std::size_t b = 0; b < model.branches().size(); ++b) {
    Num y = step(x, b);
    if (!contains(y)) continue;
    const Num p = prob(b);
    if (p == 0) continue;
    total += p;
    out.emplace_back(std::move(y), p);
  }
  require(!out.empty(), ErrorCode::invalid_state, "every branch leaves the state space");
  for (auto& c : out) c.second /= total;
  return out;
}

struct ExactOps {
  const DiscreteModel& model;
  auto kids(const Rational& x) const {
    return children<Rational>(
        model, x, [&](const Rational& v, std::size_t b) { return model.step_exact(v, b); },
        [&](const Rational& v) { return model.space().contains(v); },
        [&](std::size_t b) { return model.branches()[b].prob_q; });
  }
};

}  // namespace

std::vector<ExactPath> enumerate_paths(const DiscreteModel& model, const Rational& x0, std::size_t n,
                                       std::size_t cap) {
  check_enumerable(model, n, cap);
  check_exact(model);
  require(model.space().contains(x0), ErrorCode::invalid_state, "start outside the state space");
  std::vector<ExactPath> out;
  ExactOps ops{model};
  ExactPath cur;
  cur.states.push_back(x0);
  cur.prob = 1;
  auto rec = [&](auto&& self, std::size_t depth) -> void {
    if (depth == n) {
      out.push_back(cur);
      return;
    }
    const Rational saved = cur.prob;
    for (auto& [y, p] : ops.kids(cur.states.back())) {
      cur.states.push_back(y);
      cur.prob = saved * p;
      self(self, depth + 1);
      cur.states.pop_back();
    }
    cur.prob = saved;
  };
  rec(rec, 0);
  return out;
}

Rational exact_path_expectation(const DiscreteModel& model, const Rational& x0, std::size_t n,
                                const std::function<Rational(const std::vector<Rational>&)>& g, std::size_t cap) {
  Rational total = 0;
  for (const auto& path : enumerate_paths(model, x0, n, cap)) total += path.prob * g(path.states);
  total.canonicalize();
  return total;
}

std::vector<Rational> exact_feynman_kac_curve(const DiscreteModel& model, const PenaltyField& penalty,
                                              const Rational& x0, std::size_t n,
                                              const std::function<Rational(const Rational&)>& f, std::size_t cap) {
  require(penalty.kind() == PenaltyKind::discrete_p, ErrorCode::invalid_penalty, "discrete penalty required");
  check_enumerable(model, n, cap);
  check_exact(model);
  require(model.space().contains(x0), ErrorCode::invalid_state, "start outside the state space");
  std::vector<Rational> curve(n + 1, Rational(0));
  ExactOps ops{model};
  auto rec = [&](auto&& self, const Rational& x, const Rational& mass, std::size_t depth) -> void {
    // mass = P(path) * Z_depth
    curve[depth] += mass * f(x);
    if (depth == n) return;
    const Rational next_mass = mass * penalty.exact(x);
    for (auto& [y, p] : ops.kids(x)) self(self, y, next_mass * p, depth + 1);
  };
  rec(rec, x0, Rational(1), 0);
  for (auto& c : curve) c.canonicalize();
  return curve;
}

Rational exact_feynman_kac(const DiscreteModel& model, const PenaltyField& penalty, const Rational& x0,
                           std::size_t n, const std::function<Rational(const Rational&)>& f, std::size_t cap) {
  return exact_feynman_kac_curve(model, penalty, x0, n, f, cap).back();
}

std::vector<double> enumerated_feynman_kac_curve(const DiscreteModel& model, const PenaltyField& penalty, double x0,
                                                 std::size_t n, const std::function<double(double)>& f,
                                                 std::size_t cap) {
  require(penalty.kind() == PenaltyKind::discrete_p, ErrorCode::invalid_penalty, "discrete penalty required");
  check_enumerable(model, n, cap);
  require(model.space().contains(x0), ErrorCode::invalid_state, "start outside the state space");
  std::vector<double> curve(n + 1, 0.0);
  auto rec = [&](auto&& self, double x, double mass, std::size_t depth) -> void {
    curve[depth] += mass * f(x);
    if (depth == n) return;
    const double next_mass = mass * penalty(State::scalar(x));
    const auto kids = children<double>(
        model, x, [&](double v, std::size_t b) { return model.step(v, b); },
        [&](double v) { return model.space().contains(v); }, [&](std::size_t b) { return model.branches()[b].prob; });
    for (const auto& [y, p] : kids) self(self, y, next_mass * p, depth + 1);
  };
  rec(rec, x0, 1.0, 0);
  return curve;
}

}  // namespace qsdsim
