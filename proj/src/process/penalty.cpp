#include <algorithm>
#include <cmath>

#include "qsdsim/error.hpp"
#include "qsdsim/penalty.hpp"

namespace qsdsim {

PenaltyField::PenaltyField(Info info, Eval eval) : info_(std::move(info)), eval_(std::move(eval)) {
  require(static_cast<bool>(eval_), ErrorCode::invalid_penalty, "penalty has no evaluator");
  if (info_.kind == PenaltyKind::discrete_p) {
    require(info_.lower >= 0.0 && info_.upper <= 1.0, ErrorCode::invalid_penalty,
            "survival probability bounds must lie in [0, 1]");
  } else {
    require(info_.lower >= 0.0, ErrorCode::invalid_penalty, "killing rate must be nonnegative");
  }
}

PenaltyField PenaltyField::linear(std::string name, PenaltyKind kind, double c0, double c1, double lo, double hi) {
  require(lo <= hi, ErrorCode::invalid_parameter, "empty interval");
  const double r_lo = std::min(c0 + c1 * lo, c0 + c1 * hi);
  const double r_hi = std::max(c0 + c1 * lo, c0 + c1 * hi);
  require(r_lo >= 0.0, ErrorCode::invalid_penalty, "rho must be nonnegative on the state space");
  Info info{std::move(name), kind, std::abs(c1), r_hi - r_lo, 0.0, 0.0, true};
  Eval eval;
  if (kind == PenaltyKind::discrete_p) {
    info.lower = std::exp(-r_hi);
    info.upper = std::exp(-r_lo);
    eval = [c0, c1](const State& s) { return std::exp(-(c0 + c1 * s.pos[0])); };
  } else {
    info.lower = r_lo;
    info.upper = r_hi;
    eval = [c0, c1](const State& s) { return c0 + c1 * s.pos[0]; };
  }
  PenaltyField field(std::move(info), std::move(eval));
  field.linear_ = std::make_pair(c0, c1);
  return field;
}

PenaltyField PenaltyField::constant_survival(double c) {
  require(c > 0.0 && c <= 1.0, ErrorCode::invalid_penalty, "constant survival probability must lie in (0, 1]");
  PenaltyField field = linear("constant-p", PenaltyKind::discrete_p, -std::log(c), 0.0, 0.0, 0.0);
  field.info_.lower = field.info_.upper = c;
  field.eval_ = [c](const State&) { return c; };
  const Rational cq = to_rational(c);
  field.exact_ = [cq](const Rational&) { return cq; };
  return field;
}

PenaltyField PenaltyField::constant_rate(double r) {
  require(r >= 0.0, ErrorCode::invalid_penalty, "killing rate must be nonnegative");
  return linear("constant-rho", PenaltyKind::continuous_rho, r, 0.0, 0.0, 0.0);
}

PenaltyField PenaltyField::mode_rates(std::string name, std::vector<double> rates) {
  require(!rates.empty(), ErrorCode::invalid_penalty, "no mode rates given");
  for (double r : rates) require(r >= 0.0 && std::isfinite(r), ErrorCode::invalid_penalty, "rates must be >= 0");
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  // Under the product metric, modes at distance 1 bound the Lipschitz constant by the oscillation.
  Info info{std::move(name), PenaltyKind::continuous_rho, *hi - *lo, *hi - *lo, *lo, *hi, true};
  auto shared = rates;
  PenaltyField field(std::move(info), [shared](const State& s) {
    require(s.mode >= 0 && static_cast<std::size_t>(s.mode) < shared.size(), ErrorCode::invalid_state,
            "state mode outside the penalty's mode range");
    return shared[static_cast<std::size_t>(s.mode)];
  });
  field.rates_ = std::move(rates);
  return field;
}

double PenaltyField::operator()(const State& s) const { return eval_(s); }

double PenaltyField::log_survival(const State& s) const {
  require(info_.kind == PenaltyKind::discrete_p, ErrorCode::invalid_penalty, "log_survival needs a discrete penalty");
  if (linear_) return -(linear_->first + linear_->second * s.pos[0]);
  return std::log(eval_(s));
}

double PenaltyField::mode_rate(int mode) const {
  require(mode >= 0 && static_cast<std::size_t>(mode) < rates_.size(), ErrorCode::invalid_state,
          "mode outside the penalty's mode range");
  return rates_[static_cast<std::size_t>(mode)];
}

Rational PenaltyField::exact(const Rational& x) const {
  if (!exact_) throw Error(ErrorCode::requires_exact_arithmetic, "penalty '" + info_.name + "' has no exact form");
  return exact_(x);
}

PenaltyField PenaltyField::with_exact(ExactEval exact, bool required) const {
  PenaltyField copy = *this;
  copy.exact_ = std::move(exact);
  copy.requires_exact_ = required;
  return copy;
}

}  // namespace qsdsim
