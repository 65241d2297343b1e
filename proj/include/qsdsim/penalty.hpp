#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qsdsim/rational.hpp"
#include "qsdsim/state.hpp"

namespace qsdsim {

enum class PenaltyKind { discrete_p, continuous_rho };

/// Killing data. Discrete: survival probability p = e^{-rho} in (0,1] per
/// step. Continuous: killing rate rho >= 0.
///
/// `lipschitz` and `oscillation` always describe rho (so for the discrete
/// kind they refer to -log p). Fields that are not Lipschitz in rho report
/// rho_lipschitz() == false and an infinite constant.
class PenaltyField {
 public:
  using Eval = std::function<double(const State&)>;
  using ExactEval = std::function<Rational(const Rational&)>;

  struct Info {
    std::string name;
    PenaltyKind kind = PenaltyKind::discrete_p;
    double lipschitz = 0.0;
    double oscillation = 0.0;
    double lower = 0.0;  // bounds of eval() (p or rho)
    double upper = 1.0;
    bool rho_lipschitz = true;
  };

  PenaltyField(Info info, Eval eval);

  /// rho(x) = c0 + c1 * x (continuous) or p(x) = exp(-(c0 + c1 * x)).
  /// Scalar states only; the Lipschitz constant is |c1| for |x - y| on [lo, hi].
  static PenaltyField linear(std::string name, PenaltyKind kind, double c0, double c1, double lo, double hi);
  static PenaltyField constant_survival(double c);
  static PenaltyField constant_rate(double r);
  /// rho depends on the mode only.
  static PenaltyField mode_rates(std::string name, std::vector<double> rates);

  const std::string& name() const noexcept { return info_.name; }
  PenaltyKind kind() const noexcept { return info_.kind; }
  double lipschitz() const noexcept { return info_.lipschitz; }
  double oscillation() const noexcept { return info_.oscillation; }
  double lower() const noexcept { return info_.lower; }
  double upper() const noexcept { return info_.upper; }
  bool rho_lipschitz() const noexcept { return info_.rho_lipschitz; }
  const Info& info() const noexcept { return info_; }

  /// p(x) or rho(x). Throws requires-exact-arithmetic for fields that are
  /// only defined on exact rationals.
  double operator()(const State& s) const;
  /// log p(x) for the discrete kind.
  double log_survival(const State& s) const;

  bool has_linear_form() const noexcept { return linear_.has_value(); }
  /// (c0, c1) with rho(x) = c0 + c1 x.
  std::pair<double, double> linear_form() const { return *linear_; }

  bool mode_only() const noexcept { return !rates_.empty(); }
  double mode_rate(int mode) const;
  const std::vector<double>& rates() const noexcept { return rates_; }

  bool has_exact() const noexcept { return static_cast<bool>(exact_); }
  bool requires_exact() const noexcept { return requires_exact_; }
  /// Exact p on rational states (discrete kind).
  Rational exact(const Rational& x) const;

  PenaltyField with_exact(ExactEval exact, bool required) const;

 private:
  Info info_;
  Eval eval_;
  std::optional<std::pair<double, double>> linear_;
  std::vector<double> rates_;
  ExactEval exact_;
  bool requires_exact_ = false;
};

}  // namespace qsdsim
