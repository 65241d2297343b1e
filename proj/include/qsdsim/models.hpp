#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qsdsim/metric.hpp"
#include "qsdsim/process.hpp"

namespace qsdsim {

/// X_{n+1} = X_n / 2 + theta with Rademacher theta, on [-2, 2].
DiscreteModel bernoulli_convolution();

/// Same kernel on (-2, 2) minus {0}, the space of the |x|/2 counter-example.
DiscreteModel bernoulli_punctured();

struct IteratedMap {
  std::function<double(double)> map;
  double lipschitz = 1.0;
  double prob = 0.0;
  /// Optional exact affine form slope * x + intercept.
  std::optional<std::pair<Rational, Rational>> affine;
};

/// Finite random iterated function system. Throws invalid-parameter if
/// some lipschitz factor exceeds 1.
DiscreteModel iterated_functions(const std::vector<IteratedMap>& maps, StateSpace space = StateSpace::closed(-2, 2));

/// Identity with probability q, x / 2 otherwise, on [-2, 2].
DiscreteModel identity_half_mixture(double q);

/// p(x) = exp(-(c0 + c1 (x + 2) / 4)) on [-2, 2]; defaults c0 = 0.1, c1 = 0.2.
PenaltyField penalty_demo(double c0 = 0.1, double c1 = 0.2);

/// p(x) = |x| / 2 on (-2, 2) minus {0}; rho = -log p is unbounded.
PenaltyField penalty_counterexample_abs();

/// p(x) = 1/2 for rational x >= 0, 1 otherwise. Exact states only.
PenaltyField penalty_counterexample_rational();

/// rho(x) = osc * (x + 2) / 4 on [-2, 2] as a discrete penalty.
PenaltyField penalty_affine_oscillation(double osc);

/// Uniform two-mode rate matrix [[-k, k], [k, -k]].
std::vector<double> uniform_two_mode_rates(double k = 1.0);

/// Two-mode planar system F1(x) = A x, F2(x) = A (x - a). The radius R is
/// the smallest value (times 1.25) for which <F_i(x), x> < 0 on |x| = R,
/// checked on 720 sphere samples; pass `radius` to override (still checked).
PdmpModel switched_linear(const std::array<double, 4>& A, const Vec2& a, std::vector<double> rates,
                          std::optional<double> radius = std::nullopt);

/// rho(x, i) = 0.25 i + 0.1 (1 + x_1 / R).
PenaltyField penalty_switched_demo(double radius);

/// Largest gamma with <F_i(x) - F_i(y), x - y> <= -gamma |x - y|^2 over
/// `samples` random pairs in the ball, for every mode.
double monotonicity_rate(const PdmpModel& model, std::size_t samples, std::uint64_t seed);

struct BistableSystem {
  PdmpModel model;
  PenaltyField penalty;
};

/// Mode 0 is "-" with F(x) = p_minus x - x^3, mode 1 is "+" with
/// F(x) = p_plus x - x^3; Q = [[-1, 1], [1, -1]]; rho(x, -) = 0,
/// rho(x, +) = r. State space [-sqrt(p_plus), sqrt(p_plus)], metric radius
/// 2 sqrt(p_plus).
BistableSystem bistable_pdmp(double p_plus, double p_minus, double r);

struct ModelCatalogEntry {
  std::string name;
  std::string description;
  AnyModel model;
  PenaltyField penalty;
  BoundedMetric metric;
};

std::vector<ModelCatalogEntry> model_catalog();
/// Looks up a catalog entry by name; throws invalid-config if unknown.
ModelCatalogEntry catalog_entry(const std::string& name);

}  // namespace qsdsim
