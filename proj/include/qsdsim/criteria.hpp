#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsdsim/estimators.hpp"
#include "qsdsim/metric.hpp"
#include "qsdsim/process.hpp"

namespace qsdsim {

enum class AssumptionTag { A, Aprime, B, C, H };
std::string_view to_string(AssumptionTag tag) noexcept;

struct StatePair {
  State x;
  State y;
};

/// 8 Chebyshev nodes on the state interval, all ordered cross pairs with
/// x != y. PDMPs: the nodes are crossed with every pair of modes.
std::vector<StatePair> default_pairs(const AnyModel& model, std::size_t nodes = 8);

struct PairCurve {
  std::size_t pair = 0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> stderr_;
  /// Log-linear fit log(value) = intercept + slope t over positive values.
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

struct AssumptionReport {
  AssumptionTag tag = AssumptionTag::A;
  /// (A): C_A, gamma_A; (B): C_B; (C): C_C; (H): C_H. Unused fields stay 0.
  double C_A = 0.0;
  double gamma_A = 0.0;
  double gamma_A_stderr = 0.0;
  double C_B = 0.0;
  double C_C = 0.0;
  double C_H = 0.0;
  /// Standard error of the reported extreme ratio for B, C, H.
  double stderr_ = 0.0;
  double min_r_squared = 1.0;
  std::vector<StatePair> pairs;
  std::vector<PairCurve> curves;
  /// Exact (A) variant: |E_x[X_n G_n] - E_y[X_n G_n]| / d(x, y), a lower bound
  /// on W1 between the conditional laws divided by d(x, y).
  std::vector<PairCurve> witness;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Fits log(values) = a + b t by least squares over strictly positive values.
PairCurve fit_log_linear(std::vector<double> times, std::vector<double> values, std::vector<double> stderrs = {});

/// E[G^X_t d(X_t, Y_t)] / d(x, y) per pair and time under the coupling;
/// gamma_A = min over pairs of the fitted decay rate, C_A = max over pairs of
/// exp(intercept), floored at 1.
AssumptionReport estimate_A(const CoupledModel& coupled, const PenaltyField& penalty, std::span<const StatePair> pairs,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            std::optional<BoundedMetric> metric = {}, const EngineOptions& opts = {});

/// Exact synchronous-coupling (A)-curve and the Kantorovich witness curve
/// with f(x) = x, by rational enumeration up to step n.
AssumptionReport estimate_A_exact(const DiscreteModel& model, const PenaltyField& penalty,
                                  std::span<const StatePair> pairs, std::size_t n);

/// max over pairs and times of |E_x Z_t - E_y Z_t| / (d(x, y) E_x Z_t),
/// both expectations on common streams.
AssumptionReport estimate_B(const AnyModel& model, const PenaltyField& penalty, std::span<const StatePair> pairs,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            std::optional<BoundedMetric> metric = {}, const EngineOptions& opts = {});
/// Same by enumeration of all paths up to step n.
AssumptionReport estimate_B_exact(const DiscreteModel& model, const PenaltyField& penalty,
                                  std::span<const StatePair> pairs, std::size_t n);

/// min over pairs and times of E[G^X_t ^ G^Y_t]; C_C = 1 / min.
AssumptionReport estimate_C(const CoupledModel& coupled, const PenaltyField& penalty, std::span<const StatePair> pairs,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            const EngineOptions& opts = {});

/// sup over grid pairs and s <= t of E_x Z_s / E_y Z_s.
AssumptionReport estimate_H(const AnyModel& model, const PenaltyField& penalty, std::span<const State> grid,
                            std::span<const double> times, std::size_t n, std::uint64_t seed,
                            const EngineOptions& opts = {});
AssumptionReport estimate_H_exact(const DiscreteModel& model, const PenaltyField& penalty,
                                  std::span<const State> grid, std::size_t n);

// ---------------------------------------------------------------------------
// Closed-form constants.

/// alpha = gamma_A log(2C_C / (2C_C - 1)) / log(2 C_A (1 + C_B dbar) [1 v 2 C_B C_C^2 dbar / (C_C - 1)]).
/// The bracket is 1 when C_B = 0 and C_C = 1. Throws invalid-constants for
/// C_A < 1, C_C < 1, C_B < 0, dbar <= 0 or gamma_A <= 0, and
/// degenerate-constants for C_C = 1 with C_B > 0.
double alpha_explicit(double gamma_A, double C_A, double C_B, double C_C, double dbar);

struct BetaKappa {
  double beta = 0.0;
  double kappa = 0.0;
};
/// beta = 1 - 1 / (2 C_C), kappa = C_B / (beta - 1/2). kappa = 0 when
/// C_B = 0; C_C = 1 with C_B > 0 throws degenerate-constants.
BetaKappa beta_kappa(double C_B, double C_C);

enum class TimeKind { discrete, continuous };

struct ContractionConstants {
  double C_B = 0.0;
  double C_C = 1.0;
};
/// Constants (B), (C) from an almost-sure contraction d(X_t, Y_t) <= C0 e^{-gamma t} d(x, y).
ContractionConstants as_contraction_constants(double C0, double gamma, double lip_rho, double osc_rho, double dbar,
                                              TimeKind kind);

struct CftkTransfer {
  bool accepted = false;
  double C_A = 0.0;
  double gamma_A = 0.0;
  /// gamma - osc(rho); nonpositive on rejection.
  double margin = 0.0;
};
CftkTransfer cftk_transfer(double C, double gamma, double osc_rho);

/// Finite law as (value, probability) pairs.
using FiniteLaw = std::vector<std::pair<double, double>>;

/// sup over t >= 0 of t x - log E exp(t nu). Returns +inf above the support.
double fenchel_legendre(const FiniteLaw& law, double x);

struct IrfVerdict {
  bool holds = false;
  double q = 0.0;
  double threshold = 0.0;
  /// exp(-osc) - q.
  double margin = 0.0;
  /// An epsilon with chi = Lambda*(1 - epsilon) - osc > 0 when the verdict holds.
  double epsilon = 0.0;
  double chi = 0.0;
};
IrfVerdict irf_condition(const FiniteLaw& lipschitz_law, double osc_rho);

/// Largest eigenvalue of Q + Diag(q_plus, q_minus) for Q = [[-1, 1], [1, -1]].
double theta_eig(double q_plus, double q_minus);

/// theta(-r, 0) - theta(p_plus - r, p_minus).
double bistable_gamma(double p_plus, double p_minus, double r);

struct RThreshold {
  std::optional<double> r;
  double gamma_at_r = 0.0;
  double gamma_at_max = 0.0;
};
/// First r on the grid 0, step, 2 step, ... <= r_max with bistable_gamma > 0.
RThreshold r_threshold(double p_plus, double p_minus, double r_max, double step);

struct ProofConstants {
  double beta = 0.0;
  double kappa = 0.0;
  double C0 = 0.0;
  double C1 = 0.0;
  double alpha = 0.0;
  /// exp(gamma_A t0) from the proof's choice of t0.
  double growth = 0.0;
};
/// The constants of the contraction theorem for gamma(t) = C_A e^{-gamma_A t}.
ProofConstants proof_constants(double gamma_A, double C_A, double C_B, double C_C, double dbar);

struct ConstantBundle {
  double gamma_A = 0.0;
  double C_A = 1.0;
  double C_B = 0.0;
  double C_C = 1.0;
  double C_H = 1.0;
  double dbar = 1.0;
  double osc_rho = 0.0;
  double lip_rho = 0.0;
  double beta = 0.5;
  double kappa = 0.0;
  double alpha = 0.0;
};
/// Fills beta, kappa and alpha from the other fields.
ConstantBundle complete_bundle(ConstantBundle b);

struct EquivalenceReport {
  bool a_decays = false;
  bool aprime = false;
  bool b_bounded = false;
  bool h_bounded = false;
  bool consistent = false;
  std::vector<std::string> notes;
};

/// (A) holds iff (A') and (B) hold iff (A') and (H) hold. (A) counts as
/// holding when gamma_A exceeds 3 standard errors; (A') when the worst-pair
/// curve ends below half its first positive-time value; B and H count as
/// bounded when the worst-pair curve gains at most half as much over the
/// second half of the time range as over the first (within 3 standard errors).
EquivalenceReport cross_check_equivalence(const AssumptionReport& a, const AssumptionReport& b,
                                          const AssumptionReport& h);

}  // namespace qsdsim
