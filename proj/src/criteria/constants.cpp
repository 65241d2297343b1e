#include <algorithm>
#include <cmath>
#include <limits>

#include "qsdsim/criteria.hpp"
#include "qsdsim/error.hpp"

namespace qsdsim {

std::string_view to_string(AssumptionTag tag) noexcept {
  switch (tag) {
    case AssumptionTag::A: return "A";
    case AssumptionTag::Aprime: return "Aprime";
    case AssumptionTag::B: return "B";
    case AssumptionTag::C: return "C";
    case AssumptionTag::H: return "H";
  }
  return "?";
}

namespace {

void check_abc(double C_A, double C_B, double C_C, double dbar) {
  require(std::isfinite(C_A) && C_A >= 1.0, ErrorCode::invalid_constants, "C_A must be >= 1");
  require(std::isfinite(C_C) && C_C >= 1.0, ErrorCode::invalid_constants, "C_C must be >= 1");
  require(std::isfinite(C_B) && C_B >= 0.0, ErrorCode::invalid_constants, "C_B must be >= 0");
  require(std::isfinite(dbar) && dbar > 0.0, ErrorCode::invalid_constants, "dbar must be > 0");
  require(!(C_C == 1.0 && C_B > 0.0), ErrorCode::degenerate_constants, "C_C = 1 with C_B > 0 has no finite kappa");
}

// 1 v 2 C_B C_C^2 dbar / (C_C - 1), with value 1 at C_B = 0.
double bracket(double C_B, double C_C, double dbar) {
  if (C_B == 0.0) return 1.0;
  return std::max(1.0, 2.0 * C_B * C_C * C_C * dbar / (C_C - 1.0));
}

}  // namespace

double alpha_explicit(double gamma_A, double C_A, double C_B, double C_C, double dbar) {
  require(std::isfinite(gamma_A) && gamma_A > 0.0, ErrorCode::invalid_constants, "gamma_A must be > 0");
  check_abc(C_A, C_B, C_C, dbar);
  const double num = std::log(2.0 * C_C / (2.0 * C_C - 1.0));
  const double den = std::log(2.0 * C_A * (1.0 + C_B * dbar) * bracket(C_B, C_C, dbar));
  return gamma_A * (num / den);
}

BetaKappa beta_kappa(double C_B, double C_C) {
  require(std::isfinite(C_C) && C_C >= 1.0, ErrorCode::invalid_constants, "C_C must be >= 1");
  require(std::isfinite(C_B) && C_B >= 0.0, ErrorCode::invalid_constants, "C_B must be >= 0");
  BetaKappa out;
  out.beta = 1.0 - 1.0 / (2.0 * C_C);
  if (C_B == 0.0) return out;
  require(C_C > 1.0, ErrorCode::degenerate_constants, "kappa = C_B / (beta - 1/2) is undefined at C_C = 1");
  out.kappa = C_B / (out.beta - 0.5);
  return out;
}

ContractionConstants as_contraction_constants(double C0, double gamma, double lip_rho, double osc_rho, double dbar,
                                              TimeKind kind) {
  require(std::isfinite(gamma) && gamma > 0.0, ErrorCode::invalid_parameter, "gamma must be > 0");
  require(std::isfinite(C0) && C0 >= 1.0, ErrorCode::invalid_parameter, "C0 must be >= 1");
  require(lip_rho >= 0.0 && osc_rho >= 0.0, ErrorCode::invalid_parameter, "Lipschitz constant and oscillation must be >= 0");
  require(std::isfinite(dbar) && dbar > 0.0, ErrorCode::invalid_parameter, "dbar must be > 0");
  ContractionConstants out;
  if (lip_rho == 0.0 || (kind == TimeKind::discrete && osc_rho == 0.0)) return out;
  double a = 0.0;
  if (kind == TimeKind::discrete) {
    a = C0 * std::exp(osc_rho) * lip_rho / (1.0 - std::exp(-gamma));
  } else {
    a = lip_rho * C0 / gamma;
  }
  out.C_B = a * std::exp(a * dbar);
  out.C_C = (1.0 + out.C_B * dbar) * (1.0 + out.C_B * dbar);
  return out;
}

CftkTransfer cftk_transfer(double C, double gamma, double osc_rho) {
  require(C > 0.0 && gamma > 0.0, ErrorCode::invalid_parameter, "need C > 0 and gamma > 0");
  require(osc_rho >= 0.0, ErrorCode::invalid_parameter, "oscillation must be >= 0");
  CftkTransfer out;
  out.margin = gamma - osc_rho;
  if (out.margin > 0.0) {
    out.accepted = true;
    out.C_A = C;
    out.gamma_A = out.margin;
  }
  return out;
}

namespace {

void check_law(const FiniteLaw& law) {
  require(!law.empty(), ErrorCode::invalid_parameter, "empty law");
  double total = 0.0;
  for (const auto& [v, p] : law) {
    require(v >= 0.0 && v <= 1.0, ErrorCode::invalid_parameter, "law must be supported in [0, 1]");
    require(p >= 0.0, ErrorCode::invalid_parameter, "negative probability");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::invalid_parameter, "probabilities must sum to 1");
}

double log_mgf(const FiniteLaw& law, double t) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [v, p] : law)
    if (p > 0.0) m = std::max(m, std::log(p) + t * v);
  double s = 0.0;
  for (const auto& [v, p] : law)
    if (p > 0.0) s += std::exp(std::log(p) + t * v - m);
  return m + std::log(s);
}

// d/dt log E exp(t nu): the tilted mean.
double tilted_mean(const FiniteLaw& law, double t) {
  const double lm = log_mgf(law, t);
  double s = 0.0;
  for (const auto& [v, p] : law)
    if (p > 0.0) s += v * std::exp(std::log(p) + t * v - lm);
  return s;
}

}  // namespace

double fenchel_legendre(const FiniteLaw& law, double x) {
  check_law(law);
  double top = 0.0, top_mass = 0.0, mean = 0.0;
  for (const auto& [v, p] : law)
    if (p > 0.0) top = std::max(top, v);
  for (const auto& [v, p] : law) {
    if (p > 0.0 && v == top) top_mass += p;
    mean += p * v;
  }
  if (x > top) return std::numeric_limits<double>::infinity();
  // At the top of the support h increases to its limit -log P(nu = top).
  if (x == top) return -std::log(top_mass);
  if (x <= mean) return 0.0;
  auto h = [&](double t) { return t * x - log_mgf(law, t); };
  double hi = 1.0;
  while (x - tilted_mean(law, hi) > 0.0) hi *= 2.0;
  // h is concave: golden-section search on [0, hi].
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double hc = h(c), hd = h(d);
  for (int it = 0; it < 300 && b - a > 1e-13 * (1.0 + hi); ++it) {
    if (hc < hd) {
      a = c;
      c = d;
      hc = hd;
      d = a + g * (b - a);
      hd = h(d);
    } else {
      b = d;
      d = c;
      hd = hc;
      c = b - g * (b - a);
      hc = h(c);
    }
  }
  return std::max({0.0, hc, hd, h(0.5 * (a + b))});
}

IrfVerdict irf_condition(const FiniteLaw& lipschitz_law, double osc_rho) {
  check_law(lipschitz_law);
  require(osc_rho >= 0.0, ErrorCode::invalid_parameter, "oscillation must be >= 0");
  IrfVerdict out;
  for (const auto& [v, p] : lipschitz_law)
    if (v == 1.0) out.q += p;
  out.threshold = std::exp(-osc_rho);
  out.margin = out.threshold - out.q;
  out.holds = out.q < out.threshold;
  if (!out.holds) return out;
  for (int k = 1; k <= 60; ++k) {
    const double eps = std::ldexp(1.0, -k);
    const double chi = fenchel_legendre(lipschitz_law, 1.0 - eps) - osc_rho;
    if (chi > 0.0) {
      out.epsilon = eps;
      out.chi = chi;
      return out;
    }
  }
  return out;
}

double theta_eig(double q_plus, double q_minus) {
  const double s = 0.5 * (q_plus + q_minus);
  const double h = std::hypot(0.5 * (q_plus - q_minus), 1.0);
  // s + h loses digits when s is large and negative; h^2 - s^2 = 1 - q_plus q_minus.
  const double top = s >= 0.0 ? s + h : (1.0 - q_plus * q_minus) / (h - s);
  return -1.0 + top;
}

double bistable_gamma(double p_plus, double p_minus, double r) {
  return theta_eig(-r, 0.0) - theta_eig(p_plus - r, p_minus);
}

RThreshold r_threshold(double p_plus, double p_minus, double r_max, double step) {
  require(p_plus > 0.0 && p_minus < 0.0, ErrorCode::invalid_parameter, "need p_plus > 0 > p_minus");
  require(step > 0.0 && r_max >= 0.0, ErrorCode::invalid_parameter, "need step > 0 and r_max >= 0");
  RThreshold out;
  out.gamma_at_max = bistable_gamma(p_plus, p_minus, r_max);
  for (std::size_t k = 0;; ++k) {
    const double r = static_cast<double>(k) * step;
    if (r > r_max * (1.0 + 1e-12)) break;
    const double g = bistable_gamma(p_plus, p_minus, r);
    if (g > 0.0) {
      out.r = r;
      out.gamma_at_r = g;
      break;
    }
  }
  return out;
}

ProofConstants proof_constants(double gamma_A, double C_A, double C_B, double C_C, double dbar) {
  ProofConstants out;
  out.alpha = alpha_explicit(gamma_A, C_A, C_B, C_C, dbar);
  const auto bk = beta_kappa(C_B, C_C);
  out.beta = bk.beta;
  out.kappa = bk.kappa;
  const double slack = 1.0 - 1.0 / C_C;
  const double second = C_B == 0.0 ? 0.0 : 2.0 * C_B * dbar / slack * C_A;
  out.C0 = std::max(0.5 * slack + (1.0 + C_B * dbar) * C_A, slack + second);
  const double spread = C_B == 0.0 ? 1.0 : 1.0 + C_B * (1.0 + 0.5 * dbar * C_B) * std::max(1.0 / out.kappa, dbar);
  out.C1 = out.C0 * (1.0 + dbar * C_B) * std::max(1.0, out.kappa * dbar) / out.beta * spread;
  out.growth = 2.0 * C_A * (1.0 + C_B * dbar) * bracket(C_B, C_C, dbar);
  return out;
}

ConstantBundle complete_bundle(ConstantBundle b) {
  const auto bk = beta_kappa(b.C_B, b.C_C);
  b.beta = bk.beta;
  b.kappa = bk.kappa;
  b.alpha = b.gamma_A > 0.0 ? alpha_explicit(b.gamma_A, b.C_A, b.C_B, b.C_C, b.dbar) : 0.0;
  return b;
}

}  // namespace qsdsim
