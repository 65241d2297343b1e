#include <algorithm>
#include <cmath>

#include "qsdsim/error.hpp"
#include "qsdsim/pdmp.hpp"

namespace qsdsim {

std::string_view to_string(FlowIntegrator integrator) noexcept {
  return integrator == FlowIntegrator::rk4 ? "rk4" : "closed-form-linear";
}

std::array<double, 4> expm2(const std::array<double, 4>& A, double t) {
  const double s = 0.5 * (A[0] + A[3]);
  const double half_gap = 0.5 * (A[0] - A[3]);
  const double delta = half_gap * half_gap + A[1] * A[2];  // M^2 = delta I for M = A - sI
  double c = 1.0, sh = t;
  if (delta > 0.0) {
    const double mu = std::sqrt(delta), z = mu * t;
    c = std::cosh(z);
    sh = std::abs(z) < 1e-4 ? t * (1.0 + z * z / 6.0) : std::sinh(z) / mu;
  } else if (delta < 0.0) {
    const double w = std::sqrt(-delta), z = w * t;
    c = std::cos(z);
    sh = std::abs(z) < 1e-4 ? t * (1.0 - z * z / 6.0) : std::sin(z) / w;
  }
  const double e = std::exp(s * t);
  return {e * (c + sh * (A[0] - s)), e * sh * A[1], e * sh * A[2], e * (c + sh * (A[3] - s))};
}

PdmpModel::PdmpModel(std::string name, int dim, std::vector<double> rates, std::vector<LinearField> fields,
                     double radius)
    : name_(std::move(name)), dim_(dim), rates_(std::move(rates)), integrator_(FlowIntegrator::closed_form_linear),
      linear_(std::move(fields)), radius_(radius), state_bound_(radius) {
  require(dim_ == 1 || dim_ == 2, ErrorCode::invalid_parameter, "PDMP dimension must be 1 or 2");
  require(radius_ > 0.0, ErrorCode::invalid_parameter, "radius must be positive");
  modes_ = static_cast<int>(linear_.size());
  check_rates();
  for (const auto& f : linear_) {
    if (dim_ == 1) {
      require(f.A[0] < 0.0, ErrorCode::invalid_parameter, "linear field must be stable");
      equilibria_.push_back({-f.b[0] / f.A[0], 0.0});
    } else {
      const double tr = f.A[0] + f.A[3], det = f.A[0] * f.A[3] - f.A[1] * f.A[2];
      require(tr < 0.0 && det > 0.0, ErrorCode::invalid_parameter,
              "eigenvalues of A must have negative real parts (trace < 0, det > 0)");
      // x* = -A^{-1} b
      equilibria_.push_back({-(f.A[3] * f.b[0] - f.A[1] * f.b[1]) / det, -(-f.A[2] * f.b[0] + f.A[0] * f.b[1]) / det});
    }
  }
}

PdmpModel::PdmpModel(std::string name, int dim, std::vector<double> rates, std::vector<Field> fields, double radius,
                     double state_bound)
    : name_(std::move(name)), dim_(dim), rates_(std::move(rates)), integrator_(FlowIntegrator::rk4),
      fields_(std::move(fields)), radius_(radius), state_bound_(state_bound) {
  require(dim_ == 1 || dim_ == 2, ErrorCode::invalid_parameter, "PDMP dimension must be 1 or 2");
  require(radius_ > 0.0 && state_bound_ > 0.0, ErrorCode::invalid_parameter, "radius must be positive");
  modes_ = static_cast<int>(fields_.size());
  check_rates();
}

void PdmpModel::check_rates() const {
  require(modes_ >= 1, ErrorCode::invalid_parameter, "PDMP needs at least one mode");
  require(rates_.size() == static_cast<std::size_t>(modes_ * modes_), ErrorCode::invalid_parameter,
          "rate matrix must be modes x modes");
  for (int i = 0; i < modes_; ++i) {
    double row = 0.0;
    for (int j = 0; j < modes_; ++j) {
      if (i != j) require(rate(i, j) >= 0.0, ErrorCode::invalid_parameter, "off-diagonal rates must be >= 0");
      row += rate(i, j);
    }
    require(std::abs(row) <= 1e-12, ErrorCode::invalid_parameter, "rate matrix rows must sum to 0");
  }
}

Vec2 PdmpModel::field(int mode, const Vec2& x) const {
  if (integrator_ == FlowIntegrator::rk4) return fields_[static_cast<std::size_t>(mode)](x);
  const auto& f = linear_[static_cast<std::size_t>(mode)];
  if (dim_ == 1) return {f.A[0] * x[0] + f.b[0], 0.0};
  return {f.A[0] * x[0] + f.A[1] * x[1] + f.b[0], f.A[2] * x[0] + f.A[3] * x[1] + f.b[1]};
}

Vec2 PdmpModel::flow(int mode, const Vec2& x, double t) const {
  if (t <= 0.0) return x;
  if (integrator_ == FlowIntegrator::rk4) return rk4_flow(mode, x, t, nullptr, nullptr);
  const auto& f = linear_[static_cast<std::size_t>(mode)];
  const Vec2& eq = equilibria_[static_cast<std::size_t>(mode)];
  if (dim_ == 1) return {eq[0] + std::exp(f.A[0] * t) * (x[0] - eq[0]), 0.0};
  const auto E = expm2(f.A, t);
  const double u = x[0] - eq[0], v = x[1] - eq[1];
  return {eq[0] + E[0] * u + E[1] * v, eq[1] + E[2] * u + E[3] * v};
}

namespace {

double simpson_step(const std::function<double(double)>& g, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = g(lm), frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_step(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

Vec2 PdmpModel::flow_integrate(int mode, const Vec2& x, double t, const std::function<double(const Vec2&, int)>& rho,
                               double& integral) const {
  integral = 0.0;
  if (t <= 0.0) return x;
  if (integrator_ == FlowIntegrator::rk4) return rk4_flow(mode, x, t, &rho, &integral);
  auto g = [&](double s) { return rho(flow(mode, x, s), mode); };
  const double fa = g(0.0), fm = g(0.5 * t), fb = g(t);
  integral = simpson_step(g, 0.0, t, fa, fm, fb, t / 6.0 * (fa + 4.0 * fm + fb), 1e-8, 40);
  return flow(mode, x, t);
}

Vec2 PdmpModel::rk4_flow(int mode, Vec2 x, double t, const std::function<double(const Vec2&, int)>* rho,
                         double* integral) const {
  constexpr double kTol = 1e-9;
  const auto& F = fields_[static_cast<std::size_t>(mode)];
  struct Aug {
    double v[3];
  };
  auto deriv = [&](const Aug& a) {
    const Vec2 p{a.v[0], a.v[1]};
    const Vec2 d = F(p);
    return Aug{{d[0], dim_ == 2 ? d[1] : 0.0, rho ? (*rho)(p, mode) : 0.0}};
  };
  auto axpy = [](const Aug& a, double h, const Aug& k) {
    return Aug{{a.v[0] + h * k.v[0], a.v[1] + h * k.v[1], a.v[2] + h * k.v[2]}};
  };
  auto step = [&](const Aug& a, double h) {
    const Aug k1 = deriv(a);
    const Aug k2 = deriv(axpy(a, 0.5 * h, k1));
    const Aug k3 = deriv(axpy(a, 0.5 * h, k2));
    const Aug k4 = deriv(axpy(a, h, k3));
    Aug out;
    for (int c = 0; c < 3; ++c) out.v[c] = a.v[c] + h / 6.0 * (k1.v[c] + 2.0 * k2.v[c] + 2.0 * k3.v[c] + k4.v[c]);
    return out;
  };
  auto norm = [&](const Aug& a) { return dim_ == 1 ? std::abs(a.v[0]) : std::hypot(a.v[0], a.v[1]); };
  const double bound = state_bound_ * (1.0 + 1e-12) + 1e-15;

  Aug cur{{x[0], dim_ == 2 ? x[1] : 0.0, 0.0}};
  double remaining = t;
  double h = std::min(t, 0.05);
  while (remaining > 0.0) {
    const bool last = h >= remaining;
    const double hh = last ? remaining : h;
    const Aug full = step(cur, hh);
    const Aug mid = step(cur, 0.5 * hh);
    const Aug fine = step(mid, 0.5 * hh);
    double err = 0.0;
    for (int c = 0; c < 3; ++c) err = std::max(err, std::abs(fine.v[c] - full.v[c]) / 15.0);
    bool bad = err > kTol || norm(fine) > bound;
    if (dim_ == 1 && cur.v[0] != 0.0 && (fine.v[0] == 0.0 || (fine.v[0] > 0.0) != (cur.v[0] > 0.0))) bad = true;
    if (bad && hh > 1e-12) {
      h = 0.5 * hh;
      continue;
    }
    cur = fine;
    remaining = last ? 0.0 : remaining - hh;
    const double grow = err > 0.0 ? 0.9 * std::pow(kTol / err, 0.2) : 4.0;
    h = hh * std::clamp(grow, 0.2, 4.0);
  }
  if (integral) *integral = cur.v[2];
  return {cur.v[0], cur.v[1]};
}

int PdmpModel::draw_next_mode(int mode, RandomStream& rng) const {
  const double total = exit_rate(mode);
  const double target = rng.uniform() * total;
  double acc = 0.0;
  int last = mode;
  for (int j = 0; j < modes_; ++j) {
    if (j == mode || rate(mode, j) <= 0.0) continue;
    acc += rate(mode, j);
    last = j;
    if (target < acc) return j;
  }
  return last;
}

bool PdmpModel::contains(const State& s) const noexcept {
  if (s.mode < 0 || s.mode >= modes_) return false;
  const double n = dim_ == 1 ? std::abs(s.pos[0]) : std::hypot(s.pos[0], s.pos[1]);
  return std::isfinite(n) && n <= state_bound_ * (1.0 + 1e-12);
}

}  // namespace qsdsim
