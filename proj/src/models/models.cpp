#include <cmath>
#include <numbers>

#include "qsdsim/error.hpp"
#include "qsdsim/models.hpp"

namespace qsdsim {

namespace {

std::vector<Branch> bernoulli_branches() {
  const Rational half = make_rational(1, 2);
  return {Branch::affine_map(half, Rational(-1), half, -1.0), Branch::affine_map(half, Rational(1), half, 1.0)};
}

}  // namespace

DiscreteModel bernoulli_convolution() {
  return DiscreteModel("bernoulli-convolution", bernoulli_branches(), StateSpace::closed(-2.0, 2.0));
}

DiscreteModel bernoulli_punctured() {
  return DiscreteModel("bernoulli-punctured", bernoulli_branches(), StateSpace::open(-2.0, 2.0, {0.0}));
}

DiscreteModel iterated_functions(const std::vector<IteratedMap>& maps, StateSpace space) {
  std::vector<Branch> branches;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const auto& m = maps[k];
    require(m.lipschitz >= 0.0 && m.lipschitz <= 1.0, ErrorCode::invalid_parameter,
            "iterated functions must be 1-Lipschitz (got " + std::to_string(m.lipschitz) + ")");
    if (m.affine) {
      Branch b = Branch::affine_map(m.affine->first, m.affine->second, to_rational(m.prob), static_cast<double>(k));
      b.prob = m.prob;
      branches.push_back(std::move(b));
    } else {
      branches.push_back(Branch::general(m.map, m.lipschitz, m.prob, static_cast<double>(k)));
    }
  }
  return DiscreteModel("iterated-functions", std::move(branches), std::move(space));
}

DiscreteModel identity_half_mixture(double q) {
  require(q >= 0.0 && q <= 1.0, ErrorCode::invalid_parameter, "q must lie in [0, 1]");
  std::vector<IteratedMap> maps;
  maps.push_back({[](double x) { return x; }, 1.0, q, std::make_pair(Rational(1), Rational(0))});
  maps.push_back({[](double x) { return 0.5 * x; }, 0.5, 1.0 - q, std::make_pair(make_rational(1, 2), Rational(0))});
  return iterated_functions(maps);
}

PenaltyField penalty_demo(double c0, double c1) {
  return PenaltyField::linear("demo-lipschitz", PenaltyKind::discrete_p, c0 + 0.5 * c1, 0.25 * c1, -2.0, 2.0);
}

PenaltyField penalty_affine_oscillation(double osc) {
  require(osc >= 0.0, ErrorCode::invalid_parameter, "oscillation must be >= 0");
  return PenaltyField::linear("affine-oscillation", PenaltyKind::discrete_p, 0.5 * osc, 0.25 * osc, -2.0, 2.0);
}

PenaltyField penalty_counterexample_abs() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  PenaltyField::Info info{"counterexample-abs", PenaltyKind::discrete_p, inf, inf, 0.0, 1.0, false};
  PenaltyField field(std::move(info), [](const State& s) { return 0.5 * std::abs(s.x()); });
  return field.with_exact([](const Rational& x) { return Rational(abs(x) / 2); }, false);
}

PenaltyField penalty_counterexample_rational() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  PenaltyField::Info info{"counterexample-rational", PenaltyKind::discrete_p, inf, std::log(2.0), 0.5, 1.0, false};
  PenaltyField field(std::move(info), [](const State&) -> double {
    throw Error(ErrorCode::requires_exact_arithmetic,
                "the rational-indicator penalty is only defined on exact rational states");
  });
  return field.with_exact([](const Rational& x) { return x >= 0 ? make_rational(1, 2) : Rational(1); }, true);
}

std::vector<double> uniform_two_mode_rates(double k) {
  require(k > 0.0, ErrorCode::invalid_parameter, "switching rate must be positive");
  return {-k, k, k, -k};
}

PdmpModel switched_linear(const std::array<double, 4>& A, const Vec2& a, std::vector<double> rates,
                          std::optional<double> radius) {
  const double tr = A[0] + A[3], det = A[0] * A[3] - A[1] * A[2];
  require(tr < 0.0 && det > 0.0, ErrorCode::invalid_parameter,
          "eigenvalues of A must have negative real parts (trace < 0, det > 0)");
  const Vec2 Aa{A[0] * a[0] + A[1] * a[1], A[2] * a[0] + A[3] * a[1]};
  // <A x, x> <= -lambda |x|^2 with lambda = -top eigenvalue of (A + A^T) / 2.
  const double s11 = A[0], s22 = A[3], s12 = 0.5 * (A[1] + A[2]);
  const double top = 0.5 * (s11 + s22) + std::sqrt(0.25 * (s11 - s22) * (s11 - s22) + s12 * s12);
  const double lambda = -top;
  double R = 0.0;
  if (radius) {
    R = *radius;
  } else {
    require(lambda > 0.0, ErrorCode::invalid_parameter,
            "no invariant ball: the symmetric part of A is not negative definite");
    R = std::max(1.0, 1.25 * std::hypot(Aa[0], Aa[1]) / lambda);
  }
  require(R > 0.0, ErrorCode::invalid_parameter, "radius must be positive");
  for (int k = 0; k < 720; ++k) {
    const double ang = 2.0 * std::numbers::pi * k / 720.0;
    const Vec2 x{R * std::cos(ang), R * std::sin(ang)};
    const double ax = (A[0] * x[0] + A[1] * x[1]) * x[0] + (A[2] * x[0] + A[3] * x[1]) * x[1];
    const double shift = Aa[0] * x[0] + Aa[1] * x[1];
    require(ax < 0.0 && ax - shift < 0.0, ErrorCode::invalid_parameter,
            "fields point outward somewhere on the sphere of radius " + std::to_string(R));
  }
  LinearField f1{A, {0.0, 0.0}};
  LinearField f2{A, {-Aa[0], -Aa[1]}};
  return PdmpModel("switched-linear", 2, std::move(rates), std::vector<LinearField>{f1, f2}, R);
}

PenaltyField penalty_switched_demo(double radius) {
  require(radius > 0.0, ErrorCode::invalid_parameter, "radius must be positive");
  // Same mode: |drho| <= 0.1 |dx| / R = 0.2 d; across modes d = 1 and |drho| <= 0.45.
  PenaltyField::Info info{"switched-demo", PenaltyKind::continuous_rho, 0.45, 0.45, 0.0, 0.45, true};
  return PenaltyField(std::move(info), [radius](const State& s) {
    return 0.25 * s.mode + 0.1 * (1.0 + s.pos[0] / radius);
  });
}

double monotonicity_rate(const PdmpModel& model, std::size_t samples, std::uint64_t seed) {
  RandomStream rng(seed, kAuxiliaryStreamBase + 17);
  const double R = model.state_bound();
  auto draw = [&] {
    for (;;) {
      Vec2 p{R * (2.0 * rng.uniform() - 1.0), model.dim() == 2 ? R * (2.0 * rng.uniform() - 1.0) : 0.0};
      if (std::hypot(p[0], p[1]) <= R) return p;
    }
  };
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < samples; ++k) {
    const Vec2 x = draw(), y = draw();
    const double dx = x[0] - y[0], dy = x[1] - y[1];
    const double n2 = dx * dx + dy * dy;
    if (n2 == 0.0) continue;
    for (int m = 0; m < model.modes(); ++m) {
      const Vec2 fx = model.field(m, x), fy = model.field(m, y);
      worst = std::max(worst, ((fx[0] - fy[0]) * dx + (fx[1] - fy[1]) * dy) / n2);
    }
  }
  return -worst;
}

BistableSystem bistable_pdmp(double p_plus, double p_minus, double r) {
  require(p_plus > 0.0 && p_minus < 0.0, ErrorCode::invalid_parameter, "need p_plus > 0 > p_minus");
  require(r >= 0.0, ErrorCode::invalid_parameter, "killing rate must be >= 0");
  const double bound = std::sqrt(p_plus);
  std::vector<PdmpModel::Field> fields{
      [p_minus](const Vec2& x) { return Vec2{p_minus * x[0] - x[0] * x[0] * x[0], 0.0}; },
      [p_plus](const Vec2& x) { return Vec2{p_plus * x[0] - x[0] * x[0] * x[0], 0.0}; }};
  PdmpModel model("bistable", 1, uniform_two_mode_rates(1.0), std::move(fields), 2.0 * bound, bound);
  return {std::move(model), PenaltyField::mode_rates("bistable-mode", {0.0, r})};
}

std::vector<ModelCatalogEntry> model_catalog() {
  std::vector<ModelCatalogEntry> out;
  out.push_back({"bernoulli", "Bernoulli convolution with the Lipschitz demo penalty", bernoulli_convolution(),
                 penalty_demo(), absolute_metric(4.0)});
  out.push_back({"bernoulli-constant", "Bernoulli convolution with constant survival 0.8", bernoulli_convolution(),
                 PenaltyField::constant_survival(0.8), absolute_metric(4.0)});
  out.push_back({"counterexample-abs", "Bernoulli kernel on (-2,2)\\{0} with p(x) = |x|/2", bernoulli_punctured(),
                 penalty_counterexample_abs(), absolute_metric(4.0)});
  out.push_back({"counterexample-rational", "Bernoulli kernel with the rational-indicator penalty",
                 bernoulli_convolution(), penalty_counterexample_rational(), absolute_metric(4.0)});
  out.push_back({"irf-mixture", "identity / half-map mixture with q = 0.1 and osc(rho) = 1",
                 identity_half_mixture(0.1), penalty_affine_oscillation(1.0), absolute_metric(4.0)});
  const auto linear = switched_linear({-1.0, 1.0, 0.0, -2.0}, {1.0, 0.0}, uniform_two_mode_rates(1.0));
  const double R = linear.radius();
  out.push_back({"switched-linear", "planar switched system F1 = Ax, F2 = A(x - a)", linear,
                 penalty_switched_demo(R), pdmp_metric(R)});
  auto bistable = bistable_pdmp(2.0, -1.0, 0.0);
  const double Rb = bistable.model.radius();
  out.push_back({"bistable", "bistable switched ODE with p+ = 2, p- = -1, r = 0", std::move(bistable.model),
                 std::move(bistable.penalty), pdmp_metric(Rb)});
  return out;
}

ModelCatalogEntry catalog_entry(const std::string& name) {
  for (auto& e : model_catalog())
    if (e.name == name) return e;
  throw Error(ErrorCode::invalid_config, "unknown catalog model '" + name + "'");
}

}  // namespace qsdsim
