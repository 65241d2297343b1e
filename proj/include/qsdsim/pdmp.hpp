#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "qsdsim/rng.hpp"
#include "qsdsim/state.hpp"

namespace qsdsim {

enum class FlowIntegrator { closed_form_linear, rk4 };

std::string_view to_string(FlowIntegrator integrator) noexcept;

using Vec2 = std::array<double, 2>;

/// F(x) = A x + b with A row-major. One-dimensional models use A[0], b[0].
struct LinearField {
  std::array<double, 4> A{};
  Vec2 b{};
};

/// exp(A t) for a 2x2 matrix (row-major), closed form.
std::array<double, 4> expm2(const std::array<double, 4>& A, double t);

/// Switched ODE driven by a finite continuous-time Markov chain on modes.
class PdmpModel {
 public:
  using Field = std::function<Vec2(const Vec2&)>;

  /// Closed-form linear flows.
  PdmpModel(std::string name, int dim, std::vector<double> rates, std::vector<LinearField> fields, double radius);
  /// Generic fields integrated by adaptive RK4. `state_bound` is the
  /// sup-norm bound of the invariant set; steps that would leave it, or
  /// change the sign of a 1-D state, are halved.
  PdmpModel(std::string name, int dim, std::vector<double> rates, std::vector<Field> fields, double radius,
            double state_bound);

  const std::string& name() const noexcept { return name_; }
  int dim() const noexcept { return dim_; }
  int modes() const noexcept { return modes_; }
  FlowIntegrator integrator() const noexcept { return integrator_; }
  double radius() const noexcept { return radius_; }
  double state_bound() const noexcept { return state_bound_; }
  double rate(int i, int j) const { return rates_[static_cast<std::size_t>(i * modes_ + j)]; }
  double exit_rate(int i) const { return -rate(i, i); }
  const std::vector<double>& rate_matrix() const noexcept { return rates_; }
  const std::vector<LinearField>& linear_fields() const noexcept { return linear_; }

  Vec2 field(int mode, const Vec2& x) const;
  /// Position after following mode `mode` for time t from x.
  Vec2 flow(int mode, const Vec2& x, double t) const;
  /// Flow plus the integral of `rho` along the path (absolute tolerance
  /// 1e-8): adaptive Simpson on the exact flow for linear fields, the
  /// augmented RK4 system otherwise.
  Vec2 flow_integrate(int mode, const Vec2& x, double t, const std::function<double(const Vec2&, int)>& rho,
                      double& integral) const;

  /// Competing-risks selection of the next mode by normalized rates.
  int draw_next_mode(int mode, RandomStream& rng) const;

  bool contains(const State& s) const noexcept;

 private:
  void check_rates() const;
  Vec2 rk4_flow(int mode, Vec2 x, double t, const std::function<double(const Vec2&, int)>* rho,
                double* integral) const;

  std::string name_;
  int dim_ = 1;
  int modes_ = 0;
  std::vector<double> rates_;
  FlowIntegrator integrator_ = FlowIntegrator::closed_form_linear;
  std::vector<LinearField> linear_;
  std::vector<Vec2> equilibria_;
  std::vector<Field> fields_;
  double radius_ = 1.0;
  double state_bound_ = 1.0;
};

}  // namespace qsdsim
