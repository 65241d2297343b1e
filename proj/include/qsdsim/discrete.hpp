#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qsdsim/rational.hpp"
#include "qsdsim/rng.hpp"

namespace qsdsim {

/// A real interval with optional open ends and excluded points.
struct StateSpace {
  double lo = -2.0;
  double hi = 2.0;
  bool open_lo = false;
  bool open_hi = false;
  std::vector<double> excluded;

  static StateSpace closed(double lo, double hi) { return {lo, hi, false, false, {}}; }
  static StateSpace open(double lo, double hi, std::vector<double> excluded = {}) {
    return {lo, hi, true, true, std::move(excluded)};
  }

  bool contains(double x) const noexcept;
  bool contains(const Rational& x) const;
  double diameter() const noexcept { return hi - lo; }
};

/// One outcome of a finite-noise kernel: X_{n+1} = map(X_n) with
/// probability `prob`. Affine branches also carry exact rational
/// coefficients, which enables the vectorized engine and exact enumeration.
struct Branch {
  double noise = 0.0;
  double prob = 0.0;
  double lipschitz = 1.0;
  std::function<double(double)> map;

  bool affine = false;
  double slope = 0.0;
  double intercept = 0.0;
  Rational slope_q;
  Rational intercept_q;
  Rational prob_q;

  static Branch affine_map(const Rational& slope, const Rational& intercept, const Rational& prob, double noise);
  static Branch general(std::function<double(double)> map, double lipschitz, double prob, double noise);
};

/// Discrete-time kernel on a real interval: either a finite list of
/// branches or a sampler for non-finite noise.
class DiscreteModel {
 public:
  using Sampler = std::function<double(double x, RandomStream& rng)>;

  DiscreteModel(std::string name, std::vector<Branch> branches, StateSpace space);
  DiscreteModel(std::string name, Sampler sampler, StateSpace space);

  const std::string& name() const noexcept { return name_; }
  const StateSpace& space() const noexcept { return space_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  bool finite() const noexcept { return !branches_.empty(); }
  bool all_affine() const noexcept { return all_affine_; }
  /// Cumulative branch probabilities; the last entry is 1.
  const std::vector<double>& cdf() const noexcept { return cdf_; }

  double step(double x, std::size_t branch) const { return branches_[branch].map(x); }
  Rational step_exact(const Rational& x, std::size_t branch) const;
  std::size_t draw_branch(RandomStream& rng) const;

  /// One random step. Finite models redraw the branch when the image falls
  /// outside the state space (e.g. an excluded point); `redraws` counts them.
  double sample_step(double x, RandomStream& rng, std::size_t& redraws) const;

  /// Law of the Lipschitz factor l_theta as (value, probability) pairs with
  /// equal values merged.
  std::vector<std::pair<double, double>> lipschitz_law() const;

 private:
  std::string name_;
  std::vector<Branch> branches_;
  std::vector<double> cdf_;
  Sampler sampler_;
  StateSpace space_;
  bool all_affine_ = false;
};

}  // namespace qsdsim
