#include <algorithm>
#include <cmath>
#include <map>

#include "qsdsim/discrete.hpp"
#include "qsdsim/error.hpp"

namespace qsdsim {

bool StateSpace::contains(double x) const noexcept {
  if (!std::isfinite(x)) return false;
  if (open_lo ? x <= lo : x < lo) return false;
  if (open_hi ? x >= hi : x > hi) return false;
  return std::find(excluded.begin(), excluded.end(), x) == excluded.end();
}

bool StateSpace::contains(const Rational& x) const {
  const Rational qlo = to_rational(lo), qhi = to_rational(hi);
  if (open_lo ? x <= qlo : x < qlo) return false;
  if (open_hi ? x >= qhi : x > qhi) return false;
  for (double e : excluded)
    if (x == to_rational(e)) return false;
  return true;
}

Branch Branch::affine_map(const Rational& slope, const Rational& intercept, const Rational& prob, double noise) {
  Branch b;
  b.noise = noise;
  b.prob = prob.get_d();
  b.lipschitz = std::abs(slope.get_d());
  b.affine = true;
  b.slope = slope.get_d();
  b.intercept = intercept.get_d();
  b.slope_q = slope;
  b.intercept_q = intercept;
  b.prob_q = prob;
  const double a = b.slope, c = b.intercept;
  b.map = [a, c](double x) {
    const double ax = a * x;
    return ax + c;
  };
  return b;
}

Branch Branch::general(std::function<double(double)> map, double lipschitz, double prob, double noise) {
  Branch b;
  b.noise = noise;
  b.prob = prob;
  b.lipschitz = lipschitz;
  b.map = std::move(map);
  b.prob_q = to_rational(prob);
  return b;
}

DiscreteModel::DiscreteModel(std::string name, std::vector<Branch> branches, StateSpace space)
    : name_(std::move(name)), branches_(std::move(branches)), space_(std::move(space)) {
  require(!branches_.empty(), ErrorCode::invalid_parameter, "finite kernel needs at least one branch");
  double total = 0.0;
  all_affine_ = true;
  Rational total_q = 0;
  bool exact_probs = true;
  for (const auto& b : branches_) {
    require(b.prob >= 0.0 && std::isfinite(b.prob), ErrorCode::invalid_parameter, "branch probability must be >= 0");
    require(static_cast<bool>(b.map), ErrorCode::invalid_parameter, "branch without a map");
    total += b.prob;
    cdf_.push_back(total);
    all_affine_ = all_affine_ && b.affine;
    total_q += b.prob_q;
  }
  exact_probs = total_q == 1;
  require(exact_probs || std::abs(total - 1.0) <= 1e-12, ErrorCode::invalid_parameter,
          "branch probabilities must sum to 1");
  cdf_.back() = 1.0;
}

DiscreteModel::DiscreteModel(std::string name, Sampler sampler, StateSpace space)
    : name_(std::move(name)), sampler_(std::move(sampler)), space_(std::move(space)) {
  require(static_cast<bool>(sampler_), ErrorCode::invalid_parameter, "model without sampler");
}

Rational DiscreteModel::step_exact(const Rational& x, std::size_t branch) const {
  const Branch& b = branches_.at(branch);
  if (!b.affine) throw Error(ErrorCode::requires_exact_arithmetic, "branch has no exact affine form");
  Rational r = b.slope_q * x + b.intercept_q;
  r.canonicalize();
  return r;
}

std::size_t DiscreteModel::draw_branch(RandomStream& rng) const {
  const double u = rng.uniform();
  std::size_t k = 0;
  for (std::size_t j = 0; j + 1 < cdf_.size(); ++j) k += (u >= cdf_[j]) ? 1 : 0;
  return k;
}

double DiscreteModel::sample_step(double x, RandomStream& rng, std::size_t& redraws) const {
  if (!finite()) return sampler_(x, rng);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double next = branches_[draw_branch(rng)].map(x);
    if (space_.contains(next)) return next;
    ++redraws;
  }
  throw Error(ErrorCode::invalid_state, "kernel keeps leaving the state space from x = " + std::to_string(x));
}

std::vector<std::pair<double, double>> DiscreteModel::lipschitz_law() const {
  std::map<double, double> law;
  for (const auto& b : branches_) law[b.lipschitz] += b.prob;
  return {law.begin(), law.end()};
}

}  // namespace qsdsim
