#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace qsdsim {

/// A point of the state space: a position in R^1 or R^2, optionally paired
/// with a discrete mode (PDMP states). Plain value type.
struct State {
  static constexpr int kNoMode = -1;

  std::array<double, 2> pos{0.0, 0.0};
  int dim = 1;
  int mode = kNoMode;

  static State scalar(double x) noexcept { return State{{x, 0.0}, 1, kNoMode}; }
  static State with_mode(double x, int mode) noexcept { return State{{x, 0.0}, 1, mode}; }
  static State planar(double x, double y, int mode = kNoMode) noexcept { return State{{x, y}, 2, mode}; }

  double x() const noexcept { return pos[0]; }
  bool has_mode() const noexcept { return mode != kNoMode; }

  friend bool operator==(const State&, const State&) = default;
};

/// Lexicographic order on (mode, position); used for stable sorting and
/// duplicate merging.
bool state_less(const State& a, const State& b) noexcept;

/// Weighted empirical measure. Immutable once built.
class WeightedEnsemble {
 public:
  WeightedEnsemble() = default;

  /// Weights are stored as given; they must be finite and nonnegative with a
  /// positive sum. `normalized()` reports whether they sum to 1 within 1e-12.
  WeightedEnsemble(std::vector<State> points, std::vector<double> weights);

  static WeightedEnsemble uniform(std::vector<State> points);
  static WeightedEnsemble dirac(const State& point);
  /// Self-normalized weights from log-weights (max-shifted before exp).
  static WeightedEnsemble from_log_weights(std::vector<State> points, std::span<const double> log_weights);
  static WeightedEnsemble from_scalars(std::span<const double> xs, std::span<const double> weights);

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const std::vector<State>& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const State& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  bool normalized() const noexcept { return normalized_; }
  double total_weight() const noexcept { return total_; }

  /// Copy with weights divided by their sum.
  WeightedEnsemble normalized_copy() const;

  /// (sum w)^2 / sum w^2.
  double effective_sample_size() const;

  double expectation(const std::function<double(const State&)>& f) const;

  /// Sorted by state_less with identical points merged by weight summation.
  WeightedEnsemble merged() const;

  bool all_scalar() const noexcept;

 private:
  std::vector<State> points_;
  std::vector<double> weights_;
  double total_ = 0.0;
  bool normalized_ = false;
};

/// Accepts |sum w - 1| <= 1e-9 and renormalizes; throws invalid-measure
/// otherwise.
WeightedEnsemble checked_probability(const WeightedEnsemble& mu, const char* what);

}  // namespace qsdsim
