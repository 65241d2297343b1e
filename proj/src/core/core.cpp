#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "qsdsim/error.hpp"
#include "qsdsim/parallel.hpp"
#include "qsdsim/state.hpp"

namespace qsdsim {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::invalid_measure: return "invalid-measure";
    case ErrorCode::unsupported_metric: return "unsupported-metric";
    case ErrorCode::instance_too_large: return "instance-too-large";
    case ErrorCode::invalid_test_function: return "invalid-test-function";
    case ErrorCode::invalid_state: return "invalid-state";
    case ErrorCode::invalid_penalty: return "invalid-penalty";
    case ErrorCode::unsupported_model: return "unsupported-model";
    case ErrorCode::requires_exact_arithmetic: return "requires-exact-arithmetic";
    case ErrorCode::invalid_curve: return "invalid-curve";
    case ErrorCode::invalid_constants: return "invalid-constants";
    case ErrorCode::degenerate_constants: return "degenerate-constants";
    case ErrorCode::numerical_underflow: return "numerical-underflow";
    case ErrorCode::invalid_config: return "invalid-config";
  }
  return "unknown";
}

std::size_t default_workers() noexcept {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_chunks(std::size_t n, std::size_t grain, std::size_t workers,
                     const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  const std::size_t chunks = (n + grain - 1) / grain;
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c * grain, std::min(n, (c + 1) * grain));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        body(c * grain, std::min(n, (c + 1) * grain));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// State / WeightedEnsemble

bool state_less(const State& a, const State& b) noexcept {
  if (a.mode != b.mode) return a.mode < b.mode;
  if (a.pos[0] != b.pos[0]) return a.pos[0] < b.pos[0];
  return a.pos[1] < b.pos[1];
}

WeightedEnsemble::WeightedEnsemble(std::vector<State> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  require(points_.size() == weights_.size(), ErrorCode::invalid_measure, "points and weights differ in length");
  require(!points_.empty(), ErrorCode::invalid_measure, "empty support");
  double total = 0.0;
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::invalid_measure, "negative or non-finite weight");
    total += w;
  }
  require(total > 0.0, ErrorCode::invalid_measure, "weights sum to zero");
  total_ = total;
  normalized_ = std::abs(total - 1.0) <= 1e-12;
}

WeightedEnsemble WeightedEnsemble::uniform(std::vector<State> points) {
  const double w = points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size());
  std::vector<double> weights(points.size(), w);
  return WeightedEnsemble(std::move(points), std::move(weights));
}

WeightedEnsemble WeightedEnsemble::dirac(const State& point) { return WeightedEnsemble({point}, {1.0}); }

WeightedEnsemble WeightedEnsemble::from_log_weights(std::vector<State> points, std::span<const double> log_weights) {
  require(points.size() == log_weights.size(), ErrorCode::invalid_measure, "points and log-weights differ in length");
  require(!points.empty(), ErrorCode::invalid_measure, "empty support");
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  require(std::isfinite(m), ErrorCode::numerical_underflow, "all log-weights are -inf or non-finite");
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - m);
    total += w[i];
  }
  for (double& wi : w) wi /= total;
  return WeightedEnsemble(std::move(points), std::move(w));
}

WeightedEnsemble WeightedEnsemble::from_scalars(std::span<const double> xs, std::span<const double> weights) {
  std::vector<State> pts;
  pts.reserve(xs.size());
  for (double x : xs) pts.push_back(State::scalar(x));
  return WeightedEnsemble(std::move(pts), std::vector<double>(weights.begin(), weights.end()));
}

WeightedEnsemble WeightedEnsemble::normalized_copy() const {
  std::vector<double> w(weights_);
  for (double& wi : w) wi /= total_;
  return WeightedEnsemble(points_, std::move(w));
}

double WeightedEnsemble::effective_sample_size() const {
  double s = 0.0, s2 = 0.0;
  for (double w : weights_) {
    s += w;
    s2 += w * w;
  }
  return s * s / s2;
}

double WeightedEnsemble::expectation(const std::function<double(const State&)>& f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) acc += weights_[i] * f(points_[i]);
  return acc / total_;
}

WeightedEnsemble WeightedEnsemble::merged() const {
  std::vector<std::size_t> order(points_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return state_less(points_[a], points_[b]); });
  std::vector<State> pts;
  std::vector<double> w;
  pts.reserve(order.size());
  w.reserve(order.size());
  for (std::size_t idx : order) {
    if (!pts.empty() && pts.back() == points_[idx]) {
      w.back() += weights_[idx];
    } else {
      pts.push_back(points_[idx]);
      w.push_back(weights_[idx]);
    }
  }
  return WeightedEnsemble(std::move(pts), std::move(w));
}

bool WeightedEnsemble::all_scalar() const noexcept {
  return std::all_of(points_.begin(), points_.end(), [](const State& s) { return s.dim == 1 && !s.has_mode(); });
}

WeightedEnsemble checked_probability(const WeightedEnsemble& mu, const char* what) {
  require(!mu.empty(), ErrorCode::invalid_measure, std::string(what) + ": empty support");
  if (mu.normalized()) return mu;
  require(std::abs(mu.total_weight() - 1.0) <= 1e-9, ErrorCode::invalid_measure,
          std::string(what) + ": weights do not sum to 1");
  return mu.normalized_copy();
}

}  // namespace qsdsim
