#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "qsdsim/state.hpp"

namespace qsdsim {

enum class MetricKind { absolute_1d, truncated, pdmp_product, custom };

std::string_view to_string(MetricKind kind) noexcept;

/// A distance with a declared upper bound d̄.
class BoundedMetric {
 public:
  using Fn = std::function<double(const State&, const State&)>;

  BoundedMetric(MetricKind kind, double bound, Fn fn);

  double operator()(const State& a, const State& b) const { return fn_(a, b); }
  double bound() const noexcept { return bound_; }
  MetricKind kind() const noexcept { return kind_; }

 private:
  MetricKind kind_;
  double bound_;
  Fn fn_;
};

/// |x - y| on a real interval of diameter `diameter`.
BoundedMetric absolute_metric(double diameter);
/// Euclidean distance on R^2 restricted to a set of the given diameter, modes ignored.
BoundedMetric euclidean_metric(double diameter);
/// min(kappa * base, 1).
BoundedMetric truncate_metric(const BoundedMetric& base, double kappa);
/// 1 if modes differ, |x - y| / 2R otherwise.
BoundedMetric pdmp_metric(double radius);
BoundedMetric custom_metric(double bound, BoundedMetric::Fn fn);

struct TransportEntry {
  std::size_t src = 0;
  std::size_t dst = 0;
  double mass = 0.0;
  double cost = 0.0;  // mass * d(src, dst)
};

/// Optimal coupling between the merged supports of two measures. Indices
/// refer to `sources` / `targets`.
struct TransportPlan {
  WeightedEnsemble sources;
  WeightedEnsemble targets;
  std::vector<TransportEntry> entries;
  double cost = 0.0;

  void write_csv(std::ostream& out) const;
};

struct TransportResult {
  double distance = 0.0;
  TransportPlan plan;
};

inline constexpr std::size_t kDefaultTransportCap = 4096;

/// ∫ |F_mu - F_nu| for scalar measures (absolute-value cost only).
double w1_quantile(const WeightedEnsemble& mu, const WeightedEnsemble& nu);

/// Exact W1 by network simplex on the complete bipartite graph between the
/// merged supports. Throws instance-too-large when the merged supports hold
/// more than `cap` points in total.
TransportResult w1_discrete(const WeightedEnsemble& mu, const WeightedEnsemble& nu, const BoundedMetric& d,
                            std::size_t cap = kDefaultTransportCap);

/// Dispatches to w1_quantile for the absolute metric on scalars and to
/// w1_discrete otherwise.
double w1(const WeightedEnsemble& mu, const WeightedEnsemble& nu, const BoundedMetric& d,
          std::size_t cap = kDefaultTransportCap);

/// plan.cost - |mu(phi) - nu(phi)|. The values are phi on plan.sources and
/// plan.targets; phi must be 1-Lipschitz for `d` on the union of both
/// supports (checked, tolerance 1e-12) or invalid-test-function is thrown.
double kantorovich_gap(const TransportPlan& plan, std::span<const double> phi_sources,
                       std::span<const double> phi_targets, const BoundedMetric& d);

double kantorovich_gap(const TransportPlan& plan, const std::function<double(const State&)>& phi,
                       const BoundedMetric& d);

}  // namespace qsdsim
