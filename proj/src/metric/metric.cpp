#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "qsdsim/error.hpp"
#include "qsdsim/metric.hpp"

namespace qsdsim {

std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::absolute_1d: return "absolute-1d";
    case MetricKind::truncated: return "truncated";
    case MetricKind::pdmp_product: return "pdmp-product";
    case MetricKind::custom: return "custom";
  }
  return "custom";
}

BoundedMetric::BoundedMetric(MetricKind kind, double bound, Fn fn) : kind_(kind), bound_(bound), fn_(std::move(fn)) {
  require(std::isfinite(bound) && bound > 0.0, ErrorCode::invalid_parameter, "metric bound must be positive");
  require(static_cast<bool>(fn_), ErrorCode::invalid_parameter, "metric function is empty");
}

BoundedMetric absolute_metric(double diameter) {
  return BoundedMetric(MetricKind::absolute_1d, diameter,
                       [](const State& a, const State& b) { return std::abs(a.pos[0] - b.pos[0]); });
}

BoundedMetric euclidean_metric(double diameter) {
  return BoundedMetric(MetricKind::custom, diameter, [](const State& a, const State& b) {
    return std::hypot(a.pos[0] - b.pos[0], a.pos[1] - b.pos[1]);
  });
}

BoundedMetric truncate_metric(const BoundedMetric& base, double kappa) {
  require(std::isfinite(kappa) && kappa > 0.0, ErrorCode::invalid_parameter, "kappa must be positive");
  return BoundedMetric(MetricKind::truncated, 1.0,
                       [base, kappa](const State& a, const State& b) { return std::min(kappa * base(a, b), 1.0); });
}

BoundedMetric pdmp_metric(double radius) {
  require(std::isfinite(radius) && radius > 0.0, ErrorCode::invalid_parameter, "radius must be positive");
  return BoundedMetric(MetricKind::pdmp_product, 1.0, [radius](const State& a, const State& b) {
    if (a.mode != b.mode) return 1.0;
    const double dist = a.dim == 1 ? std::abs(a.pos[0] - b.pos[0]) : std::hypot(a.pos[0] - b.pos[0], a.pos[1] - b.pos[1]);
    return std::min(dist / (2.0 * radius), 1.0);
  });
}

BoundedMetric custom_metric(double bound, BoundedMetric::Fn fn) {
  return BoundedMetric(MetricKind::custom, bound, std::move(fn));
}

void TransportPlan::write_csv(std::ostream& out) const {
  out << "src_index,dst_index,mass,cost_contrib\n";
  char buf[96];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", e.src, e.dst, e.mass, e.cost);
    out << buf;
  }
}

}  // namespace qsdsim
