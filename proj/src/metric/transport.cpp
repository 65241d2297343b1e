#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qsdsim/error.hpp"
#include "qsdsim/metric.hpp"

namespace qsdsim {
namespace {

// Primal network simplex for the balanced transportation problem
//   min sum c_ij f_ij  s.t.  sum_j f_ij = a_i,  sum_i f_ij = b_j,  f >= 0.
// Nodes 0..n-1 are sources, n..n+m-1 sinks, n+m an artificial root joined to
// every node by a big-M arc. The spanning tree is kept as a flat arc list and
// rebuilt from the root after every pivot; leaving arcs follow the strongly
// feasible rule so degenerate pivots cannot cycle.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand, std::vector<double> cost)
      : n_(supply.size()), m_(demand.size()), arcs_(n_ * m_), root_(n_ + m_), cost_(std::move(cost)) {
    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, c);
    big_m_ = (max_cost + 1.0) * static_cast<double>(n_ + m_ + 1);
    eps_ = 1e-12 * (max_cost + 1.0);

    tree_arc_.resize(n_ + m_);
    tree_flow_.resize(n_ + m_);
    for (std::size_t i = 0; i < n_; ++i) {
      tree_arc_[i] = arcs_ + i;
      tree_flow_[i] = supply[i];
    }
    for (std::size_t j = 0; j < m_; ++j) {
      tree_arc_[n_ + j] = arcs_ + n_ + j;
      tree_flow_[n_ + j] = demand[j];
    }
    const std::size_t nodes = n_ + m_ + 1;
    parent_.resize(nodes);
    pred_slot_.resize(nodes);
    up_.resize(nodes);
    depth_.resize(nodes);
    pot_.resize(nodes);
    adj_start_.resize(nodes + 1);
    adj_.resize(2 * (n_ + m_));
    queue_.resize(nodes);
    block_ = std::max<std::size_t>(static_cast<std::size_t>(std::sqrt(static_cast<double>(arcs_))), 16);
    rebuild();
  }

  void solve() {
    for (;;) {
      const std::size_t e = find_entering();
      if (e == kNone) break;
      pivot(e);
    }
  }

  /// Real arcs with positive flow as (source, sink, mass).
  std::vector<TransportEntry> flows() const {
    std::vector<TransportEntry> out;
    for (std::size_t s = 0; s < tree_arc_.size(); ++s) {
      const std::size_t a = tree_arc_[s];
      if (a < arcs_) {
        if (tree_flow_[s] > 0.0) out.push_back({a / m_, a % m_, tree_flow_[s], 0.0});
      } else if (tree_flow_[s] > 1e-9) {
        throw std::logic_error("transport simplex ended with flow on an artificial arc");
      }
    }
    return out;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t tail(std::size_t a) const noexcept {
    if (a < arcs_) return a / m_;
    const std::size_t k = a - arcs_;
    return k < n_ ? k : root_;
  }
  std::size_t head(std::size_t a) const noexcept {
    if (a < arcs_) return n_ + a % m_;
    const std::size_t k = a - arcs_;
    return k < n_ ? root_ : k;
  }
  double arc_cost(std::size_t a) const noexcept { return a < arcs_ ? cost_[a] : big_m_; }

  void rebuild() {
    std::fill(adj_start_.begin(), adj_start_.end(), 0);
    for (std::size_t a : tree_arc_) {
      ++adj_start_[tail(a) + 1];
      ++adj_start_[head(a) + 1];
    }
    for (std::size_t v = 1; v < adj_start_.size(); ++v) adj_start_[v] += adj_start_[v - 1];
    std::vector<std::size_t>& fill = scratch_;
    fill.assign(adj_start_.begin(), adj_start_.end() - 1);
    for (std::size_t s = 0; s < tree_arc_.size(); ++s) {
      adj_[fill[tail(tree_arc_[s])]++] = s;
      adj_[fill[head(tree_arc_[s])]++] = s;
    }
    parent_[root_] = kNone;
    depth_[root_] = 0;
    pot_[root_] = 0.0;
    std::size_t qh = 0, qt = 0;
    queue_[qt++] = root_;
    while (qh < qt) {
      const std::size_t u = queue_[qh++];
      for (std::size_t k = adj_start_[u]; k < adj_start_[u + 1]; ++k) {
        const std::size_t s = adj_[k];
        if (s == pred_slot_[u] && u != root_) continue;
        const std::size_t a = tree_arc_[s];
        const std::size_t w = tail(a) == u ? head(a) : tail(a);
        parent_[w] = u;
        pred_slot_[w] = s;
        up_[w] = tail(a) == w;
        depth_[w] = depth_[u] + 1;
        // reduced cost c + pot[tail] - pot[head] vanishes on tree arcs
        pot_[w] = up_[w] ? pot_[u] - arc_cost(a) : pot_[u] + arc_cost(a);
        queue_[qt++] = w;
      }
    }
  }

  std::size_t find_entering() {
    double best = -eps_;
    std::size_t best_arc = kNone;
    std::size_t seen = 0;
    std::size_t i = next_ / m_, j = next_ % m_;
    for (std::size_t k = 0; k < arcs_; ++k) {
      const std::size_t a = i * m_ + j;
      const double rc = cost_[a] + pot_[i] - pot_[n_ + j];
      if (rc < best) {
        best = rc;
        best_arc = a;
      }
      if (++j == m_) {
        j = 0;
        if (++i == n_) i = 0;
      }
      if (++seen == block_) {
        if (best_arc != kNone) break;
        seen = 0;
      }
    }
    next_ = i * m_ + j;
    return best_arc;
  }

  void pivot(std::size_t entering) {
    const std::size_t u = tail(entering), v = head(entering);
    std::size_t a = u, b = v;
    while (a != b) {
      if (depth_[a] >= depth_[b])
        a = parent_[a];
      else
        b = parent_[b];
    }
    const std::size_t join = a;

    // Cycle in flow direction: join -> ... -> u -> v -> ... -> join.
    double delta = std::numeric_limits<double>::infinity();
    std::size_t leave_node = kNone;
    for (std::size_t w = u; w != join; w = parent_[w]) {
      if (up_[w] && tree_flow_[pred_slot_[w]] < delta) {
        delta = tree_flow_[pred_slot_[w]];
        leave_node = w;
      }
    }
    for (std::size_t w = v; w != join; w = parent_[w]) {
      if (!up_[w] && tree_flow_[pred_slot_[w]] <= delta) {
        delta = tree_flow_[pred_slot_[w]];
        leave_node = w;
      }
    }
    if (leave_node == kNone) throw std::logic_error("transport simplex found an unbounded cycle");
    delta = std::max(delta, 0.0);
    for (std::size_t w = u; w != join; w = parent_[w]) tree_flow_[pred_slot_[w]] += up_[w] ? -delta : delta;
    for (std::size_t w = v; w != join; w = parent_[w]) tree_flow_[pred_slot_[w]] += up_[w] ? delta : -delta;
    const std::size_t slot = pred_slot_[leave_node];
    tree_arc_[slot] = entering;
    tree_flow_[slot] = delta;
    for (std::size_t w = u; w != join; w = parent_[w]) tree_flow_[pred_slot_[w]] = std::max(tree_flow_[pred_slot_[w]], 0.0);
    for (std::size_t w = v; w != join; w = parent_[w]) tree_flow_[pred_slot_[w]] = std::max(tree_flow_[pred_slot_[w]], 0.0);
    rebuild();
  }

  std::size_t n_, m_, arcs_, root_;
  std::vector<double> cost_;
  double big_m_ = 0.0;
  double eps_ = 0.0;
  std::size_t block_ = 16;
  std::size_t next_ = 0;

  std::vector<std::size_t> tree_arc_;
  std::vector<double> tree_flow_;
  std::vector<std::size_t> parent_, pred_slot_, depth_;
  std::vector<char> up_;
  std::vector<double> pot_;
  std::vector<std::size_t> adj_start_, adj_, queue_, scratch_;
};

}  // namespace

double w1_quantile(const WeightedEnsemble& mu_in, const WeightedEnsemble& nu_in) {
  const WeightedEnsemble mu = checked_probability(mu_in, "w1_quantile");
  const WeightedEnsemble nu = checked_probability(nu_in, "w1_quantile");
  require(mu.all_scalar() && nu.all_scalar(), ErrorCode::unsupported_metric,
          "quantile formula needs scalar states and the absolute-value metric");
  std::vector<std::pair<double, double>> events;
  events.reserve(mu.size() + nu.size());
  const double mt = mu.total_weight(), nt = nu.total_weight();
  for (std::size_t i = 0; i < mu.size(); ++i) events.emplace_back(mu.point(i).x(), mu.weight(i) / mt);
  for (std::size_t i = 0; i < nu.size(); ++i) events.emplace_back(nu.point(i).x(), -nu.weight(i) / nt);
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double cdf_gap = 0.0, total = 0.0;
  for (std::size_t k = 0; k < events.size();) {
    const double x = events[k].first;
    while (k < events.size() && events[k].first == x) cdf_gap += events[k++].second;
    if (k < events.size()) total += std::abs(cdf_gap) * (events[k].first - x);
  }
  return total;
}

TransportResult w1_discrete(const WeightedEnsemble& mu_in, const WeightedEnsemble& nu_in, const BoundedMetric& d,
                            std::size_t cap) {
  require(!mu_in.empty() && !nu_in.empty(), ErrorCode::invalid_measure, "empty support");
  const WeightedEnsemble mu = checked_probability(mu_in, "w1_discrete").merged().normalized_copy();
  const WeightedEnsemble nu = checked_probability(nu_in, "w1_discrete").merged().normalized_copy();
  require(mu.size() + nu.size() <= cap, ErrorCode::instance_too_large,
          "transport instance has " + std::to_string(mu.size() + nu.size()) + " points, cap is " + std::to_string(cap));
  const std::size_t n = mu.size(), m = nu.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = d(mu.point(i), nu.point(j));

  TransportResult result;
  std::vector<TransportEntry> entries;
  if (n == 1 || m == 1) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) entries.push_back({i, j, mu.weight(i) * nu.weight(j), 0.0});
  } else {
    TransportSimplex simplex(mu.weights(), nu.weights(), cost);
    simplex.solve();
    entries = simplex.flows();
  }
  double total = 0.0;
  for (auto& e : entries) {
    e.cost = e.mass * cost[e.src * m + e.dst];
    total += e.cost;
  }
  result.distance = total;
  result.plan = TransportPlan{mu, nu, std::move(entries), total};
  return result;
}

double w1(const WeightedEnsemble& mu, const WeightedEnsemble& nu, const BoundedMetric& d, std::size_t cap) {
  if (d.kind() == MetricKind::absolute_1d) return w1_quantile(mu, nu);
  return w1_discrete(mu, nu, d, cap).distance;
}

double kantorovich_gap(const TransportPlan& plan, std::span<const double> phi_sources,
                       std::span<const double> phi_targets, const BoundedMetric& d) {
  const auto& xs = plan.sources.points();
  const auto& ys = plan.targets.points();
  require(phi_sources.size() == xs.size() && phi_targets.size() == ys.size(), ErrorCode::invalid_test_function,
          "test function values do not match the plan supports");
  constexpr double kTol = 1e-12;
  auto check = [&](const State& a, const State& b, double fa, double fb) {
    if (std::abs(fa - fb) > d(a, b) + kTol)
      throw Error(ErrorCode::invalid_test_function, "test function is not 1-Lipschitz on the support");
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = i + 1; k < xs.size(); ++k) check(xs[i], xs[k], phi_sources[i], phi_sources[k]);
    for (std::size_t j = 0; j < ys.size(); ++j) check(xs[i], ys[j], phi_sources[i], phi_targets[j]);
  }
  for (std::size_t j = 0; j < ys.size(); ++j)
    for (std::size_t k = j + 1; k < ys.size(); ++k) check(ys[j], ys[k], phi_targets[j], phi_targets[k]);

  double mu_phi = 0.0, nu_phi = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mu_phi += plan.sources.weight(i) * phi_sources[i];
  for (std::size_t j = 0; j < ys.size(); ++j) nu_phi += plan.targets.weight(j) * phi_targets[j];
  return plan.cost - std::abs(mu_phi - nu_phi);
}

double kantorovich_gap(const TransportPlan& plan, const std::function<double(const State&)>& phi,
                       const BoundedMetric& d) {
  std::vector<double> fs, ft;
  for (const auto& p : plan.sources.points()) fs.push_back(phi(p));
  for (const auto& p : plan.targets.points()) ft.push_back(phi(p));
  return kantorovich_gap(plan, fs, ft, d);
}

}  // namespace qsdsim
