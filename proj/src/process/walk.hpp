#pragma once

// Single-path walkers shared by the trajectory API and the batch engine, so
// that particle i of a population and a trajectory simulated on stream i
// consume random numbers in the same order.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "qsdsim/error.hpp"
#include "qsdsim/process.hpp"

namespace qsdsim::detail {

inline double segment_log_weight(const PdmpModel& model, const PenaltyField* penalty, int mode, const Vec2& x,
                                 double dt, Vec2& end) {
  if (penalty == nullptr) {
    end = model.flow(mode, x, dt);
    return 0.0;
  }
  if (penalty->mode_only()) {
    end = model.flow(mode, x, dt);
    return -penalty->mode_rate(mode) * dt;
  }
  if (penalty->has_linear_form() && penalty->linear_form().second == 0.0) {
    end = model.flow(mode, x, dt);
    return -penalty->linear_form().first * dt;
  }
  const int dim = model.dim();
  auto rho = [&](const Vec2& p, int m) {
    State s;
    s.pos = p;
    s.dim = dim;
    s.mode = m;
    return (*penalty)(s);
  };
  double integral = 0.0;
  end = model.flow_integrate(mode, x, dt, rho, integral);
  return -integral;
}

/// Follows one PDMP path to `horizon`, calling visit(k, state, log_z) at each
/// of the increasing `times` (all within [0, horizon]).
template <class Visit>
void walk_pdmp(const PdmpModel& model, const PenaltyField* penalty, const State& start, double horizon,
               RandomStream& rng, std::span<const double> times, Visit&& visit, std::vector<Segment>* segments) {
  Vec2 x = start.pos;
  int mode = start.mode;
  double t = 0.0, log_z = 0.0;
  std::size_t next_obs = 0;
  const int dim = model.dim();
  auto make_state = [&](const Vec2& p, int m) {
    State s;
    s.pos = p;
    s.dim = dim;
    s.mode = m;
    return s;
  };
  for (;;) {
    const double q = model.exit_rate(mode);
    const double tau = q > 0.0 ? rng.exponential(q) : std::numeric_limits<double>::infinity();
    const double end = std::min(t + tau, horizon);
    if (segments) segments->push_back({mode, t, end, make_state(x, mode)});
    while (next_obs < times.size() && times[next_obs] <= end) {
      Vec2 at;
      const double lw = segment_log_weight(model, penalty, mode, x, times[next_obs] - t, at);
      visit(next_obs, make_state(at, mode), log_z + lw);
      ++next_obs;
    }
    Vec2 after;
    log_z += segment_log_weight(model, penalty, mode, x, end - t, after);
    x = after;
    t = end;
    if (t >= horizon) break;
    mode = model.draw_next_mode(mode, rng);
  }
}

}  // namespace qsdsim::detail
