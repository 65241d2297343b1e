#include <cmath>
#include <cstdio>
#include <ostream>

#include "qsdsim/error.hpp"
#include "qsdsim/process.hpp"
#include "walk.hpp"

namespace qsdsim {

bool is_discrete(const AnyModel& model) noexcept { return std::holds_alternative<DiscreteModel>(model); }

void Trajectory::write_csv(std::ostream& out, std::span<const double> log_weights) const {
  out << "time,x,y,mode,log_weight\n";
  char buf[160];
  for (std::size_t k = 0; k < states.size(); ++k) {
    const State& s = states[k];
    const double lw = k < log_weights.size() ? log_weights[k] : 0.0;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%.17g\n", times[k], s.pos[0], s.pos[1], s.mode, lw);
    out << buf;
  }
}

Trajectory simulate_discrete(const DiscreteModel& model, double x0, std::size_t n, RandomStream rng) {
  require(model.space().contains(x0), ErrorCode::invalid_state, "start outside the state space");
  Trajectory traj;
  traj.times.reserve(n + 1);
  traj.states.reserve(n + 1);
  double x = x0;
  std::size_t redraws = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    traj.times.push_back(static_cast<double>(k));
    traj.states.push_back(State::scalar(x));
    if (k < n) x = model.sample_step(x, rng, redraws);
  }
  return traj;
}

Trajectory simulate_pdmp(const PdmpModel& model, const State& start, double horizon, RandomStream rng) {
  require(model.contains(start), ErrorCode::invalid_state, "start outside the invariant ball or mode range");
  require(horizon > 0.0, ErrorCode::invalid_parameter, "horizon must be positive");
  Trajectory traj;
  const double obs[] = {0.0, horizon};
  detail::walk_pdmp(
      model, nullptr, start, horizon, rng, obs,
      [&](std::size_t k, const State& s, double) {
        traj.times.push_back(obs[k]);
        traj.states.push_back(s);
      },
      &traj.segments);
  return traj;
}

std::vector<double> log_weights_discrete(const Trajectory& traj, const PenaltyField& penalty) {
  require(penalty.kind() == PenaltyKind::discrete_p, ErrorCode::invalid_penalty, "discrete weights need p");
  require(traj.segments.empty(), ErrorCode::invalid_penalty, "discrete weights need a discrete trajectory");
  std::vector<double> out(traj.states.size(), 0.0);
  for (std::size_t k = 1; k < traj.states.size(); ++k) out[k] = out[k - 1] + penalty.log_survival(traj.states[k - 1]);
  return out;
}

double weight_discrete(const Trajectory& traj, const PenaltyField& penalty) {
  const auto lw = log_weights_discrete(traj, penalty);
  return lw.empty() ? 1.0 : std::exp(lw.back());
}

double weight_continuous(const Trajectory& traj, const PenaltyField& penalty, const PdmpModel& model) {
  require(penalty.kind() == PenaltyKind::continuous_rho, ErrorCode::invalid_penalty, "continuous weights need rho");
  require(!traj.segments.empty(), ErrorCode::invalid_penalty, "continuous weights need a PDMP trajectory");
  double log_z = 0.0;
  for (const auto& seg : traj.segments) {
    Vec2 end;
    log_z += detail::segment_log_weight(model, &penalty, seg.mode, seg.start.pos, seg.t1 - seg.t0, end);
  }
  return std::exp(log_z);
}

}  // namespace qsdsim
