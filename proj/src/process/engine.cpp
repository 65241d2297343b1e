#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "qsdsim/error.hpp"
#include "qsdsim/kernels.hpp"
#include "qsdsim/parallel.hpp"
#include "qsdsim/process.hpp"
#include "walk.hpp"

namespace qsdsim {

std::string_view to_string(CouplingKind kind) noexcept {
  return kind == CouplingKind::synchronous ? "synchronous" : "independent-then-merge";
}

State Population::state(std::size_t obs, std::size_t i) const {
  State s;
  s.dim = dim;
  s.pos[0] = x[obs][i];
  if (dim == 2) s.pos[1] = y[obs][i];
  if (has_mode) s.mode = mode[obs][i];
  return s;
}

std::vector<State> Population::states(std::size_t obs) const {
  std::vector<State> out(particles);
  for (std::size_t i = 0; i < particles; ++i) out[i] = state(obs, i);
  return out;
}

WeightedEnsemble Population::conditional(std::size_t obs) const {
  return WeightedEnsemble::from_log_weights(states(obs), log_z[obs]);
}

std::size_t Population::index_of(double t) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] == t) return k;
  throw Error(ErrorCode::invalid_parameter, "time " + std::to_string(t) + " was not observed");
}

std::vector<State> replicate(const State& s, std::size_t n) { return std::vector<State>(n, s); }

namespace {

void check_times(std::span<const double> times) {
  require(!times.empty(), ErrorCode::invalid_parameter, "no observation times");
  for (std::size_t k = 0; k < times.size(); ++k) {
    require(times[k] >= 0.0 && std::isfinite(times[k]), ErrorCode::invalid_parameter, "times must be >= 0");
    if (k > 0) require(times[k] > times[k - 1], ErrorCode::invalid_parameter, "times must be increasing");
  }
}

Population allocate(std::span<const double> times, std::size_t n, int dim, bool has_mode) {
  Population pop;
  pop.times.assign(times.begin(), times.end());
  pop.particles = n;
  pop.dim = dim;
  pop.has_mode = has_mode;
  pop.x.assign(times.size(), std::vector<double>(n));
  if (dim == 2) pop.y.assign(times.size(), std::vector<double>(n));
  if (has_mode) pop.mode.assign(times.size(), std::vector<std::int32_t>(n));
  pop.log_z.assign(times.size(), std::vector<double>(n));
  return pop;
}

void propagate_discrete(const DiscreteModel& model, const PenaltyField& penalty, std::span<const State> starts,
                        StreamSpec streams, Population& pop, const EngineOptions& opts) {
  require(penalty.kind() == PenaltyKind::discrete_p, ErrorCode::invalid_penalty,
          "discrete-time models need a survival probability");
  std::vector<std::size_t> steps;
  for (double t : pop.times) {
    require(t == std::floor(t), ErrorCode::invalid_parameter, "discrete-time observations must be integers");
    steps.push_back(static_cast<std::size_t>(t));
  }
  for (const auto& s : starts) {
    require(s.dim == 1 && !s.has_mode(), ErrorCode::invalid_state, "discrete models take scalar states");
    require(model.space().contains(s.x()), ErrorCode::invalid_state,
            "start " + std::to_string(s.x()) + " outside the state space");
  }
  const std::size_t horizon = steps.back();
  const bool vectorized = model.all_affine();
  const auto& space = model.space();
  const bool check_space = space.open_lo || space.open_hi || !space.excluded.empty() || !vectorized;
  std::vector<double> slopes, intercepts;
  for (const auto& b : model.branches()) {
    slopes.push_back(b.slope);
    intercepts.push_back(b.intercept);
  }
  std::atomic<std::size_t> redraws{0};

  parallel_chunks(starts.size(), opts.chunk, opts.workers, [&](std::size_t begin, std::size_t end) {
    const std::size_t len = end - begin;
    std::vector<RandomStream> rng;
    rng.reserve(len);
    std::vector<double> x(len), lz(len, 0.0), u(len), prev;
    std::vector<std::int32_t> k(len);
    for (std::size_t i = 0; i < len; ++i) {
      rng.emplace_back(streams.seed, streams.base + begin + i);
      x[i] = starts[begin + i].x();
    }
    std::size_t local_redraws = 0;
    const auto& kt = kernels::active();
    std::size_t obs = 0;
    for (std::size_t s = 0;; ++s) {
      while (obs < steps.size() && steps[obs] == s) {
        std::copy(x.begin(), x.end(), pop.x[obs].begin() + static_cast<std::ptrdiff_t>(begin));
        std::copy(lz.begin(), lz.end(), pop.log_z[obs].begin() + static_cast<std::ptrdiff_t>(begin));
        ++obs;
      }
      if (s == horizon) break;
      if (penalty.has_linear_form()) {
        const auto [c0, c1] = penalty.linear_form();
        kt.subtract_linear(lz, x, c0, c1);
      } else {
        for (std::size_t i = 0; i < len; ++i) lz[i] += penalty.log_survival(State::scalar(x[i]));
      }
      if (vectorized) {
        for (std::size_t i = 0; i < len; ++i) u[i] = rng[i].uniform();
        if (check_space) prev = x;
        kt.select_outcomes(u, model.cdf(), k);
        kt.affine_gather(x, k, slopes, intercepts);
        if (check_space) {
          for (std::size_t i = 0; i < len; ++i) {
            if (!space.contains(x[i])) {
              ++local_redraws;
              x[i] = model.sample_step(prev[i], rng[i], local_redraws);
            }
          }
        }
      } else {
        for (std::size_t i = 0; i < len; ++i) x[i] = model.sample_step(x[i], rng[i], local_redraws);
      }
    }
    redraws += local_redraws;
  });
  pop.redraws = redraws.load();
}

void propagate_pdmp(const PdmpModel& model, const PenaltyField& penalty, std::span<const State> starts,
                    StreamSpec streams, Population& pop, const EngineOptions& opts) {
  require(penalty.kind() == PenaltyKind::continuous_rho, ErrorCode::invalid_penalty,
          "continuous-time models need a killing rate");
  for (const auto& s : starts)
    require(model.contains(s) && s.dim == model.dim(), ErrorCode::invalid_state,
            "start outside the invariant ball or mode range");
  const double horizon = pop.times.back();
  parallel_chunks(starts.size(), opts.chunk, opts.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RandomStream rng(streams.seed, streams.base + i);
      detail::walk_pdmp(
          model, &penalty, starts[i], horizon, rng, pop.times,
          [&](std::size_t k, const State& s, double lz) {
            pop.x[k][i] = s.pos[0];
            if (pop.dim == 2) pop.y[k][i] = s.pos[1];
            pop.mode[k][i] = s.mode;
            pop.log_z[k][i] = lz;
          },
          nullptr);
    }
  });
}

}  // namespace

Population propagate(const AnyModel& model, const PenaltyField& penalty, std::span<const State> starts,
                     StreamSpec streams, std::span<const double> times, const EngineOptions& opts) {
  check_times(times);
  require(!starts.empty(), ErrorCode::invalid_parameter, "no particles");
  if (const auto* dm = std::get_if<DiscreteModel>(&model)) {
    Population pop = allocate(times, starts.size(), 1, false);
    propagate_discrete(*dm, penalty, starts, streams, pop, opts);
    return pop;
  }
  const auto& pm = std::get<PdmpModel>(model);
  Population pop = allocate(times, starts.size(), pm.dim(), true);
  propagate_pdmp(pm, penalty, starts, streams, pop, opts);
  return pop;
}

CoupledModel couple_synchronous(const DiscreteModel& model) { return {CouplingKind::synchronous, model}; }

CoupledModel couple_pdmp_merge(const PdmpModel& model) { return {CouplingKind::independent_then_merge, model}; }

namespace {

constexpr std::uint64_t kSecondCopyOffset = std::uint64_t{1} << 40;

// Each copy integrates its flow from the start of its own holding segment, so
// the first copy reproduces walk_pdmp bit for bit.
struct MergeCopy {
  Vec2 anchor;
  double anchor_t = 0.0;
  double anchor_lz = 0.0;
  int mode = 0;
  double next_jump = 0.0;
};

void merge_walk(const PdmpModel& model, const PenaltyField& penalty, const State& x0, const State& y0,
                double horizon, RandomStream& rx, RandomStream& ry, std::span<const double> times,
                std::size_t i, CoupledPopulation& out) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto clock = [&](int mode, RandomStream& rng) {
    const double q = model.exit_rate(mode);
    return q > 0.0 ? rng.exponential(q) : kInf;
  };
  auto at = [&](const MergeCopy& c, double t, Vec2& p) {
    return c.anchor_lz + detail::segment_log_weight(model, &penalty, c.mode, c.anchor, t - c.anchor_t, p);
  };
  auto record = [&](Population& pop, std::size_t k, const MergeCopy& c, double t) {
    Vec2 p;
    const double lz = at(c, t, p);
    pop.x[k][i] = p[0];
    if (pop.dim == 2) pop.y[k][i] = p[1];
    pop.mode[k][i] = c.mode;
    pop.log_z[k][i] = lz;
  };
  // Moves the anchor to time t and switches mode.
  auto jump = [&](MergeCopy& c, double t, int mode) {
    Vec2 p;
    c.anchor_lz = at(c, t, p);
    c.anchor = p;
    c.anchor_t = t;
    c.mode = mode;
  };
  MergeCopy X{x0.pos, 0.0, 0.0, x0.mode, 0.0}, Y{y0.pos, 0.0, 0.0, y0.mode, 0.0};
  bool merged = X.mode == Y.mode;
  out.merge_time[i] = merged ? 0.0 : kInf;
  X.next_jump = clock(X.mode, rx);
  Y.next_jump = merged ? kInf : clock(Y.mode, ry);
  std::size_t obs = 0;
  for (;;) {
    const double event = merged ? X.next_jump : std::min(X.next_jump, Y.next_jump);
    const double end = std::min(event, horizon);
    while (obs < times.size() && times[obs] <= end) {
      record(out.first, obs, X, times[obs]);
      record(out.second, obs, Y, times[obs]);
      ++obs;
    }
    if (end >= horizon) break;
    if (merged) {
      const int m = model.draw_next_mode(X.mode, rx);
      jump(X, end, m);
      jump(Y, end, m);
      X.next_jump = end + clock(m, rx);
    } else if (X.next_jump <= Y.next_jump) {
      jump(X, end, model.draw_next_mode(X.mode, rx));
      X.next_jump = end + clock(X.mode, rx);
    } else {
      jump(Y, end, model.draw_next_mode(Y.mode, ry));
      Y.next_jump = end + clock(Y.mode, ry);
    }
    if (!merged && X.mode == Y.mode) {
      merged = true;
      out.merge_time[i] = end;
      // Y's pending segment now follows X's clock; re-anchor so both cut at X's jumps.
      jump(Y, end, Y.mode);
      Y.next_jump = kInf;
    }
  }
}

}  // namespace

CoupledPopulation simulate_coupled(const CoupledModel& coupled, const PenaltyField& penalty, const State& x,
                                   const State& y, std::size_t n, StreamSpec streams, std::span<const double> times,
                                   const EngineOptions& opts) {
  check_times(times);
  require(n >= 1, ErrorCode::invalid_parameter, "no particles");
  CoupledPopulation out;
  if (coupled.kind == CouplingKind::synchronous) {
    const auto xs = replicate(x, n), ys = replicate(y, n);
    out.first = propagate(coupled.model, penalty, xs, streams, times, opts);
    out.second = propagate(coupled.model, penalty, ys, streams, times, opts);
    return out;
  }
  const auto* pm = std::get_if<PdmpModel>(&coupled.model);
  require(pm != nullptr, ErrorCode::unsupported_model, "merge coupling needs a PDMP");
  require(penalty.kind() == PenaltyKind::continuous_rho, ErrorCode::invalid_penalty,
          "continuous-time models need a killing rate");
  require(pm->contains(x) && pm->contains(y), ErrorCode::invalid_state, "start outside the invariant ball");
  out.first = allocate(times, n, pm->dim(), true);
  out.second = allocate(times, n, pm->dim(), true);
  out.merge_time.assign(n, 0.0);
  const double horizon = times.back();
  parallel_chunks(n, opts.chunk, opts.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RandomStream rx(streams.seed, streams.base + i);
      RandomStream ry(streams.seed, streams.base + kSecondCopyOffset + i);
      merge_walk(*pm, penalty, x, y, horizon, rx, ry, times, i, out);
    }
  });
  return out;
}

}  // namespace qsdsim
