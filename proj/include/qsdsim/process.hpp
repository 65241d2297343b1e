#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "qsdsim/discrete.hpp"
#include "qsdsim/pdmp.hpp"
#include "qsdsim/penalty.hpp"
#include "qsdsim/rational.hpp"
#include "qsdsim/state.hpp"

namespace qsdsim {

using AnyModel = std::variant<DiscreteModel, PdmpModel>;

bool is_discrete(const AnyModel& model) noexcept;

struct Segment {
  int mode = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  State start;
};

/// Discrete paths store X_0..X_n at integer times. PDMP paths store one
/// segment per mode sojourn plus the end state; intermediate positions are
/// recovered with PdmpModel::flow.
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Segment> segments;

  void write_csv(std::ostream& out, std::span<const double> log_weights = {}) const;
};

Trajectory simulate_discrete(const DiscreteModel& model, double x0, std::size_t n, RandomStream rng);
Trajectory simulate_pdmp(const PdmpModel& model, const State& start, double horizon, RandomStream rng);

/// Z_n = p(X_0)...p(X_{n-1}).
double weight_discrete(const Trajectory& traj, const PenaltyField& penalty);
/// Z_t = exp(-sum over segments of the integral of rho).
double weight_continuous(const Trajectory& traj, const PenaltyField& penalty, const PdmpModel& model);
/// Per-step log Z_k for k = 0..n.
std::vector<double> log_weights_discrete(const Trajectory& traj, const PenaltyField& penalty);

// ---------------------------------------------------------------------------
// Exact enumeration over finite noise.

inline constexpr std::size_t kDefaultPathCap = std::size_t{1} << 20;

struct ExactPath {
  std::vector<Rational> states;
  Rational prob;
};

/// All k^n paths from x0 with exact probabilities. Requires affine branches.
std::vector<ExactPath> enumerate_paths(const DiscreteModel& model, const Rational& x0, std::size_t n,
                                       std::size_t cap = kDefaultPathCap);

/// E_x[Z_k f(X_k)] for k = 0..n in exact rational arithmetic. The penalty
/// must provide an exact evaluator.
std::vector<Rational> exact_feynman_kac_curve(const DiscreteModel& model, const PenaltyField& penalty,
                                              const Rational& x0, std::size_t n,
                                              const std::function<Rational(const Rational&)>& f,
                                              std::size_t cap = kDefaultPathCap);
Rational exact_feynman_kac(const DiscreteModel& model, const PenaltyField& penalty, const Rational& x0,
                           std::size_t n, const std::function<Rational(const Rational&)>& f,
                           std::size_t cap = kDefaultPathCap);

/// Same enumeration in double precision, for penalties without an exact form.
std::vector<double> enumerated_feynman_kac_curve(const DiscreteModel& model, const PenaltyField& penalty, double x0,
                                                 std::size_t n, const std::function<double(double)>& f,
                                                 std::size_t cap = kDefaultPathCap);

/// Exact E_x[|X_1|...|X_{n-1}|]-style path functionals: sum over paths of
/// prob * g(path).
Rational exact_path_expectation(const DiscreteModel& model, const Rational& x0, std::size_t n,
                                const std::function<Rational(const std::vector<Rational>&)>& g,
                                std::size_t cap = kDefaultPathCap);

// ---------------------------------------------------------------------------
// Batch propagation.

/// Particle i draws from stream (seed, base + i). Reusing (seed, base) for two
/// populations drives them with common random numbers.
struct StreamSpec {
  std::uint64_t seed = 0;
  std::uint64_t base = 0;
};

/// Observations of N particles at a list of times. Arrays are indexed
/// [observation][particle].
struct Population {
  std::vector<double> times;
  std::size_t particles = 0;
  int dim = 1;
  bool has_mode = false;
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> y;
  std::vector<std::vector<std::int32_t>> mode;
  std::vector<std::vector<double>> log_z;
  std::size_t redraws = 0;

  State state(std::size_t obs, std::size_t i) const;
  std::vector<State> states(std::size_t obs) const;
  /// Endpoint law weighted by Z (self-normalized, log-domain).
  WeightedEnsemble conditional(std::size_t obs) const;
  /// Index of the observation at time t (exact match required).
  std::size_t index_of(double t) const;
};

struct EngineOptions {
  std::size_t workers = 1;
  std::size_t chunk = 4096;
};

/// Propagates one particle per start (starts.size() == N) and records states
/// and log Z at each requested time. Discrete models take integer times.
Population propagate(const AnyModel& model, const PenaltyField& penalty, std::span<const State> starts,
                     StreamSpec streams, std::span<const double> times, const EngineOptions& opts = {});

std::vector<State> replicate(const State& s, std::size_t n);

// ---------------------------------------------------------------------------
// Couplings.

enum class CouplingKind { synchronous, independent_then_merge };

std::string_view to_string(CouplingKind kind) noexcept;

struct CoupledModel {
  CouplingKind kind;
  AnyModel model;
};

CoupledModel couple_synchronous(const DiscreteModel& model);
CoupledModel couple_pdmp_merge(const PdmpModel& model);

struct CoupledPopulation {
  Population first;
  Population second;
  /// First time the mode processes agree (merge coupling only).
  std::vector<double> merge_time;
};

/// N coupled pairs started from (x, y).
CoupledPopulation simulate_coupled(const CoupledModel& coupled, const PenaltyField& penalty, const State& x,
                                   const State& y, std::size_t n, StreamSpec streams, std::span<const double> times,
                                   const EngineOptions& opts = {});

}  // namespace qsdsim
