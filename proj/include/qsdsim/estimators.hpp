#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qsdsim/metric.hpp"
#include "qsdsim/penalty.hpp"
#include "qsdsim/process.hpp"
#include "qsdsim/state.hpp"

namespace qsdsim {

/// The absolute metric on the state interval for discrete models, the
/// mode/position metric with the model radius for PDMPs.
BoundedMetric default_metric(const AnyModel& model);

/// 64 evenly spaced points on 1-D state spaces (per mode for PDMPs, open ends
/// and excluded points nudged inwards); an 8 x 8 grid of the inscribed square
/// per mode on planar PDMPs.
std::vector<State> default_grid(const AnyModel& model, std::size_t points = 64);

/// Indices of N draws by systematic resampling with offset u in [0, 1), after
/// sorting the support by state_less. Identical inputs give identical output.
std::vector<std::size_t> systematic_resample(const WeightedEnsemble& mu, std::size_t n, double u);
std::vector<std::size_t> multinomial_resample(const WeightedEnsemble& mu, std::size_t n, RandomStream& rng);

struct ConditionalLaw {
  WeightedEnsemble ensemble;
  double ess = 0.0;
  /// log of the sample mean of Z_t.
  double log_mean_z = 0.0;
};

/// Endpoints of N penalized paths from x0, weighted by Z_t / mean(Z_t).
ConditionalLaw conditional_law(const AnyModel& model, const PenaltyField& penalty, const State& x0, double t,
                               std::size_t n, std::uint64_t seed, const EngineOptions& opts = {});

/// Same estimand with multinomial resampling every `resample_every` time
/// units. With resample_every >= t this is conditional_law on the same streams.
ConditionalLaw smc_conditional_law(const AnyModel& model, const PenaltyField& penalty, const State& x0, double t,
                                   std::size_t n, double resample_every, std::uint64_t seed,
                                   const EngineOptions& opts = {});

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> estimate;
  std::vector<double> stderr_;
  std::vector<std::size_t> samples;
};

SurvivalCurve survival_curve(const AnyModel& model, const PenaltyField& penalty, const State& x0,
                             std::span<const double> times, std::size_t n, std::uint64_t seed,
                             const EngineOptions& opts = {});

struct Lambda0Fit {
  double lambda0 = 0.0;
  double stderr_ = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of -log E_x Z_t on t over [lo, hi]; the default
/// window is the last half of the curve. Throws invalid-curve on fewer than
/// two points or a nonpositive estimate in the window.
Lambda0Fit estimate_lambda0(const SurvivalCurve& curve, std::optional<std::pair<double, double>> window = {});

struct EtaTable {
  std::vector<State> grid;
  std::vector<double> values;
  std::vector<double> stderr_;
  double t = 0.0;
  /// Factor applied so that the reference measure integrates eta to 1.
  double normalization = 1.0;

  /// Linear interpolation along 1-D grids (same mode), nearest grid point on
  /// planar grids. `interpolated` is set when x is not a grid point.
  double at(const State& x, bool& interpolated) const;
};

/// eta_t(x) = exp(lambda0 t) E_x Z_t on each grid point, all grid points
/// driven by the same N streams, then scaled so that the reference measure
/// (an estimate of the QSD) has reference(eta) = 1.
EtaTable estimate_eta(const AnyModel& model, const PenaltyField& penalty, std::span<const State> grid, double t,
                      double lambda0, std::size_t n, std::uint64_t seed, const WeightedEnsemble& reference,
                      const EngineOptions& opts = {});

struct QsdOptions {
  /// Starting ensemble; defaults to the uniform law on default_grid.
  std::optional<WeightedEnsemble> initial;
  std::optional<BoundedMetric> metric;
  /// Paths per support point in each iteration.
  std::size_t replicas = 16;
  /// eta is tabulated at time eta_time (default 4 t0) with eta_particles
  /// paths per grid point (default min(N, 4096)).
  std::optional<double> eta_time;
  std::optional<std::size_t> eta_particles;
  std::vector<State> eta_grid;
  bool compute_eta = true;
  EngineOptions engine;
};

struct QsdEstimate {
  WeightedEnsemble measure;
  double lambda0 = 0.0;
  double lambda0_stderr = 0.0;
  std::optional<EtaTable> eta;
  std::size_t iterations = 0;
  double final_step = 0.0;
  bool converged = false;
  std::vector<double> steps;
  std::vector<double> log_normalizations;
};

/// Iterates mu -> mu P_t0 / mu P_t0 1 on N-point ensembles. Every iteration
/// reuses the same streams and the same resampling offset, so the iteration
/// is a fixed deterministic map and successive W1 steps contract; stops when
/// a step falls below tol. Non-convergence is flagged, not thrown.
QsdEstimate qsd_fixed_point(const AnyModel& model, const PenaltyField& penalty, double t0, std::size_t n, double tol,
                            std::size_t max_iter, std::uint64_t seed, const QsdOptions& options = {});

/// W1(nu P_t0 / nu P_t0 1, nu) with `replicas` fresh paths per support point.
double quasi_stationarity_residual(const AnyModel& model, const PenaltyField& penalty, const WeightedEnsemble& nu,
                                   double t0, std::size_t replicas, std::uint64_t seed,
                                   std::optional<BoundedMetric> metric = {}, const EngineOptions& opts = {});

/// Law of X_s under penalization to horizon T (weights Z_T), an estimate of
/// the Q-process marginal. Without T the horizon is 4 s.
WeightedEnsemble q_process_marginal(const AnyModel& model, const PenaltyField& penalty, const State& x0, double s,
                                    std::optional<double> horizon, std::size_t n, std::uint64_t seed,
                                    const EngineOptions& opts = {});
/// Same, started from N systematic draws of `initial`.
WeightedEnsemble q_process_marginal(const AnyModel& model, const PenaltyField& penalty,
                                    const WeightedEnsemble& initial, double s, std::optional<double> horizon,
                                    std::size_t n, std::uint64_t seed, const EngineOptions& opts = {});

/// Mean occupation measure up to t of the penalized process, each path
/// weighted by Z_t. Discrete: states X_0..X_{t-1}. PDMP: the path sampled at
/// the midpoints of a grid of step `occupation_step`.
WeightedEnsemble quasi_ergodic(const AnyModel& model, const PenaltyField& penalty, const State& x0, double t,
                               std::size_t n, std::uint64_t seed, const EngineOptions& opts = {},
                               double occupation_step = 0.05);

struct NuQ {
  WeightedEnsemble measure;
  bool interpolated = false;
};

/// eta nu_QS, renormalized.
NuQ nu_q(const QsdEstimate& qsd);

}  // namespace qsdsim
