#pragma once

// Cross-entropy planning over hybrid continuous/discrete action sequences
// and the receding-horizon control loop around it.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vismpc/cost.hpp"
#include "vismpc/predictor.hpp"
#include "vismpc/rng.hpp"
#include "vismpc/sim2d.hpp"

namespace vismpc {

struct CemConfig {
  int samples = 200;    // M
  int elites = 10;      // K
  int iterations = 3;   // n_iter
  int horizon = 10;     // T
  double init_std_xy = -1.0;  // negative: a_max / 2
  double init_std_lift = 1.0;
  double min_std = 1e-2;
  /// When set (e.g. 90), overrides `elites` with the samples above this
  /// percentile: K = round(M * (1 - p/100)).
  std::optional<double> elite_percentile;
  bool full_covariance = false;
  bool warm_start = false;
  ActionLimits limits;

  int elite_count() const;
  /// Throws InvalidConfig.
  void validate() const;
};

/// Gaussian over the flattened (dx, dy, lift) x T action vector.
struct ActionDistribution {
  std::vector<double> mean;
  std::vector<double> cov;  // diagonal variances (size 3T) or full row-major (3T x 3T)
  bool full = false;

  int horizon() const { return static_cast<int>(mean.size() / 3); }
  static ActionDistribution initial(const CemConfig& cfg);
};

struct SampledSequence {
  std::vector<double> raw;      // clamped continuous values used for refitting
  std::vector<Action> actions;  // lift rounded to the nearest valid integer
};

/// Gaussian draws; dx, dy clamped to [-a_max, a_max]; the lift coordinate is
/// clamped to [0, L-1] and then rounded.
std::vector<SampledSequence> sample_and_round(const ActionDistribution& dist, int m, Rng& rng,
                                              const ActionLimits& lim);
std::vector<SampledSequence> sample_and_round(const ActionDistribution& dist, int m, RngSeed seed,
                                              const ActionLimits& lim);

struct PlanResult {
  std::vector<Action> actions;
  double cost = 0.0;
  std::vector<double> iteration_best;      // best cost seen after each iteration
  std::vector<double> first_iteration_costs;
  ActionDistribution final_distribution;
};

/// n_iter rounds of sample -> rollout -> cost -> elite refit. Rollouts of one
/// iteration run in parallel; selection breaks ties by sample index.
PlanResult cem_plan(const Predictor& pred, const History& hist, const TaskCost& cost, const CemConfig& cfg,
                    CostKind kind, RngSeed seed, const ActionDistribution* warm = nullptr);

struct MpcConfig {
  int tau_max = 15;
  CemConfig cem;
  CostKind cost = CostKind::Expected;
  bool keep_frames = false;
  bool keep_beliefs = false;
};

struct EpisodeResult {
  std::vector<Action> actions;
  std::vector<std::vector<Vec2>> true_positions;  // (tau_max + 1) x P, row 0 is the start
  std::vector<double> planned_costs;
  std::vector<double> initial_distances;  // per designated pixel
  std::vector<double> final_distances;
  double final_distance = 0.0;  // designated pixel 0
  double improvement = 0.0;     // initial - final for pixel 0
  std::vector<Frame> frames;                       // optional dump, tau_max + 1 frames
  std::vector<std::vector<ProbMap>> beliefs;       // optional, carried maps per tau
  int zero_mass_events = 0;
};

/// Receding-horizon control: plan, execute the first action in the simulator,
/// carry the one-step advected maps over as the next initial distribution.
EpisodeResult mpc_run(const sim::Simulator& sim, const sim::WorldState& start, const Predictor& pred,
                      const Task& task, const MpcConfig& cfg, RngSeed seed);

/// Baseline executing uniformly random actions without planning.
EpisodeResult random_run(const sim::Simulator& sim, const sim::WorldState& start, const Task& task, int tau_max,
                         RngSeed seed, bool keep_frames = false);

/// Hook to observe every planning call (used by the CLI's verbose mode).
using PlanObserver = std::function<void(int tau, const PlanResult&)>;
EpisodeResult mpc_run(const sim::Simulator& sim, const sim::WorldState& start, const Predictor& pred,
                      const Task& task, const MpcConfig& cfg, RngSeed seed, const PlanObserver& observer);

}  // namespace vismpc
