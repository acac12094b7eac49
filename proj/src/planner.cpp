#include "vismpc/planner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

namespace vismpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
std::vector<double> cholesky(const std::vector<double>& a, int n) {
  std::vector<double> l(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * l[static_cast<std::size_t>(j) * n + k];
      if (i == j) {
        l[static_cast<std::size_t>(i) * n + i] = std::sqrt(std::max(s, 1e-12));
      } else {
        l[static_cast<std::size_t>(i) * n + j] = s / l[static_cast<std::size_t>(j) * n + j];
      }
    }
  }
  return l;
}

std::vector<Action> to_actions(const std::vector<double>& raw, const ActionLimits& lim) {
  std::vector<Action> out;
  out.reserve(raw.size() / 3);
  for (std::size_t t = 0; t + 2 < raw.size(); t += 3) {
    const int lift = static_cast<int>(std::lround(std::clamp(raw[t + 2], 0.0, lim.lift_levels - 1.0)));
    out.push_back({raw[t], raw[t + 1], lift});
  }
  return out;
}

ActionDistribution refit(const std::vector<SampledSequence>& samples, const std::vector<int>& elite, bool full,
                         double min_std) {
  const std::size_t d = samples.front().raw.size();
  const double k = static_cast<double>(elite.size());
  ActionDistribution out;
  out.full = full;
  out.mean.assign(d, 0.0);
  for (int e : elite) {
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += samples[static_cast<std::size_t>(e)].raw[j];
  }
  for (double& m : out.mean) m /= k;
  const double floor_var = min_std * min_std;
  if (!full) {
    out.cov.assign(d, 0.0);
    for (int e : elite) {
      for (std::size_t j = 0; j < d; ++j) {
        const double r = samples[static_cast<std::size_t>(e)].raw[j] - out.mean[j];
        out.cov[j] += r * r;
      }
    }
    for (double& v : out.cov) v = std::max(v / k, floor_var);
    return out;
  }
  out.cov.assign(d * d, 0.0);
  for (int e : elite) {
    const auto& r = samples[static_cast<std::size_t>(e)].raw;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) out.cov[i * d + j] += (r[i] - out.mean[i]) * (r[j] - out.mean[j]);
    }
  }
  for (double& v : out.cov) v /= k;
  for (std::size_t i = 0; i < d; ++i) out.cov[i * d + i] = std::max(out.cov[i * d + i], 0.0) + floor_var;
  return out;
}

}  // namespace

int CemConfig::elite_count() const {
  if (elite_percentile) {
    const int k = static_cast<int>(std::lround(samples * (1.0 - *elite_percentile / 100.0)));
    return std::clamp(k, 1, std::max(samples - 1, 1));
  }
  return elites;
}

void CemConfig::validate() const {
  if (samples < 1) throw Error(Errc::InvalidConfig, "CEM needs at least one sample");
  if (iterations < 1) throw Error(Errc::InvalidConfig, "CEM needs at least one iteration");
  if (horizon < 1) throw Error(Errc::InvalidConfig, "planning horizon must be positive");
  if (elite_percentile && !(*elite_percentile >= 0.0 && *elite_percentile < 100.0)) {
    throw Error(Errc::InvalidConfig, "elite percentile must be in [0, 100)");
  }
  const int k = elite_count();
  if (k < 1 || k >= samples) throw Error(Errc::InvalidConfig, "elite count must be in [1, samples)");
  if (!(min_std > 0.0)) throw Error(Errc::InvalidConfig, "min_std must be positive");
  if (limits.a_max <= 0.0 || limits.lift_levels < 1) throw Error(Errc::InvalidConfig, "invalid action limits");
}

ActionDistribution ActionDistribution::initial(const CemConfig& cfg) {
  const double sxy = cfg.init_std_xy < 0.0 ? cfg.limits.a_max / 2.0 : cfg.init_std_xy;
  const std::size_t d = static_cast<std::size_t>(cfg.horizon) * 3;
  ActionDistribution dist;
  dist.full = cfg.full_covariance;
  dist.mean.assign(d, 0.0);
  std::vector<double> var(d);
  for (std::size_t t = 0; t < d; t += 3) {
    var[t] = var[t + 1] = sxy * sxy;
    var[t + 2] = cfg.init_std_lift * cfg.init_std_lift;
  }
  if (!dist.full) {
    dist.cov = std::move(var);
  } else {
    dist.cov.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) dist.cov[i * d + i] = var[i];
  }
  return dist;
}

std::vector<SampledSequence> sample_and_round(const ActionDistribution& dist, int m, Rng& rng,
                                              const ActionLimits& lim) {
  const int d = static_cast<int>(dist.mean.size());
  if (d == 0 || d % 3 != 0) throw Error(Errc::ShapeMismatch, "action distribution must cover whole steps");
  const std::size_t expect = dist.full ? static_cast<std::size_t>(d) * d : static_cast<std::size_t>(d);
  if (dist.cov.size() != expect) throw Error(Errc::ShapeMismatch, "covariance size mismatch");
  std::vector<double> chol;
  if (dist.full) chol = cholesky(dist.cov, d);

  std::vector<SampledSequence> out(static_cast<std::size_t>(std::max(m, 0)));
  std::vector<double> z(static_cast<std::size_t>(d));
  for (auto& s : out) {
    for (double& v : z) v = rng.normal();
    s.raw.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      double x = dist.mean[static_cast<std::size_t>(j)];
      if (dist.full) {
        for (int k = 0; k <= j; ++k) x += chol[static_cast<std::size_t>(j) * d + k] * z[static_cast<std::size_t>(k)];
      } else {
        x += std::sqrt(dist.cov[static_cast<std::size_t>(j)]) * z[static_cast<std::size_t>(j)];
      }
      const double hi = j % 3 == 2 ? lim.lift_levels - 1.0 : lim.a_max;
      const double lo = j % 3 == 2 ? 0.0 : -lim.a_max;
      s.raw[static_cast<std::size_t>(j)] = std::clamp(x, lo, hi);
    }
    s.actions = to_actions(s.raw, lim);
  }
  return out;
}

std::vector<SampledSequence> sample_and_round(const ActionDistribution& dist, int m, RngSeed seed,
                                              const ActionLimits& lim) {
  Rng rng(seed);
  return sample_and_round(dist, m, rng, lim);
}

PlanResult cem_plan(const Predictor& pred, const History& hist, const TaskCost& cost, const CemConfig& cfg,
                    CostKind kind, RngSeed seed, const ActionDistribution* warm) {
  cfg.validate();
  ActionDistribution dist = warm != nullptr ? *warm : ActionDistribution::initial(cfg);
  if (dist.horizon() != cfg.horizon) throw Error(Errc::ShapeMismatch, "warm start horizon mismatch");
  const int k = cfg.elite_count();
  Rng rng(seed);
  RolloutOptions ro;
  ro.keep_frames = false;
  ro.limits = cfg.limits;

  PlanResult res;
  res.cost = kInf;
  for (int it = 0; it < cfg.iterations; ++it) {
    // Draws are serial so the sample set does not depend on the thread count.
    const auto samples = sample_and_round(dist, cfg.samples, rng, cfg.limits);
    std::vector<double> costs(samples.size(), kInf);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < static_cast<int>(samples.size()); ++s) {
      try {
        const auto& seq = samples[static_cast<std::size_t>(s)].actions;
        const RolloutResult r = rollout(pred, hist, seq, cfg.horizon, ro);
        const double c = cost(r.probmaps, kind);
        costs[static_cast<std::size_t>(s)] = std::isfinite(c) ? c : kInf;
      } catch (const Error& e) {
        if (e.code() != Errc::ZeroMass) {
#pragma omp critical
          if (!failure) failure = std::current_exception();
        }
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    if (it == 0) res.first_iteration_costs = costs;

    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return costs[static_cast<std::size_t>(a)] < costs[static_cast<std::size_t>(b)];
    });
    const double best = costs[static_cast<std::size_t>(order.front())];
    if (best < res.cost || res.actions.empty()) {
      res.cost = best;
      res.actions = samples[static_cast<std::size_t>(order.front())].actions;
    }
    res.iteration_best.push_back(res.cost);
    order.resize(static_cast<std::size_t>(k));
    dist = refit(samples, order, dist.full, cfg.min_std);
  }
  res.final_distribution = std::move(dist);
  return res;
}

namespace {

std::vector<sim::Attachment> attach_all(const sim::Simulator& sim, const sim::WorldState& s, const Task& task) {
  std::vector<sim::Attachment> att;
  for (const auto& d : task.designated) att.push_back(sim.attach(s, d));
  return att;
}

std::vector<Vec2> positions(const sim::Simulator& sim, const sim::WorldState& s,
                            const std::vector<sim::Attachment>& att) {
  std::vector<Vec2> p;
  for (const auto& a : att) p.push_back(sim.true_pixel_position(s, a));
  return p;
}

void finish(EpisodeResult& r, const Task& task) {
  const auto& first = r.true_positions.front();
  const auto& last = r.true_positions.back();
  for (std::size_t i = 0; i < task.size(); ++i) {
    const Vec2 g{static_cast<double>(task.goals[i].x), static_cast<double>(task.goals[i].y)};
    r.initial_distances.push_back((first[i] - g).norm());
    r.final_distances.push_back((last[i] - g).norm());
  }
  if (!r.final_distances.empty()) {
    r.final_distance = r.final_distances.front();
    r.improvement = r.initial_distances.front() - r.final_distances.front();
  }
}

// Warm start: drop the executed step, pad the tail with a zero mean.
std::vector<double> shifted(const ActionDistribution& d) {
  std::vector<double> m(d.mean.begin() + 3, d.mean.end());
  m.insert(m.end(), {0.0, 0.0, 0.0});
  return m;
}

}  // namespace

EpisodeResult mpc_run(const sim::Simulator& sim, const sim::WorldState& start, const Predictor& pred,
                      const Task& task, const MpcConfig& cfg, RngSeed seed) {
  return mpc_run(sim, start, pred, task, cfg, seed, PlanObserver{});
}

EpisodeResult mpc_run(const sim::Simulator& sim, const sim::WorldState& start, const Predictor& pred,
                      const Task& task, const MpcConfig& cfg, RngSeed seed, const PlanObserver& observer) {
  if (cfg.tau_max < 0) throw Error(Errc::InvalidConfig, "tau_max must be non-negative");
  cfg.cem.validate();
  const int h = sim.config().height;
  const int w = sim.config().width;
  const TaskCost cost(task, h, w);

  auto anchor = std::make_shared<const WorldAnchor>(WorldAnchor{start, sim.labels(start)});
  History hist = make_history(sim, start, task, anchor);
  const auto att = attach_all(sim, start, task);

  EpisodeResult r;
  r.true_positions.push_back(positions(sim, start, att));
  if (cfg.keep_frames) r.frames.push_back(hist.first_frame);
  if (cfg.keep_beliefs) r.beliefs.push_back(hist.probmaps);

  sim::WorldState s = start;
  std::optional<ActionDistribution> warm;
  for (int tau = 0; tau < cfg.tau_max; ++tau) {
    const RngSeed step_seed{derive_seed(seed.seed, static_cast<std::uint64_t>(tau))};
    const PlanResult plan = cem_plan(pred, hist, cost, cfg.cem, cfg.cost, step_seed, warm ? &*warm : nullptr);
    if (observer) observer(tau, plan);
    const Action a = plan.actions.front();
    r.actions.push_back(a);
    r.planned_costs.push_back(plan.cost);
    if (cfg.cem.warm_start) {
      ActionDistribution next = ActionDistribution::initial(cfg.cem);
      next.mean = shifted(plan.final_distribution);
      warm = std::move(next);
    }

    // Belief carried to the next step: the executed action's one-step prediction.
    const Prediction p = pred.predict(hist, a);
    std::vector<ProbMap> carried;
    for (std::size_t i = 0; i < hist.probmaps.size(); ++i) {
      try {
        carried.push_back(advect_prob(hist.probmaps[i], p.output, pred.mode(), &hist.first_probmaps[i],
                                      p.output.transformed_background));
      } catch (const Error& e) {
        if (e.code() != Errc::ZeroMass) throw;
        ++r.zero_mass_events;
        carried.push_back(hist.probmaps[i]);
      }
    }

    s = sim.step(s, a);
    hist.push_frame(sim.render(s));
    hist.probmaps = std::move(carried);
    hist.arm = s.arm;
    hist.lift_remaining = s.lift_remaining;
    hist.world = s;

    r.true_positions.push_back(positions(sim, s, att));
    if (cfg.keep_frames) r.frames.push_back(hist.frames.back());
    if (cfg.keep_beliefs) r.beliefs.push_back(hist.probmaps);
  }
  finish(r, task);
  return r;
}

EpisodeResult random_run(const sim::Simulator& sim, const sim::WorldState& start, const Task& task, int tau_max,
                         RngSeed seed, bool keep_frames) {
  if (tau_max < 0) throw Error(Errc::InvalidConfig, "tau_max must be non-negative");
  task.validate(sim.config().height, sim.config().width);
  const auto att = attach_all(sim, start, task);
  Rng rng(seed);
  EpisodeResult r;
  sim::WorldState s = start;
  r.true_positions.push_back(positions(sim, s, att));
  if (keep_frames) r.frames.push_back(sim.render(s));
  const ActionLimits& lim = sim.config().limits;
  for (int tau = 0; tau < tau_max; ++tau) {
    Action a{rng.uniform(-lim.a_max, lim.a_max), rng.uniform(-lim.a_max, lim.a_max),
             static_cast<int>(rng.below(static_cast<std::uint64_t>(lim.lift_levels)))};
    r.actions.push_back(a);
    s = sim.step(s, a);
    r.true_positions.push_back(positions(sim, s, att));
    if (keep_frames) r.frames.push_back(sim.render(s));
  }
  finish(r, task);
  return r;
}

}  // namespace vismpc
