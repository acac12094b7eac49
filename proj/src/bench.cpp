#include "vismpc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <nlohmann/json.hpp>

#include "vismpc/io.hpp"

namespace vismpc::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

Coord to_pixel(Vec2 p) { return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))}; }

// Distance from the centre to the boundary along u.
double support(const sim::ObjectSpec& o, double angle, Vec2 u) {
  if (const auto* d = std::get_if<sim::Disc>(&o.shape)) return d->radius;
  const auto& r = std::get<sim::Rect>(o.shape);
  const Vec2 e1 = unit(angle);
  const Vec2 e2{-e1.y, e1.x};
  return std::abs(u.dot(e1)) * r.width / 2.0 + std::abs(u.dot(e2)) * r.height / 2.0;
}

sim::ObjectSpec random_object(Rng& rng, double hue) {
  sim::ObjectSpec o;
  if (rng.uniform() < 0.5) {
    o.shape = sim::Disc{rng.uniform(4.0, 6.0)};
  } else {
    o.shape = sim::Rect{rng.uniform(7.0, 11.0), rng.uniform(7.0, 11.0)};
  }
  o.color = sim::saturated_color(hue);
  return o;
}

bool inside(Vec2 p, const sim::WorldConfig& cfg, double margin) {
  return p.x >= margin && p.y >= margin && p.x <= cfg.width - 1 - margin && p.y <= cfg.height - 1 - margin;
}

// True when the state is valid as a scenario start: objects in frame and
// separated, arm clear of every object.
bool valid_start(const sim::Simulator& sim, const sim::WorldState& s) {
  if (!sim.inside_frame(s)) return false;
  const double r = sim.config().arm_radius;
  if (!inside(s.arm, sim.config(), r)) return false;
  for (int i = 0; i < sim.object_count(); ++i) {
    if (sim.arm_overlaps(s.arm, i, s.poses[static_cast<std::size_t>(i)])) return false;
    for (int j = 0; j < i; ++j) {
      if (sim.objects_overlap(i, s.poses[static_cast<std::size_t>(i)], j, s.poses[static_cast<std::size_t>(j)])) {
        return false;
      }
    }
  }
  return true;
}

void bind(Scenario& sc) {
  const sim::Simulator sim(sc.scene.config, sc.scene.objects);
  sc.attachments.clear();
  for (const auto& d : sc.task.designated) sc.attachments.push_back(sim.attach(sc.scene.initial, d));
  sc.split = std::holds_alternative<sim::Disc>(sc.scene.objects.front().shape) ? "seen" : "unseen";
}

[[noreturn]] void give_up(const char* what) {
  throw Error(Errc::InvalidConfig, std::string("could not place a valid ") + what + " scenario");
}

Scenario push_scenario(int id, std::uint64_t seed, const sim::WorldConfig& cfg, double near, double far) {
  Rng rng(seed);
  const sim::ObjectSpec obj = random_object(rng, rng.uniform());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double angle = std::holds_alternative<sim::Rect>(obj.shape) ? rng.uniform(0.0, std::numbers::pi / 2) : 0.0;
    const Vec2 u = unit(rng.uniform(0.0, 2.0 * std::numbers::pi));
    const double dist = rng.uniform(near, far);
    const Vec2 c{rng.uniform(8.0, cfg.width - 9.0), rng.uniform(8.0, cfg.height - 9.0)};
    const Vec2 g = c + u * dist;
    if (!inside(g, cfg, 6.0)) continue;
    Scenario sc;
    sc.id = id;
    sc.seed = seed;
    sc.scene.config = cfg;
    sc.scene.objects = {obj};
    sc.scene.initial.poses = {sim::Pose{c, angle}};
    sc.scene.initial.arm = c - u * (support(obj, angle, u) + cfg.arm_radius + 1.5);
    const sim::Simulator sim(cfg, sc.scene.objects);
    if (!valid_start(sim, sc.scene.initial)) continue;
    const Coord d = to_pixel(c);
    if (sim.attach(sc.scene.initial, d).object != 0) continue;
    sc.task = Task{{d}, {to_pixel(g)}, {}};
    bind(sc);
    return sc;
  }
  give_up("push");
}

Scenario multi_scenario(int id, std::uint64_t seed, const sim::WorldConfig& cfg) {
  Rng rng(seed);
  const double hue = rng.uniform();
  // The moved object is a wide slab with the arm on its goal side, so the
  // short way to get behind it is over the top.
  sim::ObjectSpec moved;
  moved.shape = sim::Rect{6.0, 18.0};
  moved.color = sim::saturated_color(hue);
  const sim::ObjectSpec still = random_object(rng, hue + 0.5);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double a1 = std::holds_alternative<sim::Rect>(still.shape) ? rng.uniform(0.0, std::numbers::pi / 2) : 0.0;
    const Vec2 u = unit(heading);
    const Vec2 n{-u.y, u.x};
    const Vec2 c{rng.uniform(12.0, cfg.width - 13.0), rng.uniform(12.0, cfg.height - 13.0)};
    const Vec2 g = c + u * rng.uniform(10.0, 14.0);
    if (!inside(g, cfg, 6.0)) continue;
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const Vec2 b = c + n * (side * (support(moved, heading, n) + rng.uniform(3.0, 6.0) + support(still, a1, n))) +
                   u * rng.uniform(-3.0, 3.0);
    Scenario sc;
    sc.id = id;
    sc.seed = seed;
    sc.scene.config = cfg;
    sc.scene.objects = {moved, still};
    sc.scene.initial.poses = {sim::Pose{c, heading}, sim::Pose{b, a1}};
    sc.scene.initial.arm = c + u * (support(moved, heading, u) + cfg.arm_radius + 1.5);
    const sim::Simulator sim(cfg, sc.scene.objects);
    if (!valid_start(sim, sc.scene.initial)) continue;
    const Coord d0 = to_pixel(c);
    const Coord d1 = to_pixel(b);
    if (sim.attach(sc.scene.initial, d0).object != 0 || sim.attach(sc.scene.initial, d1).object != 1) continue;
    sc.task = Task{{d0, d1}, {to_pixel(g), d1}, {}};
    bind(sc);
    return sc;
  }
  give_up("multi-objective");
}

std::string dir_name(const char* prefix, int id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%04d", prefix, id);
  return buf;
}

std::string fmt(double v) {
  json j = v;
  return j.dump();
}

int count_lifts(const EpisodeResult& ep) {
  return static_cast<int>(std::count_if(ep.actions.begin(), ep.actions.end(), [](const Action& a) { return a.lift > 0; }));
}

MetricsRow row_for(const Scenario& sc, const EpisodeResult& ep) {
  MetricsRow r;
  r.scenario = sc.id;
  r.seed = sc.seed;
  r.split = sc.split;
  r.initial_distance = ep.initial_distances.empty() ? 0.0 : ep.initial_distances.front();
  r.final_distance = ep.final_distance;
  r.improvement = ep.improvement;
  r.lift_actions = count_lifts(ep);
  r.zero_mass_events = ep.zero_mass_events;
  return r;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Random: return "random";
    case Method::DnaLogprob: return "dna+logprob";
    case Method::DnaExpected: return "dna+expected";
    case Method::SnaExpected: return "sna+expected";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::Random, Method::DnaLogprob, Method::DnaExpected, Method::SnaExpected}) {
    if (s == to_string(m)) return m;
  }
  throw Error(Errc::InvalidConfig, "unknown method '" + s + "' (random, dna+logprob, dna+expected, sna+expected)");
}

std::vector<Scenario> make_push_suite(int n, std::uint64_t seed, const sim::WorldConfig& cfg) {
  std::vector<Scenario> out;
  for (int k = 0; k < n; ++k) {
    out.push_back(push_scenario(k, derive_seed(seed, static_cast<std::uint64_t>(k)), cfg, 16.0, 22.0));
  }
  return out;
}

std::vector<Scenario> make_easy_push_suite(int n, std::uint64_t seed, const sim::WorldConfig& cfg) {
  std::vector<Scenario> out;
  for (int k = 0; k < n; ++k) {
    out.push_back(push_scenario(k, derive_seed(seed, static_cast<std::uint64_t>(k)), cfg, 6.0, 10.0));
  }
  return out;
}

std::vector<Scenario> make_multi_suite(int n, std::uint64_t seed, const sim::WorldConfig& cfg) {
  std::vector<Scenario> out;
  for (int k = 0; k < n; ++k) out.push_back(multi_scenario(k, derive_seed(seed, static_cast<std::uint64_t>(k)), cfg));
  return out;
}

Scenario make_lift_scenario(std::uint64_t seed, bool blocking, const sim::WorldConfig& cfg) {
  Rng rng(seed);
  // A wide, shallow slab: going around it is long, lifting over it is short.
  sim::ObjectSpec obj;
  obj.shape = sim::Rect{6.0, 18.0};
  obj.color = sim::saturated_color(rng.uniform());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec2 u = unit(heading);
    const Vec2 c{rng.uniform(16.0, cfg.width - 17.0), rng.uniform(16.0, cfg.height - 17.0)};
    const Vec2 g = c + u * 12.0;
    if (!inside(g, cfg, 6.0)) continue;
    Scenario sc;
    sc.seed = seed;
    sc.scene.config = cfg;
    sc.scene.objects = {obj};
    sc.scene.initial.poses = {sim::Pose{c, heading}};
    const double reach = support(obj, heading, u) + cfg.arm_radius + 1.5;
    sc.scene.initial.arm = blocking ? c + u * reach : c - u * reach;
    const sim::Simulator sim(cfg, sc.scene.objects);
    if (!valid_start(sim, sc.scene.initial)) continue;
    const Coord d = to_pixel(c);
    if (sim.attach(sc.scene.initial, d).object != 0) continue;
    sc.task = Task{{d}, {to_pixel(g)}, {}};
    bind(sc);
    return sc;
  }
  give_up("lift");
}

Scenario make_occlusion_scene(std::uint64_t seed, const sim::WorldConfig& cfg) {
  Rng rng(seed);
  Scenario sc;
  sc.seed = seed;
  sc.scene.config = cfg;
  sim::ObjectSpec obj;
  obj.shape = sim::Disc{5.0};
  obj.color = sim::saturated_color(rng.uniform());
  sc.scene.objects = {obj};
  const Vec2 c{std::round(cfg.width / 2.0 + rng.uniform(-3.0, 3.0)), std::round(cfg.height / 2.0 + rng.uniform(-3.0, 3.0))};
  sc.scene.initial.poses = {sim::Pose{c, 0.0}};
  sc.scene.initial.arm = c - Vec2{16.0, 0.0};
  sc.task = Task{{to_pixel(c)}, {to_pixel(c)}, {}};
  bind(sc);
  return sc;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  double s = 0.0;
  for (double v : values) s += v;
  a.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double q = 0.0;
    for (double v : values) q += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(q / static_cast<double>(values.size() - 1));
  }
  return a;
}

void MetricsReport::finalize() {
  aggregate.clear();
  std::vector<double> fin;
  std::vector<double> imp;
  std::vector<double> still;
  for (const auto& r : rows) {
    fin.push_back(r.final_distance);
    imp.push_back(r.improvement);
    if (r.stationary_improvement) still.push_back(*r.stationary_improvement);
  }
  aggregate["final_distance"] = bench::aggregate(fin);
  aggregate["improvement"] = bench::aggregate(imp);
  if (!still.empty()) aggregate["stationary_improvement"] = bench::aggregate(still);
}

std::string to_json(const MetricsReport& r) {
  json config = json::object();
  for (const auto& [k, v] : r.config) config[k] = v;
  config["suite"] = r.suite;
  config["method"] = r.method;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"scenario", row.scenario},
              {"seed", row.seed},
              {"split", row.split},
              {"initial_distance", row.initial_distance},
              {"final_distance", row.final_distance},
              {"improvement", row.improvement},
              {"lift_actions", row.lift_actions},
              {"zero_mass_events", row.zero_mass_events}};
    if (row.stationary_improvement) j["stationary_improvement"] = *row.stationary_improvement;
    rows.push_back(j);
  }
  json mean = json::object();
  json sd = json::object();
  for (const auto& [k, a] : r.aggregate) {
    mean[k] = a.mean;
    sd[k] = a.std;
  }
  const json doc = {{"config", config}, {"rows", rows}, {"aggregate", {{"mean", mean}, {"std", sd}}}};
  return doc.dump(2) + "\n";
}

std::map<std::string, std::string> describe(const BenchOptions& opts, Method m, std::uint64_t seed, int scenarios) {
  const CemConfig& c = opts.mpc.cem;
  std::map<std::string, std::string> out{
      {"seed", std::to_string(seed)},
      {"scenarios", std::to_string(scenarios)},
      {"method", to_string(m)},
      {"predictor", opts.predictor.label},
      {"tau_max", std::to_string(opts.mpc.tau_max)},
      {"cem_samples", std::to_string(c.samples)},
      {"cem_elites", std::to_string(c.elite_count())},
      {"cem_iterations", std::to_string(c.iterations)},
      {"horizon", std::to_string(c.horizon)},
      {"min_std", fmt(c.min_std)},
      {"a_max", fmt(c.limits.a_max)},
      {"lift_levels", std::to_string(c.limits.lift_levels)},
      {"measurement", "simulator ground truth"},
  };
  if (opts.predictor.learned) {
    out["params_hash"] = opts.predictor.params_hash;
  } else {
    out["oracle_kernel_size"] = std::to_string(opts.oracle.kernel_size);
    out["oracle_arm_stay"] = fmt(opts.oracle.arm_stay);
    out["split_note"] = "seen/unseen split is not meaningful for the oracle predictor";
  }
  return out;
}

std::unique_ptr<Predictor> make_predictor(const Scenario& sc, Method m, const BenchOptions& opts) {
  if (m == Method::Random) return nullptr;
  const PredictorMode mode = m == Method::SnaExpected ? PredictorMode::Sna : PredictorMode::Dna;
  if (opts.predictor.learned) {
    const bool skip = opts.predictor.learned->shape.skip;
    if (skip != (mode == PredictorMode::Sna)) {
      throw Error(Errc::InvalidConfig, std::string("learned parameters were trained as ") + (skip ? "sna" : "dna") +
                                           " but method " + to_string(m) + " needs the other kind");
    }
    return std::make_unique<LearnedPredictor>(*opts.predictor.learned);
  }
  OracleConfig oc = opts.oracle;
  oc.mode = mode;
  return std::make_unique<OraclePredictor>(std::make_shared<const sim::Simulator>(sc.scene.config, sc.scene.objects), oc);
}

std::string episode_jsonl(const EpisodeResult& ep) {
  std::string out;
  for (std::size_t t = 0; t < ep.true_positions.size(); ++t) {
    json pos = json::array();
    for (const auto& p : ep.true_positions[t]) pos.push_back({p.x, p.y});
    json j = {{"tau", t}, {"true_positions", pos}};
    if (t < ep.actions.size()) {
      const Action& a = ep.actions[t];
      j["action"] = {{"dx", a.dx}, {"dy", a.dy}, {"lift", a.lift}};
    }
    if (t < ep.planned_costs.size()) j["planned_cost"] = ep.planned_costs[t];
    out += j.dump() + "\n";
  }
  return out;
}

EpisodeResult run_episode(const Scenario& sc, Method m, const BenchOptions& opts, std::uint64_t seed) {
  const sim::Simulator sim(sc.scene.config, sc.scene.objects);
  const RngSeed s{derive_seed(seed, static_cast<std::uint64_t>(sc.id))};
  EpisodeResult ep;
  if (m == Method::Random) {
    ep = random_run(sim, sc.scene.initial, sc.task, opts.mpc.tau_max, s, opts.dump_frames);
  } else {
    MpcConfig mc = opts.mpc;
    mc.cost = m == Method::DnaLogprob ? CostKind::LogProb : CostKind::Expected;
    mc.keep_frames = opts.dump_frames;
    const auto pred = make_predictor(sc, m, opts);
    ep = mpc_run(sim, sc.scene.initial, *pred, sc.task, mc, s);
  }
  if (opts.out_dir) {
    const fs::path dir = *opts.out_dir / dir_name("scenario", sc.id);
    io::write_text(dir / "episode.jsonl", episode_jsonl(ep));
    if (opts.dump_frames) {
      for (std::size_t t = 0; t < ep.frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "%04zu.ppm", t);
        io::write_ppm(ep.frames[t], dir / "frames" / name);
      }
    }
  }
  return ep;
}

MetricsReport run_push_benchmark(const std::vector<Scenario>& suite, Method m, const BenchOptions& opts,
                                 std::uint64_t seed) {
  if (suite.empty()) throw Error(Errc::EmptySuite, "benchmark suite has no scenarios");
  MetricsReport rep;
  rep.suite = "push";
  rep.method = to_string(m);
  rep.config = describe(opts, m, seed, static_cast<int>(suite.size()));
  for (const auto& sc : suite) rep.rows.push_back(row_for(sc, run_episode(sc, m, opts, seed)));
  std::sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) { return a.scenario < b.scenario; });
  rep.finalize();
  return rep;
}

MetricsReport run_multiobjective_benchmark(const std::vector<Scenario>& suite, Method m, const BenchOptions& opts,
                                           std::uint64_t seed) {
  if (suite.empty()) throw Error(Errc::EmptySuite, "benchmark suite has no scenarios");
  MetricsReport rep;
  rep.suite = "multi";
  rep.method = to_string(m);
  rep.config = describe(opts, m, seed, static_cast<int>(suite.size()));
  for (const auto& sc : suite) {
    if (sc.task.size() != 2) throw Error(Errc::InvalidConfig, "multi-objective scenarios need two designated pixels");
    const EpisodeResult ep = run_episode(sc, m, opts, seed);
    MetricsRow row = row_for(sc, ep);
    row.stationary_improvement = ep.initial_distances[1] - ep.final_distances[1];
    rep.rows.push_back(row);
  }
  std::sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) { return a.scenario < b.scenario; });
  rep.finalize();
  return rep;
}

double OcclusionSeries::pre_occlusion(const std::vector<double>& s) const {
  if (s.empty()) return 0.0;
  const int idx = first_occluded > 0 ? first_occluded - 1 : 0;
  return s[static_cast<std::size_t>(idx)];
}

OcclusionSeries run_occlusion_probe(const Scenario& sc, const OracleConfig& oracle,
                                    const std::optional<fs::path>& dump_dir) {
  auto sim = std::make_shared<const sim::Simulator>(sc.scene.config, sc.scene.objects);
  OracleConfig dna_cfg = oracle;
  dna_cfg.mode = PredictorMode::Dna;
  OracleConfig sna_cfg = oracle;
  sna_cfg.mode = PredictorMode::Sna;
  const OraclePredictor dna(sim, dna_cfg);
  const OraclePredictor sna(sim, sna_cfg);

  const sim::WorldState s0 = sc.scene.initial;
  const auto anchor = sna.make_anchor(s0);
  const Coord d = sc.task.designated.front();
  const int h = sim->config().height;
  const int w = sim->config().width;
  const ProbMap first = one_hot_probmap(d.x, d.y, h, w);
  ProbMap p_dna = first;
  ProbMap p_sna = first;

  OcclusionSeries out;
  out.true_pixel = d;
  const double r = sim->config().arm_radius;
  auto record = [&](const sim::WorldState& s, int t) {
    const Vec2 tp = sim->true_pixel_position(s, sc.attachments.front());
    const Coord q = to_pixel(tp);
    out.dna.push_back(p_dna.at(q.x, q.y));
    out.sna.push_back(p_sna.at(q.x, q.y));
    out.dna_argmax.push_back(p_dna.argmax());
    out.sna_argmax.push_back(p_sna.argmax());
    out.arm.push_back(s.arm);
    const bool occ = (s.arm - tp).norm() <= r;
    out.occluded.push_back(occ ? 1 : 0);
    if (occ) {
      if (out.first_occluded < 0) out.first_occluded = t;
      out.last_occluded = t;
    }
    if (dump_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "%04d.ppm", t);
      io::write_ppm(sim->render(s), *dump_dir / "frames" / name);
    }
  };

  // Lifted sweep at 2 px per step across the object and well past it.
  const int steps = 16;
  const Action a{2.0, 0.0, std::max(sim->config().limits.lift_levels - 1, 1)};
  sim::WorldState s = s0;
  record(s, 0);
  for (int t = 1; t <= steps; ++t) {
    const sim::WorldState next = sim->step(s, a);
    const PredictorOutput od = dna.predict_output(s, next, anchor.get());
    const PredictorOutput os = sna.predict_output(s, next, anchor.get());
    p_dna = advect_prob(p_dna, od, PredictorMode::Dna, nullptr);
    p_sna = advect_prob(p_sna, os, PredictorMode::Sna, &first);
    s = next;
    record(s, t);
  }
  return out;
}

EpisodeResult run_lift_scenario(const Scenario& sc, int lift_levels, const BenchOptions& opts, std::uint64_t seed) {
  if (lift_levels < 1) throw Error(Errc::InvalidConfig, "lift_levels must be at least 1");
  Scenario local = sc;
  local.scene.config.limits.lift_levels = lift_levels;
  BenchOptions o = opts;
  o.mpc.cem.limits.lift_levels = lift_levels;
  o.predictor = {};
  return run_episode(local, Method::SnaExpected, o, seed);
}

std::vector<Scenario> make_lift_suite(int n, std::uint64_t seed, bool blocking, const sim::WorldConfig& cfg) {
  std::vector<Scenario> out;
  for (int k = 0; k < n; ++k) {
    Scenario sc = make_lift_scenario(derive_seed(seed, static_cast<std::uint64_t>(k)), blocking, cfg);
    sc.id = k;
    out.push_back(std::move(sc));
  }
  return out;
}

MetricsReport run_lift_benchmark(const std::vector<Scenario>& suite, int lift_levels, const BenchOptions& opts,
                                 std::uint64_t seed) {
  if (suite.empty()) throw Error(Errc::EmptySuite, "benchmark suite has no scenarios");
  MetricsReport rep;
  rep.suite = "lift";
  rep.method = to_string(Method::SnaExpected);
  BenchOptions o = opts;
  o.mpc.cem.limits.lift_levels = lift_levels;
  o.predictor = {};
  rep.config = describe(o, Method::SnaExpected, seed, static_cast<int>(suite.size()));
  for (const auto& sc : suite) rep.rows.push_back(row_for(sc, run_lift_scenario(sc, lift_levels, opts, seed)));
  std::sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) { return a.scenario < b.scenario; });
  rep.finalize();
  return rep;
}

std::string occlusion_json(const std::vector<OcclusionSeries>& series, const std::map<std::string, std::string>& config) {
  json cfg = json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  cfg["suite"] = "occlusion";
  json rows = json::array();
  std::vector<double> sna_post;
  std::vector<double> dna_post;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const OcclusionSeries& s = series[k];
    for (std::size_t t = 0; t < s.sna.size(); ++t) {
      const bool post = s.last_occluded >= 0 && static_cast<int>(t) > s.last_occluded;
      rows.push_back({{"scenario", k},
                      {"step", t},
                      {"sna_p_true", s.sna[t]},
                      {"dna_p_true", s.dna[t]},
                      {"occluded", s.occluded[t] != 0},
                      {"post_occlusion", post},
                      {"sna_argmax", {s.sna_argmax[t].x, s.sna_argmax[t].y}},
                      {"dna_argmax", {s.dna_argmax[t].x, s.dna_argmax[t].y}},
                      {"true_pixel", {s.true_pixel.x, s.true_pixel.y}}});
      if (post) {
        sna_post.push_back(s.sna[t]);
        dna_post.push_back(s.dna[t]);
      }
    }
  }
  const Aggregate sa = aggregate(sna_post);
  const Aggregate da = aggregate(dna_post);
  const json doc = {{"config", cfg},
                    {"rows", rows},
                    {"aggregate",
                     {{"mean", {{"sna_post_occlusion", sa.mean}, {"dna_post_occlusion", da.mean}}},
                      {"std", {{"sna_post_occlusion", sa.std}, {"dna_post_occlusion", da.std}}}}}};
  return doc.dump(2) + "\n";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vismpc::bench
