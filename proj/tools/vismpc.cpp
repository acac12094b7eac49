// Command-line front end: dataset collection, predictor training, the
// benchmark suites and a verbose single-scenario planner.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vismpc/bench.hpp"
#include "vismpc/io.hpp"
#include "vismpc/learned.hpp"
#include "vismpc/planner.hpp"
#include "vismpc/sim2d.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vismpc;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

bool is_validation(Errc c) {
  switch (c) {
    case Errc::InvalidConfig:
    case Errc::EmptySuite:
    case Errc::OutOfBounds:
    case Errc::ShapeMismatch:
    case Errc::InvalidFrame:
    case Errc::InvalidKernel:
      return true;
    default:
      return false;
  }
}

struct WorldFlags {
  int size = 64;
  int lift_levels = 4;

  sim::WorldConfig world() const {
    sim::WorldConfig cfg;
    cfg.height = size;
    cfg.width = size;
    cfg.limits.lift_levels = lift_levels;
    return cfg;
  }
};

struct PlanFlags {
  int tau_max = 15;
  int samples = 200;
  int elites = 10;
  int iterations = 3;
  int horizon = 10;
  bool full_cov = false;
  bool warm_start = false;
};

void add_world(CLI::App* app, WorldFlags& w) {
  app->add_option("--size", w.size, "Square world side in pixels")->check(CLI::Range(16, 512));
  app->add_option("--lift-levels", w.lift_levels, "Discrete lift values L")->check(CLI::Range(1, 16));
}

void add_plan(CLI::App* app, PlanFlags& p) {
  app->add_option("--tau-max", p.tau_max, "Executed steps per episode")->check(CLI::NonNegativeNumber);
  app->add_option("--cem-samples", p.samples, "CEM samples per iteration")->check(CLI::PositiveNumber);
  app->add_option("--cem-elites", p.elites, "CEM elites per iteration")->check(CLI::PositiveNumber);
  app->add_option("--cem-iters", p.iterations, "CEM iterations")->check(CLI::PositiveNumber);
  app->add_option("--horizon", p.horizon, "Planning horizon T")->check(CLI::PositiveNumber);
  app->add_flag("--full-cov", p.full_cov, "Full-covariance CEM");
  app->add_flag("--warm-start", p.warm_start, "Shift the previous distribution forward");
}

MpcConfig mpc_config(const PlanFlags& p, const sim::WorldConfig& world) {
  MpcConfig mc;
  mc.tau_max = p.tau_max;
  mc.cem.samples = p.samples;
  mc.cem.elites = p.elites;
  mc.cem.iterations = p.iterations;
  mc.cem.horizon = p.horizon;
  mc.cem.full_covariance = p.full_cov;
  mc.cem.warm_start = p.warm_start;
  mc.cem.limits = world.limits;
  mc.cem.validate();
  return mc;
}

bench::PredictorSource load_predictor(const std::string& spec) {
  bench::PredictorSource src;
  if (spec == "oracle") return src;
  const std::string bytes = io::read_text(spec);
  src.learned = std::make_shared<const LearnedParams>(deserialize_params(bytes));
  src.label = "learned:" + fs::path(spec).filename().string();
  src.params_hash = bench::fnv1a_hex(bytes);
  return src;
}

std::vector<bench::Scenario> make_suite(const std::string& suite, int n, std::uint64_t seed,
                                        const sim::WorldConfig& cfg, bool unblocked) {
  if (suite == "push") return bench::make_push_suite(n, seed, cfg);
  if (suite == "multi") return bench::make_multi_suite(n, seed, cfg);
  if (suite == "lift") return bench::make_lift_suite(n, seed, !unblocked, cfg);
  throw Error(Errc::InvalidConfig, "unknown suite '" + suite + "'");
}

void emit(const std::optional<fs::path>& out, const std::string& doc) {
  if (out) {
    io::write_text(*out / "metrics.json", doc);
  } else {
    std::cout << doc;
  }
}

// collect ------------------------------------------------------------------

struct CollectFlags {
  int n = 500;
  int len = 20;
  std::string out;
  std::uint64_t seed = 1;
  double lift_probability = 0.15;
  WorldFlags world;
};

int run_collect(const CollectFlags& f) {
  const sim::WorldConfig cfg = f.world.world();
  sim::CollectionConfig cc;
  cc.lift_probability = f.lift_probability;
  const auto sampler = [cfg](Rng& rng) { return sim::random_scene(cfg, rng); };
  const auto records = sim::collect_random_trajectories(f.n, f.len, sampler, RngSeed{f.seed}, cc);
  io::write_dataset(records, f.out, f.seed);
  std::cerr << "wrote " << records.size() << " trajectories to " << f.out << "\n";
  return 0;
}

// train --------------------------------------------------------------------

struct TrainFlags {
  std::string data;
  std::string out;
  double lr = 1e-3;
  int iters = 1000;
  int n_kernels = 4;
  int kernel_size = 9;
  int batch = 8;
  std::uint64_t seed = 1;
  std::string optimizer = "gd";
  std::string mode = "sna";
  int limit = 0;
  int lift_levels = 4;
};

int run_train(const TrainFlags& f) {
  TrainConfig tc;
  tc.lr = f.lr;
  tc.iters = f.iters;
  tc.n_kernels = f.n_kernels;
  tc.kernel_size = f.kernel_size;
  tc.batch = f.batch;
  tc.optimizer = f.optimizer == "adam" ? Optimizer::Adam : Optimizer::Gd;
  tc.skip = f.mode == "sna";
  tc.limits.lift_levels = f.lift_levels;
  tc.validate();  // before any file access, so bad flags exit 2
  auto data = io::read_dataset(f.data);
  if (f.limit > 0 && static_cast<std::size_t>(f.limit) < data.size()) data.resize(static_cast<std::size_t>(f.limit));
  TrainReport rep;
  const LearnedParams params = train_learned(data, tc, RngSeed{f.seed}, &rep);
  save_params(params, f.out);
  json evals = json::array();
  for (const auto& [it, loss] : rep.eval_losses) evals.push_back({it, loss});
  const json summary = {{"trajectories", data.size()},   {"initial_loss", rep.initial_loss},
                        {"final_loss", rep.final_loss},   {"lr_halvings", rep.lr_halvings},
                        {"final_lr", rep.final_lr},       {"eval_losses", evals},
                        {"params", f.out},                {"params_hash", bench::fnv1a_hex(io::read_text(f.out))}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// bench --------------------------------------------------------------------

struct BenchFlags {
  std::string suite;
  std::string method = "sna+expected";
  std::string predictor = "oracle";
  int scenarios = 0;  // 0: suite default
  std::uint64_t seed = 1;
  std::optional<std::string> out;
  bool dump_frames = false;
  bool unblocked = false;
  bool method_given = false;
  WorldFlags world;
  PlanFlags plan;
};

int default_count(const std::string& suite) {
  if (suite == "push") return 20;
  if (suite == "multi") return 8;
  return 1;
}

int run_bench(const BenchFlags& f) {
  const sim::WorldConfig cfg = f.world.world();
  const int n = f.scenarios > 0 ? f.scenarios : default_count(f.suite);
  std::optional<fs::path> out;
  if (f.out) out = fs::path(*f.out);

  bench::BenchOptions opts;
  opts.mpc = mpc_config(f.plan, cfg);
  opts.out_dir = out;
  opts.dump_frames = f.dump_frames;

  if (f.suite == "occlusion") {
    if (f.method_given) throw Error(Errc::InvalidConfig, "the occlusion probe always compares dna and sna");
    if (f.predictor != "oracle") throw Error(Errc::InvalidConfig, "the occlusion probe uses the oracle predictor");
    std::vector<bench::OcclusionSeries> series;
    for (int k = 0; k < n; ++k) {
      const auto sc = bench::make_occlusion_scene(derive_seed(f.seed, static_cast<std::uint64_t>(k)), cfg);
      std::optional<fs::path> dump;
      if (out && f.dump_frames) {
        char name[32];
        std::snprintf(name, sizeof name, "scenario_%04d", k);
        dump = *out / name;
      }
      series.push_back(bench::run_occlusion_probe(sc, opts.oracle, dump));
    }
    auto config = bench::describe(opts, bench::Method::SnaExpected, f.seed, n);
    config.erase("method");
    emit(out, bench::occlusion_json(series, config));
    return 0;
  }

  const bench::Method method = bench::parse_method(f.method);
  opts.predictor = load_predictor(f.predictor);
  const auto suite = make_suite(f.suite, n, f.seed, cfg, f.unblocked);
  bench::MetricsReport rep;
  if (f.suite == "push") {
    rep = bench::run_push_benchmark(suite, method, opts, f.seed);
  } else if (f.suite == "multi") {
    rep = bench::run_multiobjective_benchmark(suite, method, opts, f.seed);
  } else {
    if (method != bench::Method::SnaExpected || opts.predictor.learned) {
      throw Error(Errc::InvalidConfig, "the lift scenario plans with the oracle and sna+expected");
    }
    rep = bench::run_lift_benchmark(suite, cfg.limits.lift_levels, opts, f.seed);
    rep.config["blocking"] = f.unblocked ? "false" : "true";
  }
  emit(out, bench::to_json(rep));
  const auto& imp = rep.aggregate.at("improvement");
  std::cerr << rep.suite << " " << rep.method << ": improvement " << imp.mean << " +- " << imp.std << " over "
            << rep.rows.size() << " scenarios\n";
  return 0;
}

// plan ---------------------------------------------------------------------

struct SingleFlags {
  std::string suite = "push";
  int index = 0;
  std::string method = "sna+expected";
  std::string predictor = "oracle";
  std::uint64_t seed = 1;
  std::optional<std::string> out;
  bool unblocked = false;
  WorldFlags world;
  PlanFlags plan;
};

int run_plan(const SingleFlags& f) {
  const sim::WorldConfig cfg = f.world.world();
  const auto suite = make_suite(f.suite, f.index + 1, f.seed, cfg, f.unblocked);
  const bench::Scenario& sc = suite.back();
  const bench::Method method = bench::parse_method(f.method);
  if (method == bench::Method::Random) throw Error(Errc::InvalidConfig, "plan needs a planning method");

  bench::BenchOptions opts;
  opts.mpc = mpc_config(f.plan, cfg);
  opts.mpc.cost = method == bench::Method::DnaLogprob ? CostKind::LogProb : CostKind::Expected;
  opts.predictor = load_predictor(f.predictor);
  const auto pred = bench::make_predictor(sc, method, opts);
  const sim::Simulator sim(sc.scene.config, sc.scene.objects);

  std::printf("scenario %d seed %llu split %s\n", sc.id, static_cast<unsigned long long>(sc.seed), sc.split.c_str());
  for (std::size_t i = 0; i < sc.task.size(); ++i) {
    std::printf("  pixel %zu (%d,%d) -> goal (%d,%d)\n", i, sc.task.designated[i].x, sc.task.designated[i].y,
                sc.task.goals[i].x, sc.task.goals[i].y);
  }
  const auto observer = [](int tau, const PlanResult& r) {
    std::printf("tau %2d  cost %.4f  iterations", tau, r.cost);
    for (double c : r.iteration_best) std::printf(" %.4f", c);
    const Action& a = r.actions.front();
    std::printf("  action (%.3f, %.3f, %d)\n", a.dx, a.dy, a.lift);
  };
  const RngSeed s{derive_seed(f.seed, static_cast<std::uint64_t>(sc.id))};
  const EpisodeResult ep = mpc_run(sim, sc.scene.initial, *pred, sc.task, opts.mpc, s, observer);
  std::printf("initial distance %.3f  final distance %.3f  improvement %.3f\n", ep.initial_distances.front(),
              ep.final_distance, ep.improvement);
  if (f.out) io::write_text(fs::path(*f.out) / "episode.jsonl", bench::episode_jsonl(ep));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual MPC with probabilistic pixel advection"};
  app.require_subcommand(1);
  std::function<int()> action;

  CollectFlags cf;
  auto* collect = app.add_subcommand("collect", "Record random pushing trajectories");
  collect->add_option("--n", cf.n, "Trajectories")->check(CLI::PositiveNumber);
  collect->add_option("--len", cf.len, "Actions per trajectory")->check(CLI::PositiveNumber);
  collect->add_option("--out", cf.out, "Dataset directory")->required();
  collect->add_option("--seed", cf.seed, "Base seed");
  collect->add_option("--lift-prob", cf.lift_probability, "Probability of a lift action")->check(CLI::Range(0.0, 1.0));
  add_world(collect, cf.world);
  collect->callback([&] { action = [&] { return run_collect(cf); }; });

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Fit the learned predictor to a dataset");
  train->add_option("--data", tf.data, "Dataset directory")->required();
  train->add_option("--out", tf.out, "Parameter file")->required();
  train->add_option("--lr", tf.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  train->add_option("--iters", tf.iters, "Optimizer steps")->check(CLI::NonNegativeNumber);
  train->add_option("--n-kernels", tf.n_kernels, "Transformation kernels N")->check(CLI::PositiveNumber);
  train->add_option("--kernel-size", tf.kernel_size, "Kernel side K (odd)")->check(CLI::PositiveNumber);
  train->add_option("--batch", tf.batch, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--seed", tf.seed, "Seed");
  train->add_option("--optimizer", tf.optimizer, "gd or adam")->check(CLI::IsMember({"gd", "adam"}));
  train->add_option("--mode", tf.mode, "sna or dna")->check(CLI::IsMember({"sna", "dna"}));
  train->add_option("--limit", tf.limit, "Use only the first N trajectories")->check(CLI::NonNegativeNumber);
  train->add_option("--lift-levels", tf.lift_levels, "Discrete lift values L of the dataset")->check(CLI::Range(1, 16));
  train->callback([&] { action = [&] { return run_train(tf); }; });

  BenchFlags bf;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite and write metrics.json");
  bench->add_option("suite", bf.suite, "push, multi, occlusion or lift")
      ->required()
      ->check(CLI::IsMember({"push", "multi", "occlusion", "lift"}));
  auto* method_opt = bench->add_option("--method", bf.method, "random, dna+logprob, dna+expected, sna+expected");
  bench->add_option("--predictor", bf.predictor, "oracle or a parameter file");
  bench->add_option("--scenarios", bf.scenarios, "Scenario count (default 20/8/1/1)")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bf.seed, "Base seed");
  auto* out_opt = bench->add_option("--out", bench_out, "Output directory (default: metrics to stdout)");
  bench->add_flag("--dump-frames", bf.dump_frames, "Write PPM frames per scenario");
  bench->add_flag("--unblocked", bf.unblocked, "Lift suite: start the arm behind the object");
  add_world(bench, bf.world);
  add_plan(bench, bf.plan);
  bench->callback([&] {
    bf.method_given = method_opt->count() > 0;
    if (out_opt->count() > 0) bf.out = bench_out;
    action = [&] { return run_bench(bf); };
  });

  SingleFlags sf;
  std::string plan_out;
  auto* plan = app.add_subcommand("plan", "Run one scenario with per-step planner output");
  plan->add_option("--suite", sf.suite, "push, multi or lift")->check(CLI::IsMember({"push", "multi", "lift"}));
  plan->add_option("--index", sf.index, "Scenario index within the suite")->check(CLI::NonNegativeNumber);
  plan->add_option("--method", sf.method, "dna+logprob, dna+expected, sna+expected");
  plan->add_option("--predictor", sf.predictor, "oracle or a parameter file");
  plan->add_option("--seed", sf.seed, "Base seed");
  auto* plan_out_opt = plan->add_option("--out", plan_out, "Directory for episode.jsonl");
  plan->add_flag("--unblocked", sf.unblocked, "Lift suite: start the arm behind the object");
  add_world(plan, sf.world);
  add_plan(plan, sf.plan);
  plan->callback([&] {
    if (plan_out_opt->count() > 0) sf.out = plan_out;
    action = [&] { return run_plan(sf); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
