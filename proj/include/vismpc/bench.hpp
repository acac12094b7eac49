#pragma once

// Benchmark suites: long pushes, push-one-keep-one-still, the scripted
// occlusion probe and the lift-over-obstacle scenario, plus the metrics
// report written by the CLI.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vismpc/learned.hpp"
#include "vismpc/planner.hpp"
#include "vismpc/predictor.hpp"
#include "vismpc/sim2d.hpp"

namespace vismpc::bench {

enum class Method { Random, DnaLogprob, DnaExpected, SnaExpected };

const char* to_string(Method m);
/// Accepts random, dna+logprob, dna+expected, sna+expected. Throws InvalidConfig.
Method parse_method(const std::string& s);

struct Scenario {
  int id = 0;
  std::uint64_t seed = 0;
  sim::Scene scene;
  Task task;
  std::vector<sim::Attachment> attachments;
  std::string split;  // "seen" (discs) or "unseen" (rectangles)
};

/// Long single-object pushes: designated pixel at the object centre, goal
/// 16-22 px away, arm starting behind the object.
std::vector<Scenario> make_push_suite(int n, std::uint64_t seed, const sim::WorldConfig& cfg = {});

/// Short pushes (goal 6-10 px away) for small worlds and learned models.
std::vector<Scenario> make_easy_push_suite(int n, std::uint64_t seed, const sim::WorldConfig& cfg = {});

/// Push one object while a second one must stay put. Pixel 0 sits on the
/// moved object, pixel 1 on the obstacle with its goal at its start.
std::vector<Scenario> make_multi_suite(int n, std::uint64_t seed, const sim::WorldConfig& cfg = {});

/// Arm on the goal side of the object; pushing it toward the goal needs the
/// arm to get around or over it. With `blocking` false the arm starts
/// behind the object instead.
Scenario make_lift_scenario(std::uint64_t seed, bool blocking = true, const sim::WorldConfig& cfg = {});

/// Single static object with the designated pixel at its centre.
Scenario make_occlusion_scene(std::uint64_t seed, const sim::WorldConfig& cfg = {});

struct PredictorSource {
  std::shared_ptr<const LearnedParams> learned;  // null: oracle
  std::string label = "oracle";
  std::string params_hash;
};

struct BenchOptions {
  MpcConfig mpc;
  OracleConfig oracle;
  PredictorSource predictor;
  std::optional<std::filesystem::path> out_dir;  // episode logs and frames
  bool dump_frames = false;
};

struct MetricsRow {
  int scenario = 0;
  std::uint64_t seed = 0;
  std::string split;
  double initial_distance = 0.0;
  double final_distance = 0.0;
  double improvement = 0.0;
  std::optional<double> stationary_improvement;
  int lift_actions = 0;
  int zero_mass_events = 0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (0 for a single row)
};

Aggregate aggregate(const std::vector<double>& values);

struct MetricsReport {
  std::string suite;
  std::string method;
  std::map<std::string, std::string> config;  // flattened, printed verbatim
  std::vector<MetricsRow> rows;
  std::map<std::string, Aggregate> aggregate;

  /// Recomputes `aggregate` from `rows`.
  void finalize();
};

/// {config, rows, aggregate:{mean, std}} with sorted keys; byte-stable.
std::string to_json(const MetricsReport& r);

/// Shared configuration block for reports.
std::map<std::string, std::string> describe(const BenchOptions& opts, Method m, std::uint64_t seed, int scenarios);

/// Builds the planning model for a method: oracle in the method's mode or
/// the learned predictor.
std::unique_ptr<Predictor> make_predictor(const Scenario& sc, Method m, const BenchOptions& opts);

/// Runs one scenario and optionally writes episode.jsonl / frames.
EpisodeResult run_episode(const Scenario& sc, Method m, const BenchOptions& opts, std::uint64_t seed);

/// Throws EmptySuite on zero scenarios.
MetricsReport run_push_benchmark(const std::vector<Scenario>& suite, Method m, const BenchOptions& opts,
                                 std::uint64_t seed);
MetricsReport run_multiobjective_benchmark(const std::vector<Scenario>& suite, Method m, const BenchOptions& opts,
                                           std::uint64_t seed);

struct OcclusionSeries {
  std::vector<double> sna;  // P(true pixel) per step, index 0 = before any motion
  std::vector<double> dna;
  std::vector<char> occluded;  // arm covers the true pixel at that step
  std::vector<Coord> dna_argmax;
  std::vector<Coord> sna_argmax;
  std::vector<Vec2> arm;
  Coord true_pixel;
  int first_occluded = -1;
  int last_occluded = -1;

  double pre_occlusion(const std::vector<double>& s) const;
};

/// Scripted lifted arm sweeping over the static object at 2 px per step.
OcclusionSeries run_occlusion_probe(const Scenario& sc, const OracleConfig& oracle,
                                    const std::optional<std::filesystem::path>& dump_dir = std::nullopt);

/// Report rows are (scenario, step) pairs; the aggregate covers the steps
/// after the arm has left the object.
std::string occlusion_json(const std::vector<OcclusionSeries>& series, const std::map<std::string, std::string>& config);

/// Oracle SNA + expected-distance planning with `lift_levels` discrete
/// lift values (1 disables lifting).
EpisodeResult run_lift_scenario(const Scenario& sc, int lift_levels, const BenchOptions& opts, std::uint64_t seed);

/// `n` lift scenarios with ids 0..n-1 and seeds derived from `seed`.
std::vector<Scenario> make_lift_suite(int n, std::uint64_t seed, bool blocking = true, const sim::WorldConfig& cfg = {});

MetricsReport run_lift_benchmark(const std::vector<Scenario>& suite, int lift_levels, const BenchOptions& opts,
                                 std::uint64_t seed);

std::string episode_jsonl(const EpisodeResult& ep);

/// FNV-1a 64 of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace vismpc::bench
