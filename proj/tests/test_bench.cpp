#include <doctest.h>

#include <nlohmann/json.hpp>

#include "vismpc/bench.hpp"

using namespace vismpc;
using namespace vismpc::bench;

TEST_CASE("method names") {
  for (Method m : {Method::Random, Method::DnaLogprob, Method::DnaExpected, Method::SnaExpected}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("sna+logprob"), Error);
  CHECK_THROWS_AS(parse_method(""), Error);
}

TEST_CASE("aggregate uses the sample standard deviation") {
  const Aggregate a = aggregate({1.0, 2.0, 3.0, 4.0});
  CHECK(a.mean == doctest::Approx(2.5));
  CHECK(a.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(aggregate({7.0}).std == 0.0);
}

TEST_CASE("suites are deterministic with distinct per-scenario seeds") {
  const auto a = make_push_suite(6, 42);
  const auto b = make_push_suite(6, 42);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == static_cast<int>(i));
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].scene.initial == b[i].scene.initial);
    CHECK(a[i].task.goals == b[i].task.goals);
    for (std::size_t j = 0; j < i; ++j) CHECK(a[i].seed != a[j].seed);
  }
  CHECK(make_push_suite(1, 43)[0].seed != a[0].seed);
}

TEST_CASE("push suite geometry") {
  for (const auto& sc : make_push_suite(20, 3)) {
    const sim::Simulator sim(sc.scene.config, sc.scene.objects);
    CHECK(sim.inside_frame(sc.scene.initial));
    CHECK_NOTHROW(sc.task.validate(sc.scene.config.height, sc.scene.config.width));
    const Coord d = sc.task.designated[0];
    const Coord g = sc.task.goals[0];
    const double dist = std::hypot(d.x - g.x, d.y - g.y);
    CHECK(dist >= 15.0);
    CHECK(dist <= 23.0);
    CHECK(!sim.arm_overlaps(sc.scene.initial.arm, 0, sc.scene.initial.poses[0]));
  }
}

TEST_CASE("multi suite keeps the obstacle still in its task") {
  for (const auto& sc : make_multi_suite(8, 1)) {
    REQUIRE(sc.task.designated.size() == 2);
    CHECK(sc.task.designated[1] == sc.task.goals[1]);
    CHECK(sc.task.designated[0] != sc.task.goals[0]);
    const sim::Simulator sim(sc.scene.config, sc.scene.objects);
    CHECK(!sim.objects_overlap(0, sc.scene.initial.poses[0], 1, sc.scene.initial.poses[1]));
  }
}

TEST_CASE("empty suites are rejected") {
  BenchOptions opts;
  CHECK_THROWS_AS(run_push_benchmark({}, Method::Random, opts, 1), Error);
  CHECK_THROWS_AS(run_multiobjective_benchmark({}, Method::Random, opts, 1), Error);
}

TEST_CASE("random push report: aggregate matches rows and json is byte-stable") {
  BenchOptions opts;
  opts.mpc.tau_max = 6;
  const auto suite = make_push_suite(5, 9);
  const MetricsReport r = run_push_benchmark(suite, Method::Random, opts, 9);
  REQUIRE(r.rows.size() == 5);
  std::vector<double> imp;
  for (const auto& row : r.rows) {
    CHECK(row.improvement == doctest::Approx(row.initial_distance - row.final_distance));
    imp.push_back(row.improvement);
  }
  const Aggregate agg = aggregate(imp);
  CHECK(r.aggregate.at("improvement").mean == doctest::Approx(agg.mean));
  CHECK(r.aggregate.at("improvement").std == doctest::Approx(agg.std));

  const std::string text = to_json(r);
  CHECK(text == to_json(run_push_benchmark(suite, Method::Random, opts, 9)));
  const auto j = nlohmann::json::parse(text);
  CHECK(j.contains("config"));
  CHECK(j.at("rows").size() == 5);
  CHECK(j.at("aggregate").at("mean").contains("improvement"));
  CHECK(j.at("aggregate").at("std").contains("improvement"));
}

TEST_CASE("oracle planning beats the starting distance on an easy push") {
  BenchOptions opts;
  opts.mpc.tau_max = 6;
  opts.mpc.cem.samples = 60;
  opts.mpc.cem.elites = 6;
  opts.mpc.cem.horizon = 5;
  const auto suite = make_easy_push_suite(1, 5);
  const EpisodeResult ep = run_episode(suite[0], Method::SnaExpected, opts, 5);
  CHECK(ep.improvement > 2.0);
  CHECK(ep.actions.size() == 6);
  const auto log = episode_jsonl(ep);
  CHECK(std::count(log.begin(), log.end(), '\n') == 7);  // start row plus one per step
}

TEST_CASE("occlusion probe: both models are sharp before the arm arrives") {
  const Scenario sc = make_occlusion_scene(4);
  OracleConfig oc;
  const OcclusionSeries s = run_occlusion_probe(sc, oc);
  REQUIRE(s.first_occluded > 0);
  REQUIRE(s.last_occluded >= s.first_occluded);
  CHECK(s.pre_occlusion(s.sna) >= 0.9);
  CHECK(s.pre_occlusion(s.dna) >= 0.9);
  CHECK(s.sna.size() == s.dna.size());
  const auto j = nlohmann::json::parse(occlusion_json({s}, {{"suite", "occlusion"}}));
  CHECK(j.at("rows").size() == s.sna.size());
}

TEST_CASE("fnv1a matches published vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
