#include <doctest.h>

#include "support.hpp"
#include "vismpc/cost.hpp"

using namespace vismpc;

TEST_CASE("distance fields") {
  const DistanceField f = make_distance_field({10, 10}, 32, 32);
  CHECK(f.data.at(10, 10) == 0.0);
  CHECK(f.data.at(13, 14) == doctest::Approx(5.0));
  for (int y = 1; y < 20; ++y) {
    for (int x = 1; x < 20; ++x) {
      CHECK(f.data.at(x, y) >= 0.0);
      CHECK(f.data.at(x, y) == f.data.at(20 - x, 20 - y));
    }
  }
}

TEST_CASE("expected distance examples") {
  const DistanceField f = make_distance_field({10, 10}, 32, 32);
  CHECK(expected_distance(one_hot_probmap(10, 10, 32, 32), f) == 0.0);
  CHECK(expected_distance(one_hot_probmap(13, 14, 32, 32), f) == doctest::Approx(5.0));

  ProbMap two(8, 8);
  two.at(0, 0) = 0.5;
  two.at(2, 0) = 0.5;
  CHECK(expected_distance(two, make_distance_field({1, 0}, 8, 8)) == doctest::Approx(1.0));

  CHECK_THROWS_AS(expected_distance(one_hot_probmap(1, 1, 8, 8), f), Error);
}

TEST_CASE("expected distance is linear and decreases toward the goal") {
  Rng rng(8);
  const DistanceField f = make_distance_field({20, 5}, 24, 32);
  for (int t = 0; t < 20; ++t) {
    const ProbMap a = testing::random_probmap(24, 32, rng);
    const ProbMap b = testing::random_probmap(24, 32, rng);
    const double alpha = rng.uniform();
    ProbMap mix(24, 32);
    for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = alpha * a.data()[i] + (1 - alpha) * b.data()[i];
    CHECK(expected_distance(mix, f) ==
          doctest::Approx(alpha * expected_distance(a, f) + (1 - alpha) * expected_distance(b, f)).epsilon(1e-12));
  }
  CHECK(expected_distance(one_hot_probmap(11, 5, 24, 32), f) < expected_distance(one_hot_probmap(10, 5, 24, 32), f));
  CHECK(expected_distance(one_hot_probmap(20, 7, 24, 32), f) < expected_distance(one_hot_probmap(20, 8, 24, 32), f));
}

TEST_CASE("horizon cost") {
  const Task task{{{1, 1}, {5, 5}}, {{10, 10}, {3, 3}}, {}};
  const TaskCost cost(task, 16, 16);
  const std::vector<std::vector<ProbMap>> one{{one_hot_probmap(13, 14, 16, 16), one_hot_probmap(3, 3, 16, 16)}};
  CHECK(cost(one, CostKind::Expected) == doctest::Approx(5.0));

  const std::vector<std::vector<ProbMap>> solved(3, {one_hot_probmap(10, 10, 16, 16), one_hot_probmap(3, 3, 16, 16)});
  CHECK(cost(solved, CostKind::Expected) == 0.0);
  CHECK(cost(solved, CostKind::LogProb) == doctest::Approx(0.0).epsilon(1e-9));

  // Log-probability looks only at the final step and floors zero mass.
  std::vector<std::vector<ProbMap>> late = solved;
  late[0][0] = one_hot_probmap(0, 0, 16, 16);
  CHECK(cost(late, CostKind::LogProb) == doctest::Approx(0.0).epsilon(1e-9));
  late[2][0] = one_hot_probmap(0, 0, 16, 16);
  CHECK(cost(late, CostKind::LogProb) == doctest::Approx(-std::log(kLogProbFloor)));

  // Permuting equally weighted pixels leaves the cost unchanged.
  Rng rng(2);
  std::vector<std::vector<ProbMap>> maps;
  for (int t = 0; t < 4; ++t) maps.push_back({testing::random_probmap(16, 16, rng), testing::random_probmap(16, 16, rng)});
  const Task swapped{{{5, 5}, {1, 1}}, {{3, 3}, {10, 10}}, {}};
  std::vector<std::vector<ProbMap>> maps_swapped;
  for (const auto& m : maps) maps_swapped.push_back({m[1], m[0]});
  CHECK(cost(maps, CostKind::Expected) ==
        doctest::Approx(TaskCost(swapped, 16, 16)(maps_swapped, CostKind::Expected)).epsilon(1e-12));

  // Weights scale each pixel's term.
  const Task weighted{{{1, 1}, {5, 5}}, {{10, 10}, {3, 3}}, {2.0, 0.0}};
  CHECK(TaskCost(weighted, 16, 16)(one, CostKind::Expected) == doctest::Approx(10.0));
}
