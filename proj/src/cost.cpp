#include "vismpc/cost.hpp"

#include <cmath>

namespace vismpc {

const char* to_string(CostKind k) { return k == CostKind::Expected ? "expected" : "logprob"; }

DistanceField make_distance_field(Coord goal, int height, int width) {
  if (goal.x < 0 || goal.x >= width || goal.y < 0 || goal.y >= height) {
    throw Error(Errc::OutOfBounds, "goal outside frame");
  }
  DistanceField f{goal, Plane(height, width)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) f.data.at(x, y) = std::hypot(x - goal.x, y - goal.y);
  }
  return f;
}

double expected_distance(const ProbMap& p, const DistanceField& field) {
  if (p.height() != field.data.height() || p.width() != field.data.width()) {
    throw Error(Errc::ShapeMismatch, "probability map and distance field shapes differ");
  }
  const auto pd = p.data();
  const auto fd = field.data.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < pd.size(); ++i) acc += pd[i] * fd[i];
  return acc;
}

double horizon_cost(std::span<const std::vector<ProbMap>> probmaps, const Task& task,
                    std::span<const DistanceField> fields, CostKind kind) {
  if (probmaps.empty()) throw Error(Errc::ShapeMismatch, "no predicted steps");
  if (fields.size() != task.size()) throw Error(Errc::ShapeMismatch, "one distance field per designated pixel");
  for (const auto& step : probmaps) {
    if (step.size() != task.size()) throw Error(Errc::ShapeMismatch, "one map per designated pixel per step");
  }
  double total = 0.0;
  if (kind == CostKind::Expected) {
    for (const auto& step : probmaps) {
      for (std::size_t i = 0; i < step.size(); ++i) total += task.weight(i) * expected_distance(step[i], fields[i]);
    }
    return total;
  }
  const auto& last = probmaps.back();
  for (std::size_t i = 0; i < last.size(); ++i) {
    const Coord g = task.goals[i];
    if (last[i].height() != fields[i].data.height() || last[i].width() != fields[i].data.width()) {
      throw Error(Errc::ShapeMismatch, "probability map and goal frame shapes differ");
    }
    total += -std::log(last[i].at(g.x, g.y) + kLogProbFloor);
  }
  return total;
}

TaskCost::TaskCost(Task task, int height, int width) : task_(std::move(task)) {
  task_.validate(height, width);
  for (const auto& g : task_.goals) fields_.push_back(make_distance_field(g, height, width));
}

}  // namespace vismpc
