#pragma once

// Planning objectives over predicted designated-pixel distributions.

#include <span>
#include <vector>

#include "vismpc/core.hpp"

namespace vismpc {

/// Euclidean distance (pixels) from every pixel to one goal.
struct DistanceField {
  Coord goal;
  Plane data;
};

DistanceField make_distance_field(Coord goal, int height, int width);

/// E_{d ~ p}[||d - g||] as the Hadamard product of p with the field.
double expected_distance(const ProbMap& p, const DistanceField& field);

enum class CostKind { Expected, LogProb };

const char* to_string(CostKind k);

inline constexpr double kLogProbFloor = 1e-12;

/// Expected: sum over steps and pixels of weight_i * E[dist].
/// LogProb: sum over pixels of -log(P_T(g_i) + 1e-12), final step only.
/// `probmaps` is indexed [step][pixel].
double horizon_cost(std::span<const std::vector<ProbMap>> probmaps, const Task& task,
                    std::span<const DistanceField> fields, CostKind kind);

/// Task plus its precomputed distance fields, shared read-only by every
/// rollout of a planning call.
class TaskCost {
 public:
  TaskCost(Task task, int height, int width);

  const Task& task() const { return task_; }
  std::span<const DistanceField> fields() const { return fields_; }
  double operator()(std::span<const std::vector<ProbMap>> probmaps, CostKind kind) const {
    return horizon_cost(probmaps, task_, fields_, kind);
  }

 private:
  Task task_;
  std::vector<DistanceField> fields_;
};

}  // namespace vismpc
