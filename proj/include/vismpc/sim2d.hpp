#pragma once

// Top-down 2D pushing world: a disc-shaped end-effector that can be lifted
// off the table, rigid disc/rectangle objects moved by quasi-static overlap
// projection, and a painter's-order renderer.

#include <array>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "vismpc/core.hpp"
#include "vismpc/rng.hpp"

namespace vismpc::sim {

using Color = std::array<double, 3>;

struct Disc {
  double radius = 4.0;
};

struct Rect {
  double width = 6.0;
  double height = 6.0;
};

using Shape = std::variant<Disc, Rect>;

struct ObjectSpec {
  Shape shape = Disc{};
  Color color{0.8, 0.2, 0.2};
  double mass_class = 1.0;  // > 0; pushes are scaled by 1 / mass_class
};

struct Pose {
  Vec2 center;
  double angle = 0.0;  // radians, rectangles only
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct WorldConfig {
  int height = 64;
  int width = 64;
  double arm_radius = 4.0;
  ActionLimits limits;
  Color background{0.82, 0.80, 0.74};
  Color arm_color{0.15, 0.15, 0.18};
  Color raised_color{0.95, 0.85, 0.20};  // 1 px ring drawn while airborne
};

struct WorldState {
  Vec2 arm;
  int lift_remaining = 0;
  std::vector<Pose> poses;  // parallel to Simulator::objects()
  int time = 0;
  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Per-pixel id of the topmost entity: 0 table, 1..n objects, n+1 arm.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::int16_t> ids;
  std::int16_t at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
};

/// Binds a designated pixel to an object-local point (or to the table).
struct Attachment {
  int object = -1;  // -1: fixed table point stored in `offset`
  Vec2 offset;
};

struct TrajectoryRecord {
  std::vector<ObjectSpec> objects;
  std::vector<Frame> frames;
  std::vector<Action> actions;
  std::vector<WorldState> states;
};

class Simulator {
 public:
  /// Throws InvalidConfig when an object is too small or cannot fit the frame.
  Simulator(WorldConfig cfg, std::vector<ObjectSpec> objects);

  const WorldConfig& config() const { return cfg_; }
  const std::vector<ObjectSpec>& objects() const { return objects_; }
  int object_count() const { return static_cast<int>(objects_.size()); }
  int arm_label() const { return object_count() + 1; }

  /// Advances one control step. Inputs are clamped; never throws.
  WorldState step(const WorldState& s, const Action& a) const;

  Frame render(const WorldState& s) const;
  LabelMap labels(const WorldState& s) const;

  Attachment attach(const WorldState& s, Coord pixel) const;
  /// Current frame coordinate of an attached point. Throws ObjectGone.
  Vec2 true_pixel_position(const WorldState& s, const Attachment& att) const;

  /// Moves the state's objects into the frame and checks the arm position.
  WorldState clamped(WorldState s) const;
  bool inside_frame(const WorldState& s) const;

  bool contains(int object, const Pose& pose, Vec2 p) const;
  bool arm_overlaps(Vec2 arm, int object, const Pose& pose) const;
  bool objects_overlap(int a, const Pose& pa, int b, const Pose& pb) const;

  /// Smallest t >= 0 such that `object` translated by t*u no longer overlaps
  /// the arm disc at `arm`. `u` must be a unit vector.
  double arm_push_distance(Vec2 arm, int object, const Pose& pose, Vec2 u) const;
  double object_push_distance(int pusher, const Pose& pp, int pushed, const Pose& pose, Vec2 u) const;

  /// Half extents of the axis-aligned bounding box.
  Vec2 half_extents(int object, const Pose& pose) const;

 private:
  Pose clamp_pose(int object, Pose p) const;

  WorldConfig cfg_;
  std::vector<ObjectSpec> objects_;
};

/// A self-contained scene: simulator plus initial state.
struct Scene {
  WorldConfig config;
  std::vector<ObjectSpec> objects;
  WorldState initial;
};

using SceneSampler = std::function<Scene(Rng&)>;

/// Default sampler for self-supervised collection: 1-3 random objects, arm
/// often started next to one of them.
Scene random_scene(const WorldConfig& cfg, Rng& rng, double disc_probability = 0.6);

/// Fully saturated colour for a hue in [0, 1); keeps objects distinct from
/// the table and the arm.
Color saturated_color(double hue);

struct CollectionConfig {
  double lift_probability = 0.15;
};

/// Random pushing episodes: dx, dy ~ U[-a_max, a_max]; lift = 0 with
/// probability 1 - lift_probability, else uniform over 1..L-1.
Action random_action(const ActionLimits& lim, Rng& rng, const CollectionConfig& cc = {});

std::vector<TrajectoryRecord> collect_random_trajectories(int n, int length, const SceneSampler& sampler,
                                                          RngSeed seed, const CollectionConfig& cc = {});

}  // namespace vismpc::sim
