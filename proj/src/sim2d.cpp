#include "vismpc/sim2d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vismpc::sim {

namespace {

constexpr double kMinExtent = 2.0;

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Corners of a rectangle, counter-clockwise in a y-down frame.
std::array<Vec2, 4> corners(const Rect& r, const Pose& p) {
  const double hx = r.width / 2.0;
  const double hy = r.height / 2.0;
  return {p.center + rotate({-hx, -hy}, p.angle), p.center + rotate({hx, -hy}, p.angle),
          p.center + rotate({hx, hy}, p.angle), p.center + rotate({-hx, hy}, p.angle)};
}

// Distance from a point to a (filled) rotated rectangle; 0 inside.
double point_rect_distance(Vec2 q, const Rect& r, const Pose& p) {
  const Vec2 local = rotate(q - p.center, -p.angle);
  const double dx = std::max(std::abs(local.x) - r.width / 2.0, 0.0);
  const double dy = std::max(std::abs(local.y) - r.height / 2.0, 0.0);
  return std::hypot(dx, dy);
}

bool rects_overlap(const Rect& a, const Pose& pa, const Rect& b, const Pose& pb) {
  const auto ca = corners(a, pa);
  const auto cb = corners(b, pb);
  const std::array<Vec2, 4> axes{rotate({1, 0}, pa.angle), rotate({0, 1}, pa.angle), rotate({1, 0}, pb.angle),
                                 rotate({0, 1}, pb.angle)};
  for (const auto& ax : axes) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const auto& c : ca) {
      amin = std::min(amin, c.dot(ax));
      amax = std::max(amax, c.dot(ax));
    }
    for (const auto& c : cb) {
      bmin = std::min(bmin, c.dot(ax));
      bmax = std::max(bmax, c.dot(ax));
    }
    if (amax <= bmin || bmax <= amin) return false;
  }
  return true;
}

bool disc_overlaps_shape(Vec2 c, double radius, const Shape& shape, const Pose& pose) {
  if (const auto* d = std::get_if<Disc>(&shape)) return (c - pose.center).norm() < radius + d->radius;
  return point_rect_distance(c, std::get<Rect>(shape), pose) < radius;
}

// Upper end of the overlap interval along +u; `overlaps(t)` is true at t = 0
// and the overlap set along a ray is an interval because both bodies are convex.
template <typename Overlaps>
double separation_distance(Overlaps overlaps) {
  if (!overlaps(0.0)) return 0.0;
  double hi = 1.0;
  while (overlaps(hi) && hi < 1e4) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (overlaps(mid) ? lo : hi) = mid;
  }
  return hi;
}

// Closed form for two discs with centers separated by w = pushed - pusher.
double disc_disc_push(Vec2 w, double rsum, Vec2 u) {
  if (w.norm() >= rsum) return 0.0;
  const double b = w.dot(u);
  const double disc = b * b - w.dot(w) + rsum * rsum;
  return std::max(0.0, -b + std::sqrt(std::max(disc, 0.0)));
}

}  // namespace

Simulator::Simulator(WorldConfig cfg, std::vector<ObjectSpec> objects) : cfg_(cfg), objects_(std::move(objects)) {
  if (cfg_.height < Frame::kMinSide || cfg_.width < Frame::kMinSide) {
    throw Error(Errc::InvalidConfig, "world must be at least 8x8 pixels");
  }
  if (cfg_.limits.lift_levels < 1 || !(cfg_.limits.a_max > 0.0)) {
    throw Error(Errc::InvalidConfig, "invalid action limits");
  }
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const auto& o = objects_[i];
    if (!(o.mass_class > 0.0)) throw Error(Errc::InvalidConfig, "object mass_class must be > 0");
    for (double c : o.color) {
      if (!(c >= 0.0 && c <= 1.0)) throw Error(Errc::InvalidConfig, "object color outside [0,1]");
    }
    double extent = 0.0;
    double span = 0.0;
    if (const auto* d = std::get_if<Disc>(&o.shape)) {
      extent = d->radius;
      span = 2.0 * d->radius;
    } else {
      const auto& r = std::get<Rect>(o.shape);
      extent = std::min(r.width, r.height);
      span = std::hypot(r.width, r.height);
    }
    if (extent < kMinExtent) throw Error(Errc::InvalidConfig, "object " + std::to_string(i) + " smaller than 2 px");
    if (span > std::min(cfg_.width, cfg_.height) - 1) {
      throw Error(Errc::InvalidConfig, "object " + std::to_string(i) + " does not fit the frame");
    }
  }
}

Vec2 Simulator::half_extents(int object, const Pose& pose) const {
  const auto& shape = objects_[static_cast<std::size_t>(object)].shape;
  if (const auto* d = std::get_if<Disc>(&shape)) return {d->radius, d->radius};
  const auto& r = std::get<Rect>(shape);
  const double c = std::abs(std::cos(pose.angle));
  const double s = std::abs(std::sin(pose.angle));
  return {c * r.width / 2.0 + s * r.height / 2.0, s * r.width / 2.0 + c * r.height / 2.0};
}

Pose Simulator::clamp_pose(int object, Pose p) const {
  const Vec2 he = half_extents(object, p);
  p.center.x = std::clamp(p.center.x, he.x, cfg_.width - 1 - he.x);
  p.center.y = std::clamp(p.center.y, he.y, cfg_.height - 1 - he.y);
  return p;
}

WorldState Simulator::clamped(WorldState s) const {
  s.arm.x = std::clamp(s.arm.x, 0.0, cfg_.width - 1.0);
  s.arm.y = std::clamp(s.arm.y, 0.0, cfg_.height - 1.0);
  for (int i = 0; i < object_count(); ++i) {
    s.poses[static_cast<std::size_t>(i)] = clamp_pose(i, s.poses[static_cast<std::size_t>(i)]);
  }
  return s;
}

bool Simulator::inside_frame(const WorldState& s) const {
  if (s.arm.x < 0 || s.arm.x > cfg_.width - 1 || s.arm.y < 0 || s.arm.y > cfg_.height - 1) return false;
  for (int i = 0; i < object_count(); ++i) {
    const auto& p = s.poses[static_cast<std::size_t>(i)];
    const Vec2 he = half_extents(i, p);
    const double eps = 1e-9;
    if (p.center.x < he.x - eps || p.center.x > cfg_.width - 1 - he.x + eps) return false;
    if (p.center.y < he.y - eps || p.center.y > cfg_.height - 1 - he.y + eps) return false;
  }
  return true;
}

bool Simulator::contains(int object, const Pose& pose, Vec2 q) const {
  const auto& shape = objects_[static_cast<std::size_t>(object)].shape;
  if (const auto* d = std::get_if<Disc>(&shape)) {
    const Vec2 w = q - pose.center;
    return w.dot(w) <= d->radius * d->radius;
  }
  const auto& r = std::get<Rect>(shape);
  const Vec2 local = rotate(q - pose.center, -pose.angle);
  return std::abs(local.x) <= r.width / 2.0 && std::abs(local.y) <= r.height / 2.0;
}

bool Simulator::arm_overlaps(Vec2 arm, int object, const Pose& pose) const {
  return disc_overlaps_shape(arm, cfg_.arm_radius, objects_[static_cast<std::size_t>(object)].shape, pose);
}

bool Simulator::objects_overlap(int a, const Pose& pa, int b, const Pose& pb) const {
  const auto& sa = objects_[static_cast<std::size_t>(a)].shape;
  const auto& sb = objects_[static_cast<std::size_t>(b)].shape;
  if (const auto* da = std::get_if<Disc>(&sa)) return disc_overlaps_shape(pa.center, da->radius, sb, pb);
  if (const auto* db = std::get_if<Disc>(&sb)) return disc_overlaps_shape(pb.center, db->radius, sa, pa);
  return rects_overlap(std::get<Rect>(sa), pa, std::get<Rect>(sb), pb);
}

double Simulator::arm_push_distance(Vec2 arm, int object, const Pose& pose, Vec2 u) const {
  const auto& shape = objects_[static_cast<std::size_t>(object)].shape;
  if (const auto* d = std::get_if<Disc>(&shape)) return disc_disc_push(pose.center - arm, cfg_.arm_radius + d->radius, u);
  return separation_distance([&](double t) {
    Pose moved = pose;
    moved.center = pose.center + u * t;
    return arm_overlaps(arm, object, moved);
  });
}

double Simulator::object_push_distance(int pusher, const Pose& pp, int pushed, const Pose& pose, Vec2 u) const {
  const auto* da = std::get_if<Disc>(&objects_[static_cast<std::size_t>(pusher)].shape);
  const auto* db = std::get_if<Disc>(&objects_[static_cast<std::size_t>(pushed)].shape);
  if (da != nullptr && db != nullptr) return disc_disc_push(pose.center - pp.center, da->radius + db->radius, u);
  return separation_distance([&](double t) {
    Pose moved = pose;
    moved.center = pose.center + u * t;
    return objects_overlap(pusher, pp, pushed, moved);
  });
}

WorldState Simulator::step(const WorldState& s, const Action& raw) const {
  const Action a = clamp_action(raw, cfg_.limits);
  WorldState next = s;
  next.time = s.time + 1;
  const bool airborne = a.lift > 0 || s.lift_remaining > 0;
  next.lift_remaining = a.lift > 0 ? a.lift : std::max(s.lift_remaining - 1, 0);

  next.arm.x = std::clamp(s.arm.x + a.dx, 0.0, cfg_.width - 1.0);
  next.arm.y = std::clamp(s.arm.y + a.dy, 0.0, cfg_.height - 1.0);
  const Vec2 motion = next.arm - s.arm;
  const double reach = motion.norm();
  if (airborne || reach == 0.0) return next;

  const Vec2 u = motion * (1.0 / reach);
  const int n = object_count();
  std::vector<Vec2> moved(static_cast<std::size_t>(n));

  // Arm contacts. The arm cannot tunnel through an object in one step (step
  // length <= a_max*sqrt(2) is below every arm+object diameter), so testing
  // the final disc covers the swept one.
  for (int i = 0; i < n; ++i) {
    auto& pose = next.poses[static_cast<std::size_t>(i)];
    if (!arm_overlaps(next.arm, i, pose)) continue;
    const double t = arm_push_distance(next.arm, i, pose, u) / objects_[static_cast<std::size_t>(i)].mass_class;
    const Pose target{pose.center + u * std::min(t, reach), pose.angle};
    const Pose placed = clamp_pose(i, target);
    moved[static_cast<std::size_t>(i)] = placed.center - pose.center;
    pose = placed;
  }

  // Object-object contacts: one pass in index order, each mover pushing along
  // its own displacement direction. An object moves at most once per step, so
  // no displacement exceeds the arm's.
  for (int i = 0; i < n; ++i) {
    const Vec2 di = moved[static_cast<std::size_t>(i)];
    const double len = di.norm();
    if (len == 0.0) continue;
    const Vec2 ui = di * (1.0 / len);
    const Pose& pi = next.poses[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      if (j == i || moved[static_cast<std::size_t>(j)].norm() > 0.0) continue;
      auto& pj = next.poses[static_cast<std::size_t>(j)];
      if (!objects_overlap(i, pi, j, pj)) continue;
      const double t = object_push_distance(i, pi, j, pj, ui) / objects_[static_cast<std::size_t>(j)].mass_class;
      const Pose placed = clamp_pose(j, Pose{pj.center + ui * std::min(t, len), pj.angle});
      moved[static_cast<std::size_t>(j)] = placed.center - pj.center;
      pj = placed;
    }
  }
  return next;
}

LabelMap Simulator::labels(const WorldState& s) const {
  LabelMap lm{cfg_.height, cfg_.width, std::vector<std::int16_t>(static_cast<std::size_t>(cfg_.height) * cfg_.width, 0)};
  auto paint = [&](Vec2 center, Vec2 he, std::int16_t id, auto&& inside) {
    const int x0 = std::max(0, static_cast<int>(std::floor(center.x - he.x)));
    const int x1 = std::min(cfg_.width - 1, static_cast<int>(std::ceil(center.x + he.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(center.y - he.y)));
    const int y1 = std::min(cfg_.height - 1, static_cast<int>(std::ceil(center.y + he.y)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (inside(Vec2{static_cast<double>(x), static_cast<double>(y)})) {
          lm.ids[static_cast<std::size_t>(y) * cfg_.width + x] = id;
        }
      }
    }
  };
  for (int i = 0; i < object_count(); ++i) {
    const auto& pose = s.poses[static_cast<std::size_t>(i)];
    paint(pose.center, half_extents(i, pose), static_cast<std::int16_t>(i + 1),
          [&](Vec2 q) { return contains(i, pose, q); });
  }
  const double r = cfg_.arm_radius;
  paint(s.arm, {r, r}, static_cast<std::int16_t>(arm_label()), [&](Vec2 q) {
    const Vec2 w = q - s.arm;
    return w.dot(w) <= r * r;
  });
  return lm;
}

Frame Simulator::render(const WorldState& s) const {
  const LabelMap lm = labels(s);
  Frame f(cfg_.height, cfg_.width, 3);
  const double ring_inner = (cfg_.arm_radius - 1.0) * (cfg_.arm_radius - 1.0);
  for (int y = 0; y < cfg_.height; ++y) {
    for (int x = 0; x < cfg_.width; ++x) {
      const int id = lm.at(x, y);
      const Color* col = &cfg_.background;
      if (id == arm_label()) {
        col = &cfg_.arm_color;
        if (s.lift_remaining > 0) {
          const Vec2 w = Vec2{static_cast<double>(x), static_cast<double>(y)} - s.arm;
          if (w.dot(w) > ring_inner) col = &cfg_.raised_color;
        }
      } else if (id > 0) {
        col = &objects_[static_cast<std::size_t>(id - 1)].color;
      }
      for (int c = 0; c < 3; ++c) f.at(c, x, y) = (*col)[static_cast<std::size_t>(c)];
    }
  }
  return f;
}

Attachment Simulator::attach(const WorldState& s, Coord pixel) const {
  const Vec2 q = to_vec(pixel);
  for (int i = object_count() - 1; i >= 0; --i) {
    const auto& pose = s.poses[static_cast<std::size_t>(i)];
    if (contains(i, pose, q)) return {i, rotate(q - pose.center, -pose.angle)};
  }
  return {-1, q};
}

Vec2 Simulator::true_pixel_position(const WorldState& s, const Attachment& att) const {
  if (att.object < 0) return att.offset;
  if (att.object >= object_count() || static_cast<std::size_t>(att.object) >= s.poses.size()) {
    throw Error(Errc::ObjectGone, "attachment references object " + std::to_string(att.object));
  }
  const auto& pose = s.poses[static_cast<std::size_t>(att.object)];
  return pose.center + rotate(att.offset, pose.angle);
}

Color saturated_color(double hue) {
  hue -= std::floor(hue);
  const int sector = static_cast<int>(hue * 6.0) % 6;
  const double f = hue * 6.0 - std::floor(hue * 6.0);
  const std::array<Color, 6> wheel{Color{0.9, 0.15 + 0.7 * f, 0.15}, Color{0.85 - 0.7 * f, 0.9, 0.15},
                                   Color{0.15, 0.9, 0.15 + 0.7 * f}, Color{0.15, 0.85 - 0.7 * f, 0.9},
                                   Color{0.15 + 0.7 * f, 0.15, 0.9}, Color{0.9, 0.15, 0.85 - 0.7 * f}};
  return wheel[static_cast<std::size_t>(sector)];
}

Scene random_scene(const WorldConfig& cfg, Rng& rng, double disc_probability) {
  Scene sc;
  sc.config = cfg;
  const int count = 1 + static_cast<int>(rng.below(3));
  const double small = std::min(cfg.width, cfg.height) / 64.0;
  for (int i = 0; i < count; ++i) {
    ObjectSpec spec;
    if (rng.uniform() < disc_probability) {
      spec.shape = Disc{std::max(2.0, rng.uniform(3.0, 6.0) * std::max(small, 0.6))};
    } else {
      spec.shape = Rect{std::max(2.0, rng.uniform(4.0, 10.0) * std::max(small, 0.6)),
                        std::max(2.0, rng.uniform(4.0, 10.0) * std::max(small, 0.6))};
    }
    spec.color = saturated_color(rng.uniform());
    sc.objects.push_back(spec);
  }
  Simulator sim(cfg, sc.objects);
  WorldState st;
  st.poses.resize(sc.objects.size());
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      Pose p{{rng.uniform(0.0, cfg.width - 1.0), rng.uniform(0.0, cfg.height - 1.0)},
             std::holds_alternative<Rect>(sc.objects[static_cast<std::size_t>(i)].shape) ? rng.uniform(0.0, std::numbers::pi)
                                                                                       : 0.0};
      st.poses[static_cast<std::size_t>(i)] = p;
      st = sim.clamped(st);
      bool clear = true;
      for (int j = 0; j < i; ++j) {
        if (sim.objects_overlap(i, st.poses[static_cast<std::size_t>(i)], j, st.poses[static_cast<std::size_t>(j)])) clear = false;
      }
      if (clear) break;
    }
  }
  // Start the arm close to an object most of the time so random motion
  // produces contacts.
  for (int attempt = 0; attempt < 200; ++attempt) {
    Vec2 arm;
    if (rng.uniform() < 0.7) {
      const auto& target = st.poses[rng.below(sc.objects.size())];
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double dist = cfg.arm_radius + rng.uniform(4.0, 10.0) * std::max(small, 0.6);
      arm = target.center + Vec2{std::cos(ang), std::sin(ang)} * dist;
    } else {
      arm = {rng.uniform(0.0, cfg.width - 1.0), rng.uniform(0.0, cfg.height - 1.0)};
    }
    arm.x = std::clamp(arm.x, 0.0, cfg.width - 1.0);
    arm.y = std::clamp(arm.y, 0.0, cfg.height - 1.0);
    bool clear = true;
    for (int i = 0; i < count; ++i) {
      if (sim.arm_overlaps(arm, i, st.poses[static_cast<std::size_t>(i)])) clear = false;
    }
    st.arm = arm;
    if (clear) break;
  }
  sc.initial = st;
  return sc;
}

Action random_action(const ActionLimits& lim, Rng& rng, const CollectionConfig& cc) {
  Action a;
  a.dx = rng.uniform(-lim.a_max, lim.a_max);
  a.dy = rng.uniform(-lim.a_max, lim.a_max);
  if (lim.lift_levels > 1 && rng.uniform() < cc.lift_probability) {
    a.lift = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(lim.lift_levels - 1)));
  }
  return a;
}

std::vector<TrajectoryRecord> collect_random_trajectories(int n, int length, const SceneSampler& sampler,
                                                          RngSeed seed, const CollectionConfig& cc) {
  if (n < 1 || length < 1) throw Error(Errc::InvalidConfig, "collection needs n >= 1 and length >= 1");
  std::vector<TrajectoryRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed.seed, static_cast<std::uint64_t>(k)));
    Scene sc = sampler(rng);
    Simulator sim(sc.config, sc.objects);
    TrajectoryRecord rec;
    rec.objects = sc.objects;
    WorldState s = sim.clamped(sc.initial);
    rec.states.push_back(s);
    rec.frames.push_back(sim.render(s));
    for (int t = 0; t < length; ++t) {
      const Action a = random_action(sc.config.limits, rng, cc);
      s = sim.step(s, a);
      rec.actions.push_back(a);
      rec.states.push_back(s);
      rec.frames.push_back(sim.render(s));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace vismpc::sim
