#pragma once

// Random kernels, masks and frames shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "vismpc/core.hpp"
#include "vismpc/predictor.hpp"
#include "vismpc/rng.hpp"

namespace vismpc::testing {

inline Kernel random_kernel(int side, Rng& rng, double sparsity = 0.0) {
  Kernel k(side);
  double s = 0.0;
  for (double& v : k.data()) {
    v = rng.uniform() < sparsity ? 0.0 : rng.uniform();
    s += v;
  }
  if (s == 0.0) return Kernel::identity(side);
  for (double& v : k.data()) v /= s;
  return k;
}

inline KernelSet random_kernels(int n, int side, Rng& rng, double sparsity = 0.0) {
  std::vector<Kernel> ks;
  for (int i = 0; i < n; ++i) ks.push_back(random_kernel(side, rng, sparsity));
  return KernelSet(std::move(ks));
}

inline MaskSet random_masks(int m, int h, int w, Rng& rng) {
  MaskSet ms(m, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += (ms.at(i, x, y) = rng.uniform() + 1e-3);
      for (int i = 0; i < m; ++i) ms.at(i, x, y) /= s;
    }
  }
  return ms;
}

inline MaskSet constant_masks(std::vector<double> weights, int h, int w) {
  MaskSet ms(static_cast<int>(weights.size()), h, w);
  for (int i = 0; i < ms.count(); ++i) {
    for (double& v : ms.mask(i)) v = weights[static_cast<std::size_t>(i)];
  }
  return ms;
}

inline Frame random_frame(int h, int w, int c, Rng& rng) {
  Frame f(h, w, c);
  for (double& v : f.data()) v = rng.uniform();
  return f;
}

inline ProbMap random_probmap(int h, int w, Rng& rng, double sparsity = 0.0) {
  ProbMap p(h, w);
  double s = 0.0;
  for (double& v : p.data()) {
    v = rng.uniform() < sparsity ? 0.0 : rng.uniform();
    s += v;
  }
  if (s == 0.0) return one_hot_probmap(w / 2, h / 2, h, w);
  for (double& v : p.data()) v /= s;
  return p;
}

inline PredictorOutput random_output(PredictorMode mode, int n, int side, int h, int w, Rng& rng) {
  PredictorOutput out;
  out.mode = mode;
  out.kernels = random_kernels(n, side, rng);
  out.masks = random_masks(mode == PredictorMode::Sna ? n + 1 : n, h, w, rng);
  return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace vismpc::testing

#include "vismpc/sim2d.hpp"

namespace vismpc::testing {

/// Mean absolute error between two frames, skipping pixels within 1 px
/// (3x3 neighbourhood) of a boundary that involves a moving entity in
/// either label map. `moving[id]` flags the moving label ids; empty means
/// every boundary counts.
inline double mae_outside_band(const Frame& a, const Frame& b, const sim::LabelMap& la, const sim::LabelMap& lb,
                               const std::vector<bool>& moving = {}) {
  const int h = a.height(), w = a.width();
  auto flagged = [&](int id) {
    return moving.empty() || (id >= 0 && static_cast<std::size_t>(id) < moving.size() && moving[id]);
  };
  auto near_boundary = [&](const sim::LabelMap& lm, int x, int y) {
    const int here = lm.at(x, y);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = std::clamp(x + dx, 0, w - 1), ny = std::clamp(y + dy, 0, h - 1);
        const int there = lm.at(nx, ny);
        if (there != here && (flagged(here) || flagged(there))) return true;
      }
    }
    return false;
  };
  double s = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (near_boundary(la, x, y) || near_boundary(lb, x, y)) continue;
      for (int c = 0; c < a.channels(); ++c) s += std::abs(a.at(c, x, y) - b.at(c, x, y));
      n += static_cast<std::size_t>(a.channels());
    }
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

/// Label ids whose entity changed between two states (objects by pose, the
/// arm by position or lift state). The table never moves.
inline std::vector<bool> moving_labels(const sim::Simulator& sim, const sim::WorldState& s,
                                       const sim::WorldState& next) {
  std::vector<bool> m(static_cast<std::size_t>(sim.arm_label()) + 1, false);
  for (int i = 0; i < sim.object_count(); ++i) {
    m[static_cast<std::size_t>(i) + 1] = !(s.poses[static_cast<std::size_t>(i)] == next.poses[static_cast<std::size_t>(i)]);
  }
  m[static_cast<std::size_t>(sim.arm_label())] =
      !(s.arm == next.arm) || (s.lift_remaining > 0) != (next.lift_remaining > 0);
  return m;
}

}  // namespace vismpc::testing
