#pragma once

// Low-level compositing and advection loops.
//
// Two implementations are kept side by side:
//  * serial::   straightforward full-frame loops; the reference used by tests.
//  * parallel:: OpenMP row-parallel loops that skip zero kernel taps and, for
//               probability maps, restrict work to the dilated support of the
//               input mass.
// Both compute the same quantities; tests pin the agreement to 1e-12.
//
// Channel layout for compositing: the first `transform_count` masks pair with
// kernels [0, transform_count). When a skip image is supplied, mask
// `transform_count` weights it; with `transform_skip` set, the skip image is
// first correlated with kernel `transform_count`.

#include <span>

#include "vismpc/core.hpp"

namespace vismpc::kernels {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Window {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  bool empty() const { return x0 >= x1 || y0 >= y1; }
};

/// Bounding box of strictly positive entries (empty window if none).
Window support(std::span<const double> plane, int height, int width);

struct SkipInput {
  std::span<const double> image;  // one plane of the skip image
  bool transform = false;
};

namespace serial {

/// out = in correlated with k, zero padding outside the plane.
void correlate(std::span<const double> in, int height, int width, const Kernel& k, std::span<double> out);

/// out = sum_i (in * k_i) M_i [+ skip * M_skip], for one plane.
void composite_plane(std::span<const double> in, int height, int width, const KernelSet& kernels,
                     const MaskSet& masks, int transform_count, const SkipInput* skip, std::span<double> out);

}  // namespace serial

namespace parallel {

void correlate(std::span<const double> in, int height, int width, const Kernel& k, std::span<double> out);

void composite_plane(std::span<const double> in, int height, int width, const KernelSet& kernels,
                     const MaskSet& masks, int transform_count, const SkipInput* skip, std::span<double> out);

/// composite_plane specialised for sparse probability maps: only the
/// support of `in` (and of the skip map) dilated by the kernel reach is
/// evaluated; everything else is written as 0.
void advect_plane(std::span<const double> in, int height, int width, const KernelSet& kernels,
                  const MaskSet& masks, int transform_count, const SkipInput* skip, std::span<double> out);

}  // namespace parallel

}  // namespace vismpc::kernels
