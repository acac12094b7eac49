#include "vismpc/kernels.hpp"

#include <algorithm>
#include <vector>

namespace vismpc::kernels {

namespace {

struct Tap {
  int ox;
  int oy;
  double w;
};

std::vector<Tap> taps_of(const Kernel& k) {
  std::vector<Tap> taps;
  const int r = k.radius();
  for (int i = 0; i < k.side(); ++i) {
    for (int j = 0; j < k.side(); ++j) {
      if (k.at(i, j) != 0.0) taps.push_back({j - r, i - r, k.at(i, j)});
    }
  }
  return taps;
}

int reach_of(const std::vector<Tap>& taps) {
  int r = 0;
  for (const auto& t : taps) r = std::max({r, std::abs(t.ox), std::abs(t.oy)});
  return r;
}

// Accumulates (in * taps)(y, x) for x in [xa, xb) into row[x].
void correlate_row(std::span<const double> in, int height, int width, const std::vector<Tap>& taps, int y, int xa,
                   int xb, double* row) {
  for (const auto& t : taps) {
    const int sy = y + t.oy;
    if (sy < 0 || sy >= height) continue;
    const int xs = std::max(xa, -t.ox);
    const int xe = std::min(xb, width - t.ox);
    const double* src = in.data() + static_cast<std::size_t>(sy) * width + t.ox;
    for (int x = xs; x < xe; ++x) row[x] += t.w * src[x];
  }
}

constexpr std::size_t kParallelThreshold = 4096;

}  // namespace

Window support(std::span<const double> plane, int height, int width) {
  Window win{width, height, 0, 0};
  for (int y = 0; y < height; ++y) {
    const double* row = plane.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      if (row[x] > 0.0) {
        win.x0 = std::min(win.x0, x);
        win.x1 = std::max(win.x1, x + 1);
        win.y0 = std::min(win.y0, y);
        win.y1 = std::max(win.y1, y + 1);
      }
    }
  }
  if (win.x1 == 0) return Window{};
  return win;
}

namespace serial {

void correlate(std::span<const double> in, int height, int width, const Kernel& k, std::span<double> out) {
  const int r = k.radius();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k.side(); ++i) {
        for (int j = 0; j < k.side(); ++j) {
          const int sx = x + j - r;
          const int sy = y + i - r;
          if (sx < 0 || sx >= width || sy < 0 || sy >= height) continue;
          acc += k.at(i, j) * in[static_cast<std::size_t>(sy) * width + sx];
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
}

void composite_plane(std::span<const double> in, int height, int width, const KernelSet& kernels,
                     const MaskSet& masks, int transform_count, const SkipInput* skip, std::span<double> out) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  std::vector<double> tmp(n);
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < transform_count; ++i) {
    correlate(in, height, width, kernels[i], tmp);
    const auto m = masks.mask(i);
    for (std::size_t p = 0; p < n; ++p) out[p] += tmp[p] * m[p];
  }
  if (skip != nullptr) {
    std::span<const double> src = skip->image;
    if (skip->transform) {
      correlate(skip->image, height, width, kernels[transform_count], tmp);
      src = tmp;
    }
    const auto m = masks.mask(transform_count);
    for (std::size_t p = 0; p < n; ++p) out[p] += src[p] * m[p];
  }
}

}  // namespace serial

namespace parallel {

void correlate(std::span<const double> in, int height, int width, const Kernel& k, std::span<double> out) {
  const auto taps = taps_of(k);
  std::fill(out.begin(), out.end(), 0.0);
#pragma omp parallel for schedule(static) if (out.size() >= kParallelThreshold)
  for (int y = 0; y < height; ++y) {
    correlate_row(in, height, width, taps, y, 0, width, out.data() + static_cast<std::size_t>(y) * width);
  }
}

namespace {

void composite_window(std::span<const double> in, int height, int width, const std::vector<std::vector<Tap>>& taps,
                      const MaskSet& masks, int first_mask, Window win, std::span<double> out) {
  const std::size_t work = static_cast<std::size_t>(win.y1 - win.y0) * (win.x1 - win.x0);
#pragma omp parallel if (work >= kParallelThreshold)
  {
    std::vector<double> row(static_cast<std::size_t>(width));
#pragma omp for schedule(static)
    for (int y = win.y0; y < win.y1; ++y) {
      const std::size_t base = static_cast<std::size_t>(y) * width;
      for (std::size_t i = 0; i < taps.size(); ++i) {
        std::fill(row.begin() + win.x0, row.begin() + win.x1, 0.0);
        correlate_row(in, height, width, taps[i], y, win.x0, win.x1, row.data());
        const double* m = masks.mask(first_mask + static_cast<int>(i)).data() + base;
        double* o = out.data() + base;
        for (int x = win.x0; x < win.x1; ++x) o[x] += row[x] * m[x];
      }
    }
  }
}

void add_skip(const SkipInput& skip, int height, int width, const KernelSet& kernels, const MaskSet& masks,
              int transform_count, Window win, std::span<double> out) {
  if (skip.transform) {
    const std::vector<std::vector<Tap>> taps{taps_of(kernels[transform_count])};
    composite_window(skip.image, height, width, taps, masks, transform_count, win, out);
    return;
  }
  const auto m = masks.mask(transform_count);
  for (int y = win.y0; y < win.y1; ++y) {
    const std::size_t base = static_cast<std::size_t>(y) * width;
    for (int x = win.x0; x < win.x1; ++x) out[base + x] += skip.image[base + x] * m[base + x];
  }
}

Window dilate(Window w, int r, int height, int width) {
  if (w.empty()) return w;
  return {std::max(0, w.x0 - r), std::max(0, w.y0 - r), std::min(width, w.x1 + r), std::min(height, w.y1 + r)};
}

}  // namespace

void composite_plane(std::span<const double> in, int height, int width, const KernelSet& kernels,
                     const MaskSet& masks, int transform_count, const SkipInput* skip, std::span<double> out) {
  std::vector<std::vector<Tap>> taps;
  taps.reserve(static_cast<std::size_t>(transform_count));
  for (int i = 0; i < transform_count; ++i) taps.push_back(taps_of(kernels[i]));
  std::fill(out.begin(), out.end(), 0.0);
  const Window full{0, 0, width, height};
  composite_window(in, height, width, taps, masks, 0, full, out);
  if (skip != nullptr) add_skip(*skip, height, width, kernels, masks, transform_count, full, out);
}

void advect_plane(std::span<const double> in, int height, int width, const KernelSet& kernels,
                  const MaskSet& masks, int transform_count, const SkipInput* skip, std::span<double> out) {
  std::vector<std::vector<Tap>> taps;
  int reach = 0;
  for (int i = 0; i < transform_count; ++i) {
    taps.push_back(taps_of(kernels[i]));
    reach = std::max(reach, reach_of(taps.back()));
  }
  std::fill(out.begin(), out.end(), 0.0);
  const Window win = dilate(support(in, height, width), reach, height, width);
  if (!win.empty()) composite_window(in, height, width, taps, masks, 0, win, out);
  if (skip != nullptr) {
    const int skip_reach = skip->transform ? reach_of(taps_of(kernels[transform_count])) : 0;
    const Window swin = dilate(support(skip->image, height, width), skip_reach, height, width);
    if (!swin.empty()) add_skip(*skip, height, width, kernels, masks, transform_count, swin, out);
  }
}

}  // namespace parallel

}  // namespace vismpc::kernels
