#include <doctest.h>

#include "support.hpp"
#include "vismpc/kernels.hpp"

using namespace vismpc;
using testing::max_abs_diff;

TEST_CASE("support finds the bounding box of positive entries") {
  std::vector<double> p(10 * 12, 0.0);
  CHECK(kernels::support(p, 10, 12).empty());
  p[3 * 12 + 4] = 0.5;
  p[7 * 12 + 9] = 0.5;
  const auto w = kernels::support(p, 10, 12);
  CHECK(w.x0 == 4);
  CHECK(w.x1 == 10);
  CHECK(w.y0 == 3);
  CHECK(w.y1 == 8);
}

TEST_CASE("serial correlation matches a direct sum") {
  Rng rng(3);
  const int h = 9, w = 11;
  std::vector<double> in(h * w);
  for (double& v : in) v = rng.uniform();
  const Kernel k = testing::random_kernel(5, rng);
  std::vector<double> out(h * w);
  kernels::serial::correlate(in, h, w, k, out);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          const int sx = x + j - 2, sy = y + i - 2;
          if (sx >= 0 && sx < w && sy >= 0 && sy < h) s += k.at(i, j) * in[sy * w + sx];
        }
      }
      CHECK(out[y * w + x] == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("parallel kernels agree with the serial reference") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = 8 + static_cast<int>(rng.below(40));
    const int w = 8 + static_cast<int>(rng.below(40));
    const int n = 1 + static_cast<int>(rng.below(4));
    const int side = 2 * static_cast<int>(rng.below(5)) + 1;
    const bool with_skip = rng.uniform() < 0.5;
    const bool transform_skip = with_skip && rng.uniform() < 0.5;
    const KernelSet ks = testing::random_kernels(n + (transform_skip ? 1 : 0), side, rng, 0.6);
    const MaskSet ms = testing::random_masks(n + (with_skip ? 1 : 0), h, w, rng);

    std::vector<double> img(h * w);
    for (double& v : img) v = rng.uniform();
    const ProbMap sparse = testing::random_probmap(h, w, rng, 0.97);
    const ProbMap first = one_hot_probmap(static_cast<int>(rng.below(w)), static_cast<int>(rng.below(h)), h, w);
    const kernels::SkipInput skip_img{img, transform_skip};
    const kernels::SkipInput skip_map{first.data(), transform_skip};

    std::vector<double> a(h * w), b(h * w);
    kernels::serial::correlate(img, h, w, ks[0], a);
    kernels::parallel::correlate(img, h, w, ks[0], b);
    CHECK(max_abs_diff(a, b) <= 1e-12);

    kernels::serial::composite_plane(img, h, w, ks, ms, n, with_skip ? &skip_img : nullptr, a);
    kernels::parallel::composite_plane(img, h, w, ks, ms, n, with_skip ? &skip_img : nullptr, b);
    CHECK(max_abs_diff(a, b) <= 1e-12);

    kernels::serial::composite_plane(sparse.data(), h, w, ks, ms, n, with_skip ? &skip_map : nullptr, a);
    kernels::parallel::advect_plane(sparse.data(), h, w, ks, ms, n, with_skip ? &skip_map : nullptr, b);
    CHECK(max_abs_diff(a, b) <= 1e-12);
  }
}
