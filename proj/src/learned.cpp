#include "vismpc/learned.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vismpc/kernels.hpp"

namespace vismpc {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "vismpc-learned-params";

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void softmax_inplace(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : v) x /= s;
}

// Forward activations of one sample, kept for the backward pass.
struct Cache {
  int h = 0;
  int w = 0;
  std::vector<double> x;      // in_channels x HW
  std::vector<double> a1;     // hidden x HW, pre-activation
  std::vector<double> hid;    // hidden x HW
  std::vector<double> g;      // hidden
  std::vector<double> kern;   // N x K*K, softmaxed
  std::vector<double> mask;   // masks x HW, softmaxed
  std::vector<double> trans;  // N x C x HW, prev correlated with each kernel
  std::vector<double> pred;   // C x HW
};

void check_inputs(const LearnedShape& s, const Frame& prev, int ah, int aw) {
  if (prev.channels() != s.frame_channels) throw Error(Errc::ShapeMismatch, "frame channel count differs from params");
  if (ah != prev.height() || aw != prev.width()) throw Error(Errc::ShapeMismatch, "arm encoding shape differs from frame");
}

void build_input(const LearnedShape& s, const Frame& prev, const ArmMap& arm, const Action& a, Cache& c) {
  const std::size_t hw = prev.plane_size();
  c.x.assign(sz(s.in_channels()) * hw, 0.0);
  std::copy(prev.data().begin(), prev.data().end(), c.x.begin());
  std::copy(arm.data.begin(), arm.data.end(), c.x.begin() + static_cast<std::ptrdiff_t>(sz(s.frame_channels) * hw));
  const double act[3] = {a.dx / s.limits.a_max, a.dy / s.limits.a_max,
                         s.limits.lift_levels > 1 ? a.lift / (s.limits.lift_levels - 1.0) : 0.0};
  for (int k = 0; k < 3; ++k) {
    auto first = c.x.begin() + static_cast<std::ptrdiff_t>(sz(s.frame_channels + 2 + k) * hw);
    std::fill(first, first + static_cast<std::ptrdiff_t>(hw), act[k]);
  }
}

// Trunk and heads; fills everything in the cache except trans/pred.
void forward_heads(const LearnedParams& p, Cache& c) {
  const LearnedShape& s = p.shape;
  const int h = c.h;
  const int w = c.w;
  const std::size_t hw = sz(h) * sz(w);
  const int cs = s.conv_size;
  const int pad = cs / 2;
  const int cin = s.in_channels();
  const double* w1 = p.values.data() + p.w1().offset;
  const double* b1 = p.values.data() + p.b1().offset;

  c.a1.assign(sz(s.hidden) * hw, 0.0);
  for (int o = 0; o < s.hidden; ++o) {
    double* out = c.a1.data() + sz(o) * hw;
    std::fill(out, out + hw, b1[o]);
    for (int ch = 0; ch < cin; ++ch) {
      const double* in = c.x.data() + sz(ch) * hw;
      for (int i = 0; i < cs; ++i) {
        const int dy = i - pad;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int j = 0; j < cs; ++j) {
          const double wt = w1[((sz(o) * cin + ch) * cs + i) * cs + j];
          if (wt == 0.0) continue;
          const int dx = j - pad;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          for (int y = y0; y < y1; ++y) {
            double* orow = out + sz(y) * w;
            const double* irow = in + sz(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) orow[x] += wt * irow[x];
          }
        }
      }
    }
  }
  c.hid.resize(c.a1.size());
  for (std::size_t i = 0; i < c.a1.size(); ++i) c.hid[i] = c.a1[i] > 0.0 ? c.a1[i] : 0.0;

  c.g.assign(sz(s.hidden), 0.0);
  for (int o = 0; o < s.hidden; ++o) {
    double acc = 0.0;
    const double* hp = c.hid.data() + sz(o) * hw;
    for (std::size_t i = 0; i < hw; ++i) acc += hp[i];
    c.g[sz(o)] = acc / static_cast<double>(hw);
  }

  const int kk = s.kernel_size * s.kernel_size;
  const std::size_t rows = sz(s.n_kernels) * sz(kk);
  const double* wk = p.values.data() + p.wk().offset;
  const double* bk = p.values.data() + p.bk().offset;
  c.kern.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bk[r];
    for (int k = 0; k < s.hidden; ++k) acc += wk[r * sz(s.hidden) + sz(k)] * c.g[sz(k)];
    c.kern[r] = acc;
  }
  for (int n = 0; n < s.n_kernels; ++n) softmax_inplace({c.kern.data() + sz(n) * sz(kk), sz(kk)});

  const int m = s.mask_count();
  const double* wm = p.values.data() + p.wm().offset;
  const double* bm = p.values.data() + p.bm().offset;
  c.mask.assign(sz(m) * hw, 0.0);
  std::vector<double> logits(sz(m));
  for (std::size_t px = 0; px < hw; ++px) {
    for (int o = 0; o < m; ++o) {
      double acc = bm[o];
      for (int k = 0; k < s.hidden; ++k) acc += wm[sz(o) * sz(s.hidden) + sz(k)] * c.hid[sz(k) * hw + px];
      logits[sz(o)] = acc;
    }
    softmax_inplace(logits);
    for (int o = 0; o < m; ++o) c.mask[sz(o) * hw + px] = logits[sz(o)];
  }
}

Kernel kernel_at(const LearnedShape& s, const Cache& c, int n) {
  const std::size_t kk = sz(s.kernel_size) * sz(s.kernel_size);
  return Kernel(s.kernel_size, std::vector<double>(c.kern.begin() + static_cast<std::ptrdiff_t>(sz(n) * kk),
                                                   c.kern.begin() + static_cast<std::ptrdiff_t>(sz(n + 1) * kk)));
}

void composite(const LearnedShape& s, const Frame& prev, const Frame& first, Cache& c) {
  const std::size_t hw = prev.plane_size();
  const int ch = s.frame_channels;
  c.trans.assign(sz(s.n_kernels) * sz(ch) * hw, 0.0);
  c.pred.assign(sz(ch) * hw, 0.0);
  for (int n = 0; n < s.n_kernels; ++n) {
    const Kernel k = kernel_at(s, c, n);
    for (int q = 0; q < ch; ++q) {
      std::span<double> t{c.trans.data() + (sz(n) * sz(ch) + sz(q)) * hw, hw};
      kernels::serial::correlate(prev.plane(q), c.h, c.w, k, t);
      const double* mk = c.mask.data() + sz(n) * hw;
      double* out = c.pred.data() + sz(q) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[i] += mk[i] * t[i];
    }
  }
  if (s.skip) {
    const double* mk = c.mask.data() + sz(s.n_kernels) * hw;
    for (int q = 0; q < ch; ++q) {
      const auto f = first.plane(q);
      double* out = c.pred.data() + sz(q) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[i] += mk[i] * f[i];
    }
  }
}

// Runs before any parallel region so nothing throws inside one.
void check_batch(const LearnedParams& p, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw Error(Errc::ShapeMismatch, "empty batch");
  if (p.values.size() != LearnedParams::size_for(p.shape)) throw Error(Errc::ShapeMismatch, "parameter count");
  for (const auto& t : batch) {
    check_inputs(p.shape, t.prev, t.next.height(), t.next.width());
    if (t.first.height() != t.prev.height() || t.first.width() != t.prev.width() ||
        t.first.channels() != t.prev.channels() || t.next.channels() != t.prev.channels()) {
      throw Error(Errc::ShapeMismatch, "training frames differ in shape");
    }
  }
}

void run_sample(const LearnedParams& p, const TrainingSample& t, Cache& c) {
  c.h = t.prev.height();
  c.w = t.prev.width();
  build_input(p.shape, t.prev, encode_arm(t.arm, c.h, c.w), t.action, c);
  forward_heads(p, c);
  composite(p.shape, t.prev, t.first, c);
}

double sample_sse(const Cache& c, const Frame& next) {
  double acc = 0.0;
  const auto nd = next.data();
  for (std::size_t i = 0; i < c.pred.size(); ++i) {
    const double r = c.pred[i] - nd[i];
    acc += r * r;
  }
  return acc;
}

// Accumulates d(loss)/d(params) for one sample into `grad`, where
// loss contribution = scale * sum (pred - next)^2.
void backward(const LearnedParams& p, const TrainingSample& t, const Cache& c, double scale,
              std::vector<double>& grad) {
  const LearnedShape& s = p.shape;
  const int h = c.h;
  const int w = c.w;
  const std::size_t hw = sz(h) * sz(w);
  const int ch = s.frame_channels;
  const int n_k = s.n_kernels;
  const int m = s.mask_count();
  const int ks = s.kernel_size;
  const int r = ks / 2;
  const int kk = ks * ks;
  const int hid = s.hidden;

  std::vector<double> dpred(c.pred.size());
  const auto nd = t.next.data();
  for (std::size_t i = 0; i < dpred.size(); ++i) dpred[i] = 2.0 * scale * (c.pred[i] - nd[i]);

  // Compositing -> masks and kernels.
  std::vector<double> dmask(sz(m) * hw, 0.0);
  std::vector<double> dkern(sz(n_k) * sz(kk), 0.0);
  std::vector<double> gm(hw);
  for (int n = 0; n < n_k; ++n) {
    double* dm = dmask.data() + sz(n) * hw;
    const double* mk = c.mask.data() + sz(n) * hw;
    for (int q = 0; q < ch; ++q) {
      const double* tr = c.trans.data() + (sz(n) * sz(ch) + sz(q)) * hw;
      const double* dp = dpred.data() + sz(q) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        dm[i] += dp[i] * tr[i];
        gm[i] = dp[i] * mk[i];
      }
      const auto pv = t.prev.plane(q);
      for (int i = 0; i < ks; ++i) {
        const int dy = i - r;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int j = 0; j < ks; ++j) {
          const int dx = j - r;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = gm.data() + sz(y) * sz(w);
            const double* prow = pv.data() + sz(y + dy) * sz(w) + dx;
            for (int x = x0; x < x1; ++x) acc += grow[x] * prow[x];
          }
          dkern[sz(n) * sz(kk) + sz(i) * sz(ks) + sz(j)] += acc;
        }
      }
    }
  }
  if (s.skip) {
    double* dm = dmask.data() + sz(n_k) * hw;
    for (int q = 0; q < ch; ++q) {
      const auto f = t.first.plane(q);
      const double* dp = dpred.data() + sz(q) * hw;
      for (std::size_t i = 0; i < hw; ++i) dm[i] += dp[i] * f[i];
    }
  }

  // Softmax heads.
  std::vector<double> dml(sz(m) * hw);
  for (std::size_t px = 0; px < hw; ++px) {
    double dot = 0.0;
    for (int o = 0; o < m; ++o) dot += c.mask[sz(o) * hw + px] * dmask[sz(o) * hw + px];
    for (int o = 0; o < m; ++o) {
      dml[sz(o) * hw + px] = c.mask[sz(o) * hw + px] * (dmask[sz(o) * hw + px] - dot);
    }
  }
  std::vector<double> dkl(dkern.size());
  for (int n = 0; n < n_k; ++n) {
    const std::size_t base = sz(n) * sz(kk);
    double dot = 0.0;
    for (int i = 0; i < kk; ++i) dot += c.kern[base + sz(i)] * dkern[base + sz(i)];
    for (int i = 0; i < kk; ++i) dkl[base + sz(i)] = c.kern[base + sz(i)] * (dkern[base + sz(i)] - dot);
  }

  // Kernel head.
  const double* wk = p.values.data() + p.wk().offset;
  double* gwk = grad.data() + p.wk().offset;
  double* gbk = grad.data() + p.bk().offset;
  std::vector<double> dg(sz(hid), 0.0);
  for (std::size_t row = 0; row < dkl.size(); ++row) {
    gbk[row] += dkl[row];
    for (int k = 0; k < hid; ++k) {
      gwk[row * sz(hid) + sz(k)] += dkl[row] * c.g[sz(k)];
      dg[sz(k)] += wk[row * sz(hid) + sz(k)] * dkl[row];
    }
  }

  // Mask head.
  const double* wm = p.values.data() + p.wm().offset;
  double* gwm = grad.data() + p.wm().offset;
  double* gbm = grad.data() + p.bm().offset;
  std::vector<double> dhid(sz(hid) * hw, 0.0);
  for (int k = 0; k < hid; ++k) {
    const double pool = dg[sz(k)] / static_cast<double>(hw);
    double* dh = dhid.data() + sz(k) * hw;
    std::fill(dh, dh + hw, pool);
  }
  for (int o = 0; o < m; ++o) {
    const double* dl = dml.data() + sz(o) * hw;
    double bsum = 0.0;
    for (std::size_t i = 0; i < hw; ++i) bsum += dl[i];
    gbm[o] += bsum;
    for (int k = 0; k < hid; ++k) {
      const double* hp = c.hid.data() + sz(k) * hw;
      double* dh = dhid.data() + sz(k) * hw;
      const double wv = wm[sz(o) * sz(hid) + sz(k)];
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        acc += dl[i] * hp[i];
        dh[i] += wv * dl[i];
      }
      gwm[sz(o) * sz(hid) + sz(k)] += acc;
    }
  }

  // Trunk.
  for (std::size_t i = 0; i < dhid.size(); ++i) {
    if (!(c.a1[i] > 0.0)) dhid[i] = 0.0;
  }
  const int cs = s.conv_size;
  const int pad = cs / 2;
  const int cin = s.in_channels();
  double* gw1 = grad.data() + p.w1().offset;
  double* gb1 = grad.data() + p.b1().offset;
  for (int o = 0; o < hid; ++o) {
    const double* da = dhid.data() + sz(o) * hw;
    double bsum = 0.0;
    for (std::size_t i = 0; i < hw; ++i) bsum += da[i];
    gb1[o] += bsum;
    for (int q = 0; q < cin; ++q) {
      const double* in = c.x.data() + sz(q) * hw;
      for (int i = 0; i < cs; ++i) {
        const int dy = i - pad;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int j = 0; j < cs; ++j) {
          const int dx = j - pad;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* drow = da + sz(y) * sz(w);
            const double* irow = in + sz(y + dy) * sz(w) + dx;
            for (int x = x0; x < x1; ++x) acc += drow[x] * irow[x];
          }
          gw1[((sz(o) * cin + q) * cs + i) * cs + j] += acc;
        }
      }
    }
  }
}

void write_f32_le(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void LearnedShape::validate() const {
  if (n_kernels < 1) throw Error(Errc::InvalidConfig, "need at least one kernel");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw Error(Errc::InvalidConfig, "kernel size must be odd");
  if (conv_size < 1 || conv_size % 2 == 0) throw Error(Errc::InvalidConfig, "conv size must be odd");
  if (frame_channels != 1 && frame_channels != 3) throw Error(Errc::InvalidConfig, "frames have 1 or 3 channels");
  if (hidden < 1) throw Error(Errc::InvalidConfig, "hidden width must be positive");
  if (limits.a_max <= 0.0 || limits.lift_levels < 1) throw Error(Errc::InvalidConfig, "invalid action limits");
}

std::size_t LearnedParams::size_for(const LearnedShape& s) {
  const std::size_t hid = sz(s.hidden);
  const std::size_t rows = sz(s.n_kernels) * sz(s.kernel_size) * sz(s.kernel_size);
  return hid * sz(s.in_channels()) * sz(s.conv_size) * sz(s.conv_size) + hid + rows * hid + rows +
         sz(s.mask_count()) * hid + sz(s.mask_count());
}

LearnedParams::Slice LearnedParams::w1() const {
  return {0, sz(shape.hidden) * sz(shape.in_channels()) * sz(shape.conv_size) * sz(shape.conv_size)};
}
LearnedParams::Slice LearnedParams::b1() const {
  const Slice a = w1();
  return {a.offset + a.count, sz(shape.hidden)};
}
LearnedParams::Slice LearnedParams::wk() const {
  const Slice a = b1();
  return {a.offset + a.count, sz(shape.n_kernels) * sz(shape.kernel_size) * sz(shape.kernel_size) * sz(shape.hidden)};
}
LearnedParams::Slice LearnedParams::bk() const {
  const Slice a = wk();
  return {a.offset + a.count, sz(shape.n_kernels) * sz(shape.kernel_size) * sz(shape.kernel_size)};
}
LearnedParams::Slice LearnedParams::wm() const {
  const Slice a = bk();
  return {a.offset + a.count, sz(shape.mask_count()) * sz(shape.hidden)};
}
LearnedParams::Slice LearnedParams::bm() const {
  const Slice a = wm();
  return {a.offset + a.count, sz(shape.mask_count())};
}

LearnedParams LearnedParams::zeros(const LearnedShape& s) {
  s.validate();
  return {s, std::vector<double>(size_for(s), 0.0)};
}

LearnedParams LearnedParams::random(const LearnedShape& s, RngSeed seed) {
  LearnedParams p = zeros(s);
  Rng rng(seed);
  auto fill = [&](Slice sl, double sd) {
    for (std::size_t i = 0; i < sl.count; ++i) p.values[sl.offset + i] = rng.normal(0.0, sd);
  };
  fill(p.w1(), std::sqrt(2.0 / (s.in_channels() * s.conv_size * s.conv_size)));
  fill(p.wk(), 0.1);
  fill(p.wm(), std::sqrt(1.0 / s.hidden));
  return p;
}

bool LearnedParams::finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ArmMap encode_arm(Vec2 arm, int height, int width) {
  ArmMap m{height, width, std::vector<double>(2 * sz(height) * sz(width))};
  const std::size_t hw = sz(height) * sz(width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      m.data[sz(y) * sz(width) + sz(x)] = (x - arm.x) / width;
      m.data[hw + sz(y) * sz(width) + sz(x)] = (y - arm.y) / height;
    }
  }
  return m;
}

PredictorOutput learned_forward(const LearnedParams& params, const Frame& prev, const ArmMap& arm_map,
                                const Action& a) {
  const LearnedShape& s = params.shape;
  if (params.values.size() != LearnedParams::size_for(s)) throw Error(Errc::ShapeMismatch, "parameter count");
  check_inputs(s, prev, arm_map.height, arm_map.width);
  if (arm_map.data.size() != 2 * prev.plane_size()) throw Error(Errc::ShapeMismatch, "arm encoding size");
  Cache c;
  c.h = prev.height();
  c.w = prev.width();
  build_input(s, prev, arm_map, a, c);
  forward_heads(params, c);

  std::vector<Kernel> ks;
  for (int n = 0; n < s.n_kernels; ++n) ks.push_back(kernel_at(s, c, n));
  const int m = s.mask_count();
  PredictorOutput out{KernelSet(std::move(ks)), MaskSet(m, c.h, c.w),
                      s.skip ? PredictorMode::Sna : PredictorMode::Dna, false};
  for (int o = 0; o < m; ++o) {
    auto dst = out.masks.mask(o);
    std::copy_n(c.mask.begin() + static_cast<std::ptrdiff_t>(sz(o) * prev.plane_size()), prev.plane_size(),
                dst.begin());
  }
  return out;
}

double learned_loss(const LearnedParams& params, std::span<const TrainingSample> batch) {
  check_batch(params, batch);
  std::vector<double> sse(batch.size());
  std::vector<double> count(batch.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(batch.size()); ++i) {
    Cache c;
    run_sample(params, batch[sz(i)], c);
    sse[sz(i)] = sample_sse(c, batch[sz(i)].next);
    count[sz(i)] = static_cast<double>(c.pred.size());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) total += sse[i] / count[i];
  return total / static_cast<double>(batch.size());
}

double learned_gradient(const LearnedParams& params, std::span<const TrainingSample> batch,
                        std::vector<double>& grad) {
  check_batch(params, batch);
  const std::size_t np = params.values.size();
  std::vector<std::vector<double>> per(batch.size());
  std::vector<double> losses(batch.size());
  const double b = static_cast<double>(batch.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(batch.size()); ++i) {
    Cache c;
    const TrainingSample& t = batch[sz(i)];
    run_sample(params, t, c);
    const double n = static_cast<double>(c.pred.size());
    losses[sz(i)] = sample_sse(c, t.next) / n;
    per[sz(i)].assign(np, 0.0);
    backward(params, t, c, 1.0 / (n * b), per[sz(i)]);
  }
  grad.assign(np, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += losses[i];
    for (std::size_t k = 0; k < np; ++k) grad[k] += per[i][k];
  }
  return total / b;
}

std::vector<std::uint8_t> relu_pattern(const LearnedParams& params, const TrainingSample& sample) {
  Cache c;
  c.h = sample.prev.height();
  c.w = sample.prev.width();
  check_inputs(params.shape, sample.prev, c.h, c.w);
  build_input(params.shape, sample.prev, encode_arm(sample.arm, c.h, c.w), sample.action, c);
  forward_heads(params, c);
  std::vector<std::uint8_t> out(c.a1.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.a1[i] > 0.0 ? 1 : 0;
  return out;
}

std::vector<TrainingSample> sample_triples(std::span<const sim::TrajectoryRecord> data, int count, int first_window,
                                           Rng& rng) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    if (!r.actions.empty() && r.frames.size() == r.actions.size() + 1 && r.states.size() == r.frames.size()) {
      usable.push_back(i);
    }
  }
  if (usable.empty()) throw Error(Errc::InvalidConfig, "dataset has no usable trajectories");
  std::vector<TrainingSample> out;
  out.reserve(sz(std::max(count, 0)));
  for (int k = 0; k < count; ++k) {
    const auto& r = data[usable[rng.below(usable.size())]];
    const std::size_t t = rng.below(r.actions.size());
    const std::size_t back = rng.below(static_cast<std::uint64_t>(std::max(first_window, 0)) + 1);
    const std::size_t s = t >= back ? t - back : 0;
    out.push_back({r.frames[t], r.frames[s], r.frames[t + 1], r.states[t].arm, r.actions[t]});
  }
  return out;
}

void TrainConfig::validate() const {
  if (iters < 0 || batch < 1 || eval_samples < 1 || eval_every < 1 || !(lr >= 0.0) || first_window < 0 ||
      max_lr_halvings < 0) {
    throw Error(Errc::InvalidConfig, "invalid training configuration");
  }
  LearnedShape shape;
  shape.n_kernels = n_kernels;
  shape.kernel_size = kernel_size;
  shape.skip = skip;
  shape.limits = limits;
  shape.validate();
}

LearnedParams train_learned(std::span<const sim::TrajectoryRecord> data, const TrainConfig& cfg, RngSeed seed,
                            TrainReport* report) {
  cfg.validate();
  if (data.empty()) throw Error(Errc::InvalidConfig, "dataset is empty");
  if (data.front().frames.empty()) throw Error(Errc::InvalidConfig, "trajectory without frames");
  const Frame& probe = data.front().frames.front();
  LearnedShape shape;
  shape.n_kernels = cfg.n_kernels;
  shape.kernel_size = cfg.kernel_size;
  shape.frame_channels = probe.channels();
  shape.skip = cfg.skip;
  shape.limits = cfg.limits;
  shape.validate();

  Rng eval_rng(derive_seed(seed.seed, 1));
  const auto eval_set = sample_triples(data, cfg.eval_samples, cfg.first_window, eval_rng);
  Rng rng(derive_seed(seed.seed, 2));

  LearnedParams params = LearnedParams::random(shape, RngSeed{derive_seed(seed.seed, 0)});
  for (double& v : params.values) v *= cfg.init_scale;

  TrainReport rep;
  rep.initial_loss = learned_loss(params, eval_set);
  if (!std::isfinite(rep.initial_loss)) throw Error(Errc::NonFiniteLoss, "initial loss is not finite");
  rep.eval_losses.emplace_back(0, rep.initial_loss);
  LearnedParams best = params;
  double best_loss = rep.initial_loss;

  const std::size_t np = params.values.size();
  std::vector<double> grad;
  std::vector<double> m1(np, 0.0);
  std::vector<double> m2(np, 0.0);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  double lr = cfg.lr;
  LearnedParams last_good = params;
  int adam_t = 0;

  for (int it = 1; it <= cfg.iters; ++it) {
    const auto batch = sample_triples(data, cfg.batch, cfg.first_window, rng);
    const double loss = learned_gradient(params, batch, grad);
    const bool ok = std::isfinite(loss) && std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
    if (!ok) {
      if (++rep.lr_halvings > cfg.max_lr_halvings) {
        throw Error(Errc::NonFiniteLoss, "loss stayed non-finite after " + std::to_string(cfg.max_lr_halvings) +
                                             " learning-rate halvings");
      }
      lr *= 0.5;
      params = last_good;
      std::fill(m1.begin(), m1.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      adam_t = 0;
      continue;
    }
    last_good = params;
    if (cfg.optimizer == Optimizer::Gd) {
      for (std::size_t k = 0; k < np; ++k) params.values[k] -= lr * grad[k];
    } else {
      ++adam_t;
      const double c1 = 1.0 - std::pow(kBeta1, adam_t);
      const double c2 = 1.0 - std::pow(kBeta2, adam_t);
      for (std::size_t k = 0; k < np; ++k) {
        m1[k] = kBeta1 * m1[k] + (1.0 - kBeta1) * grad[k];
        m2[k] = kBeta2 * m2[k] + (1.0 - kBeta2) * grad[k] * grad[k];
        params.values[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + kEps);
      }
    }
    if (it % cfg.eval_every == 0 || it == cfg.iters) {
      const double el = learned_loss(params, eval_set);
      rep.eval_losses.emplace_back(it, el);
      if (std::isfinite(el) && el < best_loss) {
        best_loss = el;
        best = params;
      }
    }
  }
  rep.final_loss = best_loss;
  rep.final_lr = lr;
  if (report != nullptr) *report = rep;
  return best;
}

std::string serialize_params(const LearnedParams& params) {
  const LearnedShape& s = params.shape;
  nlohmann::json tensors = nlohmann::json::array();
  auto add = [&](const char* name, LearnedParams::Slice sl, std::vector<int> dims) {
    tensors.push_back({{"name", name}, {"offset", sl.offset}, {"count", sl.count}, {"shape", dims}});
  };
  const int rows = s.n_kernels * s.kernel_size * s.kernel_size;
  add("conv1.weight", params.w1(), {s.hidden, s.in_channels(), s.conv_size, s.conv_size});
  add("conv1.bias", params.b1(), {s.hidden});
  add("kernel_head.weight", params.wk(), {rows, s.hidden});
  add("kernel_head.bias", params.bk(), {rows});
  add("mask_head.weight", params.wm(), {s.mask_count(), s.hidden});
  add("mask_head.bias", params.bm(), {s.mask_count()});
  const nlohmann::json header = {
      {"format", kFormatName},
      {"version", kFormatVersion},
      {"dtype", "float32"},
      {"endianness", "little"},
      {"n_kernels", s.n_kernels},
      {"kernel_size", s.kernel_size},
      {"frame_channels", s.frame_channels},
      {"hidden", s.hidden},
      {"conv_size", s.conv_size},
      {"skip", s.skip},
      {"a_max", s.limits.a_max},
      {"lift_levels", s.limits.lift_levels},
      {"count", params.values.size()},
      {"tensors", tensors},
  };
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + 4 * params.values.size());
  for (double v : params.values) write_f32_le(out, static_cast<float>(v));
  return out;
}

LearnedParams deserialize_params(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error(Errc::Io, "parameter file has no header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, std::string("malformed parameter header: ") + e.what());
  }
  try {
    if (header.at("format") != kFormatName) throw Error(Errc::Io, "not a learned parameter file");
    if (header.at("version").get<int>() != kFormatVersion) throw Error(Errc::Io, "unsupported parameter version");
    LearnedShape s;
    s.n_kernels = header.at("n_kernels").get<int>();
    s.kernel_size = header.at("kernel_size").get<int>();
    s.frame_channels = header.at("frame_channels").get<int>();
    s.hidden = header.at("hidden").get<int>();
    s.conv_size = header.at("conv_size").get<int>();
    s.skip = header.at("skip").get<bool>();
    s.limits.a_max = header.at("a_max").get<double>();
    s.limits.lift_levels = header.at("lift_levels").get<int>();
    s.validate();
    const std::size_t count = header.at("count").get<std::size_t>();
    if (count != LearnedParams::size_for(s)) throw Error(Errc::ShapeMismatch, "parameter count disagrees with shape");
    if (bytes.size() - nl - 1 != 4 * count) throw Error(Errc::Io, "parameter blob has the wrong length");
    LearnedParams p{s, std::vector<double>(count)};
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
    for (std::size_t i = 0; i < count; ++i) p.values[i] = read_f32_le(raw + 4 * i);
    if (!p.finite()) throw Error(Errc::NonFiniteLoss, "parameter file contains non-finite values");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, std::string("malformed parameter header: ") + e.what());
  }
}

void save_params(const LearnedParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  const std::string bytes = serialize_params(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

LearnedParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_params(bytes);
}

LearnedPredictor::LearnedPredictor(LearnedParams params) : params_(std::move(params)) {
  params_.shape.validate();
  if (params_.values.size() != LearnedParams::size_for(params_.shape)) {
    throw Error(Errc::ShapeMismatch, "parameter count disagrees with shape");
  }
  if (!params_.finite()) throw Error(Errc::InvalidConfig, "parameters must be finite");
}

Prediction LearnedPredictor::predict(const History& hist, const Action& a) const {
  if (hist.frames.empty()) throw Error(Errc::ShapeMismatch, "history has no frames");
  const Frame& prev = hist.frames.back();
  return {learned_forward(params_, prev, encode_arm(hist.arm, prev.height(), prev.width()), a), std::nullopt};
}

}  // namespace vismpc
