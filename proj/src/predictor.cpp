#include "vismpc/predictor.hpp"

#include <algorithm>

#include "vismpc/kernels.hpp"

namespace vismpc {

const char* to_string(PredictorMode m) { return m == PredictorMode::Dna ? "dna" : "sna"; }

namespace {

int expected_kernel_count(const PredictorOutput& out, bool transformed_bg) {
  return out.transform_count() + (out.mode == PredictorMode::Sna && transformed_bg ? 1 : 0);
}

void check_counts(const PredictorOutput& out, PredictorMode mode, bool transformed_bg) {
  if (out.mode != mode) {
    throw Error(Errc::MaskCountMismatch, std::string("output is ") + to_string(out.mode) + ", requested " + to_string(mode));
  }
  if (out.masks.count() < (mode == PredictorMode::Sna ? 2 : 1)) {
    throw Error(Errc::MaskCountMismatch, "too few masks for " + std::string(to_string(mode)));
  }
  if (out.kernels.count() != expected_kernel_count(out, transformed_bg)) {
    throw Error(Errc::MaskCountMismatch, "have " + std::to_string(out.kernels.count()) + " kernels for " +
                                             std::to_string(out.masks.count()) + " masks");
  }
  out.kernels.require_normalized();
}

void check_plane_shape(const MaskSet& masks, int h, int w) {
  if (masks.height() != h || masks.width() != w) throw Error(Errc::ShapeMismatch, "mask and image shapes differ");
}

}  // namespace

void PredictorOutput::validate(double tol) const {
  check_counts(*this, mode, transformed_background);
  if (!masks.nonnegative()) throw Error(Errc::MaskCountMismatch, "masks must be nonnegative");
  const double err = masks.max_partition_error();
  if (err > tol) throw Error(Errc::MaskCountMismatch, "masks do not sum to 1 per pixel (error " + std::to_string(err) + ")");
}

Frame apply_kernel(const Frame& img, const Kernel& k) {
  if (!k.normalized()) throw Error(Errc::KernelNotNormalized, "kernel sums to " + std::to_string(k.sum()));
  Frame out(img.height(), img.width(), img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    kernels::parallel::correlate(img.plane(c), img.height(), img.width(), k, out.plane(c));
  }
  out.clamp_unit();
  return out;
}

ProbMap apply_kernel(const ProbMap& p, const Kernel& k) {
  if (!k.normalized()) throw Error(Errc::KernelNotNormalized, "kernel sums to " + std::to_string(k.sum()));
  ProbMap out(p.height(), p.width());
  kernels::parallel::correlate(p.data(), p.height(), p.width(), k, out.data());
  return out;
}

Frame composite_dna(const Frame& prev, const PredictorOutput& out) {
  check_counts(out, PredictorMode::Dna, false);
  check_plane_shape(out.masks, prev.height(), prev.width());
  Frame res(prev.height(), prev.width(), prev.channels());
  for (int c = 0; c < prev.channels(); ++c) {
    kernels::parallel::composite_plane(prev.plane(c), prev.height(), prev.width(), out.kernels, out.masks,
                                       out.transform_count(), nullptr, res.plane(c));
  }
  res.clamp_unit();
  return res;
}

Frame composite_sna(const Frame& prev, const Frame& first, const PredictorOutput& out, bool transformed_bg) {
  check_counts(out, PredictorMode::Sna, transformed_bg);
  check_plane_shape(out.masks, prev.height(), prev.width());
  if (first.height() != prev.height() || first.width() != prev.width() || first.channels() != prev.channels()) {
    throw Error(Errc::ShapeMismatch, "first frame shape differs from previous frame");
  }
  Frame res(prev.height(), prev.width(), prev.channels());
  for (int c = 0; c < prev.channels(); ++c) {
    const kernels::SkipInput skip{first.plane(c), transformed_bg};
    kernels::parallel::composite_plane(prev.plane(c), prev.height(), prev.width(), out.kernels, out.masks,
                                       out.transform_count(), &skip, res.plane(c));
  }
  res.clamp_unit();
  return res;
}

Frame composite_general(std::span<const Frame> history, std::span<const KernelSet> kernels_per_image,
                        const MaskSet& masks) {
  if (history.empty() || history.size() != kernels_per_image.size()) {
    throw Error(Errc::MaskCountMismatch, "need one kernel set per history image");
  }
  const int n = kernels_per_image[0].count();
  if (masks.count() != static_cast<int>(history.size()) * n) {
    throw Error(Errc::MaskCountMismatch, "general model needs history*N masks");
  }
  const Frame& ref = history[0];
  check_plane_shape(masks, ref.height(), ref.width());
  Frame res(ref.height(), ref.width(), ref.channels());
  std::vector<double> tmp(ref.plane_size());
  for (std::size_t j = 0; j < history.size(); ++j) {
    const auto& ks = kernels_per_image[j];
    if (ks.count() != n) throw Error(Errc::MaskCountMismatch, "kernel sets must have equal sizes");
    ks.require_normalized();
    for (int c = 0; c < ref.channels(); ++c) {
      auto dst = res.plane(c);
      for (int i = 0; i < n; ++i) {
        kernels::parallel::correlate(history[j].plane(c), ref.height(), ref.width(), ks[i], tmp);
        const auto m = masks.mask(static_cast<int>(j) * n + i);
        for (std::size_t p = 0; p < tmp.size(); ++p) dst[p] += tmp[p] * m[p];
      }
    }
  }
  res.clamp_unit();
  return res;
}

ProbMap advect_prob_raw(const ProbMap& p, const PredictorOutput& out, PredictorMode mode, const ProbMap* p_first,
                        bool transformed_bg, double& mass) {
  check_counts(out, mode, transformed_bg);
  check_plane_shape(out.masks, p.height(), p.width());
  ProbMap res(p.height(), p.width());
  std::optional<kernels::SkipInput> skip;
  if (mode == PredictorMode::Sna) {
    if (p_first == nullptr) throw Error(Errc::ShapeMismatch, "sna advection needs the first-step map");
    if (p_first->height() != p.height() || p_first->width() != p.width()) {
      throw Error(Errc::ShapeMismatch, "first-step map shape differs");
    }
    skip = kernels::SkipInput{p_first->data(), transformed_bg};
  }
  kernels::parallel::advect_plane(p.data(), p.height(), p.width(), out.kernels, out.masks, out.transform_count(),
                                  skip ? &*skip : nullptr, res.data());
  mass = res.sum();
  return res;
}

ProbMap advect_prob(const ProbMap& p, const PredictorOutput& out, PredictorMode mode, const ProbMap* p_first,
                    bool transformed_bg) {
  double mass = 0.0;
  ProbMap res = advect_prob_raw(p, out, mode, p_first, transformed_bg, mass);
  if (!(mass > 1e-300)) throw Error(Errc::ZeroMass, "all probability mass annihilated");
  const double inv = 1.0 / mass;
  for (double& v : res.data()) v *= inv;
  return res;
}

void History::push_frame(Frame f) {
  frames.push_back(std::move(f));
  const auto keep = static_cast<std::size_t>(std::max(context_len, 1));
  if (frames.size() > keep) frames.erase(frames.begin(), frames.end() - static_cast<std::ptrdiff_t>(keep));
}

void advance_kinematics(History& h, const Action& raw, const ActionLimits& lim) {
  const Action a = clamp_action(raw, lim);
  h.arm.x = std::clamp(h.arm.x + a.dx, 0.0, h.first_frame.width() - 1.0);
  h.arm.y = std::clamp(h.arm.y + a.dy, 0.0, h.first_frame.height() - 1.0);
  h.lift_remaining = a.lift > 0 ? a.lift : std::max(h.lift_remaining - 1, 0);
}

RolloutResult rollout(const Predictor& pred, History hist, std::span<const Action> actions, int horizon,
                      const RolloutOptions& opts) {
  if (horizon < 1 || actions.size() != static_cast<std::size_t>(horizon)) {
    throw Error(Errc::ShapeMismatch, "rollout needs exactly `horizon` actions");
  }
  if (hist.probmaps.size() != hist.first_probmaps.size()) {
    throw Error(Errc::ShapeMismatch, "probmap and first-step map counts differ");
  }
  const bool need_frames = opts.keep_frames || pred.uses_frames();
  RolloutResult res;
  res.probmaps.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    const Action& a = actions[static_cast<std::size_t>(t)];
    Prediction step = pred.predict(hist, a);
    const PredictorOutput& out = step.output;
    std::vector<ProbMap> next_maps;
    next_maps.reserve(hist.probmaps.size());
    for (std::size_t i = 0; i < hist.probmaps.size(); ++i) {
      next_maps.push_back(advect_prob(hist.probmaps[i], out, pred.mode(), &hist.first_probmaps[i],
                                      out.transformed_background));
    }
    if (need_frames) {
      Frame f = pred.mode() == PredictorMode::Sna
                    ? composite_sna(hist.frames.back(), hist.first_frame, out, out.transformed_background)
                    : composite_dna(hist.frames.back(), out);
      if (opts.keep_frames) res.frames.push_back(f);
      hist.push_frame(std::move(f));
    }
    advance_kinematics(hist, a, opts.limits);
    hist.world = std::move(step.next_world);
    res.probmaps.push_back(next_maps);
    hist.probmaps = std::move(next_maps);
  }
  return res;
}

OraclePredictor::OraclePredictor(std::shared_ptr<const sim::Simulator> sim, OracleConfig cfg)
    : sim_(std::move(sim)), cfg_(cfg) {
  if (cfg_.kernel_size < 1 || cfg_.kernel_size % 2 == 0) throw Error(Errc::InvalidConfig, "kernel size must be odd");
  if (!(cfg_.arm_stay >= 0.0 && cfg_.arm_stay < 1.0)) throw Error(Errc::InvalidConfig, "arm_stay must be in [0,1)");
}

std::shared_ptr<const WorldAnchor> OraclePredictor::make_anchor(const sim::WorldState& s) const {
  return std::make_shared<const WorldAnchor>(WorldAnchor{s, sim_->labels(s)});
}

PredictorOutput OraclePredictor::predict_output(const sim::WorldState& s, const sim::WorldState& next,
                                                const WorldAnchor* anchor) const {
  const int n = sim_->object_count();
  const int entities = n + 2;  // table, objects, arm
  const int ks = cfg_.kernel_size;
  const int arm_id = sim_->arm_label();

  std::vector<Kernel> kernels;
  kernels.reserve(static_cast<std::size_t>(entities));
  kernels.push_back(Kernel::identity(ks));
  for (int i = 0; i < n; ++i) {
    const Vec2 d = next.poses[static_cast<std::size_t>(i)].center - s.poses[static_cast<std::size_t>(i)].center;
    kernels.push_back(Kernel::bilinear_shift(ks, d.x, d.y));
  }
  const Vec2 arm_d = next.arm - s.arm;
  Kernel arm_k = Kernel::bilinear_shift(ks, arm_d.x, arm_d.y);
  for (double& w : arm_k.data()) w *= 1.0 - cfg_.arm_stay;
  arm_k.at(arm_k.radius(), arm_k.radius()) += cfg_.arm_stay;
  kernels.push_back(std::move(arm_k));

  const sim::LabelMap lm = sim_->labels(next);
  const bool sna = cfg_.mode == PredictorMode::Sna;
  PredictorOutput out{KernelSet(std::move(kernels)), MaskSet(entities + (sna ? 1 : 0), lm.height, lm.width),
                      cfg_.mode, false};

  std::vector<char> unmoved;
  const sim::LabelMap* anchor_labels = nullptr;
  sim::LabelMap own;
  if (sna) {
    const sim::WorldState& a0 = anchor != nullptr ? anchor->state : s;
    if (anchor != nullptr) {
      anchor_labels = &anchor->labels;
    } else {
      own = sim_->labels(s);
      anchor_labels = &own;
    }
    unmoved.assign(static_cast<std::size_t>(entities), 0);
    unmoved[0] = 1;
    for (int i = 0; i < n; ++i) {
      unmoved[static_cast<std::size_t>(i + 1)] = next.poses[static_cast<std::size_t>(i)] == a0.poses[static_cast<std::size_t>(i)];
    }
    unmoved[static_cast<std::size_t>(arm_id)] = next.arm == a0.arm && (next.lift_remaining > 0) == (a0.lift_remaining > 0);
  }

  for (std::size_t p = 0; p < lm.ids.size(); ++p) {
    const int id = lm.ids[p];
    const int x = static_cast<int>(p % static_cast<std::size_t>(lm.width));
    const int y = static_cast<int>(p / static_cast<std::size_t>(lm.width));
    if (sna && anchor_labels->ids[p] == id && unmoved[static_cast<std::size_t>(id)]) {
      out.masks.at(entities, x, y) = 1.0;
    } else {
      out.masks.at(id, x, y) = 1.0;
    }
  }
  return out;
}

Prediction OraclePredictor::predict(const History& hist, const Action& a) const {
  if (!hist.world) throw Error(Errc::InvalidConfig, "oracle predictor needs the simulator state in the history");
  sim::WorldState next = sim_->step(*hist.world, a);
  PredictorOutput out = predict_output(*hist.world, next, hist.anchor.get());
  return {std::move(out), std::move(next)};
}

PredictorOutput oracle_predict(const OraclePredictor& oracle, const sim::WorldState& s, const Action& a) {
  const sim::WorldState next = oracle.simulator().step(s, a);
  return oracle.predict_output(s, next, nullptr);
}

History make_history(const sim::Simulator& sim, const sim::WorldState& s, const Task& task,
                     std::shared_ptr<const WorldAnchor> anchor) {
  History h;
  h.first_frame = sim.render(s);
  h.frames.push_back(h.first_frame);
  for (const auto& d : task.designated) {
    h.probmaps.push_back(one_hot_probmap(d.x, d.y, sim.config().height, sim.config().width));
  }
  h.first_probmaps = h.probmaps;
  h.arm = s.arm;
  h.lift_remaining = s.lift_remaining;
  h.world = s;
  h.anchor = std::move(anchor);
  return h;
}

}  // namespace vismpc
