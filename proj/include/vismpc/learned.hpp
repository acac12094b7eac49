#pragma once

// Small trainable kernel/mask predictor.
//
//   x  = [prev frame (C) | arm encoding (2) | action tiled (3)]
//   h  = relu(conv5x5(x) + b1)                         16 channels
//   kernels = softmax_per_kernel(Wk mean_xy(h) + bk)   N x K x K
//   masks   = softmax_per_pixel(Wm h + bm)             N (+1 skip) channels
//
// Gradients are derived by hand through compositing, both softmax heads and
// the convolution trunk.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vismpc/core.hpp"
#include "vismpc/predictor.hpp"
#include "vismpc/rng.hpp"
#include "vismpc/sim2d.hpp"

namespace vismpc {

struct LearnedShape {
  int n_kernels = 4;      // N
  int kernel_size = 9;    // K
  int frame_channels = 3;
  int hidden = 16;
  int conv_size = 5;
  bool skip = true;       // SNA masks (N+1) when set, DNA masks (N) otherwise
  ActionLimits limits;

  int in_channels() const { return frame_channels + 5; }
  int mask_count() const { return n_kernels + (skip ? 1 : 0); }
  /// Throws InvalidConfig.
  void validate() const;
};

/// One flat parameter vector, sliced into named tensors.
struct LearnedParams {
  LearnedShape shape;
  std::vector<double> values;

  struct Slice {
    std::size_t offset;
    std::size_t count;
  };
  // Layout: w1[hidden][in][cs][cs], b1[hidden], wk[N*K*K][hidden], bk[N*K*K],
  //         wm[masks][hidden], bm[masks].
  Slice w1() const;
  Slice b1() const;
  Slice wk() const;
  Slice bk() const;
  Slice wm() const;
  Slice bm() const;
  static std::size_t size_for(const LearnedShape& s);

  static LearnedParams zeros(const LearnedShape& s);
  static LearnedParams random(const LearnedShape& s, RngSeed seed);

  bool finite() const;
};

/// Two planes: (x - arm.x) / W and (y - arm.y) / H.
struct ArmMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;
};

ArmMap encode_arm(Vec2 arm, int height, int width);

/// Throws ShapeMismatch when the inputs disagree with the parameter shapes.
PredictorOutput learned_forward(const LearnedParams& params, const Frame& prev, const ArmMap& arm_map,
                                const Action& a);

/// (prev, first, action, arm) -> next, one supervised compositing example.
struct TrainingSample {
  Frame prev;
  Frame first;
  Frame next;
  Vec2 arm;
  Action action;
};

/// Mean squared error of the composited prediction, averaged over samples,
/// channels and pixels.
double learned_loss(const LearnedParams& params, std::span<const TrainingSample> batch);

/// Loss plus its gradient with respect to every parameter (same layout as
/// LearnedParams::values). Per-sample gradients are summed in sample order.
double learned_gradient(const LearnedParams& params, std::span<const TrainingSample> batch,
                        std::vector<double>& grad);

/// Sign pattern of the trunk pre-activations, used to detect ReLU kinks in
/// finite-difference checks.
std::vector<std::uint8_t> relu_pattern(const LearnedParams& params, const TrainingSample& sample);

enum class Optimizer { Gd, Adam };

struct TrainConfig {
  double lr = 1e-3;
  int iters = 1000;
  int batch = 8;
  int n_kernels = 4;
  int kernel_size = 9;
  bool skip = true;
  Optimizer optimizer = Optimizer::Gd;
  int first_window = 4;   // `first` is drawn up to this many steps before `prev`
  int eval_samples = 64;  // fixed held-in set used for loss tracking
  int eval_every = 25;
  double init_scale = 1.0;
  int max_lr_halvings = 30;
  ActionLimits limits;  // scales the action inputs; must match the planner's

  /// Throws InvalidConfig.
  void validate() const;
};

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<std::pair<int, double>> eval_losses;  // (iteration, loss)
  int lr_halvings = 0;
  double final_lr = 0.0;
};

/// Samples (prev, first, action, next) triples from the records.
std::vector<TrainingSample> sample_triples(std::span<const sim::TrajectoryRecord> data, int count, int first_window,
                                           Rng& rng);

/// Minibatch training on the composited reconstruction loss. Returns the
/// parameters with the lowest evaluation loss seen (never worse than the
/// initialization). A non-finite step is undone and the learning rate
/// halved; NonFiniteLoss is thrown once max_lr_halvings is exhausted.
LearnedParams train_learned(std::span<const sim::TrajectoryRecord> data, const TrainConfig& cfg, RngSeed seed,
                            TrainReport* report = nullptr);

/// JSON header line followed by the float32 little-endian values.
void save_params(const LearnedParams& params, const std::filesystem::path& path);
LearnedParams load_params(const std::filesystem::path& path);
std::string serialize_params(const LearnedParams& params);
LearnedParams deserialize_params(const std::string& bytes);

class LearnedPredictor : public Predictor {
 public:
  explicit LearnedPredictor(LearnedParams params);

  PredictorMode mode() const override { return params_.shape.skip ? PredictorMode::Sna : PredictorMode::Dna; }
  bool uses_frames() const override { return true; }
  Prediction predict(const History& hist, const Action& a) const override;

  const LearnedParams& params() const { return params_; }

 private:
  LearnedParams params_;
};

}  // namespace vismpc
