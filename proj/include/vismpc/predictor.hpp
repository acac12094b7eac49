#pragma once

// Transformation-based prediction: kernel/mask compositing for DNA and SNA
// models, probability-map advection, recursive rollouts, and an oracle
// predictor that reads kernels and masks off the simulator.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "vismpc/core.hpp"
#include "vismpc/sim2d.hpp"

namespace vismpc {

enum class PredictorMode { Dna, Sna };

const char* to_string(PredictorMode m);

/// Kernels and masks for one prediction step. DNA outputs carry N masks, SNA
/// outputs N+1 where the last weights the skip image. With
/// `transformed_background` the SNA skip image is first correlated with an
/// extra kernel N (so N+1 kernels).
struct PredictorOutput {
  KernelSet kernels;
  MaskSet masks;
  PredictorMode mode = PredictorMode::Sna;
  bool transformed_background = false;

  int transform_count() const { return mode == PredictorMode::Dna ? masks.count() : masks.count() - 1; }
  /// Throws KernelNotNormalized / MaskCountMismatch / ShapeMismatch.
  void validate(double tol = 1e-6) const;
};

Frame apply_kernel(const Frame& img, const Kernel& k);
/// Mass pushed outside the frame is dropped; callers renormalize.
ProbMap apply_kernel(const ProbMap& p, const Kernel& k);

/// I' = sum_i (prev * k_i) M_i.
Frame composite_dna(const Frame& prev, const PredictorOutput& out);
/// I' = first M_{N+1} + sum_i (prev * k_i) M_i, with `first` routed through
/// kernel N+1 when `transformed_bg` is set.
Frame composite_sna(const Frame& prev, const Frame& first, const PredictorOutput& out, bool transformed_bg = false);

/// Generic skip model over a history of images: I' = sum_j sum_i M_{i,j} (I_j * k_{i,j}).
/// Mask index j*N + i pairs with kernels_per_image[j][i].
Frame composite_general(std::span<const Frame> history, std::span<const KernelSet> kernels_per_image,
                        const MaskSet& masks);

/// P' = (sum_i (p * k_i) M_i [+ p_first M_{N+1}]) / P_s. Throws ZeroMass when
/// nothing survives compositing.
ProbMap advect_prob(const ProbMap& p, const PredictorOutput& out, PredictorMode mode, const ProbMap* p_first,
                    bool transformed_bg = false);

/// Unnormalized advection; returns the mass P_s alongside the map.
ProbMap advect_prob_raw(const ProbMap& p, const PredictorOutput& out, PredictorMode mode, const ProbMap* p_first,
                        bool transformed_bg, double& mass);

/// The simulator state a rollout started from, with its label map cached.
struct WorldAnchor {
  sim::WorldState state;
  sim::LabelMap labels;
};

struct History {
  Frame first_frame;             // I_0, fixed for the whole rollout
  std::vector<Frame> frames;     // most recent last; frames.back() is I_t
  int context_len = 2;
  std::vector<ProbMap> probmaps;        // current P_t per designated pixel
  std::vector<ProbMap> first_probmaps;  // skip-channel maps
  Vec2 arm;                             // commanded end-effector position
  int lift_remaining = 0;

  // Privileged simulator state, used only by the oracle predictor.
  std::optional<sim::WorldState> world;
  std::shared_ptr<const WorldAnchor> anchor;

  void push_frame(Frame f);
};

struct Prediction {
  PredictorOutput output;
  std::optional<sim::WorldState> next_world;
};

/// Anything that maps (history, action) to kernels and masks. Implementations
/// are immutable during planning and safe to call concurrently.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual PredictorMode mode() const = 0;
  /// True when predict() reads History::frames (composited frames must be kept).
  virtual bool uses_frames() const = 0;
  virtual Prediction predict(const History& hist, const Action& a) const = 0;
};

struct RolloutOptions {
  bool keep_frames = true;
  ActionLimits limits;
};

struct RolloutResult {
  std::vector<Frame> frames;                   // T frames (empty when not kept)
  std::vector<std::vector<ProbMap>> probmaps;  // T x P
};

/// Applies the predictor recursively for `horizon` steps.
RolloutResult rollout(const Predictor& pred, History hist, std::span<const Action> actions, int horizon,
                      const RolloutOptions& opts = {});

/// Advances the commanded arm estimate and lift counter the way the robot does.
void advance_kinematics(History& h, const Action& a, const ActionLimits& lim);

struct OracleConfig {
  int kernel_size = 9;
  double arm_stay = 0.1;  // probability mass the arm kernel keeps in place
  PredictorMode mode = PredictorMode::Sna;
};

/// Exact kernels/masks derived from the simulator: one kernel per entity
/// (table, each object, arm) shifted by that entity's displacement, masks
/// from the next state's painter's-order silhouettes. In SNA form the skip
/// mask claims pixels showing the same unmoved surface as the anchor state.
class OraclePredictor : public Predictor {
 public:
  OraclePredictor(std::shared_ptr<const sim::Simulator> sim, OracleConfig cfg);

  PredictorMode mode() const override { return cfg_.mode; }
  bool uses_frames() const override { return false; }
  Prediction predict(const History& hist, const Action& a) const override;

  /// One step from `s`; `anchor` defaults to `s` itself.
  PredictorOutput predict_output(const sim::WorldState& s, const sim::WorldState& next,
                                 const WorldAnchor* anchor) const;

  const sim::Simulator& simulator() const { return *sim_; }
  const OracleConfig& config() const { return cfg_; }
  std::shared_ptr<const WorldAnchor> make_anchor(const sim::WorldState& s) const;

 private:
  std::shared_ptr<const sim::Simulator> sim_;
  OracleConfig cfg_;
};

/// Convenience form of OraclePredictor::predict_output for a single (s, a).
PredictorOutput oracle_predict(const OraclePredictor& oracle, const sim::WorldState& s, const Action& a);

/// History for a rollout/episode that starts at world state `s`.
History make_history(const sim::Simulator& sim, const sim::WorldState& s, const Task& task,
                     std::shared_ptr<const WorldAnchor> anchor);

}  // namespace vismpc
