#include <doctest.h>

#include "support.hpp"
#include "vismpc/predictor.hpp"

using namespace vismpc;

namespace {

PredictorOutput make_output(PredictorMode mode, std::vector<Kernel> ks, MaskSet ms, bool tbg = false) {
  PredictorOutput o;
  o.mode = mode;
  o.kernels = KernelSet(std::move(ks));
  o.masks = std::move(ms);
  o.transformed_background = tbg;
  return o;
}

sim::ObjectSpec disc(double r) {
  sim::ObjectSpec o;
  o.shape = sim::Disc{r};
  o.color = {0.9, 0.2, 0.1};
  return o;
}

}  // namespace

TEST_CASE("apply_kernel: identity, shift and uniform spreading") {
  Rng rng(1);
  const Frame f = testing::random_frame(12, 12, 3, rng);
  CHECK(apply_kernel(f, Kernel::identity(3)) == f);

  const ProbMap p = one_hot_probmap(10, 10, 20, 20);
  const ProbMap s = apply_kernel(p, Kernel::shift(3, 1, 0));
  CHECK(s.at(11, 10) == 1.0);
  CHECK(s.sum() == doctest::Approx(1.0));

  const ProbMap u = apply_kernel(p, Kernel(3, std::vector<double>(9, 1.0 / 9.0)));
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) CHECK(u.at(10 + dx, 10 + dy) == doctest::Approx(1.0 / 9.0));
  }
  CHECK(u.sum() == doctest::Approx(1.0));

  CHECK_THROWS_AS(apply_kernel(p, Kernel(3)), Error);
}

TEST_CASE("composite_dna examples") {
  Rng rng(2);
  const Frame prev = testing::random_frame(10, 12, 3, rng);
  const auto id = make_output(PredictorMode::Dna, {Kernel::identity(3)}, testing::constant_masks({1.0}, 10, 12));
  CHECK(composite_dna(prev, id) == prev);

  const auto two = make_output(PredictorMode::Dna, {Kernel::shift(3, 1, 0), Kernel::shift(3, -1, 0)},
                               testing::constant_masks({0.5, 0.5}, 10, 12));
  const Frame avg = composite_dna(prev, two);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 12; ++x) {
        const double left = x - 1 >= 0 ? prev.at(c, x - 1, y) : 0.0;
        const double right = x + 1 < 12 ? prev.at(c, x + 1, y) : 0.0;
        CHECK(avg.at(c, x, y) == doctest::Approx(0.5 * left + 0.5 * right).epsilon(1e-12));
      }
    }
  }

  const Frame flat(16, 16, 3, 0.3);
  const auto any = testing::random_output(PredictorMode::Dna, 3, 5, 16, 16, rng);
  const Frame out = composite_dna(flat, any);
  for (int c = 0; c < 3; ++c) {
    for (int y = 2; y < 14; ++y) {
      for (int x = 2; x < 14; ++x) CHECK(out.at(c, x, y) == doctest::Approx(0.3).epsilon(1e-12));
    }
  }

  const auto wrong = make_output(PredictorMode::Dna, {Kernel::identity(3)}, testing::constant_masks({0.5, 0.5}, 10, 12));
  try {
    composite_dna(prev, wrong);
    FAIL("expected MaskCountMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MaskCountMismatch);
  }
}

TEST_CASE("composite_sna examples") {
  Rng rng(3);
  const Frame prev = testing::random_frame(10, 10, 3, rng);
  const Frame first = testing::random_frame(10, 10, 3, rng);
  const auto all_skip = make_output(PredictorMode::Sna, {Kernel::shift(3, 1, 1)}, testing::constant_masks({0.0, 1.0}, 10, 10));
  CHECK(composite_sna(prev, first, all_skip) == first);

  auto sna = testing::random_output(PredictorMode::Sna, 2, 3, 10, 10, rng);
  for (double& v : sna.masks.mask(2)) v = 0.0;
  PredictorOutput dna = sna;
  dna.mode = PredictorMode::Dna;
  dna.masks = MaskSet(2, 10, 10);
  for (int i = 0; i < 2; ++i) std::copy(sna.masks.mask(i).begin(), sna.masks.mask(i).end(), dna.masks.mask(i).begin());
  CHECK(composite_sna(prev, first, sna) == composite_dna(prev, dna));

  const auto half = make_output(PredictorMode::Sna, {Kernel::identity(3)}, testing::constant_masks({0.5, 0.5}, 10, 10));
  const Frame blend = composite_sna(Frame(10, 10, 3, 0.0), Frame(10, 10, 3, 1.0), half);
  for (double v : blend.data()) CHECK(v == doctest::Approx(0.5));

  // Transformed background: the skip image goes through the extra kernel.
  const auto tbg = make_output(PredictorMode::Sna, {Kernel::identity(3), Kernel::shift(3, 1, 0)},
                               testing::constant_masks({0.0, 1.0}, 10, 10), true);
  const Frame moved = composite_sna(prev, first, tbg, true);
  CHECK(moved.at(0, 5, 4) == first.at(0, 4, 4));
  CHECK(moved.at(0, 0, 4) == 0.0);

  try {
    composite_sna(prev, first, make_output(PredictorMode::Sna, {Kernel::identity(3)}, testing::constant_masks({1.0}, 10, 10)));
    FAIL("expected MaskCountMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MaskCountMismatch);
  }
}

TEST_CASE("general history compositing reduces to the skip model") {
  Rng rng(4);
  const Frame prev = testing::random_frame(12, 12, 3, rng);
  const Frame first = testing::random_frame(12, 12, 3, rng);
  const KernelSet kp = testing::random_kernels(2, 3, rng);
  const MaskSet ms = testing::random_masks(3, 12, 12, rng);
  PredictorOutput sna;
  sna.mode = PredictorMode::Sna;
  sna.kernels = kp;
  sna.masks = ms;
  const Frame expected = composite_sna(prev, first, sna);

  // History [prev, first]; first gets one identity kernel in slot 2 of the
  // masks. The general form indexes masks as j*N + i with N kernels per image,
  // so pad the first image's set with a zero-mask kernel.
  MaskSet gm(4, 12, 12);
  for (int i = 0; i < 2; ++i) std::copy(ms.mask(i).begin(), ms.mask(i).end(), gm.mask(i).begin());
  std::copy(ms.mask(2).begin(), ms.mask(2).end(), gm.mask(2).begin());
  const std::vector<Frame> hist{prev, first};
  const std::vector<KernelSet> kps{kp, KernelSet({Kernel::identity(3), Kernel::identity(3)})};
  const Frame general = composite_general(hist, kps, gm);
  CHECK(testing::max_abs_diff(general.data(), expected.data()) <= 1e-12);
}

TEST_CASE("advect_prob examples") {
  const ProbMap p = one_hot_probmap(6, 7, 16, 16);
  const auto id = make_output(PredictorMode::Dna, {Kernel::identity(5)}, testing::constant_masks({1.0}, 16, 16));
  CHECK(advect_prob(p, id, PredictorMode::Dna, nullptr).data()[7 * 16 + 6] == 1.0);

  const auto shift = make_output(PredictorMode::Dna, {Kernel::shift(5, 2, -1)}, testing::constant_masks({1.0}, 16, 16));
  CHECK(advect_prob(p, shift, PredictorMode::Dna, nullptr).argmax() == Coord{8, 6});

  // Skip mask over the support keeps half the mass in place: the skip branch
  // and the shifted branch each carry 1 before renormalization.
  MaskSet ms(2, 16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const bool near = std::abs(x - 6) <= 1 && std::abs(y - 7) <= 1;
      ms.at(1, x, y) = near ? 1.0 : 0.0;
      ms.at(0, x, y) = near ? 0.0 : 1.0;
    }
  }
  const auto keep = make_output(PredictorMode::Sna, {Kernel::shift(5, 2, 0)}, ms);
  const ProbMap kept = advect_prob(p, keep, PredictorMode::Sna, &p);
  CHECK(kept.at(6, 7) == doctest::Approx(0.5));
  CHECK(kept.at(8, 7) == doctest::Approx(0.5));

  // All mass pushed out of the frame.
  const ProbMap corner = one_hot_probmap(0, 0, 16, 16);
  const auto out = make_output(PredictorMode::Dna, {Kernel::shift(5, -1, 0)}, testing::constant_masks({1.0}, 16, 16));
  try {
    advect_prob(corner, out, PredictorMode::Dna, nullptr);
    FAIL("expected ZeroMass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroMass);
  }
}

TEST_CASE("advect_prob conserves mass for random inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const PredictorMode mode = trial % 2 == 0 ? PredictorMode::Dna : PredictorMode::Sna;
    const auto out = testing::random_output(mode, 3, 5, 20, 20, rng);
    const ProbMap p = testing::random_probmap(20, 20, rng, 0.9);
    const ProbMap first = one_hot_probmap(static_cast<int>(rng.below(20)), static_cast<int>(rng.below(20)), 20, 20);
    const ProbMap q = advect_prob(p, out, mode, mode == PredictorMode::Sna ? &first : nullptr);
    CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_FALSE(validate_probmap(q).has_value());
  }
}

TEST_CASE("oracle: free arm motion") {
  auto sim = std::make_shared<const sim::Simulator>(sim::WorldConfig{}, std::vector{disc(5)});
  const OraclePredictor oracle(sim, {9, 0.1, PredictorMode::Dna});
  sim::WorldState s;
  s.arm = {10, 10};
  s.poses = {sim::Pose{{40, 40}, 0}};
  const PredictorOutput o = oracle_predict(oracle, s, {2, 0, 0});
  REQUIRE(o.kernels.count() == 3);
  CHECK_NOTHROW(o.validate());
  CHECK(testing::max_abs_diff(o.kernels[0].data(), Kernel::identity(9).data()) == 0.0);
  CHECK(testing::max_abs_diff(o.kernels[1].data(), Kernel::identity(9).data()) == 0.0);
  CHECK(o.kernels[2].at(4, 2) == doctest::Approx(0.9));
  CHECK(o.kernels[2].at(4, 4) == doctest::Approx(0.1));
  CHECK(o.masks.at(2, 12, 10) == 1.0);
  CHECK(o.masks.at(1, 40, 40) == 1.0);
  CHECK(o.masks.at(0, 60, 60) == 1.0);
}

TEST_CASE("oracle: pushed disc gets a shift kernel and the composite matches the render") {
  auto sim = std::make_shared<const sim::Simulator>(sim::WorldConfig{}, std::vector{disc(5)});
  for (PredictorMode mode : {PredictorMode::Dna, PredictorMode::Sna}) {
    const OraclePredictor oracle(sim, {9, 0.1, mode});
    sim::WorldState s;
    s.arm = {11, 20};
    s.poses = {sim::Pose{{20, 20}, 0}};
    const sim::WorldState next = sim->step(s, {2, 0, 0});
    const PredictorOutput o = oracle.predict_output(s, next, nullptr);
    CHECK(o.kernels[1].at(4, 2) == doctest::Approx(1.0));
    const Frame prev = sim->render(s);
    const Frame pred = mode == PredictorMode::Dna ? composite_dna(prev, o) : composite_sna(prev, prev, o);
    const double mae = testing::mae_outside_band(pred, sim->render(next), sim->labels(s), sim->labels(next),
                                                  testing::moving_labels(*sim, s, next));
    CHECK(mae < 0.02);
  }
}

TEST_CASE("oracle: a lifted arm leaves objects on identity kernels") {
  auto sim = std::make_shared<const sim::Simulator>(sim::WorldConfig{}, std::vector{disc(5)});
  const OraclePredictor oracle(sim, {9, 0.1, PredictorMode::Sna});
  sim::WorldState s;
  s.arm = {14, 20};
  s.lift_remaining = 2;
  s.poses = {sim::Pose{{20, 20}, 0}};
  const PredictorOutput o = oracle_predict(oracle, s, {4, 0, 0});
  CHECK(testing::max_abs_diff(o.kernels[1].data(), Kernel::identity(9).data()) == 0.0);
}

TEST_CASE("oracle kernels that would exceed the radius are reported") {
  auto sim = std::make_shared<const sim::Simulator>(sim::WorldConfig{}, std::vector{disc(5)});
  const OraclePredictor oracle(sim, {3, 0.1, PredictorMode::Dna});
  sim::WorldState s;
  s.arm = {10, 10};
  s.poses = {sim::Pose{{40, 40}, 0}};
  try {
    oracle_predict(oracle, s, {3, 0, 0});
    FAIL("expected DisplacementTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DisplacementTooLarge);
  }
}

TEST_CASE("rollouts with the oracle") {
  sim::WorldConfig cfg;
  auto sim = std::make_shared<const sim::Simulator>(cfg, std::vector{disc(5)});
  const OraclePredictor oracle(sim, {9, 0.1, PredictorMode::Sna});
  sim::WorldState s;
  s.arm = {11, 30};
  s.poses = {sim::Pose{{20, 30}, 0}};
  const Task task{{{20, 30}}, {{40, 30}}, {}};
  const History h = make_history(*sim, s, task, oracle.make_anchor(s));

  SUBCASE("one step is one predict, composite and advect") {
    const std::vector<Action> a{{2, 0, 0}};
    const RolloutResult r = rollout(oracle, h, a, 1);
    REQUIRE(r.frames.size() == 1);
    const Prediction p = oracle.predict(h, a[0]);
    CHECK(r.frames[0] == composite_sna(h.frames.back(), h.first_frame, p.output));
    const ProbMap q = advect_prob(h.probmaps[0], p.output, PredictorMode::Sna, &h.first_probmaps[0]);
    CHECK(testing::max_abs_diff(r.probmaps[0][0].data(), q.data()) <= 1e-12);
  }

  SUBCASE("a scripted push is tracked to within 1 px") {
    const std::vector<Action> a(5, Action{3, 0.5, 0});
    const RolloutResult r = rollout(oracle, h, a, 5);
    sim::WorldState t = s;
    for (const auto& act : a) t = sim->step(t, act);
    const Vec2 truth = sim->true_pixel_position(t, sim->attach(s, {20, 30}));
    const Coord am = r.probmaps.back()[0].argmax();
    CHECK((to_vec(am) - truth).norm() <= 1.0 + 1e-9);
    for (const auto& step : r.probmaps) CHECK(step[0].sum() == doctest::Approx(1.0));
  }

  SUBCASE("zero actions keep everything constant") {
    const std::vector<Action> a(4, Action{0, 0, 0});
    const RolloutResult r = rollout(oracle, h, a, 4);
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(r.frames[t] == h.first_frame);
      CHECK(r.probmaps[t][0].at(20, 30) == doctest::Approx(1.0));
    }
  }
}
