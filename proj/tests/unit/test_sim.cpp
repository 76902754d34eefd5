#include <gtest/gtest.h>

#include "magicpaint/sim/simulate.hpp"
#include "magicpaint/synth/synthetic.hpp"
#include "test_util.hpp"

using namespace magicpaint;

namespace {

RecordingAction row_stroke(LabelId label, int y, int x0, int x1, std::int64_t t_ms) {
  RecordingAction a;
  a.kind = ActionKind::StrokeLine;
  a.label = label;
  a.radius = 1;
  a.points = {{x0, y}, {x1, y}};
  a.t_ms = t_ms;
  return a;
}

GroundTruth halves(int w, int h) {
  GroundTruth gt;
  gt.segments = LabelMap(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) gt.segments.at(x, y) = x < w / 2 ? 1 : 2;
  gt.classes = {{1, "left"}, {2, "right"}};
  return gt;
}

void expect_same(const Timeline& a, const Timeline& b) {
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    EXPECT_EQ(a.events[i].action_index, b.events[i].action_index);
    EXPECT_EQ(a.events[i].executed, b.events[i].executed);
    EXPECT_EQ(a.events[i].t_cum_s, b.events[i].t_cum_s);
    EXPECT_EQ(a.events[i].aiou, b.events[i].aiou);
    EXPECT_EQ(a.events[i].sq, b.events[i].sq);
  }
}

}  // namespace

TEST(SimValidation, Violations) {
  Recording r;
  r.width = r.height = 8;
  EXPECT_TRUE(validate_for_simulation(r).empty());
  r.actions.push_back(row_stroke(1, 0, 0, 7, 0));
  r.actions.push_back(row_stroke(2, 2, 0, 7, 100));
  EXPECT_TRUE(validate_for_simulation(r).empty());
  RecordingAction f;
  f.kind = ActionKind::FloodFill;
  f.label = 1;
  f.t_ms = 200;
  r.actions.push_back(f);
  RecordingAction u;
  u.kind = ActionKind::Undo;
  u.t_ms = 300;
  r.actions.push_back(u);
  const auto v = validate_for_simulation(r);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], (Violation{2, "flood_fill"}));
  EXPECT_EQ(v[1].index, 3u);
  const Scene sc = make_band_scene(1);
  r.width = r.height = 64;
  EXPECT_THROW(simulate_assisted(r, sc.image, sc.gt, SimConfig{}), Error);
}

TEST(SimValidation, StripRebuildsTimestamps) {
  Recording r;
  r.width = r.height = 8;
  r.actions.push_back(row_stroke(1, 0, 0, 7, 1000));
  RecordingAction f;
  f.kind = ActionKind::FloodFill;
  f.label = 1;
  f.t_ms = 9000;
  r.actions.push_back(f);
  r.actions.push_back(row_stroke(2, 2, 0, 7, 11000));
  const auto s = strip_for_simulation(r);
  ASSERT_EQ(s.actions.size(), 2u);
  EXPECT_EQ(s.actions[0].t_ms, 1000);
  EXPECT_EQ(s.actions[1].t_ms, 3000);
  EXPECT_TRUE(validate_for_simulation(s).empty());
}

TEST(ReplayManual, EmptyRecording) {
  Recording r;
  r.width = r.height = 4;
  const auto res = replay_manual(r, halves(4, 4));
  EXPECT_TRUE(res.timeline.events.empty());
  EXPECT_EQ(res.timeline.final_aiou(), 0.0);
  EXPECT_EQ(res.timeline.total_time(), 0.0);
}

TEST(ReplayManual, ScriptedSnapshots) {
  const auto gt = halves(10, 10);
  Recording r;
  r.width = r.height = 10;
  for (int i = 0; i < 5; ++i) r.actions.push_back(row_stroke(1, i, 0, 4, 1000 * (i + 1)));
  for (int i = 0; i < 5; ++i) r.actions.push_back(row_stroke(2, i, 5, 9, 1000 * (i + 6)));
  const auto res = replay_manual(r, gt);
  ASSERT_EQ(res.timeline.events.size(), 10u);
  for (int i = 1; i <= 10; ++i) {
    const auto& e = res.timeline.events[i - 1];
    // each stroke paints 5 of a segment's 50 pixels
    const double left = std::min(i, 5) / 10.0, right = std::max(0, i - 5) / 10.0;
    const double want_sq = i <= 5 ? left : (left + right) / 2.0;
    EXPECT_NEAR(e.sq, want_sq, 1e-12) << i;
    EXPECT_NEAR(e.aiou, (left + right) / 2.0, 1e-12) << i;
    EXPECT_EQ(e.t_cum_s, static_cast<double>(i));
  }
}

TEST(ReplayManual, ExactPaintingReachesOne) {
  const Scene sc = make_band_scene(3);
  const auto res = replay_manual(sc.recording, sc.gt);
  EXPECT_EQ(res.timeline.final_aiou(), 1.0);
  EXPECT_EQ(res.timeline.final_sq(), 1.0);
  EXPECT_EQ(res.state.reference, sc.gt.segments);
}

TEST(Redundancy, Examples) {
  const auto gt = halves(10, 10);
  AnnotationState s(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 5; ++x) s.predicted.at(x, y) = 1;
  // inside a correctly predicted region
  EXPECT_TRUE(is_redundant(row_stroke(1, 4, 0, 3, 0), s, gt, 0.0));
  // leak into the right half
  for (int y = 0; y < 10; ++y) s.predicted.at(5, y) = 1;
  EXPECT_FALSE(is_redundant(row_stroke(2, 4, 5, 9, 0), s, gt, 0.0));
  // void ground truth under the stroke
  GroundTruth v = gt;
  for (int x = 0; x < 10; ++x) v.segments.at(x, 9) = 0;
  EXPECT_TRUE(is_redundant(row_stroke(2, 9, 0, 9, 0), AnnotationState(10, 10), v, 0.0));
}

TEST(Shuffle, DeterministicPermutation) {
  std::vector<std::size_t> a(20), b;
  std::iota(a.begin(), a.end(), 0);
  b = a;
  detail::shuffle_pass(a, 7, 1);
  detail::shuffle_pass(b, 7, 1);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  auto c = sorted;
  detail::shuffle_pass(c, 7, 2);
  EXPECT_NE(a, c);
}

TEST(Simulate, DegenerateAssistantMatchesManual) {
  const Scene sc = make_band_scene(5);
  SimConfig cfg;
  cfg.assistant.d0 = 0.0;
  cfg.assistant.inference = Inference::NearestNeighbor;
  const auto sim = simulate_assisted(sc.recording, sc.image, sc.gt, cfg);
  const auto man = replay_manual(sc.recording, sc.gt);
  EXPECT_EQ(sim.timeline.executed_actions(), man.timeline.executed_actions());
  EXPECT_EQ(sim.timeline.final_aiou(), man.timeline.final_aiou());
  EXPECT_EQ(sim.state.predicted.count_nonzero(), 0u);
  EXPECT_EQ(sim.timeline.total_time(), man.timeline.total_time());
}

TEST(Simulate, ReproducibleUnderSeed) {
  const Scene sc = make_band_scene(6);
  SimConfig cfg;
  cfg.order = SimOrder::Rnd;
  cfg.seed = 7;
  cfg.assistant.inference = Inference::NearestNeighbor;
  const Assistant a(cfg.assistant);
  const auto r1 = simulate_assisted(sc.recording, sc.image, sc.gt, cfg, a);
  const auto r2 = simulate_assisted(sc.recording, sc.image, sc.gt, cfg, a);
  expect_same(r1.timeline, r2.timeline);
  EXPECT_EQ(r1.state.reference, r2.state.reference);
}

TEST(Simulate, TimelineInvariants) {
  const Scene sc = make_band_scene(8);
  SimConfig cfg;
  cfg.latency = LatencyModel::fixed(2.0);
  const auto r = simulate_assisted(sc.recording, sc.image, sc.gt, cfg);
  double prev = 0.0;
  for (std::size_t i = 0; i < r.timeline.events.size(); ++i) {
    const auto& e = r.timeline.events[i];
    EXPECT_GE(e.t_cum_s, prev);
    if (!e.executed) { EXPECT_EQ(e.duration_s, 0.0); }
    if (e.is_propagation()) {
      EXPECT_EQ(e.duration_s, 2.0);
      ASSERT_GT(i, 0u);
      EXPECT_TRUE(r.timeline.events[i - 1].executed && !r.timeline.events[i - 1].is_propagation());
    }
    prev = e.t_cum_s;
  }
  EXPECT_EQ(r.timeline.propagations(), r.timeline.executed_actions());
  // the reference layer only ever holds executed strokes
  for (std::size_t k = 0; k < r.state.reference.size(); ++k)
    if (r.state.reference[k]) { EXPECT_EQ(r.state.displayed()[k], r.state.reference[k]); }
}

TEST(Synthetic, BandStrokesCoverEachBandExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene sc = make_band_scene(seed);
    EXPECT_EQ(sc.recording.actions.size(), 12u);
    EXPECT_EQ(replay_manual(sc.recording, sc.gt).state.reference, sc.gt.segments) << seed;
    EXPECT_NO_THROW(validate_recording(sc.recording));
  }
}
