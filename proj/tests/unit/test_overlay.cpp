#include <cmath>
#include <random>

#include "doctest.h"
#include "pegmentor/config.hpp"
#include "pegmentor/error.hpp"
#include "pegmentor/overlay.hpp"
#include "pegmentor/her_ddpg.hpp"

using namespace pegmentor;

namespace {

const PegBoard kBoard = PegBoard::standard();
const StereoRig kRig = AppConfig::default_rig();
const Rgba kFill{10, 20, 30, 255};

Action zero_policy(const SimState&, const Goal&) { return Action{}; }

std::size_t count_diff(const FrameBuffer& a, const FrameBuffer& b) {
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) n += !(a.at(x, y) == b.at(x, y));
  return n;
}

Vec3 on_left_axis(double depth) {
  return transform_point(invert(kRig.left_pose), Vec3(0.0, 0.0, depth));
}

}  // namespace

TEST_CASE("try_project: optical axis and points behind the camera") {
  const auto p = try_project(kRig.intrinsics, kRig.left_pose, on_left_axis(0.3));
  REQUIRE(p);
  CHECK(p->u == doctest::Approx(kRig.intrinsics.cx).epsilon(1e-12));
  CHECK(p->v == doctest::Approx(kRig.intrinsics.cy).epsilon(1e-12));
  CHECK_FALSE(try_project(kRig.intrinsics, kRig.left_pose, on_left_axis(-0.1)));
  CHECK_FALSE(try_project(kRig.intrinsics, kRig.left_pose, on_left_axis(0.0)));
}

TEST_CASE("project_trajectory: visibility flags absorb points behind the rig") {
  TrajectoryPlan plan;
  plan.waypoints = {on_left_axis(0.3), on_left_axis(-0.2), on_left_axis(0.25)};
  plan.jaw_hints = {true, true, true};
  const ProjectedTrajectory proj = project_trajectory(plan, kRig);
  REQUIRE(proj.left.size() == 3);
  CHECK(proj.visible == std::vector<bool>{true, false, true});
  CHECK(proj.left[0].u == doctest::Approx(kRig.intrinsics.cx));
  CHECK(std::isnan(proj.left[1].u));
  CHECK(std::isnan(proj.right[1].v));
}

TEST_CASE("project_trajectory: scripted plan disparity equals fx*b/Z per point") {
  const EpisodeConfig cfg;
  auto [s, g] = reset(kBoard, cfg, 21);
  const TrajectoryPlan plan = rollout_trajectory(ScriptedPolicy(kBoard, cfg), kBoard, s, g, cfg);
  const Episode ep = run_episode(kBoard, cfg, s, g, ScriptedPolicy(kBoard, cfg));
  REQUIRE(plan.waypoints.size() == ep.transitions.size() + 1);
  const ProjectedTrajectory proj = project_trajectory(plan, kRig);
  for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
    REQUIRE(proj.visible[i]);
    CHECK(std::isfinite(proj.left[i].u));
    const double z = transform_point(kRig.left_pose, plan.waypoints[i]).z();
    CHECK(proj.left[i].u - proj.right[i].u == doctest::Approx(kRig.intrinsics.fx * kRig.baseline / z).epsilon(1e-9));
    CHECK(proj.left[i].v == doctest::Approx(proj.right[i].v).epsilon(1e-9));
  }
}

TEST_CASE("render_overlay: an empty pixel list leaves the frame byte-identical") {
  const FrameBuffer f(64, 48, kFill);
  CHECK(render_overlay(f, {}, {}, OverlayStyle{}, "") == f);
  CHECK_THROWS_AS(render_overlay(f, std::vector<Pixel>{{1, 1}}, {}, OverlayStyle{}, ""), Error);
  OverlayStyle bad;
  bad.dot_radius_px = 0;
  CHECK_THROWS_AS(render_overlay(f, {}, {}, bad, ""), Error);
}

TEST_CASE("render_overlay: two points give two discs plus the segment") {
  const FrameBuffer f(100, 80, kFill);
  const OverlayStyle style;
  const std::vector<Pixel> px{{10.2, 20.4}, {70.6, 45.1}};
  const FrameBuffer out = render_overlay(f, px, {true, true}, style, "");

  // Reference: line pixels from the midpoint sequence, discs drawn over them.
  FrameBuffer ref = f;
  auto put = [&](long long x, long long y, Rgba c) {
    if (x >= 0 && y >= 0 && x < ref.width() && y < ref.height()) {
      auto& p = ref.pixels();
      const std::size_t o = (static_cast<std::size_t>(y) * ref.width() + x) * 4;
      p[o] = c.r;
      p[o + 1] = c.g;
      p[o + 2] = c.b;
      p[o + 3] = c.a;
    }
  };
  const long long x0 = 10, y0 = 20, x1 = 71, y1 = 45;
  for (long long i = 0; i <= x1 - x0; ++i)
    put(x0 + i, y0 + static_cast<long long>(std::ceil(static_cast<double>(i) * (y1 - y0) / (x1 - x0) - 0.5)),
        style.line_color);
  const int r = style.dot_radius_px;
  for (auto [cx, cy] : {std::pair{x0, y0}, std::pair{x1, y1}})
    for (long long y = cy - r; y <= cy + r; ++y)
      for (long long x = cx - r; x <= cx + r; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) put(x, y, style.dot_color);
  CHECK(out == ref);
  // 62 line pixels + 2 * 13 disc pixels - the 2 * 2 line pixels under the discs.
  CHECK(count_diff(out, f) == 62 + 26 - 4);
}

TEST_CASE("render_overlay: invisible points break the polyline") {
  const FrameBuffer f(100, 80, kFill);
  const std::vector<Pixel> px{{10, 10}, {50, 40}, {90, 10}};
  const FrameBuffer out = render_overlay(f, px, {true, false, true}, OverlayStyle{}, "");
  CHECK(out.at(50, 40) == kFill);
  CHECK(out.at(50, 10) == OverlayStyle{}.line_color);
}

TEST_CASE("render_overlay: all points off-frame paints only the hint") {
  const FrameBuffer f(120, 90, kFill);
  const OverlayStyle style;
  const std::vector<Pixel> px{{-500, -500}, {-400, -900}, {5000, -10}};
  const FrameBuffer out = render_overlay(f, px, {true, true, true}, style, "hint");
  FrameBuffer text_only = f;
  Canvas c = text_only.canvas();
  draw_text(c, style.text_margin_px, style.text_margin_px, "hint", style.text_color, style.text_scale);
  CHECK(out == text_only);
  CHECK(count_diff(out, f) > 0);
}

TEST_CASE("render_overlay is a pure function of its inputs") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-100, 740), v(-100, 580);
  std::vector<Pixel> px;
  std::vector<bool> vis;
  for (int i = 0; i < 300; ++i) {
    px.push_back({u(rng), v(rng)});
    vis.push_back(i % 7 != 0);
  }
  const FrameBuffer f(640, 480, kFill);
  const FrameBuffer a = render_overlay(f, px, vis, OverlayStyle{}, "pick\nplace");
  CHECK(render_overlay(f, px, vis, OverlayStyle{}, "pick\nplace") == a);
  CHECK(f == FrameBuffer(640, 480, kFill));
}

TEST_CASE("render_scene: deterministic, stereo frames differ, peg tops land where projected") {
  const EpisodeConfig cfg;
  auto [s, g] = reset(kBoard, cfg, 5);
  const StereoFrames a = render_scene(s, kBoard, kRig);
  CHECK(render_scene(s, kBoard, kRig) == a);
  CHECK_FALSE(a.left == a.right);
  CHECK(a.left.width() == 640);
  CHECK(a.left.height() == 480);

  const Rgba peg_top{212, 212, 218, 255};
  int checked = 0;
  for (int i = 0; i < static_cast<int>(kBoard.peg_positions.size()); ++i) {
    if (i == s.source_peg) continue;  // covered by the block
    for (const auto& [frame, pose] : {std::pair{&a.left, kRig.left_pose}, std::pair{&a.right, kRig.right_pose()}}) {
      const Pixel p = project_world(kRig.intrinsics, pose, kBoard.peg_positions[i]);
      const int x = static_cast<int>(std::lround(p.u)), y = static_cast<int>(std::lround(p.v));
      bool hit = false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) hit = hit || frame->at(x + dx, y + dy) == peg_top;
      CHECK_MESSAGE(hit, "peg ", i);
      ++checked;
    }
  }
  CHECK(checked == 22);

  StereoRig mono = kRig;
  mono.baseline = 0.0;
  const StereoFrames m = render_scene(s, kBoard, mono);
  CHECK(m.left == m.right);
}

TEST_CASE("compose_guidance: zero-action plan is a single dot at the tool tip") {
  const EpisodeConfig cfg;
  auto [s, g] = reset(kBoard, cfg, 6);
  const OverlayStyle style;
  const StereoFrames scene = render_scene(s, kBoard, kRig);
  const StereoFrames out = compose_guidance(s, g, zero_policy, kBoard, cfg, kRig, style);
  const TrajectoryPlan plan = guidance_plan(zero_policy, kBoard, s, g, cfg);
  CHECK(plan.waypoints.size() == 101);

  for (const auto& [eye, pose, base] : {std::tuple{&out.left, kRig.left_pose, &scene.left},
                                       std::tuple{&out.right, kRig.right_pose(), &scene.right}}) {
    FrameBuffer expected = *base;
    Canvas c = expected.canvas();
    const Pixel tip = project_world(kRig.intrinsics, pose, s.tool_tip);
    fill_disc(c, std::llround(tip.u), std::llround(tip.v), style.dot_radius_px, style.dot_color);
    draw_text(c, style.text_margin_px, style.text_margin_px, plan_hint(plan), style.text_color, style.text_scale);
    CHECK(*eye == expected);
  }
}

TEST_CASE("compose_guidance: scripted plan ends over the goal peg") {
  const EpisodeConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    auto [s, g] = reset(kBoard, cfg, seed);
    const TrajectoryPlan plan = guidance_plan(ScriptedPolicy(kBoard, cfg), kBoard, s, g, cfg);
    const ProjectedTrajectory proj = project_trajectory(plan, kRig);
    const Vec3 goal_top = kBoard.peg_positions[static_cast<std::size_t>(s.goal_peg)];
    const Pixel target = project_world(kRig.intrinsics, kRig.left_pose, goal_top);
    const double z = transform_point(kRig.left_pose, goal_top).z();
    const double tolerance_px = kRig.intrinsics.fx * cfg.goal_tolerance / z;
    const Pixel last = proj.left.back();
    CHECK(std::hypot(last.u - target.u, last.v - target.v) <= tolerance_px);
  }
}

TEST_CASE("guidance off: the scene frames are left untouched") {
  const EpisodeConfig cfg;
  auto [s, g] = reset(kBoard, cfg, 8);
  const StereoFrames scene = render_scene(s, kBoard, kRig);
  TrajectoryPlan empty;
  CHECK(render_overlay(scene.left, {}, {}, OverlayStyle{}, "") == scene.left);
  const StereoFrames with = compose_guidance(s, g, ScriptedPolicy(kBoard, cfg), kBoard, cfg, kRig, OverlayStyle{});
  CHECK_FALSE(with.left == scene.left);
  CHECK(render_scene(s, kBoard, kRig) == scene);
}

TEST_CASE("the display plan is the rollout densified 2x") {
  const EpisodeConfig cfg;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    auto [s, g] = reset(kBoard, cfg, seed);
    const TrajectoryPlan raw = rollout_trajectory(ScriptedPolicy(kBoard, cfg), kBoard, s, g, cfg);
    const TrajectoryPlan plan = guidance_plan(ScriptedPolicy(kBoard, cfg), kBoard, s, g, cfg);
    CHECK(plan.waypoints.size() == 2 * (raw.waypoints.size() - 1) + 1);
    CHECK(plan.jaw_hints.size() == plan.waypoints.size());
    CHECK(plan.waypoints.back() == raw.waypoints.back());
  }
  // A plan that runs to the horizon has 2 * 50 + 1 points.
  auto [s, g] = reset(kBoard, cfg, 14);
  CHECK(guidance_plan(zero_policy, kBoard, s, g, cfg).waypoints.size() == 101);
}

TEST_CASE("plan hints name the next jaw change") {
  TrajectoryPlan plan;
  plan.label = "scripted";
  plan.waypoints = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  plan.jaw_hints = {true, false, false};
  CHECK(plan_hint(plan) == "scripted\nclose jaw at dot 2/3");
  plan.jaw_hints = {true, true, true};
  CHECK(plan_hint(plan) == "scripted\n3 dots");
}

TEST_CASE("densify and distance_to_plan") {
  TrajectoryPlan plan;
  plan.waypoints = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0)};
  plan.jaw_hints = {true, true, false};
  const TrajectoryPlan d = densify(plan, 2);
  REQUIRE(d.waypoints.size() == 5);
  CHECK(d.waypoints[1] == Vec3(0.5, 0, 0));
  CHECK(d.waypoints[3] == Vec3(1, 0.5, 0));
  CHECK(densify(plan, 4).waypoints.size() == 9);
  CHECK(densify(plan, 1).waypoints == plan.waypoints);
  CHECK(distance_to_plan(plan, Vec3(0.5, 0.3, 0)) == doctest::Approx(0.3));
  CHECK(distance_to_plan(plan, Vec3(2, 2, 0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(distance_to_plan(plan, Vec3(1, 0.5, 0)) == 0.0);
  TrajectoryPlan single;
  single.waypoints = {Vec3(0, 0, 1)};
  single.jaw_hints = {true};
  CHECK(distance_to_plan(single, Vec3::Zero()) == doctest::Approx(1.0));
  CHECK_THROWS_AS(TrajectoryPlan{}.validate(), Error);
}

TEST_CASE("latency report: shape, CSV and monotonicity") {
  const std::vector<int> counts{50, 400};
  const LatencyReport r = bench_overlay_latency(counts, 3, 1, kRig);
  REQUIRE(r.rows.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.mean_ms > 0);
    CHECK(row.std_ms >= 0);
    CHECK(row.repeats == 3);
  }
  CHECK(r.to_csv().rfind("n_points,mean_ms,std_ms,repeats\n50,", 0) == 0);
  LatencyReport hand{{{200, 1.0, 0, 1}, {1000, 2.0, 0, 1}, {2600, 2.0, 0, 1}}};
  CHECK(hand.monotone());
  hand.rows.push_back({5000, 1.5, 0, 1});
  CHECK_FALSE(hand.monotone());
  CHECK_THROWS_AS(bench_overlay_latency(counts, 0, 1, kRig), Error);
  const std::vector<int> bad{0};
  CHECK_THROWS_AS(bench_overlay_latency(bad, 1, 1, kRig), Error);
}
