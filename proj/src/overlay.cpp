#include "pegmentor/overlay.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "pegmentor/error.hpp"
#include "pegmentor/her_ddpg.hpp"

namespace pegmentor {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kRingSamples = 24;

const Rgba kBackground{24, 26, 32, 255};
const Rgba kBoardColor{70, 78, 98, 255};
const Rgba kPegSide{140, 140, 146, 255};
const Rgba kPegTop{212, 212, 218, 255};
const Rgba kBlockSide{178, 52, 44, 255};
const Rgba kBlockTop{226, 92, 78, 255};
const Rgba kShaftColor{170, 172, 182, 255};
const Rgba kJawColor{236, 196, 64, 255};
const Rgba kTipColor{64, 210, 230, 255};

long long to_pixel_index(double v) {
  // Far-away projections are clamped; the rasterizer clips them anyway.
  constexpr double kLimit = 1e12;
  return std::llround(std::clamp(v, -kLimit, kLimit));
}

struct Projected {
  std::vector<double> xs;
  std::vector<double> ys;
};

/// Projects every point, or returns nothing when any lies behind the camera.
std::optional<Projected> project_all(const CameraIntrinsics& k, const RigidTransform& t_w_c,
                                     const std::vector<Vec3>& pts) {
  Projected out;
  out.xs.reserve(pts.size());
  out.ys.reserve(pts.size());
  for (const auto& p : pts) {
    const auto px = try_project(k, t_w_c, p);
    if (!px) return std::nullopt;
    out.xs.push_back(px->u);
    out.ys.push_back(px->v);
  }
  return out;
}

/// Andrew's monotone chain; returns the hull counter-clockwise in image
/// coordinates.
Projected convex_hull(const Projected& in) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < in.xs.size(); ++i) pts.emplace_back(in.xs[i], in.ys[i]);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) {
    Projected out;
    for (const auto& [x, y] : pts) {
      out.xs.push_back(x);
      out.ys.push_back(y);
    }
    return out;
  }
  auto cross = [](const std::pair<double, double>& o, const std::pair<double, double>& a,
                  const std::pair<double, double>& b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  Projected out;
  for (const auto& [x, y] : hull) {
    out.xs.push_back(x);
    out.ys.push_back(y);
  }
  return out;
}

std::vector<Vec3> ring(const Vec3& center, double radius) {
  std::vector<Vec3> pts;
  pts.reserve(kRingSamples);
  for (int i = 0; i < kRingSamples; ++i) {
    const double a = 2.0 * kPi * i / kRingSamples;
    pts.push_back(center + Vec3(radius * std::cos(a), radius * std::sin(a), 0.0));
  }
  return pts;
}

struct Primitive {
  double depth;  // camera-frame z; larger is painted first
  std::function<void(Canvas&)> draw;
};

/// Vertical cylinder standing on `base`: silhouette in the side color, then
/// the top ellipse.
void add_cylinder(std::vector<Primitive>& prims, const CameraIntrinsics& k, const RigidTransform& t_w_c,
                  const Vec3& base, double radius, double height, Rgba side, Rgba top) {
  const Vec3 top_center = base + Vec3(0.0, 0.0, height);
  std::vector<Vec3> top_ring = ring(top_center, radius);
  std::vector<Vec3> all = ring(base, radius);
  all.insert(all.end(), top_ring.begin(), top_ring.end());
  auto silhouette = project_all(k, t_w_c, all);
  auto cap = project_all(k, t_w_c, top_ring);
  if (!silhouette || !cap) return;
  const double depth = transform_point(t_w_c, base + Vec3(0.0, 0.0, 0.5 * height)).z();
  prims.push_back({depth, [hull = convex_hull(*silhouette), cap = std::move(*cap), side, top](Canvas& c) {
                     fill_convex_polygon(c, hull.xs, hull.ys, side);
                     fill_convex_polygon(c, cap.xs, cap.ys, top);
                   }});
}

void add_tool(std::vector<Primitive>& prims, const CameraIntrinsics& k, const RigidTransform& t_w_c,
              const SimState& s) {
  const Vec3 tip = s.tool_tip;
  const Vec3 shaft_dir = Vec3(0.0, 0.35, 1.0).normalized();
  const Vec3 wrist = tip + 0.006 * shaft_dir;
  const Vec3 shaft_end = tip + 0.08 * shaft_dir;
  const Vec3 jaw_dir(std::cos(s.tool_yaw), std::sin(s.tool_yaw), 0.0);
  const double spread = s.jaw_open ? 0.003 : 0.0005;
  const std::vector<Vec3> pts{wrist, shaft_end, tip + spread * jaw_dir, tip - spread * jaw_dir, tip};
  auto px = project_all(k, t_w_c, pts);
  if (!px) return;
  const double depth = transform_point(t_w_c, tip).z();
  prims.push_back({depth, [p = std::move(*px)](Canvas& c) {
                     auto X = [&](int i) { return to_pixel_index(p.xs[i]); };
                     auto Y = [&](int i) { return to_pixel_index(p.ys[i]); };
                     draw_line(c, X(0), Y(0), X(1), Y(1), kShaftColor, 4);
                     draw_line(c, X(0), Y(0), X(2), Y(2), kJawColor, 2);
                     draw_line(c, X(0), Y(0), X(3), Y(3), kJawColor, 2);
                     fill_disc(c, X(4), Y(4), 2, kTipColor);
                   }});
}

}  // namespace

void OverlayStyle::validate() const {
  if (dot_radius_px < 1) throw Error(ErrorCode::InvalidArgument, "dot radius must be >= 1 px");
  if (line_thickness_px < 1) throw Error(ErrorCode::InvalidArgument, "line thickness must be >= 1 px");
  if (text_scale < 1) throw Error(ErrorCode::InvalidArgument, "text scale must be >= 1");
}

std::optional<Pixel> try_project(const CameraIntrinsics& k, const RigidTransform& t_w_c, const Vec3& p_world) {
  const Vec3 p = transform_point(t_w_c, p_world);
  if (!(p.z() > kMinDepth) || !p.allFinite()) return std::nullopt;
  return Pixel{k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

ProjectedTrajectory project_trajectory(const TrajectoryPlan& plan, const StereoRig& rig) {
  const RigidTransform right = rig.right_pose();
  ProjectedTrajectory out;
  out.left.reserve(plan.waypoints.size());
  out.right.reserve(plan.waypoints.size());
  out.visible.reserve(plan.waypoints.size());
  for (const auto& w : plan.waypoints) {
    const auto l = try_project(rig.intrinsics, rig.left_pose, w);
    const auto r = try_project(rig.intrinsics, right, w);
    const bool ok = l && r;
    out.left.push_back(ok ? *l : Pixel{kNaN, kNaN});
    out.right.push_back(ok ? *r : Pixel{kNaN, kNaN});
    out.visible.push_back(ok);
  }
  return out;
}

void draw_overlay(Canvas& canvas, std::span<const Pixel> pixels, const std::vector<bool>& visible,
                  const OverlayStyle& style, std::string_view hint) {
  style.validate();
  if (visible.size() != pixels.size())
    throw Error(ErrorCode::ShapeMismatch, "visibility flags must match the pixel count");
  auto usable = [&](std::size_t i) {
    return visible[i] && std::isfinite(pixels[i].u) && std::isfinite(pixels[i].v);
  };
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!usable(i)) continue;
    if (prev)
      draw_line(canvas, to_pixel_index(pixels[*prev].u), to_pixel_index(pixels[*prev].v),
                to_pixel_index(pixels[i].u), to_pixel_index(pixels[i].v), style.line_color, style.line_thickness_px);
    prev = i;
  }
  for (std::size_t i = 0; i < pixels.size(); ++i)
    if (usable(i))
      fill_disc(canvas, to_pixel_index(pixels[i].u), to_pixel_index(pixels[i].v), style.dot_radius_px,
                style.dot_color);
  if (!hint.empty())
    draw_text(canvas, style.text_margin_px, style.text_margin_px, hint, style.text_color, style.text_scale);
}

FrameBuffer render_overlay(const FrameBuffer& frame, std::span<const Pixel> pixels, const std::vector<bool>& visible,
                           const OverlayStyle& style, std::string_view hint) {
  FrameBuffer out = frame;
  Canvas c = out.canvas();
  draw_overlay(c, pixels, visible, style, hint);
  return out;
}

FrameBuffer render_view(const SimState& state, const PegBoard& board, const CameraIntrinsics& k,
                        const RigidTransform& t_w_c) {
  k.validate();
  FrameBuffer frame(k.width, k.height, kBackground);
  Canvas c = frame.canvas();

  // The board is the floor and always lies behind everything on it.
  Vec3 lo = board.peg_positions.front(), hi = lo;
  for (const auto& p : board.peg_positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  constexpr double kMargin = 0.015;
  const std::vector<Vec3> corners{{lo.x() - kMargin, lo.y() - kMargin, board.board_z},
                                  {hi.x() + kMargin, lo.y() - kMargin, board.board_z},
                                  {hi.x() + kMargin, hi.y() + kMargin, board.board_z},
                                  {lo.x() - kMargin, hi.y() + kMargin, board.board_z}};
  if (auto quad = project_all(k, t_w_c, corners)) fill_convex_polygon(c, quad->xs, quad->ys, kBoardColor);

  std::vector<Primitive> prims;
  for (const auto& p : board.peg_positions)
    add_cylinder(prims, k, t_w_c, Vec3(p.x(), p.y(), board.board_z), board.peg_radius, p.z() - board.board_z,
                 kPegSide, kPegTop);
  add_cylinder(prims, k, t_w_c, state.block_pos, board.block_radius, board.block_height, kBlockSide, kBlockTop);
  add_tool(prims, k, t_w_c, state);
  std::stable_sort(prims.begin(), prims.end(),
                   [](const Primitive& a, const Primitive& b) { return a.depth > b.depth; });
  for (const auto& p : prims) p.draw(c);
  return frame;
}

StereoFrames render_scene(const SimState& state, const PegBoard& board, const StereoRig& rig) {
  rig.validate();
  return {render_view(state, board, rig.intrinsics, rig.left_pose),
          render_view(state, board, rig.intrinsics, rig.right_pose())};
}

TrajectoryPlan guidance_plan(const PolicyFn& policy, const PegBoard& board, const SimState& state, const Goal& goal,
                             const EpisodeConfig& cfg) {
  return densify(rollout_trajectory(policy, board, state, goal, cfg), 2);
}

std::string plan_hint(const TrajectoryPlan& plan) {
  std::string hint = plan.label;
  for (std::size_t i = 1; i < plan.jaw_hints.size(); ++i) {
    if (plan.jaw_hints[i] != plan.jaw_hints[i - 1]) {
      hint += std::string("\n") + (plan.jaw_hints[i] ? "open" : "close") + " jaw at dot " + std::to_string(i + 1) +
              "/" + std::to_string(plan.waypoints.size());
      return hint;
    }
  }
  hint += "\n" + std::to_string(plan.waypoints.size()) + " dots";
  return hint;
}

StereoFrames overlay_plan(const StereoFrames& scene, const TrajectoryPlan& plan, const StereoRig& rig,
                          const OverlayStyle& style) {
  const ProjectedTrajectory proj = project_trajectory(plan, rig);
  const std::string hint = plan_hint(plan);
  return {render_overlay(scene.left, proj.left, proj.visible, style, hint),
          render_overlay(scene.right, proj.right, proj.visible, style, hint)};
}

StereoFrames compose_guidance(const SimState& state, const Goal& goal, const PolicyFn& policy, const PegBoard& board,
                              const EpisodeConfig& cfg, const StereoRig& rig, const OverlayStyle& style) {
  const StereoFrames scene = render_scene(state, board, rig);
  return overlay_plan(scene, guidance_plan(policy, board, state, goal, cfg), rig, style);
}

std::string LatencyReport::to_csv() const {
  std::ostringstream out;
  out << "n_points,mean_ms,std_ms,repeats\n" << std::fixed << std::setprecision(6);
  for (const auto& r : rows) out << r.n_points << ',' << r.mean_ms << ',' << r.std_ms << ',' << r.repeats << '\n';
  return out.str();
}

bool LatencyReport::monotone() const {
  std::vector<LatencyRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const LatencyRow& a, const LatencyRow& b) { return a.n_points < b.n_points; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].mean_ms < sorted[i - 1].mean_ms) return false;
  return true;
}

LatencyReport bench_overlay_latency(std::span<const int> point_counts, int repeats, std::uint64_t seed,
                                    const StereoRig& rig, const Workspace& box) {
  if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  for (int n : point_counts)
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "point counts must be >= 1");
  const PegBoard board = PegBoard::standard();
  const auto [state, goal] = reset(board, EpisodeConfig{}, seed);
  const StereoFrames scene = render_scene(state, board, rig);
  const OverlayStyle style;

  std::mt19937_64 rng(seed);
  LatencyReport report;
  for (int n : point_counts) {
    TrajectoryPlan plan;
    plan.label = "benchmark";
    std::uniform_real_distribution<double> ux(box.lo.x(), box.hi.x()), uy(box.lo.y(), box.hi.y()),
        uz(box.lo.z(), box.hi.z());
    for (int i = 0; i < n; ++i) {
      const double x = ux(rng), y = uy(rng), z = uz(rng);
      plan.waypoints.emplace_back(x, y, z);
      plan.jaw_hints.push_back(true);
    }
    const std::string hint = plan_hint(plan);

    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(repeats));
    for (int it = 0; it < kBenchWarmup + repeats; ++it) {
      const auto t0 = std::chrono::steady_clock::now();
      const ProjectedTrajectory proj = project_trajectory(plan, rig);
      const FrameBuffer left = render_overlay(scene.left, proj.left, proj.visible, style, hint);
      const FrameBuffer right = render_overlay(scene.right, proj.right, proj.visible, style, hint);
      const auto t1 = std::chrono::steady_clock::now();
      if (it >= kBenchWarmup) samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(samples.size());
    report.rows.push_back({n, mean, std::sqrt(var), repeats});
  }
  return report;
}

}  // namespace pegmentor
