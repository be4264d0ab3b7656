#pragma once

// Trajectory guidance: projection of world-frame plans through the stereo
// rig, the dot/polyline/hint overlay, the synthetic scene renderer and the
// overlay latency benchmark.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pegmentor/pegboard.hpp"
#include "pegmentor/raster.hpp"
#include "pegmentor/se3.hpp"
#include "pegmentor/trajectory.hpp"

namespace pegmentor {

struct OverlayStyle {
  int dot_radius_px = 2;
  Rgba dot_color{255, 255, 255, 255};
  Rgba line_color{0, 255, 0, 255};
  Rgba text_color{255, 255, 0, 255};
  int line_thickness_px = 1;
  int text_scale = 2;
  int text_margin_px = 8;  // hint anchored at the top-left corner

  void validate() const;
};

struct StereoFrames {
  FrameBuffer left;
  FrameBuffer right;

  friend bool operator==(const StereoFrames&, const StereoFrames&) = default;
};

struct ProjectedTrajectory {
  std::vector<Pixel> left;
  std::vector<Pixel> right;
  std::vector<bool> visible;  // false when behind either camera
};

/// Projection that reports points at or behind the image plane instead of throwing.
std::optional<Pixel> try_project(const CameraIntrinsics& k, const RigidTransform& t_w_c, const Vec3& p_world);

/// Per-waypoint stereo pixels. Invisible waypoints get NaN pixels.
ProjectedTrajectory project_trajectory(const TrajectoryPlan& plan, const StereoRig& rig);

/// Draws the polyline through consecutive visible pixels, a dot on each
/// visible pixel, then the hint text; touches nothing else.
void draw_overlay(Canvas& canvas, std::span<const Pixel> pixels, const std::vector<bool>& visible,
                  const OverlayStyle& style, std::string_view hint);
FrameBuffer render_overlay(const FrameBuffer& frame, std::span<const Pixel> pixels, const std::vector<bool>& visible,
                           const OverlayStyle& style, std::string_view hint);

/// Board, pegs, block and tool for one camera, painted far to near.
FrameBuffer render_view(const SimState& state, const PegBoard& board, const CameraIntrinsics& k,
                        const RigidTransform& t_w_c);
StereoFrames render_scene(const SimState& state, const PegBoard& board, const StereoRig& rig);

/// The display plan: the policy's noise-free rollout, densified 2x.
TrajectoryPlan guidance_plan(const PolicyFn& policy, const PegBoard& board, const SimState& state, const Goal& goal,
                             const EpisodeConfig& cfg);

/// Hint text for a plan: its label and the next jaw command.
std::string plan_hint(const TrajectoryPlan& plan);

/// Projects the plan through `rig` and overlays it on both eyes.
StereoFrames overlay_plan(const StereoFrames& scene, const TrajectoryPlan& plan, const StereoRig& rig,
                          const OverlayStyle& style);

/// render_scene -> guidance_plan -> project_trajectory -> render_overlay, per eye.
StereoFrames compose_guidance(const SimState& state, const Goal& goal, const PolicyFn& policy, const PegBoard& board,
                              const EpisodeConfig& cfg, const StereoRig& rig, const OverlayStyle& style);

struct LatencyRow {
  int n_points = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;  // population standard deviation
  int repeats = 0;
};

struct LatencyReport {
  std::vector<LatencyRow> rows;

  /// Columns n_points, mean_ms, std_ms, repeats.
  std::string to_csv() const;
  /// Means non-decreasing in point count.
  bool monotone() const;
};

inline constexpr int kBenchWarmup = 5;

/// For each count, n seeded random points in the workspace box are projected
/// and overlaid on both eyes of a pre-rendered scene; each repeat times the
/// whole project + render path on a monotonic clock. The first kBenchWarmup
/// iterations of every batch are run but not recorded.
LatencyReport bench_overlay_latency(std::span<const int> point_counts, int repeats, std::uint64_t seed,
                                    const StereoRig& rig, const Workspace& box = {});

}  // namespace pegmentor
