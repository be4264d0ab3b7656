#pragma once

// Camera pose from 2D/3D correspondences: a linear initial estimate followed
// by Levenberg-Marquardt refinement of the pixel reprojection error.

#include <optional>
#include <span>
#include <vector>

#include "pegmentor/se3.hpp"

namespace pegmentor {

struct Correspondence {
  Vec3 world = Vec3::Zero();  // meters
  Pixel pixel;                // clicked location
};

struct PnpConfig {
  int max_iterations = 100;
  double cost_tolerance = 1e-10;   // relative decrease of the squared-error cost
  double param_tolerance = 1e-10;  // norm of the 6-vector step
  double initial_damping = 1e-3;
  int min_points = 4;

  void validate() const;
};

struct PnpResult {
  RigidTransform pose;  // World -> Camera
  double rms_error_px = 0.0;
  std::vector<double> per_point_error_px;
  int iterations = 0;
  bool converged = false;
  /// Set when the point count is below min_points (three points admit up to
  /// four poses); converged is forced to false in that case.
  bool multi_solution_warning = false;
  /// Cost after the initial guess and after every accepted step.
  std::vector<double> cost_trace;
};

struct ReprojectionError {
  double rms = 0.0;
  std::vector<double> per_point;
};

ReprojectionError reprojection_error(const CameraIntrinsics& k, const RigidTransform& pose,
                                     std::span<const Correspondence> corrs);

/// Linear pose estimate for >= 6 correspondences (planar homography when the
/// world points are coplanar, 3x4 DLT otherwise), else a camera 0.3 m above
/// the centroid looking straight down.
RigidTransform initial_pose_guess(const CameraIntrinsics& k, std::span<const Correspondence> corrs);

/// Throws TooFewPoints for fewer than 3 correspondences and
/// DegenerateGeometry for coincident or collinear world points.
PnpResult solve_pnp(const CameraIntrinsics& k, std::span<const Correspondence> corrs,
                    const PnpConfig& cfg = {}, const std::optional<RigidTransform>& initial = std::nullopt);

}  // namespace pegmentor
