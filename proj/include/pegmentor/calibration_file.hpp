#pragma once

// Persisted result of a camera calibration: intrinsics, the solved
// world -> camera pose, the fit error and the correspondences used.

#include <filesystem>
#include <vector>

#include "pegmentor/config.hpp"
#include "pegmentor/pnp.hpp"

namespace pegmentor {

struct CalibrationRecord {
  CameraIntrinsics intrinsics;
  RigidTransform pose;  // World -> CameraLeft
  double rms_error_px = 0.0;
  bool converged = false;
  std::vector<Correspondence> correspondences;
};

Json to_json(const CalibrationRecord& c);
CalibrationRecord calibration_from_json(const Json& j);
void save_calibration(const std::filesystem::path& path, const CalibrationRecord& c);
CalibrationRecord load_calibration(const std::filesystem::path& path);

}  // namespace pegmentor
