#pragma once

#include <string>
#include <vector>

#include "pegmentor/se3.hpp"

namespace pegmentor {

/// World-frame tool-tip path predicted by a policy, with the jaw state at
/// each waypoint (true = open) for hint text.
struct TrajectoryPlan {
  std::vector<Vec3> waypoints;
  std::vector<bool> jaw_hints;
  std::string label;

  void validate() const;
};

/// Linear interpolation inserting `factor - 1` points inside every segment,
/// so n waypoints become factor * (n - 1) + 1.
TrajectoryPlan densify(const TrajectoryPlan& plan, int factor = 2);

/// Shortest distance from p to the polyline through the plan's waypoints.
double distance_to_plan(const TrajectoryPlan& plan, const Vec3& p);

}  // namespace pegmentor
