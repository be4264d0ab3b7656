#include "pegmentor/trajectory.hpp"

#include <algorithm>
#include <limits>

#include "pegmentor/error.hpp"

namespace pegmentor {

void TrajectoryPlan::validate() const {
  if (waypoints.empty()) throw Error(ErrorCode::InvalidArgument, "trajectory plan has no waypoints");
  if (jaw_hints.size() != waypoints.size())
    throw Error(ErrorCode::InvalidArgument, "jaw hint count differs from waypoint count");
  for (const auto& w : waypoints)
    if (!w.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite waypoint");
}

TrajectoryPlan densify(const TrajectoryPlan& plan, int factor) {
  plan.validate();
  if (factor < 1) throw Error(ErrorCode::InvalidArgument, "densify factor must be >= 1");
  TrajectoryPlan out;
  out.label = plan.label;
  for (std::size_t i = 0; i + 1 < plan.waypoints.size(); ++i) {
    for (int s = 0; s < factor; ++s) {
      const double f = static_cast<double>(s) / factor;
      out.waypoints.push_back((1.0 - f) * plan.waypoints[i] + f * plan.waypoints[i + 1]);
      out.jaw_hints.push_back(plan.jaw_hints[i]);
    }
  }
  out.waypoints.push_back(plan.waypoints.back());
  out.jaw_hints.push_back(plan.jaw_hints.back());
  return out;
}

double distance_to_plan(const TrajectoryPlan& plan, const Vec3& p) {
  plan.validate();
  if (plan.waypoints.size() == 1) return (p - plan.waypoints.front()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < plan.waypoints.size(); ++i) {
    const Vec3& a = plan.waypoints[i];
    const Vec3 ab = plan.waypoints[i + 1] - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (a + s * ab)).norm());
  }
  return best;
}

}  // namespace pegmentor
