#pragma once

// Helpers shared by the unit and acceptance tests.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include <vector>

#include "pegmentor/pnp.hpp"
#include "pegmentor/se3.hpp"

namespace pegmentor::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pegmentor-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  const double x = u(rng), y = u(rng), z = u(rng);
  return {x, y, z};
}

inline Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
  return Rotation::from_quaternion(w, x, y, z);
}

inline RigidTransform random_pose(std::mt19937_64& rng, Frame src = Frame::world(), Frame dst = Frame::world()) {
  const Rotation r = random_rotation(rng);
  return {r, random_vec(rng, -1.0, 1.0), src, dst};
}

inline double max_abs_diff(const Vec3& a, const Vec3& b) { return (a - b).cwiseAbs().maxCoeff(); }

/// World -> camera pose looking at `target` from `distance` meters, tilted up
/// to `max_tilt_rad` from straight overhead, with a random roll.
inline RigidTransform random_viewpoint(std::mt19937_64& rng, const Vec3& target, double min_distance = 0.1,
                                       double max_distance = 0.5, double max_tilt_rad = 60.0 * M_PI / 180.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double d = min_distance + (max_distance - min_distance) * u(rng);
  const double tilt = max_tilt_rad * u(rng);
  const double azimuth = 2.0 * M_PI * u(rng);
  const double roll = 2.0 * M_PI * u(rng);
  const Vec3 eye = target + d * Vec3(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth),
                                     std::cos(tilt));
  return look_at(eye, target, Vec3(std::cos(roll), std::sin(roll), 0.0));
}

/// Exact projections of `world`, each perturbed by uniform noise in
/// [-noise_px, noise_px] per axis.
inline std::vector<Correspondence> synth_correspondences(const CameraIntrinsics& k, const RigidTransform& pose,
                                                         const std::vector<Vec3>& world, double noise_px,
                                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-noise_px, noise_px);
  std::vector<Correspondence> out;
  for (const auto& p : world) {
    Pixel px = project_world(k, pose, p);
    if (noise_px > 0.0) {
      px.u += u(rng);
      px.v += u(rng);
    }
    out.push_back({p, px});
  }
  return out;
}

}  // namespace pegmentor::testing
