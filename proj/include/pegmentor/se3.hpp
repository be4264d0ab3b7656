#pragma once

// Frame-tagged rigid transforms and the pinhole camera model.
//
// Convention: a RigidTransform tagged src -> dst maps coordinates expressed
// in the src frame to coordinates expressed in the dst frame,
//
//     p_dst = R * p_src + t.
//
// compose(a, b) applies a first, then b, so the tags must chain
// (a.dst == b.src). The camera pose used for projection is therefore a
// World -> Camera transform.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <utility>

namespace pegmentor {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Frame {
  enum class Kind : std::uint8_t { World, Object, Rcm, Tip, CameraLeft, CameraRight };

  Kind kind = Kind::World;
  int index = 0;  // only meaningful for Object

  static Frame world() { return {Kind::World, 0}; }
  static Frame object(int i);
  static Frame rcm() { return {Kind::Rcm, 0}; }
  static Frame tip() { return {Kind::Tip, 0}; }
  static Frame camera_left() { return {Kind::CameraLeft, 0}; }
  static Frame camera_right() { return {Kind::CameraRight, 0}; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

std::string to_string(const Frame& f);

/// Unit quaternion, renormalized on every construction and product, with the
/// double cover resolved to w >= 0.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  static Rotation from_quaternion(double w, double x, double y, double z);
  static Rotation from_axis_angle(const Vec3& axis, double angle_rad);
  /// Axis-angle packed as axis * angle.
  static Rotation from_rotation_vector(const Vec3& rv);
  /// Nearest rotation to m (orthonormalized through SVD).
  static Rotation from_matrix(const Mat3& m);
  static Rotation about_x(double rad) { return from_axis_angle(Vec3::UnitX(), rad); }
  static Rotation about_y(double rad) { return from_axis_angle(Vec3::UnitY(), rad); }
  static Rotation about_z(double rad) { return from_axis_angle(Vec3::UnitZ(), rad); }

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Vec3 rotate(const Vec3& v) const { return q_ * v; }
  Vec3 rotation_vector() const;
  Rotation inverse() const;
  /// Geodesic angle between two rotations, radians in [0, pi].
  double angle_to(const Rotation& other) const;

  Rotation operator*(const Rotation& rhs) const;

 private:
  explicit Rotation(const Eigen::Quaterniond& q);
  Eigen::Quaterniond q_;
};

class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Rotation& r, const Vec3& t, Frame src, Frame dst)
      : rotation_(r), translation_(t), src_(src), dst_(dst) {}

  static RigidTransform identity(Frame f = Frame::world()) { return {Rotation(), Vec3::Zero(), f, f}; }
  static RigidTransform translation(const Vec3& t, Frame src = Frame::world(),
                                    Frame dst = Frame::world()) {
    return {Rotation(), t, src, dst};
  }
  static RigidTransform rotation(const Rotation& r, Frame src = Frame::world(),
                                 Frame dst = Frame::world()) {
    return {r, Vec3::Zero(), src, dst};
  }

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Frame src() const { return src_; }
  Frame dst() const { return dst_; }

  /// Same geometry with new frame tags.
  RigidTransform retagged(Frame src, Frame dst) const { return {rotation_, translation_, src, dst}; }

 private:
  Rotation rotation_;
  Vec3 translation_ = Vec3::Zero();
  Frame src_ = Frame::world();
  Frame dst_ = Frame::world();
};

/// a: src -> mid, b: mid -> dst. Throws FrameMismatch unless a.dst == b.src.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
Vec3 transform_point(const RigidTransform& t, const Vec3& p);

/// World -> camera transform for a camera at `eye` whose optical axis (+z)
/// points at `target`; image +y points away from `up`.
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                       Frame camera = Frame::camera_left());

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct CameraIntrinsics {
  double fx = 800.0;
  double fy = 800.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  /// Throws InvalidArgument when focal lengths or sizes are not positive.
  void validate() const;
  Mat3 matrix() const;
};

/// Points closer than this along the optical axis count as behind the camera.
inline constexpr double kMinDepth = 1e-9;

/// Pinhole projection of a camera-frame point. Throws BehindCamera.
Pixel project(const CameraIntrinsics& k, const Vec3& p_cam);
Pixel project_world(const CameraIntrinsics& k, const RigidTransform& t_w_c, const Vec3& p_world);

/// Rectified stereo pair: shared intrinsics, right camera displaced by
/// `baseline` meters along the left camera's +x axis.
struct StereoRig {
  CameraIntrinsics intrinsics;
  RigidTransform left_pose = RigidTransform::identity();  // World -> CameraLeft
  double baseline = 0.005;

  void validate() const;
  RigidTransform right_pose() const;  // World -> CameraRight
};

std::pair<Pixel, Pixel> project_stereo(const StereoRig& rig, const Vec3& p_world);

}  // namespace pegmentor
