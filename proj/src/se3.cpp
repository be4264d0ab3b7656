#include "pegmentor/se3.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "pegmentor/error.hpp"

namespace pegmentor {

Frame Frame::object(int i) {
  if (i < 0) throw Error(ErrorCode::InvalidArgument, "object frame index must be non-negative");
  return {Kind::Object, i};
}

std::string to_string(const Frame& f) {
  switch (f.kind) {
    case Frame::Kind::World: return "World";
    case Frame::Kind::Object: return "Object(" + std::to_string(f.index) + ")";
    case Frame::Kind::Rcm: return "Rcm";
    case Frame::Kind::Tip: return "Tip";
    case Frame::Kind::CameraLeft: return "CameraLeft";
    case Frame::Kind::CameraRight: return "CameraRight";
  }
  return "?";
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  q_.normalize();
  if (q_.w() < 0.0) q_.coeffs() *= -1.0;
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  const Eigen::Quaterniond q(w, x, y, z);
  if (!(q.norm() > 0.0) || !q.coeffs().allFinite())
    throw Error(ErrorCode::InvalidArgument, "quaternion must be finite and non-zero");
  return Rotation(q);
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0)) return Rotation();
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis / n)));
}

Rotation Rotation::from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-300) return Rotation();
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, rv / angle)));
}

Rotation Rotation::from_matrix(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return Rotation(Eigen::Quaterniond(r));
}

Vec3 Rotation::rotation_vector() const {
  const Eigen::AngleAxisd aa(q_);
  return aa.axis() * aa.angle();
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

double Rotation::angle_to(const Rotation& other) const {
  // atan2 of the relative rotation keeps full precision near zero, where
  // acos of the quaternion dot product loses half the digits.
  const Eigen::Quaterniond rel = q_.conjugate() * other.q_;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

Rotation Rotation::operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (!(a.dst() == b.src())) {
    throw Error(ErrorCode::FrameMismatch,
                "cannot chain " + to_string(a.src()) + "->" + to_string(a.dst()) + " with " +
                    to_string(b.src()) + "->" + to_string(b.dst()));
  }
  return {b.rotation() * a.rotation(), b.rotation().rotate(a.translation()) + b.translation(), a.src(),
          b.dst()};
}

RigidTransform invert(const RigidTransform& t) {
  const Rotation r_inv = t.rotation().inverse();
  return {r_inv, -r_inv.rotate(t.translation()), t.dst(), t.src()};
}

Vec3 transform_point(const RigidTransform& t, const Vec3& p) {
  return t.rotation().rotate(p) + t.translation();
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up, Frame camera) {
  const Vec3 z = target - eye;
  if (!(z.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "look_at: eye coincides with target");
  const Vec3 zc = z.normalized();
  const Vec3 xc_raw = zc.cross(up);
  if (xc_raw.norm() < 1e-12) throw Error(ErrorCode::InvalidArgument, "look_at: up is parallel to view axis");
  const Vec3 xc = xc_raw.normalized();
  const Vec3 yc = zc.cross(xc);
  Mat3 r;
  r.row(0) = xc.transpose();
  r.row(1) = yc.transpose();
  r.row(2) = zc.transpose();
  const Rotation rot = Rotation::from_matrix(r);
  return {rot, -rot.rotate(eye), Frame::world(), camera};
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy))
    throw Error(ErrorCode::InvalidArgument, "principal point must be finite");
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Pixel project(const CameraIntrinsics& k, const Vec3& p_cam) {
  if (!(p_cam.z() > kMinDepth)) {
    throw Error(ErrorCode::BehindCamera, "point depth " + std::to_string(p_cam.z()) + " m");
  }
  return {k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy};
}

Pixel project_world(const CameraIntrinsics& k, const RigidTransform& t_w_c, const Vec3& p_world) {
  return project(k, transform_point(t_w_c, p_world));
}

void StereoRig::validate() const {
  intrinsics.validate();
  // A zero baseline is accepted as the degenerate mono rig.
  if (!(baseline >= 0.0)) throw Error(ErrorCode::InvalidArgument, "stereo baseline must be non-negative");
}

RigidTransform StereoRig::right_pose() const {
  const RigidTransform shift = RigidTransform::translation(Vec3(-baseline, 0.0, 0.0), left_pose.dst(),
                                                           Frame::camera_right());
  return compose(left_pose, shift);
}

std::pair<Pixel, Pixel> project_stereo(const StereoRig& rig, const Vec3& p_world) {
  const Vec3 p_left = transform_point(rig.left_pose, p_world);
  const Vec3 p_right = p_left - Vec3(rig.baseline, 0.0, 0.0);
  return {project(rig.intrinsics, p_left), project(rig.intrinsics, p_right)};
}

}  // namespace pegmentor
