#include <cmath>
#include <random>

#include "doctest.h"
#include "pegmentor/error.hpp"
#include "pegmentor/se3.hpp"
#include "support.hpp"

using namespace pegmentor;
using pegmentor::testing::max_abs_diff;
using pegmentor::testing::random_pose;
using pegmentor::testing::random_vec;

namespace {
const double kHalfPi = std::acos(0.0);

bool same_pose(const RigidTransform& a, const RigidTransform& b, double tol) {
  return (a.rotation().matrix() - b.rotation().matrix()).cwiseAbs().maxCoeff() < tol &&
         max_abs_diff(a.translation(), b.translation()) < tol;
}
}  // namespace

TEST_CASE("compose with identity leaves a transform unchanged") {
  std::mt19937_64 rng(1);
  const RigidTransform t = random_pose(rng, Frame::world(), Frame::camera_left());
  const RigidTransform c = compose(RigidTransform::identity(Frame::world()), t);
  CHECK(same_pose(c, t, 1e-12));
  CHECK(c.src() == Frame::world());
  CHECK(c.dst() == Frame::camera_left());
}

TEST_CASE("compose with the inverse gives identity") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform t = random_pose(rng, Frame::world(), Frame::tip());
    const RigidTransform c = compose(t, invert(t));
    CHECK(same_pose(c, RigidTransform::identity(), 1e-9));
    CHECK(c.src() == Frame::world());
    CHECK(c.dst() == Frame::world());
  }
}

TEST_CASE("translate then rotate about z maps the origin to (0,1,0)") {
  const auto tr = RigidTransform::translation({1, 0, 0}, Frame::world(), Frame::rcm());
  const auto rot = RigidTransform::rotation(Rotation::about_z(kHalfPi), Frame::rcm(), Frame::tip());
  const Vec3 p = transform_point(compose(tr, rot), Vec3::Zero());
  CHECK(max_abs_diff(p, Vec3(0, 1, 0)) < 1e-12);
}

TEST_CASE("compose rejects frame tags that do not chain") {
  const auto a = RigidTransform::identity(Frame::world()).retagged(Frame::world(), Frame::camera_left());
  const auto b = RigidTransform::identity().retagged(Frame::object(2), Frame::tip());
  try {
    (void)compose(a, b);
    FAIL("expected FrameMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FrameMismatch);
  }
  CHECK_THROWS_AS(Frame::object(-1), Error);
  CHECK(Frame::object(3) != Frame::object(4));
}

TEST_CASE("compose applies the first transform first") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_pose(rng, Frame::world(), Frame::rcm());
    const auto b = random_pose(rng, Frame::rcm(), Frame::tip());
    const Vec3 p = random_vec(rng, -1, 1);
    CHECK(max_abs_diff(transform_point(compose(a, b), p), transform_point(b, transform_point(a, p))) < 1e-9);
  }
}

TEST_CASE("invert examples") {
  CHECK(same_pose(invert(RigidTransform::identity()), RigidTransform::identity(), 0.0 + 1e-15));
  const auto inv = invert(RigidTransform::translation({1, 2, 3}, Frame::world(), Frame::object(0)));
  CHECK(max_abs_diff(inv.translation(), Vec3(-1, -2, -3)) == 0.0);
  CHECK(inv.src() == Frame::object(0));
  CHECK(inv.dst() == Frame::world());
}

TEST_CASE("invert is an involution over 1000 random poses") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_pose(rng, Frame::world(), Frame::camera_right());
    const auto tt = invert(invert(t));
    CHECK(same_pose(tt, t, 1e-12));
    CHECK(tt.src() == t.src());
    CHECK(tt.dst() == t.dst());
  }
}

TEST_CASE("transform_point examples") {
  CHECK(max_abs_diff(transform_point(RigidTransform::identity(), {5, 6, 7}), Vec3(5, 6, 7)) == 0.0);
  CHECK(max_abs_diff(transform_point(RigidTransform::translation({1, 2, 3}), Vec3::Zero()), Vec3(1, 2, 3)) == 0.0);
  const auto rz = RigidTransform::rotation(Rotation::about_z(kHalfPi));
  CHECK(max_abs_diff(transform_point(rz, {1, 0, 0}), Vec3(0, 1, 0)) < 1e-12);
}

TEST_CASE("rotations stay unit, orthonormal and in the w >= 0 hemisphere") {
  std::mt19937_64 rng(5);
  Rotation acc;
  for (int i = 0; i < 1000; ++i) {
    acc = acc * pegmentor::testing::random_rotation(rng);
    CHECK(std::abs(acc.quaternion().norm() - 1.0) < 1e-9);
    CHECK(acc.w() >= 0.0);
    const Mat3 m = acc.matrix();
    CHECK((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(m.determinant() - 1.0) < 1e-9);
  }
  const Rotation neg = Rotation::from_quaternion(-1, 0, 0, 0);
  CHECK(neg.w() == doctest::Approx(1.0));
  CHECK_THROWS_AS(Rotation::from_quaternion(0, 0, 0, 0), Error);
}

TEST_CASE("rotation vector and matrix conversions round trip") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const Rotation r = pegmentor::testing::random_rotation(rng);
    CHECK(Rotation::from_rotation_vector(r.rotation_vector()).angle_to(r) < 1e-9);
    CHECK(Rotation::from_matrix(r.matrix()).angle_to(r) < 1e-9);
  }
  CHECK(Rotation::about_x(0.3).angle_to(Rotation()) == doctest::Approx(0.3));
}

TEST_CASE("compose is associative") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_pose(rng, Frame::world(), Frame::rcm());
    const auto b = random_pose(rng, Frame::rcm(), Frame::tip());
    const auto c = random_pose(rng, Frame::tip(), Frame::camera_left());
    CHECK(same_pose(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9));
  }
}

TEST_CASE("transform_point is an isometry") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    const auto t = random_pose(rng);
    const Vec3 p = random_vec(rng, -2, 2), q = random_vec(rng, -2, 2);
    CHECK(std::abs((transform_point(t, p) - transform_point(t, q)).norm() - (p - q).norm()) < 1e-9);
  }
}

TEST_CASE("project examples") {
  CameraIntrinsics k{1000, 1000, 320, 240, 640, 480};
  Pixel px = project(k, {0, 0, 1});
  CHECK(px.u == 320.0);
  CHECK(px.v == 240.0);
  CameraIntrinsics k2{800, 800, 320, 240, 640, 480};
  px = project(k2, {0.01, 0.02, 0.5});
  CHECK(px.u == doctest::Approx(336.0).epsilon(1e-12));
  CHECK(px.v == doctest::Approx(272.0).epsilon(1e-12));
  try {
    (void)project(k, {0, 0, -1});
    FAIL("expected BehindCamera");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BehindCamera);
  }
  CHECK_THROWS_AS(project(k, {0, 0, kMinDepth}), Error);
  CHECK_NOTHROW(project(k, {0, 0, 2 * kMinDepth}));
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(CameraIntrinsics{}.validate());
  CHECK_THROWS_AS((CameraIntrinsics{0, 800, 320, 240, 640, 480}.validate()), Error);
  CHECK_THROWS_AS((CameraIntrinsics{800, -1, 320, 240, 640, 480}.validate()), Error);
  CHECK_THROWS_AS((CameraIntrinsics{800, 800, 320, 240, 0, 480}.validate()), Error);
  CHECK_THROWS_AS((CameraIntrinsics{800, 800, 320, 240, 640, 0}.validate()), Error);
}

TEST_CASE("project_world examples and consistency") {
  const CameraIntrinsics k{};
  const Vec3 p(0.01, -0.02, 0.3);
  const Pixel a = project_world(k, RigidTransform::identity(), p), b = project(k, p);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);

  // Camera at (0,0,-1) looking along +z: world -> camera is a +1 shift in z.
  const auto cam = RigidTransform::translation({0, 0, 1}, Frame::world(), Frame::camera_left());
  const Pixel c = project_world(k, cam, Vec3::Zero());
  CHECK(c.u == doctest::Approx(k.cx));
  CHECK(c.v == doctest::Approx(k.cy));

  std::mt19937_64 rng(9);
  int checked = 0;
  while (checked < 100) {
    const auto t = random_pose(rng, Frame::world(), Frame::camera_left());
    const Vec3 q = random_vec(rng, -1, 1);
    if (transform_point(t, q).z() <= 0.05) continue;
    const Pixel x = project_world(k, t, q), y = project(k, transform_point(t, q));
    CHECK(std::abs(x.u - y.u) < 1e-9);
    CHECK(std::abs(x.v - y.v) < 1e-9);
    ++checked;
  }
}

TEST_CASE("look_at points the optical axis at the target") {
  const Vec3 eye(0, -0.12, 0.16), target(0, 0, 0.01);
  const auto t = look_at(eye, target, Vec3::UnitZ());
  CHECK(max_abs_diff(transform_point(t, eye), Vec3::Zero()) < 1e-12);
  const Vec3 tc = transform_point(t, target);
  CHECK(std::abs(tc.x()) < 1e-12);
  CHECK(std::abs(tc.y()) < 1e-12);
  CHECK(tc.z() == doctest::Approx((target - eye).norm()));
  // Image +y points away from up: a point above the target lands higher (smaller v).
  const CameraIntrinsics k{};
  CHECK(project_world(k, t, target + Vec3(0, 0, 0.01)).v < project_world(k, t, target).v);
}

TEST_CASE("stereo disparity") {
  StereoRig rig;
  rig.baseline = 0.0;
  auto [l0, r0] = project_stereo(rig, {0.01, 0.02, 0.3});
  CHECK(l0.u == r0.u);
  CHECK(l0.v == r0.v);

  rig.baseline = 0.005;
  auto [l, r] = project_stereo(rig, {0.0, 0.0, 0.25});
  CHECK(std::abs((l.u - r.u) - 16.0) < 1e-6);
  CHECK(std::abs(l.v - r.v) < 1e-9);

  auto [lf, rf] = project_stereo(rig, {0.0, 0.0, 1e6});
  CHECK(std::abs(lf.u - rf.u) < 1e-2);

  std::mt19937_64 rng(10);
  rig.left_pose = look_at({0, -0.12, 0.16}, {0, 0, 0.01}, Vec3::UnitZ());
  for (int i = 0; i < 200; ++i) {
    const Vec3 p = random_vec(rng, -0.05, 0.05);
    const double z = transform_point(rig.left_pose, p).z();
    auto [pl, pr] = project_stereo(rig, p);
    CHECK(std::abs((pl.u - pr.u) - rig.intrinsics.fx * rig.baseline / z) < 1e-6);
  }
  CHECK(rig.right_pose().dst() == Frame::camera_right());
  rig.baseline = -0.001;
  CHECK_THROWS_AS(rig.validate(), Error);
}

TEST_CASE("frame names") {
  CHECK(to_string(Frame::world()) == "World");
  CHECK(to_string(Frame::object(3)) == "Object(3)");
  CHECK(to_string(Frame::camera_left()) == "CameraLeft");
}
