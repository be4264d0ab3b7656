#include "pegmentor/pnp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct PointSpread {
  Vec3 centroid = Vec3::Zero();
  Vec3 singular_values = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // principal directions as columns
};

PointSpread analyze_points(std::span<const Correspondence> corrs) {
  PointSpread s;
  for (const auto& c : corrs) s.centroid += c.world;
  s.centroid /= static_cast<double>(corrs.size());
  Eigen::Matrix<double, Eigen::Dynamic, 3> centered(corrs.size(), 3);
  for (std::size_t i = 0; i < corrs.size(); ++i) centered.row(i) = (corrs[i].world - s.centroid).transpose();
  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 3>> svd(centered, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  for (int i = 0; i < static_cast<int>(sv.size()) && i < 3; ++i) s.singular_values[i] = sv[i];
  s.axes = svd.matrixV();
  return s;
}

constexpr double kRankTolerance = 1e-9;

void require_non_degenerate(const PointSpread& s) {
  if (!(s.singular_values[0] > 1e-12))
    throw Error(ErrorCode::DegenerateGeometry, "world points are coincident");
  if (s.singular_values[1] < kRankTolerance * s.singular_values[0])
    throw Error(ErrorCode::DegenerateGeometry, "world points are collinear");
}

void require_finite(std::span<const Correspondence> corrs) {
  for (const auto& c : corrs) {
    if (!c.world.allFinite() || !std::isfinite(c.pixel.u) || !std::isfinite(c.pixel.v))
      throw Error(ErrorCode::InvalidArgument, "correspondence contains non-finite values");
  }
}

// Similarity that moves the centroid to the origin and sets the mean distance
// from it to sqrt(dim).
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> normalizing_transform(
    const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  Eigen::Matrix<double, Dim, 1> mean = Eigen::Matrix<double, Dim, 1>::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double scale = dist > 0.0 ? std::sqrt(static_cast<double>(Dim)) / dist : 1.0;
  Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  t.template topLeftCorner<Dim, Dim>() *= scale;
  t.template topRightCorner<Dim, 1>() = -scale * mean;
  return t;
}

Vec null_vector(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  return svd.matrixV().col(svd.matrixV().cols() - 1);
}

std::vector<Eigen::Vector2d> normalized_image_points(const CameraIntrinsics& k,
                                                     std::span<const Correspondence> corrs) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(corrs.size());
  for (const auto& c : corrs) out.emplace_back((c.pixel.u - k.cx) / k.fx, (c.pixel.v - k.cy) / k.fy);
  return out;
}

RigidTransform planar_estimate(const CameraIntrinsics& k, std::span<const Correspondence> corrs,
                               const PointSpread& spread, Frame camera) {
  Mat3 basis = spread.axes;
  if (basis.determinant() < 0.0) basis.col(2) *= -1.0;

  std::vector<Eigen::Vector2d> plane_pts;
  for (const auto& c : corrs) {
    const Vec3 l = basis.transpose() * (c.world - spread.centroid);
    plane_pts.emplace_back(l.x(), l.y());
  }
  const auto img_pts = normalized_image_points(k, corrs);
  const Mat3 ta = normalizing_transform<2>(plane_pts);
  const Mat3 tx = normalizing_transform<2>(img_pts);

  Mat a(2 * corrs.size(), 9);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 p = ta * Vec3(plane_pts[i].x(), plane_pts[i].y(), 1.0);
    const Vec3 x = tx * Vec3(img_pts[i].x(), img_pts[i].y(), 1.0);
    a.row(2 * i) << -p.transpose(), 0.0, 0.0, 0.0, x.x() * p.transpose();
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -p.transpose(), x.y() * p.transpose();
  }
  const Vec h = null_vector(a);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 hm = tx.inverse() * hn * ta;

  double s = 2.0 / (hm.col(0).norm() + hm.col(1).norm());
  if (hm(2, 2) * s < 0.0) s = -s;  // plane origin must lie in front of the camera
  Mat3 r_plane;
  r_plane.col(0) = s * hm.col(0);
  r_plane.col(1) = s * hm.col(1);
  r_plane.col(2) = r_plane.col(0).cross(r_plane.col(1));
  const Rotation rp = Rotation::from_matrix(r_plane);
  const Vec3 t_plane = s * hm.col(2);

  const Rotation r = Rotation::from_matrix(rp.matrix() * basis.transpose());
  return {r, t_plane - r.rotate(spread.centroid), Frame::world(), camera};
}

RigidTransform dlt_estimate(const CameraIntrinsics& k, std::span<const Correspondence> corrs, Frame camera) {
  std::vector<Vec3> world_pts;
  for (const auto& c : corrs) world_pts.push_back(c.world);
  const auto img_pts = normalized_image_points(k, corrs);
  const Eigen::Matrix4d tw = normalizing_transform<3>(world_pts);
  const Mat3 tx = normalizing_transform<2>(img_pts);

  Mat a(2 * corrs.size(), 12);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Eigen::Vector4d p = tw * world_pts[i].homogeneous();
    const Vec3 x = tx * Vec3(img_pts[i].x(), img_pts[i].y(), 1.0);
    const Eigen::Vector4d zero = Eigen::Vector4d::Zero();
    a.row(2 * i) << p.transpose(), zero.transpose(), -x.x() * p.transpose();
    a.row(2 * i + 1) << zero.transpose(), p.transpose(), -x.y() * p.transpose();
  }
  const Vec v = null_vector(a);
  Eigen::Matrix<double, 3, 4> pn;
  pn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8), v(9), v(10), v(11);
  Eigen::Matrix<double, 3, 4> p = tx.inverse() * pn * tw;

  if (p.leftCols<3>().determinant() < 0.0) p = -p;
  Eigen::JacobiSVD<Mat3> svd(p.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = svd.singularValues().mean();
  const Rotation r = Rotation::from_matrix(svd.matrixU() * svd.matrixV().transpose());
  return {r, p.col(3) / scale, Frame::world(), camera};
}

RigidTransform overhead_pose(const Vec3& centroid, Frame camera) {
  const Vec3 eye = centroid + Vec3(0.0, 0.0, 0.3);
  return look_at(eye, centroid, Vec3::UnitY(), camera);
}

// Sum of squared pixel residuals; infinity when any point is behind the camera.
double cost_of(const CameraIntrinsics& k, const RigidTransform& pose, std::span<const Correspondence> corrs) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    const Vec3 pc = transform_point(pose, c.world);
    if (!(pc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
    const Pixel px = project(k, pc);
    const double du = px.u - c.pixel.u;
    const double dv = px.v - c.pixel.v;
    cost += du * du + dv * dv;
  }
  return cost;
}

}  // namespace

void PnpConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (!(cost_tolerance > 0.0) || !(param_tolerance > 0.0))
    throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
  if (!(initial_damping > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial_damping must be positive");
  if (min_points < 3) throw Error(ErrorCode::InvalidArgument, "min_points must be >= 3");
}

ReprojectionError reprojection_error(const CameraIntrinsics& k, const RigidTransform& pose,
                                     std::span<const Correspondence> corrs) {
  ReprojectionError out;
  out.per_point.reserve(corrs.size());
  double sum_sq = 0.0;
  for (const auto& c : corrs) {
    const Pixel px = project_world(k, pose, c.world);
    const double e = std::hypot(px.u - c.pixel.u, px.v - c.pixel.v);
    out.per_point.push_back(e);
    sum_sq += e * e;
  }
  out.rms = corrs.empty() ? 0.0 : std::sqrt(sum_sq / static_cast<double>(corrs.size()));
  return out;
}

RigidTransform initial_pose_guess(const CameraIntrinsics& k, std::span<const Correspondence> corrs) {
  if (corrs.empty()) throw Error(ErrorCode::TooFewPoints, "no correspondences");
  require_finite(corrs);
  const PointSpread spread = analyze_points(corrs);
  if (!(spread.singular_values[0] > 1e-12))
    throw Error(ErrorCode::DegenerateGeometry, "world points are coincident");
  const Frame camera = Frame::camera_left();
  if (corrs.size() < 6) return overhead_pose(spread.centroid, camera);
  require_non_degenerate(spread);
  if (spread.singular_values[2] < 1e-6 * spread.singular_values[0])
    return planar_estimate(k, corrs, spread, camera);
  return dlt_estimate(k, corrs, camera);
}

PnpResult solve_pnp(const CameraIntrinsics& k, std::span<const Correspondence> corrs, const PnpConfig& cfg,
                    const std::optional<RigidTransform>& initial) {
  k.validate();
  cfg.validate();
  if (corrs.size() < 3)
    throw Error(ErrorCode::TooFewPoints, std::to_string(corrs.size()) + " correspondences, need at least 3");
  require_finite(corrs);
  require_non_degenerate(analyze_points(corrs));

  PnpResult result;
  result.multi_solution_warning = static_cast<int>(corrs.size()) < cfg.min_points;

  RigidTransform pose = initial ? *initial : initial_pose_guess(k, corrs);
  double cost = cost_of(k, pose, corrs);
  if (!std::isfinite(cost)) {
    // A linear estimate can land behind the points under heavy noise; the
    // overhead pose always sees a board lying below it.
    pose = overhead_pose(analyze_points(corrs).centroid, pose.dst());
    cost = cost_of(k, pose, corrs);
  }
  result.cost_trace.push_back(cost);

  const std::size_t n = corrs.size();
  Eigen::MatrixXd jac(2 * n, 6);
  Eigen::VectorXd res(2 * n);
  double damping = cfg.initial_damping;
  bool converged = false;
  int iterations = 0;

  while (iterations < cfg.max_iterations && std::isfinite(cost)) {
    if (cost == 0.0) {
      converged = true;
      break;
    }
    const Mat3 rot = pose.rotation().matrix();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 rx = rot * corrs[i].world;
      const Vec3 pc = rx + pose.translation();
      const double iz = 1.0 / pc.z();
      const Pixel px = project(k, pc);
      res(2 * i) = px.u - corrs[i].pixel.u;
      res(2 * i + 1) = px.v - corrs[i].pixel.v;
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      Mat3 skew;
      skew << 0.0, -rx.z(), rx.y(), rx.z(), 0.0, -rx.x(), -rx.y(), rx.x(), 0.0;
      jac.block<2, 3>(2 * i, 0) = -dproj * skew;
      jac.block<2, 3>(2 * i, 3) = dproj;
    }
    const Mat6 jtj = jac.transpose() * jac;
    const Vec6 jtr = jac.transpose() * res;
    Mat6 lhs = jtj;
    for (int d = 0; d < 6; ++d) lhs(d, d) += damping * std::max(jtj(d, d), 1e-12);
    const Vec6 step = lhs.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    if (step.norm() < cfg.param_tolerance) {
      converged = true;
      break;
    }
    ++iterations;
    const Rotation r_new = Rotation::from_rotation_vector(step.head<3>()) * pose.rotation();
    const RigidTransform candidate(r_new, pose.translation() + step.tail<3>(), pose.src(), pose.dst());
    const double new_cost = cost_of(k, candidate, corrs);
    if (new_cost < cost) {
      const double rel = (cost - new_cost) / cost;
      pose = candidate;
      cost = new_cost;
      result.cost_trace.push_back(cost);
      damping = std::max(damping / 10.0, 1e-15);
      if (rel < cfg.cost_tolerance) {
        converged = true;
        break;
      }
    } else {
      damping *= 10.0;
      if (damping > 1e16) break;
    }
  }

  result.pose = pose;
  result.iterations = iterations;
  result.converged = converged && !result.multi_solution_warning;
  const ReprojectionError err = reprojection_error(k, pose, corrs);
  result.rms_error_px = err.rms;
  result.per_point_error_px = err.per_point;
  return result;
}

}  // namespace pegmentor
