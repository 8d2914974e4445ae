#include "trajnerf/geometry.hpp"

#include <cmath>

namespace trajnerf {

CameraPose CameraPose::from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                               Convention conv) {
  CameraPose pose;
  pose.matrix.setIdentity();
  pose.matrix.topLeftCorner<3, 3>() = r;
  pose.matrix.topRightCorner<3, 1>() = t;
  pose.convention = conv;
  return pose;
}

void validate_intrinsics(const CameraIntrinsics& intr) {
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0))
    throw InvalidInputError("intrinsics: focal lengths must be positive");
  if (!(intr.cx > 0.0 && intr.cx < intr.width) || !(intr.cy > 0.0 && intr.cy < intr.height))
    throw InvalidInputError("intrinsics: principal point outside the image");
}

bool pose_invariants_hold(const CameraPose& pose, double tol) {
  const Eigen::Matrix4d& m = pose.matrix;
  if (!m.allFinite()) return false;
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) return false;
  const Eigen::Matrix3d r = pose.rotation();
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho >= tol) return false;
  if (std::abs(r.determinant() - 1.0) >= tol) return false;
  return true;
}

void validate_pose(const CameraPose& pose, double tol) {
  if (!pose.matrix.allFinite()) throw InvalidInputError("pose: non-finite matrix entries");
  if (!pose_invariants_hold(pose, tol))
    throw InvalidInputError("pose: invariants violated (bottom row / orthonormality / det)");
}

void validate_poses(const std::vector<CameraPose>& poses, double tol) {
  for (const CameraPose& p : poses) validate_pose(p, tol);
}

Eigen::Matrix4d x_rotation_matrix(double alpha_deg) {
  const double a = alpha_deg * M_PI / 180.0;
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t(1, 1) = std::cos(a);
  t(1, 2) = -std::sin(a);
  t(2, 1) = std::sin(a);
  t(2, 2) = std::cos(a);
  return t;
}

std::vector<CameraPose> rotate_about_x(const std::vector<CameraPose>& poses, double alpha_deg) {
  if (!std::isfinite(alpha_deg)) throw InvalidInputError("rotate_about_x: non-finite angle");
  validate_poses(poses);
  const Eigen::Matrix4d t = x_rotation_matrix(alpha_deg);
  std::vector<CameraPose> out;
  out.reserve(poses.size());
  for (const CameraPose& p : poses) {
    CameraPose q = p;
    q.matrix = t * p.matrix;
    if (alpha_deg == 90.0 && p.convention == Convention::DeviceRaw)
      q.convention = Convention::OpenGLStyle;
    out.push_back(q);
  }
  return out;
}

Eigen::Vector3d center_of_attention(const std::vector<CameraPose>& poses) {
  if (poses.size() < 2)
    throw InvalidInputError("center_of_attention: needs at least two poses");
  validate_poses(poses);

  // For each pair, the closest points on the two optical-axis lines
  // o + t*d solve a 2x2 system with determinant 1 - (d_i . d_j)^2, which is
  // also the pair weight, so the weighted midpoint never divides by it.
  Eigen::Vector3d accum = Eigen::Vector3d::Zero();
  double weight_sum = 0.0;
  for (size_t i = 0; i < poses.size(); ++i) {
    const Eigen::Vector3d oi = poses[i].translation();
    const Eigen::Vector3d di = poses[i].view_direction();
    for (size_t j = i + 1; j < poses.size(); ++j) {
      const Eigen::Vector3d oj = poses[j].translation();
      const Eigen::Vector3d dj = poses[j].view_direction();
      const double b = di.dot(dj);
      const double w = 1.0 - b * b;
      if (w <= 0.0) continue;
      const Eigen::Vector3d r = oi - oj;
      const double d = di.dot(r);
      const double e = dj.dot(r);
      // ti, tj scaled by w to avoid the division.
      const double ti_w = b * e - d;
      const double tj_w = e - b * d;
      const Eigen::Vector3d midpoint_w = 0.5 * (w * (oi + oj) + ti_w * di + tj_w * dj);
      accum += midpoint_w;
      weight_sum += w;
    }
  }
  if (weight_sum <= 1e-9)
    throw DegenerateGeometryError("center_of_attention: all optical axes parallel");
  return accum / weight_sum;
}

std::vector<CameraPose> recenter(const std::vector<CameraPose>& poses,
                                 const Eigen::Vector3d& center) {
  validate_poses(poses);
  std::vector<CameraPose> out;
  out.reserve(poses.size());
  for (const CameraPose& p : poses) {
    CameraPose q = p;
    q.set_translation(p.translation() - center);
    out.push_back(q);
  }
  return out;
}

double scale_factor(const std::vector<CameraPose>& poses, double target_distance) {
  if (poses.empty()) throw InvalidInputError("scale_factor: no poses");
  validate_poses(poses);
  double mean = 0.0;
  for (const CameraPose& p : poses) mean += p.translation().norm();
  mean /= static_cast<double>(poses.size());
  if (mean < 1e-12)
    throw DegenerateGeometryError("scale_factor: cameras coincide with the origin");
  return target_distance / mean;
}

std::vector<CameraPose> apply_scale(const std::vector<CameraPose>& poses, double s) {
  if (!(s > 0.0)) throw InvalidInputError("apply_scale: scale must be positive");
  validate_poses(poses);
  std::vector<CameraPose> out;
  out.reserve(poses.size());
  for (const CameraPose& p : poses) {
    CameraPose q = p;
    q.set_translation(s * p.translation());
    out.push_back(q);
  }
  return out;
}

std::pair<std::vector<CameraPose>, NormalizationReport> normalize_pipeline(
    const std::vector<CameraPose>& poses, const NormalizeOptions& opts) {
  NormalizationReport report;
  std::vector<CameraPose> out = poses;
  if (opts.apply_rotation && opts.alpha_deg != 0.0) {
    out = rotate_about_x(out, opts.alpha_deg);
    report.rotation_applied_deg = opts.alpha_deg;
  } else {
    validate_poses(out);
  }
  report.center = center_of_attention(out);
  out = recenter(out, report.center);
  report.scale = scale_factor(out, opts.target_distance);
  out = apply_scale(out, report.scale);
  return {std::move(out), report};
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d rel = a.transpose() * b;
  double c = 0.5 * (rel.trace() - 1.0);
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c);
}

}  // namespace trajnerf
