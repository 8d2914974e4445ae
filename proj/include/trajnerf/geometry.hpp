#pragma once

#include <Eigen/Dense>
#include <vector>

#include "trajnerf/errors.hpp"

namespace trajnerf {

// Axis convention of a camera-to-world pose.
//
// DeviceRaw poses come straight from a device trajectory log: the camera
// z-axis is aligned with the global z-axis. OpenGLStyle poses are right
// handed with the viewing direction along -z and +y as the up vector; every
// stage downstream of normalization requires this tag.
enum class Convention { DeviceRaw, OpenGLStyle };

// 4x4 homogeneous camera-to-world transform plus its convention tag.
//
// Valid poses keep the bottom row at (0,0,0,1), an orthonormal rotation
// block (max-norm deviation from R^T R = I below 1e-6) and det(R) = +1.
// Scaling during normalization touches translation only, so these
// invariants survive the whole pipeline.
struct CameraPose {
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Identity();
  Convention convention = Convention::OpenGLStyle;

  Eigen::Matrix3d rotation() const { return matrix.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return matrix.topRightCorner<3, 1>(); }
  void set_translation(const Eigen::Vector3d& t) { matrix.topRightCorner<3, 1>() = t; }

  // Viewing direction under the OpenGL-style convention: -z column of R.
  Eigen::Vector3d view_direction() const { return -matrix.block<3, 1>(0, 2); }

  static CameraPose from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                            Convention conv = Convention::OpenGLStyle);
};

// Pinhole camera parameters in pixels.
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
};

// Checks fx,fy > 0 and the principal point strictly inside the image.
void validate_intrinsics(const CameraIntrinsics& intr);

// Checks all CameraPose invariants; throws InvalidInputError on violation.
void validate_pose(const CameraPose& pose, double tol = 1e-6);
void validate_poses(const std::vector<CameraPose>& poses, double tol = 1e-6);
bool pose_invariants_hold(const CameraPose& pose, double tol = 1e-6);

// Parameters applied by normalize_pipeline, recorded for reproducibility.
struct NormalizationReport {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double scale = 1.0;
  double rotation_applied_deg = 0.0;
};

// The rotation alpha degrees about the global x-axis as a homogeneous
// transform. For alpha = 90 the rotation block has rows
// (1,0,0), (0,0,-1), (0,1,0).
Eigen::Matrix4d x_rotation_matrix(double alpha_deg);

// Left-multiplies every pose by the x-rotation. A 90-degree rotation of a
// DeviceRaw pose produces an OpenGLStyle pose; other angles keep the tag.
std::vector<CameraPose> rotate_about_x(const std::vector<CameraPose>& poses, double alpha_deg);

// Common focal point of the trajectory: the weighted average, over all
// unordered camera pairs, of the midpoint of the mutual-perpendicular
// segment between their optical-axis lines. Pair weight 1 - (d_i . d_j)^2
// suppresses ill-conditioned near-parallel pairs; if every pair is parallel
// within 1e-9 the geometry is degenerate.
Eigen::Vector3d center_of_attention(const std::vector<CameraPose>& poses);

// Subtracts center from each camera position; rotations untouched.
std::vector<CameraPose> recenter(const std::vector<CameraPose>& poses,
                                 const Eigen::Vector3d& center);

// target_distance / mean camera distance from the origin. The numerator
// defaults to 4, the radiance-field coordinate size.
double scale_factor(const std::vector<CameraPose>& poses, double target_distance = 4.0);

// Multiplies translation columns by s; rotation blocks unchanged.
std::vector<CameraPose> apply_scale(const std::vector<CameraPose>& poses, double s);

struct NormalizeOptions {
  double alpha_deg = 90.0;
  bool apply_rotation = true;
  double target_distance = 4.0;
};

// Full normalization: optional x-rotation, recentering on the center of
// attention, then one global scale that puts the mean camera distance at
// target_distance.
std::pair<std::vector<CameraPose>, NormalizationReport> normalize_pipeline(
    const std::vector<CameraPose>& poses, const NormalizeOptions& opts = {});

// Angle in radians between two rotations, i.e. the magnitude of the
// relative rotation a^T b.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

}  // namespace trajnerf
