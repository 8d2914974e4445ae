#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "trajnerf/geometry.hpp"

namespace trajnerf {

// One image record of an SfM text export: world-to-camera rotation as a
// unit quaternion plus translation, in the vision convention (y down,
// z forward).
struct SfmImage {
  int image_id = 0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();  // world-to-camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int camera_id = 0;
  std::string name;
};

struct SfmCamera {
  int camera_id = 0;
  CameraIntrinsics intrinsics;
};

struct SfmExport {
  std::vector<SfmCamera> cameras;
  std::vector<SfmImage> images;

  const SfmCamera& camera_by_id(int id) const;
};

// Parses the two-file SfM text export. Camera lines are
// `ID MODEL W H params...` with a pinhole-family MODEL (PINHOLE fx fy cx cy
// or SIMPLE_PINHOLE f cx cy); image lines are
// `ID qw qx qy qz tx ty tz CAM_ID NAME`. `#` comments are skipped, and an
// all-numeric observations line following a pose line (as some tools emit)
// is tolerated and ignored. Quaternions must be unit within 1e-6 and are
// re-normalized exactly; every image must reference a declared camera.
SfmExport parse_sfm_export(const std::string& cameras_path, const std::string& images_path);

// Converts world-to-camera vision-convention entries to OpenGL-style
// camera-to-world poses: invert to [R^T | -R^T t], then negate the second
// and third rotation columns.
std::vector<CameraPose> sfm_to_camera_poses(const SfmExport& exp);

// Inverse of the conversion above: an OpenGL-style camera-to-world pose
// back to the export's (quaternion, translation) pair. The returned
// quaternion has non-negative w.
std::pair<Eigen::Quaterniond, Eigen::Vector3d> camera_pose_to_sfm(const CameraPose& pose);

// Writes an export in the parseable two-file format.
void write_sfm_export(const SfmExport& exp, const std::string& cameras_path,
                      const std::string& images_path);

}  // namespace trajnerf
