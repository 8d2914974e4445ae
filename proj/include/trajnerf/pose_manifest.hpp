#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "trajnerf/geometry.hpp"

namespace trajnerf {

// Interchange file between pipeline stages: intrinsics plus one
// camera-to-world transform per frame, stored as ordered JSON. Poses in a
// manifest are always OpenGL-style.
struct PoseManifestFrame {
  std::string file_path;  // image path relative to the manifest
  Eigen::Matrix4d transform = Eigen::Matrix4d::Identity();
};

struct PoseManifest {
  double camera_angle_x = 0.0;  // 2*atan(width / (2*fx)), validated on load
  int width = 0, height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  std::vector<PoseManifestFrame> frames;

  CameraIntrinsics intrinsics() const;
  std::vector<CameraPose> camera_poses() const;
};

PoseManifest make_pose_manifest(const std::vector<CameraPose>& poses,
                                const CameraIntrinsics& intrinsics,
                                const std::vector<std::string>& image_paths);

void write_pose_manifest(const PoseManifest& manifest, const std::string& path);

// Intrinsics alone as a small JSON object, for pipeline stages whose pose
// source (a device trajectory log) carries no camera parameters.
void write_intrinsics_json(const CameraIntrinsics& intrinsics, const std::string& path);
CameraIntrinsics read_intrinsics_json(const std::string& path);

void write_pose_manifest(const std::vector<CameraPose>& poses,
                         const CameraIntrinsics& intrinsics,
                         const std::vector<std::string>& image_paths,
                         const std::string& path);
PoseManifest parse_pose_manifest(const std::string& path);

}  // namespace trajnerf
