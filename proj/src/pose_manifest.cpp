#include "trajnerf/pose_manifest.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "trajnerf/errors.hpp"

namespace trajnerf {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kAngleTol = 1e-9;

double expected_camera_angle_x(int width, double fx) {
  return 2.0 * std::atan(static_cast<double>(width) / (2.0 * fx));
}

const ordered_json& require(const ordered_json& node, const char* key) {
  auto it = node.find(key);
  if (it == node.end()) {
    throw SchemaError(std::string("pose manifest: missing field \"") + key + "\"");
  }
  return *it;
}

double require_number(const ordered_json& node, const char* key) {
  const ordered_json& v = require(node, key);
  if (!v.is_number()) {
    throw SchemaError(std::string("pose manifest: field \"") + key + "\" must be a number");
  }
  return v.get<double>();
}

}  // namespace

CameraIntrinsics PoseManifest::intrinsics() const {
  CameraIntrinsics k;
  k.fx = fx;
  k.fy = fy;
  k.cx = cx;
  k.cy = cy;
  k.width = width;
  k.height = height;
  return k;
}

std::vector<CameraPose> PoseManifest::camera_poses() const {
  std::vector<CameraPose> poses;
  poses.reserve(frames.size());
  for (const PoseManifestFrame& f : frames) {
    CameraPose pose;
    pose.matrix = f.transform;
    pose.convention = Convention::OpenGLStyle;
    poses.push_back(pose);
  }
  return poses;
}

PoseManifest make_pose_manifest(const std::vector<CameraPose>& poses,
                                const CameraIntrinsics& intrinsics,
                                const std::vector<std::string>& image_paths) {
  if (!image_paths.empty() && image_paths.size() != poses.size()) {
    throw InvalidInputError("make_pose_manifest: image path count does not match pose count");
  }
  if (intrinsics.fx <= 0 || intrinsics.width <= 0) {
    throw InvalidInputError("make_pose_manifest: intrinsics must have positive fx and width");
  }
  validate_poses(poses);
  PoseManifest m;
  m.width = intrinsics.width;
  m.height = intrinsics.height;
  m.fx = intrinsics.fx;
  m.fy = intrinsics.fy;
  m.cx = intrinsics.cx;
  m.cy = intrinsics.cy;
  m.camera_angle_x = expected_camera_angle_x(intrinsics.width, intrinsics.fx);
  m.frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].convention != Convention::OpenGLStyle) {
      throw ConventionError("make_pose_manifest: pose " + std::to_string(i) +
                            " is not OpenGL-style; normalize before export");
    }
    PoseManifestFrame f;
    f.transform = poses[i].matrix;
    f.file_path = image_paths.empty() ? std::string() : image_paths[i];
    m.frames.push_back(std::move(f));
  }
  return m;
}

void write_pose_manifest(const PoseManifest& manifest, const std::string& path) {
  ordered_json root;
  root["camera_angle_x"] = manifest.camera_angle_x;
  root["width"] = manifest.width;
  root["height"] = manifest.height;
  root["fx"] = manifest.fx;
  root["fy"] = manifest.fy;
  root["cx"] = manifest.cx;
  root["cy"] = manifest.cy;
  root["frames"] = ordered_json::array();
  for (const PoseManifestFrame& f : manifest.frames) {
    ordered_json jf;
    jf["file_path"] = f.file_path;
    ordered_json rows = ordered_json::array();
    for (int r = 0; r < 4; ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < 4; ++c) row.push_back(f.transform(r, c));
      rows.push_back(std::move(row));
    }
    jf["transform_matrix"] = std::move(rows);
    root["frames"].push_back(std::move(jf));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << root.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void write_intrinsics_json(const CameraIntrinsics& intrinsics, const std::string& path) {
  validate_intrinsics(intrinsics);
  ordered_json root;
  root["fx"] = intrinsics.fx;
  root["fy"] = intrinsics.fy;
  root["cx"] = intrinsics.cx;
  root["cy"] = intrinsics.cy;
  root["width"] = intrinsics.width;
  root["height"] = intrinsics.height;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << root.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

CameraIntrinsics read_intrinsics_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  ordered_json root;
  try {
    root = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("intrinsics file: top level must be an object");
  CameraIntrinsics k;
  k.fx = require_number(root, "fx");
  k.fy = require_number(root, "fy");
  k.cx = require_number(root, "cx");
  k.cy = require_number(root, "cy");
  k.width = static_cast<int>(require_number(root, "width"));
  k.height = static_cast<int>(require_number(root, "height"));
  validate_intrinsics(k);
  return k;
}

void write_pose_manifest(const std::vector<CameraPose>& poses,
                         const CameraIntrinsics& intrinsics,
                         const std::vector<std::string>& image_paths,
                         const std::string& path) {
  write_pose_manifest(make_pose_manifest(poses, intrinsics, image_paths), path);
}

PoseManifest parse_pose_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  ordered_json root;
  try {
    root = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("pose manifest: top level must be an object");

  PoseManifest m;
  m.camera_angle_x = require_number(root, "camera_angle_x");
  m.width = static_cast<int>(require_number(root, "width"));
  m.height = static_cast<int>(require_number(root, "height"));
  m.fx = require_number(root, "fx");
  m.fy = require_number(root, "fy");
  m.cx = require_number(root, "cx");
  m.cy = require_number(root, "cy");
  if (m.width <= 0 || m.height <= 0) {
    throw SchemaError("pose manifest: width and height must be positive");
  }
  if (m.fx <= 0 || m.fy <= 0) {
    throw SchemaError("pose manifest: fx and fy must be positive");
  }
  const double expected = expected_camera_angle_x(m.width, m.fx);
  if (std::abs(m.camera_angle_x - expected) > kAngleTol) {
    throw SchemaError("pose manifest: camera_angle_x inconsistent with width and fx");
  }

  const ordered_json& frames = require(root, "frames");
  if (!frames.is_array()) throw SchemaError("pose manifest: field \"frames\" must be an array");
  m.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const ordered_json& jf = frames[i];
    const std::string ctx = "pose manifest: frames[" + std::to_string(i) + "]";
    if (!jf.is_object()) throw SchemaError(ctx + " must be an object");
    PoseManifestFrame f;
    if (auto it = jf.find("file_path"); it != jf.end()) {
      if (!it->is_string()) throw SchemaError(ctx + ".file_path must be a string");
      f.file_path = it->get<std::string>();
    }
    auto it = jf.find("transform_matrix");
    if (it == jf.end()) throw SchemaError(ctx + ": missing field \"transform_matrix\"");
    const ordered_json& rows = *it;
    if (!rows.is_array() || rows.size() != 4) {
      throw SchemaError(ctx + ".transform_matrix must be a 4x4 array");
    }
    for (int r = 0; r < 4; ++r) {
      const ordered_json& row = rows[r];
      if (!row.is_array() || row.size() != 4) {
        throw SchemaError(ctx + ".transform_matrix must be a 4x4 array");
      }
      for (int c = 0; c < 4; ++c) {
        if (!row[c].is_number()) {
          throw SchemaError(ctx + ".transform_matrix entries must be numbers");
        }
        f.transform(r, c) = row[c].get<double>();
      }
    }
    CameraPose probe;
    probe.matrix = f.transform;
    probe.convention = Convention::OpenGLStyle;
    if (!pose_invariants_hold(probe)) {
      throw SchemaError(ctx + ".transform_matrix is not a rigid camera-to-world transform");
    }
    m.frames.push_back(std::move(f));
  }
  return m;
}

}  // namespace trajnerf
