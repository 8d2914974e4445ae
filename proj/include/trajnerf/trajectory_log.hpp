#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "trajnerf/geometry.hpp"

namespace trajnerf {

// One pose record of a device trajectory log.
struct TrajectoryEntry {
  double timestamp = 0.0;           // seconds
  Eigen::Matrix4d matrix;           // camera-to-world, device convention
  std::string image_path;           // relative to the log file
};

// Line-oriented text log: `timestamp m00 m01 ... m33 image_path` per row,
// matrix row-major, `#` comments and blank lines skipped. Timestamps must
// be strictly increasing and the bottom matrix row (0,0,0,1).
struct TrajectoryLog {
  std::vector<TrajectoryEntry> entries;

  std::vector<CameraPose> to_camera_poses() const;
};

// Parses a trajectory log. `check_images` additionally requires every
// referenced image to exist relative to the log's directory.
TrajectoryLog parse_trajectory_log(const std::string& path, bool check_images = true);

// Writes entries in the documented row format with round-trip-exact float
// formatting.
void write_trajectory_log(const TrajectoryLog& log, const std::string& path);

}  // namespace trajnerf
