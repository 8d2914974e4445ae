#include "trajnerf/trajectory_log.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace trajnerf {

namespace fs = std::filesystem;

namespace {

bool parse_double(const std::string& tok, double& out) {
  try {
    size_t used = 0;
    out = std::stod(tok, &used);
    return used == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

// Shortest-exact double formatting via %.17g; enough digits for a lossless
// text round trip.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<CameraPose> TrajectoryLog::to_camera_poses() const {
  std::vector<CameraPose> poses;
  poses.reserve(entries.size());
  for (const TrajectoryEntry& e : entries) {
    CameraPose p;
    p.matrix = e.matrix;
    p.convention = Convention::DeviceRaw;
    poses.push_back(p);
  }
  return poses;
}

TrajectoryLog parse_trajectory_log(const std::string& path, bool check_images) {
  std::ifstream in(path);
  if (!in) throw IoError("trajectory log not found: " + path);
  const fs::path base = fs::path(path).parent_path();

  TrajectoryLog log;
  std::string line;
  long line_no = 0;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (tokens.empty() || tokens[0][0] == '#') continue;

    if (tokens.size() != 18)
      throw ParseError(path, line_no,
                       "expected 18 fields (timestamp, 16 matrix values, image path), got " +
                           std::to_string(tokens.size()));
    TrajectoryEntry entry;
    if (!parse_double(tokens[0], entry.timestamp))
      throw ParseError(path, line_no, "non-numeric timestamp '" + tokens[0] + "'");
    for (int i = 0; i < 16; ++i) {
      double v = 0;
      if (!parse_double(tokens[1 + i], v))
        throw ParseError(path, line_no, "non-numeric matrix value '" + tokens[1 + i] + "'");
      entry.matrix(i / 4, i % 4) = v;
    }
    entry.image_path = tokens[17];

    if (!(entry.timestamp > prev_t))
      throw ParseError(path, line_no, "timestamps must be strictly increasing");
    prev_t = entry.timestamp;

    if (entry.matrix(3, 0) != 0.0 || entry.matrix(3, 1) != 0.0 || entry.matrix(3, 2) != 0.0 ||
        entry.matrix(3, 3) != 1.0)
      throw ParseError(path, line_no, "matrix bottom row must be (0, 0, 0, 1)");

    if (check_images) {
      const fs::path img = base / entry.image_path;
      if (!fs::exists(img))
        throw ParseError(path, line_no, "referenced image missing: " + img.string());
    }
    log.entries.push_back(std::move(entry));
  }
  if (log.entries.empty()) throw ParseError(path, 0, "empty trajectory log");
  return log;
}

void write_trajectory_log(const TrajectoryLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory log: " + path);
  out << "# device trajectory log: timestamp m00..m33 (row-major camera-to-world) image_path\n";
  for (const TrajectoryEntry& e : log.entries) {
    out << format_double(e.timestamp);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) out << ' ' << format_double(e.matrix(r, c));
    out << ' ' << e.image_path << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace trajnerf
