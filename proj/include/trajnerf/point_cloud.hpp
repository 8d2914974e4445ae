#pragma once

#include <cstdint>
#include <vector>

#include "trajnerf/errors.hpp"

namespace trajnerf {

// Colored point set. Positions are kept in float32 (the PLY storage type) so
// write/parse round trips are bit-exact. Colors are optional: either empty or
// one RGB triple per point. Densities, when present, record the field value
// that produced each point; they ride along in memory but are not written to
// PLY.
struct PointCloud {
  std::vector<float> positions;       // x,y,z interleaved
  std::vector<std::uint8_t> colors;   // r,g,b interleaved, empty if uncolored
  std::vector<float> densities;       // one per point, empty if absent

  std::size_t size() const { return positions.size() / 3; }
  bool has_colors() const { return !colors.empty(); }

  void add(float x, float y, float z) {
    positions.insert(positions.end(), {x, y, z});
  }
  void add(float x, float y, float z, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    positions.insert(positions.end(), {x, y, z});
    colors.insert(colors.end(), {r, g, b});
  }

  void check_consistent() const {
    if (positions.size() % 3 != 0) {
      throw InvalidInputError("point cloud: position buffer length not a multiple of 3");
    }
    if (!colors.empty() && colors.size() != positions.size()) {
      throw InvalidInputError("point cloud: color count does not match point count");
    }
    if (!densities.empty() && densities.size() * 3 != positions.size()) {
      throw InvalidInputError("point cloud: density count does not match point count");
    }
  }
};

}  // namespace trajnerf
