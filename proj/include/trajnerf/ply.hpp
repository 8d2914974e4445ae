#pragma once

#include <string>

#include "trajnerf/point_cloud.hpp"

namespace trajnerf {

// Vertex-only PLY. Binary little-endian by default; the ASCII flag exists for
// eyeballing small clouds. Properties are x,y,z as float32 and red,green,blue
// as uchar (color block omitted when the cloud is uncolored).
void write_ply(const PointCloud& cloud, const std::string& path, bool ascii = false);

// Reads files produced by write_ply (both encodings). Unknown vertex
// properties are skipped; missing x/y/z is a parse error.
PointCloud parse_ply(const std::string& path);

}  // namespace trajnerf
