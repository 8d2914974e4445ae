#pragma once

#include <string>

#include "trajnerf/types.hpp"

namespace trajnerf {

// 8-bit RGB only. Format picked by extension: .png (libpng) or .ppm (P6).
// Channels map as byte/255 on load and quantize8 on save.
Image load_image(const std::string& path);
void save_image(const Image& image, const std::string& path);

}  // namespace trajnerf
