#include "trajnerf/types.hpp"

#include <algorithm>
#include <cmath>

namespace trajnerf {

bool intersect_aabb(const Aabb& box, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                    double& t_enter, double& t_exit) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return false;
      continue;
    }
    const double inv = 1.0 / dir[a];
    double near = (box.min[a] - origin[a]) * inv;
    double far = (box.max[a] - origin[a]) * inv;
    if (near > far) std::swap(near, far);
    t0 = std::max(t0, near);
    t1 = std::min(t1, far);
    if (t0 > t1) return false;
  }
  t_enter = t0;
  t_exit = t1;
  return t1 > t0;
}

double image_mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw InvalidInputError("image_mse: size mismatch");
  if (a.rgb.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.rgb.size());
}

double image_mae(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw InvalidInputError("image_mae: size mismatch");
  if (a.rgb.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i)
    acc += std::abs(static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]));
  return acc / static_cast<double>(a.rgb.size());
}

}  // namespace trajnerf
