#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "trajnerf/errors.hpp"

namespace trajnerf {

template <typename S>
using Vector3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Matrix3X = Eigen::Matrix<S, 3, Eigen::Dynamic>;
template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Axis-aligned box in scene units.
struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(-4.0);
  Eigen::Vector3d max = Eigen::Vector3d::Constant(4.0);

  Eigen::Vector3d extent() const { return max - min; }
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool degenerate() const { return (extent().array() <= 0.0).any(); }

  static Aabb cube(double half_extent) {
    Aabb b;
    b.min.setConstant(-half_extent);
    b.max.setConstant(half_extent);
    return b;
  }
};

// Intersects a ray o + t*d with the box. Returns false when the ray misses;
// otherwise [t_enter, t_exit] with t_enter clamped to >= 0.
bool intersect_aabb(const Aabb& box, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                    double& t_enter, double& t_exit);

// Linear-light RGB image, row-major pixels, 3 floats per pixel in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0.0f) {}

  float* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
  const float* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
  void set_pixel(int x, int y, const Eigen::Vector3f& c) {
    float* p = pixel(x, y);
    p[0] = c.x();
    p[1] = c.y();
    p[2] = c.z();
  }
  Eigen::Vector3f get_pixel(int x, int y) const {
    const float* p = pixel(x, y);
    return {p[0], p[1], p[2]};
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

// Mean squared error between two equally sized images, over RGB in [0,1].
double image_mse(const Image& a, const Image& b);
// Mean absolute error, same domain.
double image_mae(const Image& a, const Image& b);

// Rounds a [0,1] color channel half-up to 8 bits.
inline std::uint8_t quantize8(double c) {
  double v = c * 255.0 + 0.5;
  if (v < 0.0) v = 0.0;
  if (v > 255.0) v = 255.0;
  return static_cast<std::uint8_t>(v);
}

}  // namespace trajnerf
