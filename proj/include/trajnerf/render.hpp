#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "trajnerf/field.hpp"
#include "trajnerf/geometry.hpp"
#include "trajnerf/types.hpp"

namespace trajnerf {

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit
  double t_near = 0.0;
  double t_far = 0.0;
};

struct RenderedPixel {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // in [0,1]^3
  double opacity = 0.0;                             // 1 - transmittance at t_far
  double depth = 0.0;                               // expected termination distance
};

// Camera ray through pixel (u,v), center at half-integer offsets. The pose
// must be OpenGL-style (viewing along -z); DeviceRaw poses are rejected so
// un-normalized inputs cannot silently render sideways. t bounds are left
// at zero; see set_ray_bounds.
Ray generate_ray(double u, double v, const CameraIntrinsics& intr, const CameraPose& pose);

// Intersects the ray with a box and stores [t_enter, t_exit]. Returns false
// (bounds zeroed) when the ray misses; such rays render as pure background.
bool set_ray_bounds(Ray& ray, const Aabb& box);

// Midpoint (stratified off) or jittered-per-bin (on) quadrature nodes over
// [t_near, t_far] split into n equal bins.
std::vector<std::pair<double, Eigen::Vector3d>> sample_along_ray(const Ray& ray, int n_samples,
                                                                 bool stratified,
                                                                 std::mt19937_64& rng);

// One quadrature sample for the reference compositor.
struct CompositeSample {
  double density = 0.0;                             // >= 0
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // emitted RGB
  double delta = 0.0;                               // segment length, > 0
};

// Emission-absorption compositing: w_i = T_i (1 - exp(-density_i delta_i)),
// T_i = exp(-sum_{j<i} density_j delta_j), blended over background with
// weight 1 - opacity. Depth averages sample positions t_i by weight; when
// `ts` is null they default to cumulative segment midpoints from t = 0, and
// t_far to the segment end.
RenderedPixel composite(const std::vector<CompositeSample>& samples,
                        const Eigen::Vector3d& background = Eigen::Vector3d::Zero(),
                        const std::vector<double>* ts = nullptr, double t_far = -1.0);

// -10*log10(mse), ceiling 100 dB below mse = 1e-10.
double psnr(double mse);

// ---------------------------------------------------------------------------
// Batched path shared by render_image and the training loop.

template <typename S>
struct RayBundle {
  Matrix3X<S> origins;  // 3 x R
  Matrix3X<S> dirs;     // 3 x R, unit
  VectorX<S> t_near, t_far;
  Eigen::Index count() const { return origins.cols(); }
};

// Everything one forward render of a bundle produces, kept for backward.
template <typename S>
struct RayRenderContext {
  MatrixX<S> ts;       // n x R quadrature nodes
  VectorX<S> delta;    // bin width per ray (0 marks an empty ray)
  Matrix3X<S> xs, ds;  // field inputs, sample-major (ray r spans columns r*n..)
  FieldCache<S> cache;
  Matrix3X<S> colors;  // composited per ray
  VectorX<S> opacity, depth;
  int n_samples = 0;
};

// Stratified bins draw from a counter-based stream keyed on
// (seed, step, ray_base + r), so results do not depend on chunking.
template <typename S>
void render_ray_bundle(const RadianceField<S>& field, const RayBundle<S>& rays, int n_samples,
                       bool stratified, std::uint64_t seed, std::uint64_t step,
                       std::uint64_t ray_base, const Vector3<S>& background,
                       RayRenderContext<S>& ctx);

// Backpropagates per-ray color gradients into field parameters (+=) and,
// optionally, per-ray origin/direction gradients for pose refinement.
template <typename S>
void render_ray_bundle_backward(const RadianceField<S>& field, const RayRenderContext<S>& ctx,
                                const Matrix3X<S>& d_colors, const Vector3<S>& background,
                                VectorX<S>& param_grad, Matrix3X<S>* d_origins = nullptr,
                                Matrix3X<S>* d_dirs = nullptr);

struct RenderOptions {
  int n_samples = 48;
  bool stratified = false;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  Aabb bounds;              // ray-bound box, the normalized scene box
  std::uint64_t seed = 0;   // stratified jitter stream
  int rays_per_chunk = 1024;  // keeps the per-chunk activation cache small
};

template <typename S>
Image render_image(const RadianceField<S>& field, const CameraPose& pose,
                   const CameraIntrinsics& intr, const RenderOptions& opts = {});

}  // namespace trajnerf
