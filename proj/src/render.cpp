#include "trajnerf/render.hpp"

#include <cmath>

#include "trajnerf/splitmix.hpp"
#include "trajnerf/threading.hpp"

namespace trajnerf {
namespace {

// Jitter in [0,1) for bin i of a (seed, step, ray) stream.
inline double bin_jitter(std::uint64_t seed, std::uint64_t step, std::uint64_t ray, int bin) {
  const std::uint64_t state = mix64(seed ^ mix64(step ^ mix64(ray)));
  return unit_double(mix64(state + static_cast<std::uint64_t>(bin)));
}

}  // namespace

Ray generate_ray(double u, double v, const CameraIntrinsics& intr, const CameraPose& pose) {
  if (pose.convention != Convention::OpenGLStyle) {
    throw ConventionError("generate_ray: pose is not OpenGL-style; run pose normalization first");
  }
  validate_intrinsics(intr);
  if (u < 0 || u >= intr.width || v < 0 || v >= intr.height) {
    throw InvalidInputError("generate_ray: pixel outside the image");
  }
  const Eigen::Vector3d cam_dir((u + 0.5 - intr.cx) / intr.fx, -(v + 0.5 - intr.cy) / intr.fy,
                                -1.0);
  Ray ray;
  ray.origin = pose.translation();
  ray.direction = (pose.rotation() * cam_dir).normalized();
  return ray;
}

bool set_ray_bounds(Ray& ray, const Aabb& box) {
  double t0 = 0, t1 = 0;
  if (intersect_aabb(box, ray.origin, ray.direction, t0, t1)) {
    ray.t_near = t0;
    ray.t_far = t1;
    return true;
  }
  ray.t_near = ray.t_far = 0.0;
  return false;
}

std::vector<std::pair<double, Eigen::Vector3d>> sample_along_ray(const Ray& ray, int n_samples,
                                                                 bool stratified,
                                                                 std::mt19937_64& rng) {
  if (n_samples < 1) throw InvalidInputError("sample_along_ray: n_samples must be >= 1");
  if (ray.t_far < ray.t_near) throw InvalidInputError("sample_along_ray: t_far < t_near");
  std::vector<std::pair<double, Eigen::Vector3d>> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  const double width = (ray.t_far - ray.t_near) / n_samples;
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  for (int i = 0; i < n_samples; ++i) {
    const double offset = stratified ? jitter(rng) : 0.5;
    const double t = ray.t_near + (i + offset) * width;
    out.emplace_back(t, ray.origin + t * ray.direction);
  }
  return out;
}

RenderedPixel composite(const std::vector<CompositeSample>& samples,
                        const Eigen::Vector3d& background, const std::vector<double>* ts,
                        double t_far) {
  if (ts && ts->size() != samples.size()) {
    throw InvalidInputError("composite: ts length does not match samples");
  }
  double cursor = 0.0;
  double trans = 1.0;
  RenderedPixel px;
  double depth_acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const CompositeSample& s = samples[i];
    if (!(s.density >= 0.0)) throw InvalidInputError("composite: density must be >= 0");
    if (!(s.delta > 0.0)) throw InvalidInputError("composite: delta must be > 0");
    const double t = ts ? (*ts)[i] : cursor + 0.5 * s.delta;
    cursor += s.delta;
    const double step_trans = std::exp(-s.density * s.delta);
    const double w = trans * (1.0 - step_trans);
    px.color += w * s.color;
    depth_acc += w * t;
    trans *= step_trans;
  }
  px.opacity = 1.0 - trans;
  px.color += trans * background;
  if (t_far < 0) t_far = ts ? (samples.empty() ? 0.0 : ts->back()) : cursor;
  px.depth = px.opacity > 1e-8 ? depth_acc / px.opacity : t_far;
  return px;
}

double psnr(double mse) {
  if (mse < 0.0) throw InvalidInputError("psnr: mse must be >= 0");
  if (mse < 1e-10) return 100.0;
  return -10.0 * std::log10(mse);
}

template <typename S>
void render_ray_bundle(const RadianceField<S>& field, const RayBundle<S>& rays, int n_samples,
                       bool stratified, std::uint64_t seed, std::uint64_t step,
                       std::uint64_t ray_base, const Vector3<S>& background,
                       RayRenderContext<S>& ctx) {
  const Eigen::Index r_count = rays.count();
  if (n_samples < 1) throw InvalidInputError("render_ray_bundle: n_samples must be >= 1");
  if (rays.dirs.cols() != r_count || rays.t_near.size() != r_count ||
      rays.t_far.size() != r_count) {
    throw InvalidInputError("render_ray_bundle: bundle field sizes disagree");
  }
  ctx.n_samples = n_samples;
  ctx.ts.resize(n_samples, r_count);
  ctx.delta.resize(r_count);
  ctx.xs.resize(3, n_samples * r_count);
  ctx.ds.resize(3, n_samples * r_count);

  for (Eigen::Index r = 0; r < r_count; ++r) {
    const S t_near = rays.t_near[r];
    const S t_far = rays.t_far[r];
    const S width = (t_far - t_near) / static_cast<S>(n_samples);
    ctx.delta[r] = width > S(0) ? width : S(0);
    const Vector3<S> o = rays.origins.col(r);
    const Vector3<S> d = rays.dirs.col(r);
    for (int i = 0; i < n_samples; ++i) {
      const double offset =
          stratified ? bin_jitter(seed, step, ray_base + static_cast<std::uint64_t>(r), i) : 0.5;
      const S t = t_near + (static_cast<S>(i) + static_cast<S>(offset)) * ctx.delta[r];
      ctx.ts(i, r) = t;
      const Eigen::Index col = r * n_samples + i;
      ctx.xs.col(col) = o + t * d;
      ctx.ds.col(col) = d;
    }
  }

  field.forward_batch(ctx.xs, ctx.ds, ctx.cache);

  ctx.colors.resize(3, r_count);
  ctx.opacity.resize(r_count);
  ctx.depth.resize(r_count);
  for (Eigen::Index r = 0; r < r_count; ++r) {
    S trans = S(1);
    Vector3<S> c = Vector3<S>::Zero();
    S depth_acc = S(0);
    const S delta = ctx.delta[r];
    for (int i = 0; i < n_samples; ++i) {
      const Eigen::Index col = r * n_samples + i;
      const S step_trans = std::exp(-ctx.cache.densities[col] * delta);
      const S w = trans * (S(1) - step_trans);
      c += w * ctx.cache.colors.col(col);
      depth_acc += w * ctx.ts(i, r);
      trans *= step_trans;
    }
    const S opacity = S(1) - trans;
    ctx.colors.col(r) = c + trans * background;
    ctx.opacity[r] = opacity;
    ctx.depth[r] = opacity > S(1e-8) ? depth_acc / opacity : rays.t_far[r];
  }
}

template <typename S>
void render_ray_bundle_backward(const RadianceField<S>& field, const RayRenderContext<S>& ctx,
                                const Matrix3X<S>& d_colors, const Vector3<S>& background,
                                VectorX<S>& param_grad, Matrix3X<S>* d_origins,
                                Matrix3X<S>* d_dirs) {
  const Eigen::Index r_count = ctx.colors.cols();
  const int n = ctx.n_samples;
  if (d_colors.cols() != r_count) {
    throw InvalidInputError("render backward: gradient count does not match rays");
  }

  VectorX<S> d_density(n * r_count);
  Matrix3X<S> d_sample_color(3, n * r_count);
  for (Eigen::Index r = 0; r < r_count; ++r) {
    const S delta = ctx.delta[r];
    const Vector3<S> g = d_colors.col(r);
    // Forward walk for T_{i+1} and w_i, suffix walk for the density grads:
    // dC/ddensity_i = delta (T_{i+1} c_i - S_i), S_i = sum_{j>i} w_j c_j + T B.
    VectorX<S> trans_next(n);
    S trans = S(1);
    for (int i = 0; i < n; ++i) {
      const Eigen::Index col = r * n + i;
      trans *= std::exp(-ctx.cache.densities[col] * delta);
      trans_next[i] = trans;
      const S w = (i == 0 ? S(1) : trans_next[i - 1]) - trans;
      d_sample_color.col(col) = w * g;
    }
    Vector3<S> suffix = trans * background;
    for (int i = n - 1; i >= 0; --i) {
      const Eigen::Index col = r * n + i;
      const S w = (i == 0 ? S(1) : trans_next[i - 1]) - trans_next[i];
      d_density[col] = delta * (trans_next[i] * ctx.cache.colors.col(col).dot(g) -
                                suffix.dot(g));
      suffix += w * ctx.cache.colors.col(col);
    }
  }

  Matrix3X<S> d_xs, d_ds;
  const bool want_inputs = d_origins != nullptr || d_dirs != nullptr;
  field.backward_batch(ctx.cache, d_density, d_sample_color, param_grad,
                       want_inputs ? &d_xs : nullptr, want_inputs ? &d_ds : nullptr);

  if (want_inputs) {
    if (d_origins) d_origins->setZero(3, r_count);
    if (d_dirs) d_dirs->setZero(3, r_count);
    for (Eigen::Index r = 0; r < r_count; ++r) {
      for (int i = 0; i < n; ++i) {
        const Eigen::Index col = r * n + i;
        if (d_origins) d_origins->col(r) += d_xs.col(col);
        if (d_dirs) d_dirs->col(r) += ctx.ts(i, r) * d_xs.col(col) + d_ds.col(col);
      }
    }
  }
}

template <typename S>
Image render_image(const RadianceField<S>& field, const CameraPose& pose,
                   const CameraIntrinsics& intr, const RenderOptions& opts) {
  validate_pose(pose);
  validate_intrinsics(intr);
  Image image(intr.width, intr.height);
  const Eigen::Index total = static_cast<Eigen::Index>(intr.width) * intr.height;
  const Vector3<S> background = opts.background.cast<S>();

  parallel_for_chunks(total, opts.rays_per_chunk, [&](std::size_t, Eigen::Index begin,
                                                      Eigen::Index end) {
    const Eigen::Index count = end - begin;
    RayBundle<S> bundle;
    bundle.origins.resize(3, count);
    bundle.dirs.resize(3, count);
    bundle.t_near.resize(count);
    bundle.t_far.resize(count);
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index pixel = begin + k;
      const int u = static_cast<int>(pixel % intr.width);
      const int v = static_cast<int>(pixel / intr.width);
      Ray ray = generate_ray(u, v, intr, pose);
      set_ray_bounds(ray, opts.bounds);
      bundle.origins.col(k) = ray.origin.cast<S>();
      bundle.dirs.col(k) = ray.direction.cast<S>();
      bundle.t_near[k] = static_cast<S>(ray.t_near);
      bundle.t_far[k] = static_cast<S>(ray.t_far);
    }
    RayRenderContext<S> ctx;
    render_ray_bundle(field, bundle, opts.n_samples, opts.stratified, opts.seed, 0,
                      static_cast<std::uint64_t>(begin), background, ctx);
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index pixel = begin + k;
      const int u = static_cast<int>(pixel % intr.width);
      const int v = static_cast<int>(pixel / intr.width);
      float* px = image.pixel(u, v);
      for (int c = 0; c < 3; ++c) {
        const double value = static_cast<double>(ctx.colors(c, k));
        px[c] = static_cast<float>(std::min(1.0, std::max(0.0, value)));
      }
    }
  });
  return image;
}

template void render_ray_bundle<float>(const RadianceField<float>&, const RayBundle<float>&,
                                       int, bool, std::uint64_t, std::uint64_t, std::uint64_t,
                                       const Vector3<float>&, RayRenderContext<float>&);
template void render_ray_bundle<double>(const RadianceField<double>&, const RayBundle<double>&,
                                        int, bool, std::uint64_t, std::uint64_t, std::uint64_t,
                                        const Vector3<double>&, RayRenderContext<double>&);
template void render_ray_bundle_backward<float>(const RadianceField<float>&,
                                                const RayRenderContext<float>&,
                                                const Matrix3X<float>&, const Vector3<float>&,
                                                VectorX<float>&, Matrix3X<float>*,
                                                Matrix3X<float>*);
template void render_ray_bundle_backward<double>(const RadianceField<double>&,
                                                 const RayRenderContext<double>&,
                                                 const Matrix3X<double>&, const Vector3<double>&,
                                                 VectorX<double>&, Matrix3X<double>*,
                                                 Matrix3X<double>*);
template Image render_image<float>(const RadianceField<float>&, const CameraPose&,
                                   const CameraIntrinsics&, const RenderOptions&);
template Image render_image<double>(const RadianceField<double>&, const CameraPose&,
                                    const CameraIntrinsics&, const RenderOptions&);

}  // namespace trajnerf
