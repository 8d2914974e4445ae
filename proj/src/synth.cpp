#include "trajnerf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "trajnerf/errors.hpp"
#include "trajnerf/image_io.hpp"
#include "trajnerf/pose_manifest.hpp"
#include "trajnerf/threading.hpp"
#include "trajnerf/trajectory_log.hpp"

namespace trajnerf {

ScenePrimitive ScenePrimitive::sphere(const Eigen::Vector3d& center, double radius,
                                      double density, const Eigen::Vector3d& albedo) {
  ScenePrimitive p;
  p.kind = Kind::Sphere;
  p.center = center;
  p.radius = radius;
  p.density = density;
  p.albedo_a = p.albedo_b = albedo;
  return p;
}

ScenePrimitive ScenePrimitive::make_box(const Aabb& box, double density,
                                        const Eigen::Vector3d& albedo) {
  ScenePrimitive p;
  p.kind = Kind::Box;
  p.box = box;
  p.density = density;
  p.albedo_a = p.albedo_b = albedo;
  return p;
}

bool ScenePrimitive::contains(const Eigen::Vector3d& p) const {
  if (kind == Kind::Sphere) return (p - center).squaredNorm() < radius * radius;
  return box.contains(p);
}

Eigen::Vector3d ScenePrimitive::albedo_at(const Eigen::Vector3d& p) const {
  if (checker_cell <= 0.0) return albedo_a;
  const long cx = static_cast<long>(std::floor(p.x() / checker_cell));
  const long cy = static_cast<long>(std::floor(p.y() / checker_cell));
  const long cz = static_cast<long>(std::floor(p.z() / checker_cell));
  return ((cx + cy + cz) & 1L) == 0 ? albedo_a : albedo_b;
}

Aabb ScenePrimitive::bounds() const {
  Aabb b;
  if (kind == Kind::Sphere) {
    b.min = center.array() - radius;
    b.max = center.array() + radius;
  } else {
    b = box;
  }
  return b;
}

bool AnalyticScene::sample(const Eigen::Vector3d& p, double& density,
                           Eigen::Vector3d& color) const {
  for (const ScenePrimitive& prim : primitives) {
    if (prim.contains(p)) {
      density = prim.density;
      color = prim.albedo_at(p);
      return true;
    }
  }
  density = 0.0;
  color.setZero();
  return false;
}

double AnalyticScene::density_at(const Eigen::Vector3d& p) const {
  for (const ScenePrimitive& prim : primitives) {
    if (prim.contains(p)) return prim.density;
  }
  return 0.0;
}

Aabb AnalyticScene::bounds(double pad) const {
  if (primitives.empty()) {
    throw InvalidInputError("analytic scene: bounds of an empty scene are undefined");
  }
  Aabb b = primitives.front().bounds();
  for (std::size_t i = 1; i < primitives.size(); ++i) {
    const Aabb pb = primitives[i].bounds();
    b.min = b.min.cwiseMin(pb.min);
    b.max = b.max.cwiseMax(pb.max);
  }
  b.min.array() -= pad;
  b.max.array() += pad;
  return b;
}

void AnalyticScene::validate() const {
  if (primitives.empty()) throw InvalidInputError("analytic scene: no primitives");
  for (const ScenePrimitive& p : primitives) {
    if (!(p.density > 0.0) || !std::isfinite(p.density)) {
      throw InvalidInputError("analytic scene: primitive density must be positive");
    }
    if (p.kind == ScenePrimitive::Kind::Sphere && !(p.radius > 0.0)) {
      throw InvalidInputError("analytic scene: sphere radius must be positive");
    }
    if (p.kind == ScenePrimitive::Kind::Box && p.box.degenerate()) {
      throw DegenerateGeometryError("analytic scene: box primitive is degenerate");
    }
    for (const Eigen::Vector3d* a : {&p.albedo_a, &p.albedo_b}) {
      if ((a->array() < 0.0).any() || (a->array() > 1.0).any()) {
        throw InvalidInputError("analytic scene: albedo outside [0,1]");
      }
    }
  }
  if ((background.array() < 0.0).any() || (background.array() > 1.0).any()) {
    throw InvalidInputError("analytic scene: background outside [0,1]");
  }
}

void AnalyticSceneField::density_batch(const Matrix3X<double>& xs, VectorX<double>& out) const {
  out.resize(xs.cols());
  for (Eigen::Index i = 0; i < xs.cols(); ++i) out[i] = scene->density_at(xs.col(i));
}

void AnalyticSceneField::forward_batch(const Matrix3X<double>& xs, const Matrix3X<double>&,
                                       FieldCache<double>& cache) const {
  cache.densities.resize(xs.cols());
  cache.colors.resize(3, xs.cols());
  double density = 0.0;
  Eigen::Vector3d color;
  for (Eigen::Index i = 0; i < xs.cols(); ++i) {
    scene->sample(xs.col(i), density, color);
    cache.densities[i] = density;
    cache.colors.col(i) = color;
  }
}

AnalyticScene default_scene() {
  AnalyticScene scene;
  ScenePrimitive ball = ScenePrimitive::sphere({0.0, 0.0, 0.5}, 0.5, 30.0, {0.88, 0.26, 0.20});
  ball.albedo_b = Eigen::Vector3d(0.93, 0.89, 0.80);
  ball.checker_cell = 0.25;
  scene.primitives.push_back(ball);

  Aabb slab;
  slab.min = Eigen::Vector3d(-0.8, -0.8, -0.15);
  slab.max = Eigen::Vector3d(0.8, 0.8, 0.0);
  scene.primitives.push_back(ScenePrimitive::make_box(slab, 30.0, {0.35, 0.38, 0.42}));
  return scene;
}

CameraPose look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up) {
  const Eigen::Vector3d to_eye = eye - target;
  if (to_eye.norm() < 1e-12) {
    throw DegenerateGeometryError("look_at_pose: camera coincides with the target");
  }
  const Eigen::Vector3d back = to_eye.normalized();  // camera +z, view is -z
  Eigen::Vector3d right = up.cross(back);
  if (right.norm() < 1e-9) {
    throw DegenerateGeometryError("look_at_pose: viewing direction parallel to the up vector");
  }
  right.normalize();
  const Eigen::Vector3d cam_up = back.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = cam_up;
  r.col(2) = back;
  return CameraPose::from_rt(r, eye, Convention::OpenGLStyle);
}

std::vector<CameraPose> generate_trajectory(const TrajectorySpec& spec) {
  if (spec.azimuth_count < 3) {
    throw InvalidInputError("trajectory: azimuth_count must be >= 3");
  }
  if (!(spec.radius > 0.0)) throw InvalidInputError("trajectory: radius must be positive");
  if (spec.elevation_angles_deg.empty()) {
    throw InvalidInputError("trajectory: need at least one elevation angle");
  }
  std::vector<CameraPose> poses;
  poses.reserve(spec.elevation_angles_deg.size() * static_cast<std::size_t>(spec.azimuth_count));
  for (const double elev_deg : spec.elevation_angles_deg) {
    const double elev = elev_deg * EIGEN_PI / 180.0;
    const double horizontal = spec.radius * std::cos(elev);
    const double z = spec.radius * std::sin(elev);
    for (int i = 0; i < spec.azimuth_count; ++i) {
      const double azim = 2.0 * EIGEN_PI * i / spec.azimuth_count;
      const Eigen::Vector3d eye =
          spec.target + Eigen::Vector3d(horizontal * std::cos(azim), horizontal * std::sin(azim), z);
      poses.push_back(look_at_pose(eye, spec.target));
    }
  }
  return poses;
}

namespace {

// Slab intersection for the oracle marcher; entry clamped at the origin like
// the main renderer so both integrate the same segment.
bool oracle_ray_range(const Aabb& box, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                      double& enter, double& exit) {
  enter = 0.0;
  exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return false;
      continue;
    }
    double lo = (box.min[a] - o[a]) / d[a];
    double hi = (box.max[a] - o[a]) / d[a];
    if (d[a] < 0.0) std::swap(lo, hi);
    enter = std::max(enter, lo);
    exit = std::min(exit, hi);
  }
  return exit > enter;
}

}  // namespace

Image oracle_render(const AnalyticScene& scene, const CameraPose& pose,
                    const CameraIntrinsics& intr, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw InvalidInputError("oracle_render: step must be positive");
  }
  if (pose.convention != Convention::OpenGLStyle) {
    throw ConventionError("oracle_render: pose is not OpenGL-style");
  }
  validate_intrinsics(intr);

  Image image(intr.width, intr.height);
  const bool empty = scene.primitives.empty();
  const Aabb box = empty ? Aabb{} : scene.bounds();
  const Eigen::Matrix3d rot = pose.rotation();
  const Eigen::Vector3d origin = pose.translation();

  parallel_for_chunks(static_cast<std::size_t>(intr.height), 8,
                      [&](std::size_t, std::size_t row_begin, std::size_t row_end) {
    for (std::size_t row = row_begin; row < row_end; ++row) {
      const int y = static_cast<int>(row);
      for (int x = 0; x < intr.width; ++x) {
        Eigen::Vector3d acc = scene.background;
        if (!empty) {
          const Eigen::Vector3d dir =
              (rot * Eigen::Vector3d((x + 0.5 - intr.cx) / intr.fx,
                                     -(y + 0.5 - intr.cy) / intr.fy, -1.0))
                  .normalized();
          double enter = 0.0, exit = 0.0;
          if (oracle_ray_range(box, origin, dir, enter, exit)) {
            const int bins = std::max(1, static_cast<int>(std::ceil((exit - enter) / step)));
            const double h = (exit - enter) / bins;
            double transmittance = 1.0;
            Eigen::Vector3d emitted = Eigen::Vector3d::Zero();
            double density = 0.0;
            Eigen::Vector3d color;
            for (int i = 0; i < bins; ++i) {
              const double t = enter + (i + 0.5) * h;
              if (!scene.sample(origin + t * dir, density, color)) continue;
              const double alpha = 1.0 - std::exp(-density * h);
              emitted += transmittance * alpha * color;
              transmittance *= 1.0 - alpha;
            }
            acc = emitted + transmittance * scene.background;
          }
        }
        image.set_pixel(x, y, acc.cast<float>());
      }
    }
  });
  return image;
}

DatasetPaths make_dataset(const AnalyticScene& scene, const TrajectorySpec& spec,
                          const CameraIntrinsics& intr, const std::string& out_dir,
                          double oracle_step) {
  namespace fs = std::filesystem;
  scene.validate();
  validate_intrinsics(intr);

  DatasetPaths paths;
  paths.root = fs::absolute(out_dir).string();
  paths.images_dir = (fs::path(paths.root) / "images").string();
  paths.trajectory_log = (fs::path(paths.root) / "trajectory.txt").string();
  paths.external_manifest = (fs::path(paths.root) / "transforms_external.json").string();
  paths.intrinsics_json = (fs::path(paths.root) / "intrinsics.json").string();
  std::error_code ec;
  fs::create_directories(paths.images_dir, ec);
  if (ec) throw IoError("cannot create dataset directory: " + paths.images_dir);

  const std::vector<CameraPose> poses = generate_trajectory(spec);
  std::vector<std::string> rel_images;
  rel_images.reserve(poses.size());
  TrajectoryLog log;
  const Eigen::Matrix4d undo_rotation = x_rotation_matrix(-90.0);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "images/frame_%03zu.png", i);
    rel_images.emplace_back(name);

    const Image image = oracle_render(scene, poses[i], intr, oracle_step);
    save_image(image, (fs::path(paths.root) / name).string());
    paths.images.push_back((fs::path(paths.root) / name).string());

    TrajectoryEntry entry;
    entry.timestamp = 0.1 * static_cast<double>(i);
    entry.matrix = undo_rotation * poses[i].matrix;  // back to the device convention
    entry.image_path = name;
    log.entries.push_back(std::move(entry));
  }
  write_trajectory_log(log, paths.trajectory_log);
  write_pose_manifest(poses, intr, rel_images, paths.external_manifest);
  write_intrinsics_json(intr, paths.intrinsics_json);
  return paths;
}

std::vector<CameraPose> perturb_poses(const std::vector<CameraPose>& poses, double rot_sigma_deg,
                                      double trans_sigma, std::uint64_t seed) {
  if (rot_sigma_deg < 0.0 || trans_sigma < 0.0) {
    throw InvalidInputError("perturb_poses: sigmas must be >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> angle_draw(0.0, rot_sigma_deg);
  std::normal_distribution<double> axis_draw(0.0, 1.0);
  std::normal_distribution<double> trans_draw(0.0, trans_sigma);

  std::vector<CameraPose> out;
  out.reserve(poses.size());
  for (const CameraPose& pose : poses) {
    CameraPose p = pose;
    if (rot_sigma_deg > 0.0) {
      const double angle = std::abs(angle_draw(rng)) * EIGEN_PI / 180.0;
      Eigen::Vector3d axis(axis_draw(rng), axis_draw(rng), axis_draw(rng));
      if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitX();
      axis.normalize();
      const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
      p.matrix.topLeftCorner<3, 3>() = r * pose.rotation();
    }
    if (trans_sigma > 0.0) {
      p.set_translation(pose.translation() +
                        Eigen::Vector3d(trans_draw(rng), trans_draw(rng), trans_draw(rng)));
    }
    out.push_back(p);
  }
  return out;
}

namespace {

struct SurfaceSample {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;  // outward
};

double primitive_area(const ScenePrimitive& p) {
  if (p.kind == ScenePrimitive::Kind::Sphere) return 4.0 * EIGEN_PI * p.radius * p.radius;
  const Eigen::Vector3d e = p.box.extent();
  return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

SurfaceSample sample_primitive_surface(const ScenePrimitive& p, std::mt19937_64& rng) {
  SurfaceSample s;
  if (p.kind == ScenePrimitive::Kind::Sphere) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::Vector3d n(nd(rng), nd(rng), nd(rng));
    while (n.norm() < 1e-9) n = Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
    s.normal = n.normalized();
    s.point = p.center + p.radius * s.normal;
    return s;
  }
  const Eigen::Vector3d e = p.box.extent();
  const double areas[3] = {e.y() * e.z(), e.z() * e.x(), e.x() * e.y()};  // per axis pair
  std::discrete_distribution<int> pick_axis({areas[0], areas[0], areas[1], areas[1],
                                             areas[2], areas[2]});
  const int face = pick_axis(rng);
  const int axis = face / 2;
  const bool positive = face % 2 == 1;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::Vector3d q;
  for (int a = 0; a < 3; ++a) q[a] = p.box.min[a] + u01(rng) * e[a];
  q[axis] = positive ? p.box.max[axis] : p.box.min[axis];
  s.point = q;
  s.normal = Eigen::Vector3d::Zero();
  s.normal[axis] = positive ? 1.0 : -1.0;
  return s;
}

// True when the open segment from the camera to just short of the point
// passes through no primitive.
bool unoccluded(const AnalyticScene& scene, const Eigen::Vector3d& camera,
                const Eigen::Vector3d& point, double step) {
  const Eigen::Vector3d delta = point - camera;
  const double dist = delta.norm();
  const Eigen::Vector3d dir = delta / dist;
  const double margin = std::max(2.0 * step, 1e-3 * dist);
  const int bins = std::max(1, static_cast<int>(std::ceil((dist - margin) / step)));
  const double h = (dist - margin) / bins;
  for (int i = 0; i < bins; ++i) {
    if (scene.density_at(camera + (i + 0.5) * h * dir) > 0.0) return false;
  }
  return true;
}

}  // namespace

std::vector<Eigen::Vector3d> sample_visible_surface(const AnalyticScene& scene,
                                                    const std::vector<CameraPose>& poses,
                                                    int count, std::uint64_t seed, double step) {
  scene.validate();
  if (count < 1) throw InvalidInputError("sample_visible_surface: count must be >= 1");
  if (poses.empty()) throw InvalidInputError("sample_visible_surface: no cameras");
  if (!(step > 0.0)) throw InvalidInputError("sample_visible_surface: step must be positive");

  std::mt19937_64 rng(seed);
  std::vector<double> areas;
  areas.reserve(scene.primitives.size());
  for (const ScenePrimitive& p : scene.primitives) areas.push_back(primitive_area(p));
  std::discrete_distribution<int> pick(areas.begin(), areas.end());

  std::vector<Eigen::Vector3d> out;
  out.reserve(static_cast<std::size_t>(count));
  const long attempt_cap = 1000L * count;
  for (long attempt = 0; attempt < attempt_cap && out.size() < static_cast<std::size_t>(count);
       ++attempt) {
    const SurfaceSample s = sample_primitive_surface(scene.primitives[pick(rng)], rng);
    for (const CameraPose& pose : poses) {
      const Eigen::Vector3d cam = pose.translation();
      if (s.normal.dot(cam - s.point) <= 1e-9) continue;  // back-facing
      if (unoccluded(scene, cam, s.point, step)) {
        out.push_back(s.point);
        break;
      }
    }
  }
  if (out.size() < static_cast<std::size_t>(count)) {
    throw DegenerateGeometryError(
        "sample_visible_surface: scene surface is not visible from the given cameras");
  }
  return out;
}

}  // namespace trajnerf
