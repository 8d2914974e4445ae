#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "trajnerf/image_io.hpp"
#include "trajnerf/pose_manifest.hpp"
#include "trajnerf/render.hpp"
#include "trajnerf/synth.hpp"
#include "trajnerf/train.hpp"
#include "trajnerf/trajectory_log.hpp"

using namespace trajnerf;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("trajnerf_synth_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
};

CameraIntrinsics square_intrinsics(int size, double focal) {
  CameraIntrinsics intr;
  intr.width = intr.height = size;
  intr.fx = intr.fy = focal;
  intr.cx = intr.cy = size / 2.0;
  return intr;
}

double point_to_view_ray(const CameraPose& pose, const Eigen::Vector3d& point) {
  const Eigen::Vector3d d = pose.view_direction();
  const Eigen::Vector3d rel = point - pose.translation();
  return (rel - rel.dot(d) * d).norm();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("the default capture pattern yields 64 valid poses aimed at the target") {
  const TrajectorySpec spec;
  const std::vector<CameraPose> poses = generate_trajectory(spec);
  REQUIRE(poses.size() == 64);
  validate_poses(poses);
  for (const CameraPose& pose : poses) {
    CHECK(pose.convention == Convention::OpenGLStyle);
    CHECK(point_to_view_ray(pose, spec.target) < 1e-9);
    CHECK((pose.translation() - spec.target).norm() == doctest::Approx(spec.radius).epsilon(1e-12));
    CHECK(pose.translation().z() > spec.target.z());  // upper hemisphere
  }
  CHECK((center_of_attention(poses) - spec.target).norm() < 1e-6);
}

TEST_CASE("azimuth wraps around after a full turn") {
  const TrajectorySpec spec;
  const double elev = spec.elevation_angles_deg[0] * EIGEN_PI / 180.0;
  const double h = spec.radius * std::cos(elev), z = spec.radius * std::sin(elev);
  const CameraPose a = look_at_pose(
      spec.target + Eigen::Vector3d(h * std::cos(0.0), h * std::sin(0.0), z), spec.target);
  const double turn = 2.0 * EIGEN_PI;
  const CameraPose b = look_at_pose(
      spec.target + Eigen::Vector3d(h * std::cos(turn), h * std::sin(turn), z), spec.target);
  CHECK((a.matrix - b.matrix).cwiseAbs().maxCoeff() < 1e-12);

  const CameraIntrinsics intr = square_intrinsics(16, 20.0);
  CHECK(image_mae(oracle_render(default_scene(), a, intr, 0.05),
                  oracle_render(default_scene(), b, intr, 0.05)) < 1e-6);
}

TEST_CASE("degenerate look-at inputs are rejected") {
  CHECK_THROWS_AS(look_at_pose({1, 2, 3}, {1, 2, 3}), DegenerateGeometryError);
  CHECK_THROWS_AS(look_at_pose({0, 0, 2}, {0, 0, 0}), DegenerateGeometryError);  // along up
  TrajectorySpec spec;
  spec.azimuth_count = 2;
  CHECK_THROWS_AS(generate_trajectory(spec), InvalidInputError);
  spec.azimuth_count = 32;
  spec.radius = 0.0;
  CHECK_THROWS_AS(generate_trajectory(spec), InvalidInputError);
}

TEST_CASE("an empty scene renders as pure background") {
  AnalyticScene scene;
  scene.background = Eigen::Vector3d(0.2, 0.5, 0.7);
  CameraPose pose = look_at_pose({0, 0, 2}, {0, 1, 0});
  const Image image = oracle_render(scene, pose, square_intrinsics(8, 10.0), 0.1);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(image.get_pixel(x, y).x() == 0.2f);
      CHECK(image.get_pixel(x, y).y() == 0.5f);
      CHECK(image.get_pixel(x, y).z() == 0.7f);
    }
  }
}

TEST_CASE("an opaque sphere filling the view renders as its flat albedo") {
  AnalyticScene scene;
  scene.primitives.push_back(
      ScenePrimitive::sphere({0, 0, 0}, 1.0, 1e4, {0.3, 0.6, 0.9}));
  const CameraPose pose = look_at_pose({0, 0, 2.5}, {0, 0, 0}, Eigen::Vector3d::UnitY());
  const Image image = oracle_render(scene, pose, square_intrinsics(32, 60.0), 0.005);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const Eigen::Vector3f c = image.get_pixel(x, y);
      CHECK(c.x() == doctest::Approx(0.3).epsilon(1e-5));
      CHECK(c.y() == doctest::Approx(0.6).epsilon(1e-5));
      CHECK(c.z() == doctest::Approx(0.9).epsilon(1e-5));
    }
  }
}

TEST_CASE("halving the marching step changes images by well under 0.01") {
  const AnalyticScene scene = default_scene();
  const CameraPose pose = generate_trajectory(TrajectorySpec())[5];
  const CameraIntrinsics intr = square_intrinsics(64, 70.0);
  const Image coarse = oracle_render(scene, pose, intr, 0.02);
  const Image fine = oracle_render(scene, pose, intr, 0.01);
  CHECK(image_mae(coarse, fine) < 0.01);
}

TEST_CASE("oracle and render-module quadrature agree on the analytic scene") {
  const AnalyticScene scene = default_scene();
  const Aabb box = scene.bounds();
  const CameraPose pose = generate_trajectory(TrajectorySpec())[37];
  const CameraIntrinsics intr = square_intrinsics(32, 36.0);
  const double step = 0.01;

  const Image oracle = oracle_render(scene, pose, intr, step);

  // Same scene through the render module's reference path, with per-ray
  // sample counts matched to the oracle's fixed step.
  Image ours(intr.width, intr.height);
  std::mt19937_64 rng(0);
  double density = 0.0;
  Eigen::Vector3d color;
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      Ray ray = generate_ray(x, y, intr, pose);
      Eigen::Vector3d px = scene.background;
      if (set_ray_bounds(ray, box)) {
        const int n = std::max(
            1, static_cast<int>(std::ceil((ray.t_far - ray.t_near) / step)));
        std::vector<CompositeSample> samples;
        samples.reserve(static_cast<std::size_t>(n));
        const double h = (ray.t_far - ray.t_near) / n;
        for (const auto& [t, point] : sample_along_ray(ray, n, false, rng)) {
          CompositeSample s;
          scene.sample(point, density, color);
          s.density = density;
          s.color = color;
          s.delta = h;
          samples.push_back(s);
        }
        px = composite(samples, scene.background).color;
      }
      ours.set_pixel(x, y, px.cast<float>());
    }
  }
  CHECK(image_mae(oracle, ours) <= 0.02);
}

TEST_CASE("scene validation and bounds") {
  AnalyticScene scene = default_scene();
  CHECK_NOTHROW(scene.validate());
  const Aabb b = scene.bounds();
  CHECK(b.min.x() == doctest::Approx(-0.8));
  CHECK(b.min.z() == doctest::Approx(-0.15));
  CHECK(b.max.z() == doctest::Approx(1.0));
  const Aabb padded = scene.bounds(0.1);
  CHECK(padded.max.z() == doctest::Approx(1.1));

  AnalyticScene empty;
  CHECK_THROWS_AS(empty.validate(), InvalidInputError);
  CHECK_THROWS_AS(empty.bounds(), InvalidInputError);

  AnalyticScene bad = default_scene();
  bad.primitives[0].density = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
  bad = default_scene();
  bad.primitives[0].albedo_a = Eigen::Vector3d(1.5, 0, 0);
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
}

TEST_CASE("checker albedo alternates with cell parity, first primitive wins") {
  ScenePrimitive p = ScenePrimitive::sphere({0, 0, 0}, 5.0, 1.0, {1, 0, 0});
  p.albedo_b = Eigen::Vector3d(0, 1, 0);
  p.checker_cell = 0.25;
  CHECK(p.albedo_at({0.1, 0.1, 0.1}) == Eigen::Vector3d(1, 0, 0));
  CHECK(p.albedo_at({0.3, 0.1, 0.1}) == Eigen::Vector3d(0, 1, 0));
  CHECK(p.albedo_at({-0.1, 0.1, 0.1}) == Eigen::Vector3d(0, 1, 0));  // floor on negatives

  AnalyticScene scene;
  scene.primitives.push_back(ScenePrimitive::sphere({0, 0, 0}, 1.0, 5.0, {1, 0, 0}));
  scene.primitives.push_back(ScenePrimitive::sphere({0.5, 0, 0}, 1.0, 9.0, {0, 0, 1}));
  double density = 0.0;
  Eigen::Vector3d color;
  REQUIRE(scene.sample({0.4, 0, 0}, density, color));  // inside both
  CHECK(density == 5.0);
  CHECK(color == Eigen::Vector3d(1, 0, 0));

  AnalyticSceneField field{&scene};
  Matrix3X<double> xs(3, 2);
  xs.col(0) = Eigen::Vector3d(0.4, 0, 0);
  xs.col(1) = Eigen::Vector3d(1.3, 0, 0);  // second sphere only
  VectorX<double> out;
  field.density_batch(xs, out);
  CHECK(out[0] == 5.0);
  CHECK(out[1] == 9.0);
  FieldCache<double> cache;
  field.forward_batch(xs, xs, cache);
  CHECK(cache.colors.col(1) == Eigen::Vector3d(0, 0, 1));
  CHECK(cache.densities[0] == 5.0);
}

TEST_CASE("a generated dataset round-trips through the parsers") {
  TempDir dir("dataset");
  TrajectorySpec spec;
  spec.azimuth_count = 4;
  spec.elevation_angles_deg = {30.0};
  const CameraIntrinsics intr = square_intrinsics(16, 18.0);
  const DatasetPaths paths = make_dataset(default_scene(), spec, intr, dir.str(), 0.05);

  REQUIRE(paths.images.size() == 4);
  for (const std::string& p : paths.images) CHECK(std::filesystem::exists(p));

  const TrajectoryLog log = parse_trajectory_log(paths.trajectory_log, true);
  REQUIRE(log.entries.size() == 4);
  const std::vector<CameraPose> device = log.to_camera_poses();
  CHECK(device[0].convention == Convention::DeviceRaw);

  const PoseManifest manifest = parse_pose_manifest(paths.external_manifest);
  REQUIRE(manifest.frames.size() == 4);
  CHECK(manifest.width == 16);
  CHECK(manifest.fx == 18.0);
  const CameraIntrinsics loaded = read_intrinsics_json(paths.intrinsics_json);
  CHECK(loaded.fx == intr.fx);
  CHECK(loaded.cy == intr.cy);
  CHECK(loaded.height == intr.height);

  const Image img = load_image(paths.images[0]);
  CHECK(img.width == 16);
  CHECK(img.height == 16);

  // Normalizing the device-convention log reproduces the OpenGL-style
  // manifest poses once the same recenter and scale are applied to both.
  const auto [normalized, report] = normalize_pipeline(device);
  CHECK(report.rotation_applied_deg == 90.0);
  const std::vector<CameraPose> external =
      apply_scale(recenter(manifest.camera_poses(), report.center), report.scale);
  REQUIRE(normalized.size() == external.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    CHECK((normalized[i].matrix - external[i].matrix).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(normalized[i].convention == Convention::OpenGLStyle);
  }
}

TEST_CASE("dataset generation is deterministic") {
  TempDir a("det_a"), b("det_b");
  TrajectorySpec spec;
  spec.azimuth_count = 3;
  spec.elevation_angles_deg = {40.0};
  const CameraIntrinsics intr = square_intrinsics(8, 9.0);
  const DatasetPaths pa = make_dataset(default_scene(), spec, intr, a.str(), 0.1);
  const DatasetPaths pb = make_dataset(default_scene(), spec, intr, b.str(), 0.1);
  CHECK(read_file(pa.trajectory_log) == read_file(pb.trajectory_log));
  CHECK(read_file(pa.external_manifest) == read_file(pb.external_manifest));
  CHECK(read_file(pa.images[0]) == read_file(pb.images[0]));
}

TEST_CASE("zero-sigma perturbation is the identity and seeds reproduce") {
  const std::vector<CameraPose> poses = generate_trajectory(TrajectorySpec());
  const std::vector<CameraPose> same = perturb_poses(poses, 0.0, 0.0, 7);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(same[i].matrix == poses[i].matrix);
  }

  const std::vector<CameraPose> p1 = perturb_poses(poses, 1.0, 0.01, 7);
  const std::vector<CameraPose> p2 = perturb_poses(poses, 1.0, 0.01, 7);
  const std::vector<CameraPose> p3 = perturb_poses(poses, 1.0, 0.01, 8);
  validate_poses(p1);
  double max_same = 0.0, max_other = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    max_same = std::max(max_same, (p1[i].matrix - p2[i].matrix).cwiseAbs().maxCoeff());
    max_other = std::max(max_other, (p1[i].matrix - p3[i].matrix).cwiseAbs().maxCoeff());
  }
  CHECK(max_same == 0.0);
  CHECK(max_other > 1e-6);

  // Rotation-only perturbation keeps translations; translation-only keeps
  // rotations.
  const std::vector<CameraPose> rot_only = perturb_poses(poses, 1.0, 0.0, 3);
  CHECK(rot_only[4].translation() == poses[4].translation());
  CHECK((rot_only[4].rotation() - poses[4].rotation()).cwiseAbs().maxCoeff() > 1e-6);
  const std::vector<CameraPose> trans_only = perturb_poses(poses, 0.0, 0.05, 3);
  CHECK(trans_only[4].rotation() == poses[4].rotation());
  CHECK((trans_only[4].translation() - poses[4].translation()).norm() > 1e-6);

  CHECK_THROWS_AS(perturb_poses(poses, -1.0, 0.0, 1), InvalidInputError);
}

TEST_CASE("mean perturbation angle matches the half-normal mean") {
  std::vector<CameraPose> poses(10000);  // identity poses
  const double sigma = 1.0;
  const std::vector<CameraPose> perturbed = perturb_poses(poses, sigma, 0.0, 12345);
  const double mean = mean_rotation_error_deg(poses, perturbed);
  const double expected = sigma * std::sqrt(2.0 / EIGEN_PI);
  CHECK(std::abs(mean - expected) / expected < 0.03);
}

TEST_CASE("visible-surface samples lie on seen faces only") {
  const AnalyticScene scene = default_scene();
  const std::vector<CameraPose> poses = generate_trajectory(TrajectorySpec());
  const std::vector<Eigen::Vector3d> pts = sample_visible_surface(scene, poses, 400, 5);
  REQUIRE(pts.size() == 400);

  const ScenePrimitive& ball = scene.primitives[0];
  const Aabb& slab = scene.primitives[1].box;
  int on_sphere = 0, on_slab_top = 0;
  for (const Eigen::Vector3d& p : pts) {
    const double to_sphere = std::abs((p - ball.center).norm() - ball.radius);
    const bool sphere_hit = to_sphere < 1e-9;
    bool slab_hit = false;
    if (!sphere_hit) {
      CHECK(slab.contains(p));
      int on_faces = 0;
      for (int a = 0; a < 3; ++a) {
        on_faces += p[a] == slab.min[a] || p[a] == slab.max[a];
      }
      slab_hit = on_faces >= 1;
      CHECK(p.z() > slab.min.z());  // the bottom face is never seen
      on_slab_top += p.z() == slab.max.z();
    }
    on_sphere += sphere_hit;
    CHECK((sphere_hit || slab_hit));
  }
  CHECK(on_sphere > 50);
  CHECK(on_slab_top > 50);

  // Points under the sphere's contact shadow are occluded from every camera.
  for (const Eigen::Vector3d& p : pts) {
    if (p.z() == slab.max.z()) CHECK(p.head<2>().norm() > 0.05);
  }

  const std::vector<Eigen::Vector3d> again = sample_visible_surface(scene, poses, 400, 5);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(pts[i] == again[i]);
}
