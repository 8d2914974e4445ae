#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "trajnerf/field.hpp"
#include "trajnerf/geometry.hpp"
#include "trajnerf/types.hpp"

namespace trajnerf {

// One constant-density primitive with a two-tone checker albedo. The first
// primitive in scene order that contains a point wins, so list occluders
// before fillers when shapes overlap.
struct ScenePrimitive {
  enum class Kind { Sphere, Box };

  Kind kind = Kind::Sphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // sphere
  double radius = 1.0;                               // sphere
  Aabb box;                                          // box

  double density = 1.0;                                        // > 0
  Eigen::Vector3d albedo_a = Eigen::Vector3d::Ones();          // tone for even cells
  Eigen::Vector3d albedo_b = Eigen::Vector3d::Ones();          // tone for odd cells
  double checker_cell = 0.0;                                   // 0 disables the checker

  static ScenePrimitive sphere(const Eigen::Vector3d& center, double radius, double density,
                               const Eigen::Vector3d& albedo);
  static ScenePrimitive make_box(const Aabb& box, double density, const Eigen::Vector3d& albedo);

  // Sphere membership is strict (< radius); boxes include their faces.
  bool contains(const Eigen::Vector3d& p) const;
  Eigen::Vector3d albedo_at(const Eigen::Vector3d& p) const;
  Aabb bounds() const;
};

// Piecewise-constant analytic radiance field used as ground truth.
struct AnalyticScene {
  std::vector<ScenePrimitive> primitives;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();

  // Density and color at a point; false (zero density) in empty space.
  bool sample(const Eigen::Vector3d& p, double& density, Eigen::Vector3d& color) const;
  double density_at(const Eigen::Vector3d& p) const;

  // Union of primitive bounds, grown by pad on every side.
  Aabb bounds(double pad = 0.0) const;

  // Densities positive, albedos inside [0,1], at least one primitive.
  void validate() const;
};

// Adapter exposing an AnalyticScene wherever a radiance field is expected
// (density-grid sampling, colorization, reference compositing).
struct AnalyticSceneField {
  using Scalar = double;
  const AnalyticScene* scene = nullptr;

  void density_batch(const Matrix3X<double>& xs, VectorX<double>& out) const;
  void forward_batch(const Matrix3X<double>& xs, const Matrix3X<double>& ds,
                     FieldCache<double>& cache) const;
};

// Checkered sphere of radius 0.5 resting on a matte slab, both opaque.
AnalyticScene default_scene();

// Hemispherical capture pattern: a ring of azimuths per elevation angle,
// every camera looking at the target.
struct TrajectorySpec {
  int azimuth_count = 32;
  std::vector<double> elevation_angles_deg = {30.0, 55.0};
  double radius = 2.0;
  Eigen::Vector3d target = Eigen::Vector3d(0.0, 0.0, 0.5);
};

// OpenGL-style camera-to-world pose at `eye` looking at `target` with the
// global +z axis as the up reference.
CameraPose look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());

// azimuth_count poses per elevation, elevation-major order. Every viewing
// ray passes through the target.
std::vector<CameraPose> generate_trajectory(const TrajectorySpec& spec);

// Reference renderer, independent of the render module: per-pixel fixed-step
// emission-absorption marching of the analytic densities over the scene
// bounding box. Rays that miss the box are pure background.
Image oracle_render(const AnalyticScene& scene, const CameraPose& pose,
                    const CameraIntrinsics& intr, double step);

// Files written by make_dataset, all paths absolute.
struct DatasetPaths {
  std::string root;
  std::string images_dir;
  std::string trajectory_log;      // device-convention poses (internal style)
  std::string external_manifest;   // OpenGL-style poses + intrinsics
  std::string intrinsics_json;     // intrinsics alone, for the device branch
  std::vector<std::string> images;
};

// Renders the trajectory and writes images plus both pose-file styles: a
// device trajectory log (the x-rotation un-applied, so normalization must
// redo it) and an OpenGL-style manifest.
DatasetPaths make_dataset(const AnalyticScene& scene, const TrajectorySpec& spec,
                          const CameraIntrinsics& intr, const std::string& out_dir,
                          double oracle_step = 0.01);

// Composes each pose with a random world-frame rotation (angle drawn from
// |N(0, rot_sigma_deg)|, axis uniform on the sphere) and a N(0, trans_sigma)
// per-axis translation offset. Deterministic per seed.
std::vector<CameraPose> perturb_poses(const std::vector<CameraPose>& poses, double rot_sigma_deg,
                                      double trans_sigma, std::uint64_t seed);

// Uniform-by-area samples of the scene surface, kept only when front-facing
// and unoccluded for at least one of the given cameras. Ground truth for
// reconstruction completeness checks.
std::vector<Eigen::Vector3d> sample_visible_surface(const AnalyticScene& scene,
                                                    const std::vector<CameraPose>& poses,
                                                    int count, std::uint64_t seed,
                                                    double step = 0.005);

}  // namespace trajnerf
