#include <CLI11.hpp>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajnerf/errors.hpp"
#include "trajnerf/extract.hpp"
#include "trajnerf/field.hpp"
#include "trajnerf/geometry.hpp"
#include "trajnerf/ply.hpp"
#include "trajnerf/pose_manifest.hpp"
#include "trajnerf/sfm.hpp"
#include "trajnerf/synth.hpp"
#include "trajnerf/threading.hpp"
#include "trajnerf/train.hpp"
#include "trajnerf/trajectory_log.hpp"

namespace {

using namespace trajnerf;

struct SynthOpts {
  std::string out;
  int images = 64;
  int res = 128;
  int surface = 10000;
  double radius = 2.0;
  double step = 0.01;
  std::vector<double> elevations = {30.0, 55.0};
};

struct NormalizeOpts {
  std::string poses;
  std::string cameras;     // sfm only
  std::string intrinsics;  // device only
  std::string out;
  std::string report;
  std::string source = "device";
  double alpha = 90.0;
  double target_distance = 4.0;
};

struct TrainOpts {
  std::string manifest;
  std::string out;
  std::int64_t steps = 20000;
  bool refine_poses = false;
  std::uint64_t seed = 1;
  int batch_rays = 256;
  int samples_per_ray = 48;
  double bounds = 2.0;
};

struct ExtractOpts {
  std::string checkpoint;
  std::string out;
  int res = 256;
  double bounds = 0.0;  // 0 = the checkpoint's own scene box
  double delta_t = kDefaultDensityThreshold;
  std::string colorize_mode = "average";
  int dirs = 6;
  std::vector<double> fixed_dir = {0.0, 0.0, -1.0};
};

struct EvalOpts {
  std::string cloud;
  std::string reference;
  std::string reference_report;
  std::string csv;
  double radius = 0.05;
};

int run_synth(const SynthOpts& o) {
  TrajectorySpec spec;
  spec.elevation_angles_deg = o.elevations;
  spec.azimuth_count = o.images / static_cast<int>(o.elevations.size());
  spec.radius = o.radius;

  CameraIntrinsics intr;
  intr.width = intr.height = o.res;
  intr.fx = intr.fy = 0.866 * o.res;  // ~60 degree horizontal field of view
  intr.cx = intr.cy = o.res / 2.0;

  const AnalyticScene scene = default_scene();
  const DatasetPaths paths = make_dataset(scene, spec, intr, o.out, o.step);
  std::cout << "dataset " << paths.root << "\n"
            << "  images " << paths.images.size() << " (" << o.res << "x" << o.res << ")\n"
            << "  trajectory " << paths.trajectory_log << "\n"
            << "  manifest " << paths.external_manifest << "\n";

  if (o.surface > 0) {
    const std::vector<Eigen::Vector3d> pts =
        sample_visible_surface(scene, generate_trajectory(spec), o.surface, 1);
    PointCloud truth;
    for (const Eigen::Vector3d& p : pts) {
      truth.add(static_cast<float>(p.x()), static_cast<float>(p.y()),
                static_cast<float>(p.z()), 200, 200, 200);
    }
    const std::string surface_path = (std::filesystem::path(o.out) / "surface.ply").string();
    write_ply(truth, surface_path);
    std::cout << "  surface " << truth.size() << " samples -> " << surface_path << "\n";
  }
  return 0;
}

int run_normalize(const NormalizeOpts& o) {
  std::vector<CameraPose> poses;
  std::vector<std::string> image_paths;
  CameraIntrinsics intr;

  if (o.source == "device") {
    const TrajectoryLog log = parse_trajectory_log(o.poses, false);
    poses = log.to_camera_poses();
    for (const TrajectoryEntry& e : log.entries) image_paths.push_back(e.image_path);
    intr = read_intrinsics_json(o.intrinsics);
    if (o.alpha == 0.0) {
      // Explicit override: the log is declared to already be OpenGL-style.
      for (CameraPose& p : poses) p.convention = Convention::OpenGLStyle;
    }
  } else {
    const SfmExport exp = parse_sfm_export(o.cameras, o.poses);
    poses = sfm_to_camera_poses(exp);
    for (const SfmImage& im : exp.images) image_paths.push_back(im.name);
    intr = exp.camera_by_id(exp.images.at(0).camera_id).intrinsics;
  }

  NormalizeOptions opts;
  opts.alpha_deg = o.alpha;
  opts.apply_rotation = o.source == "device" && o.alpha != 0.0;
  opts.target_distance = o.target_distance;
  const auto [normalized, report] = normalize_pipeline(poses, opts);

  write_pose_manifest(normalized, intr, image_paths, o.out);

  const std::string report_path = o.report.empty() ? o.out + ".report.json" : o.report;
  nlohmann::ordered_json j;
  j["center"] = {report.center.x(), report.center.y(), report.center.z()};
  j["scale"] = report.scale;
  j["rotation_applied_deg"] = report.rotation_applied_deg;
  std::ofstream rf(report_path);
  if (!rf) throw IoError("cannot open for writing: " + report_path);
  rf << j.dump(2) << "\n";

  std::cout << "normalized " << normalized.size() << " poses -> " << o.out << "\n"
            << "  rotation " << report.rotation_applied_deg << " deg, scale " << report.scale
            << ", center [" << report.center.transpose() << "]\n"
            << "  report " << report_path << "\n";
  return 0;
}

int run_train(const TrainOpts& o) {
  const TrainDataset data = load_dataset(o.manifest);
  TrainConfig cfg;
  cfg.steps = o.steps;
  cfg.refine_poses = o.refine_poses;
  cfg.seed = o.seed;
  cfg.rays_per_batch = o.batch_rays;
  cfg.samples_per_ray = o.samples_per_ray;
  cfg.field.bounds = Aabb::cube(o.bounds);

  std::filesystem::create_directories(o.out);
  const TrainingSummary sum = run_training(data, cfg, o.out);
  std::cout << "trained " << o.steps << " steps on " << data.camera_count() << " images\n"
            << "  final loss " << sum.final_loss << ", batch psnr " << sum.final_batch_psnr
            << " dB, eval psnr " << sum.eval_psnr_mean << " dB\n"
            << "  checkpoint " << sum.checkpoint_path << "\n"
            << "  metrics " << sum.metrics_path << "\n";
  if (!sum.refined_manifest_path.empty()) {
    std::cout << "  refined poses " << sum.refined_manifest_path << "\n";
  }
  return 0;
}

int run_extract(const ExtractOpts& o) {
  const RadianceField<float> field = load_checkpoint<float>(o.checkpoint);
  const Aabb box = o.bounds > 0.0 ? Aabb::cube(o.bounds) : field.config().bounds;

  const DensityGrid grid =
      sample_density_grid(field, box, Eigen::Vector3i(o.res, o.res, o.res));
  PointCloud cloud = threshold_filter(grid, o.delta_t);
  if (cloud.size() > 0) {
    const ColorizeStrategy strategy =
        o.colorize_mode == "fixed"
            ? ColorizeStrategy::fixed_direction(
                  Eigen::Vector3d(o.fixed_dir.at(0), o.fixed_dir.at(1), o.fixed_dir.at(2)))
            : ColorizeStrategy::direction_average(o.dirs);
    cloud = colorize(field, cloud, strategy);
  }
  write_ply(cloud, o.out);
  std::cout << "extracted " << cloud.size() << " points (threshold " << o.delta_t << ", grid "
            << o.res << "^3) -> " << o.out << "\n";
  return 0;
}

int run_eval(const EvalOpts& o) {
  const PointCloud cloud = parse_ply(o.cloud);
  PointCloud reference = parse_ply(o.reference);
  if (!o.reference_report.empty()) {
    // The reference lives in the raw capture frame; replay the normalization
    // (recenter then scale, rotation already baked into +z-up references).
    std::ifstream in(o.reference_report);
    if (!in) throw IoError("cannot open: " + o.reference_report);
    nlohmann::json j;
    in >> j;
    const auto& c = j.at("center");
    const Eigen::Vector3f center(c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>());
    const float scale = j.at("scale").get<float>();
    for (std::size_t i = 0; i + 2 < reference.positions.size(); i += 3) {
      reference.positions[i] = (reference.positions[i] - center.x()) * scale;
      reference.positions[i + 1] = (reference.positions[i + 1] - center.y()) * scale;
      reference.positions[i + 2] = (reference.positions[i + 2] - center.z()) * scale;
    }
  }
  const CloudStatsReport report = cloud_stats(cloud, reference, o.radius);
  std::cout << report.text();
  if (!o.csv.empty()) {
    std::ofstream out(o.csv);
    if (!out) throw IoError("cannot open for writing: " + o.csv);
    out << CloudStatsReport::csv_header() << "\n" << report.csv_row() << "\n";
    std::cout << "csv " << o.csv << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-to-point-cloud reconstruction pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap worker threads (0 = hardware default)")
      ->capture_default_str();

  SynthOpts so;
  CLI::App* synth = app.add_subcommand("synth", "Render a synthetic dataset with ground truth");
  synth->add_option("--out", so.out, "Dataset directory")->required();
  synth->add_option("--images", so.images, "Total image count (azimuths x elevations)")
      ->capture_default_str()
      ->check(CLI::Range(6, 4096));
  synth->add_option("--res", so.res, "Image width and height")
      ->capture_default_str()
      ->check(CLI::Range(8, 2048));
  synth->add_option("--surface", so.surface, "Visible-surface truth samples (0 = skip)")
      ->capture_default_str()
      ->check(CLI::Range(0, 10000000));
  synth->add_option("--radius", so.radius, "Camera ring radius")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_option("--step", so.step, "Oracle ray-marching step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_option("--elevations", so.elevations, "Elevation angles in degrees")
      ->delimiter(',')
      ->capture_default_str();

  NormalizeOpts no;
  CLI::App* normalize =
      app.add_subcommand("normalize", "Normalize poses into the radiance-field convention");
  normalize->add_option("--poses", no.poses, "Trajectory log (device) or images.txt (sfm)")
      ->required()
      ->check(CLI::ExistingFile);
  normalize->add_option("--source", no.source, "Pose source kind")
      ->check(CLI::IsMember({"device", "sfm"}))
      ->capture_default_str();
  normalize->add_option("--cameras", no.cameras, "cameras.txt (sfm source)")
      ->check(CLI::ExistingFile);
  normalize->add_option("--intrinsics", no.intrinsics, "Intrinsics JSON (device source)")
      ->check(CLI::ExistingFile);
  normalize->add_option("--out", no.out, "Output pose manifest")->required();
  normalize->add_option("--report", no.report, "Normalization report path (default <out>.report.json)");
  normalize->add_option("--alpha", no.alpha, "x-rotation angle in degrees; 0 skips it")
      ->capture_default_str();
  normalize->add_option("--target-distance", no.target_distance, "Mean camera distance after scaling")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  TrainOpts to;
  CLI::App* train = app.add_subcommand("train", "Train a radiance field on a normalized dataset");
  train->add_option("--manifest", to.manifest, "Pose manifest with images")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", to.out, "Output directory (checkpoint, metrics)")->required();
  train->add_option("--steps", to.steps, "Training steps")
      ->capture_default_str()
      ->check(CLI::Range(std::int64_t{1}, std::int64_t{10000000}));
  train->add_flag("--refine-poses", to.refine_poses, "Also optimize per-camera pose corrections");
  train->add_option("--seed", to.seed, "Training seed")->capture_default_str();
  train->add_option("--batch-rays", to.batch_rays, "Rays per training batch")
      ->capture_default_str()
      ->check(CLI::Range(1, 65536));
  train->add_option("--n-samples", to.samples_per_ray, "Quadrature samples per ray")
      ->capture_default_str()
      ->check(CLI::Range(1, 1024));
  train->add_option("--bounds", to.bounds, "Scene box half-extent")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  ExtractOpts eo;
  CLI::App* extract = app.add_subcommand("extract", "Extract a colored point cloud by thresholding");
  extract->add_option("--checkpoint", eo.checkpoint, "Trained checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--out", eo.out, "Output PLY path")->required();
  extract->add_option("--res", eo.res, "Density grid nodes per axis")
      ->capture_default_str()
      ->check(CLI::Range(2, 1024));
  extract->add_option("--bounds", eo.bounds, "Grid box half-extent (0 = checkpoint box)")
      ->capture_default_str();
  extract->add_option("--delta-t", eo.delta_t, "Density threshold")->capture_default_str();
  extract->add_option("--colorize", eo.colorize_mode, "Color lookup strategy")
      ->check(CLI::IsMember({"average", "fixed"}))
      ->capture_default_str();
  extract->add_option("--dirs", eo.dirs, "Directions averaged per point")
      ->capture_default_str()
      ->check(CLI::Range(1, 512));
  extract->add_option("--fixed-dir", eo.fixed_dir, "View direction for --colorize fixed")
      ->delimiter(',')
      ->expected(3);

  EvalOpts vo;
  CLI::App* eval = app.add_subcommand("eval", "Compare a cloud against a reference cloud");
  eval->add_option("--cloud", vo.cloud, "Cloud under test (PLY)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--reference", vo.reference, "Reference cloud (PLY)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--reference-report", vo.reference_report,
                   "Normalization report; maps the reference into the trained frame")
      ->check(CLI::ExistingFile);
  eval->add_option("--radius", vo.radius, "Coverage radius")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval->add_option("--csv", vo.csv, "Also write the stats as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  // Cross-flag requirements CLI11 cannot express declaratively.
  if (synth->parsed() && so.images % static_cast<int>(so.elevations.size()) != 0) {
    std::cerr << "--images must be divisible by the elevation count ("
              << so.elevations.size() << ")\n";
    return 2;
  }
  if (normalize->parsed()) {
    if (no.source == "device" && no.intrinsics.empty()) {
      std::cerr << "--source device requires --intrinsics\n";
      return 2;
    }
    if (no.source == "sfm" && no.cameras.empty()) {
      std::cerr << "--source sfm requires --cameras\n";
      return 2;
    }
  }

  try {
    set_thread_cap(threads);
    if (synth->parsed()) return run_synth(so);
    if (normalize->parsed()) return run_normalize(no);
    if (train->parsed()) return run_train(to);
    if (extract->parsed()) return run_extract(eo);
    if (eval->parsed()) return run_eval(vo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
