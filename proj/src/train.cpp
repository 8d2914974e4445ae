#include "trajnerf/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "trajnerf/image_io.hpp"
#include "trajnerf/metrics_log.hpp"
#include "trajnerf/pose_manifest.hpp"
#include "trajnerf/splitmix.hpp"

namespace trajnerf {

namespace fs = std::filesystem;

void TrainDataset::validate() const {
  if (images.empty()) throw InvalidInputError("dataset: no images");
  if (images.size() != poses.size()) {
    throw InvalidInputError("dataset: image and pose counts differ");
  }
  if (!image_paths.empty() && image_paths.size() != poses.size()) {
    throw InvalidInputError("dataset: image path count does not match poses");
  }
  validate_intrinsics(intrinsics);
  for (const Image& img : images) {
    if (img.width != intrinsics.width || img.height != intrinsics.height) {
      throw InvalidInputError("dataset: image size does not match the intrinsics");
    }
  }
  validate_poses(poses);
  for (const CameraPose& pose : poses) {
    if (pose.convention != Convention::OpenGLStyle) {
      throw ConventionError("dataset: poses must be normalized before training");
    }
  }
}

TrainDataset load_dataset(const std::string& manifest_path) {
  const PoseManifest manifest = parse_pose_manifest(manifest_path);
  TrainDataset data;
  data.intrinsics = manifest.intrinsics();
  data.poses = manifest.camera_poses();
  const fs::path dir = fs::path(manifest_path).parent_path();
  data.images.reserve(manifest.frames.size());
  data.image_paths.reserve(manifest.frames.size());
  for (const PoseManifestFrame& frame : manifest.frames) {
    data.image_paths.push_back(frame.file_path);
    data.images.push_back(load_image((dir / frame.file_path).string()));
  }
  data.validate();
  return data;
}

void TrainConfig::validate() const {
  if (steps < 1) throw InvalidInputError("train config: steps must be >= 1");
  if (rays_per_batch < 1) throw InvalidInputError("train config: rays_per_batch must be >= 1");
  if (samples_per_ray < 1) throw InvalidInputError("train config: samples_per_ray must be >= 1");
  if (!(lr_field > 0) || !(lr_field_final > 0) || !(lr_pose > 0)) {
    throw InvalidInputError("train config: learning rates must be > 0");
  }
  if (pose_warmup_steps < 0) throw InvalidInputError("train config: negative warmup");
  if (rays_per_chunk < 1) throw InvalidInputError("train config: rays_per_chunk must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(adam_eps > 0)) {
    throw InvalidInputError("train config: invalid Adam settings");
  }
  field.validate();
}

double field_lr_at(const TrainConfig& cfg, std::int64_t step) {
  if (cfg.steps <= 1) return cfg.lr_field;
  const double u = static_cast<double>(step) / static_cast<double>(cfg.steps - 1);
  return cfg.lr_field * std::pow(cfg.lr_field_final / cfg.lr_field, u);
}

PoseCorrection PoseCorrection::zeros(int cameras) {
  if (cameras < 0) throw InvalidInputError("pose correction: negative camera count");
  PoseCorrection corr;
  corr.params = Eigen::VectorXd::Zero(6 * cameras);
  return corr;
}

namespace {

// Shared series switch: below this angle the closed forms lose digits and
// the truncated series is exact to double precision.
constexpr double kSmallAngle = 1e-4;

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& r) {
  Eigen::Matrix3d k;
  k << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
  return k;
}

}  // namespace

Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& r) {
  if (!r.allFinite()) throw InvalidInputError("axis-angle rotation: non-finite input");
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // R = I + a [r]x + b [r]x^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Eigen::Matrix3d k = cross_matrix(r);
  return Eigen::Matrix3d::Identity() + a * k + b * (k * k);
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b, c;  // J_l = I + b [r]x + c [r]x^2
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Eigen::Matrix3d k = cross_matrix(r);
  return Eigen::Matrix3d::Identity() + b * k + c * (k * k);
}

CameraPose apply_pose_correction(const CameraPose& base, const Eigen::Vector3d& r,
                                 const Eigen::Vector3d& v) {
  CameraPose out = base;
  out.matrix.topLeftCorner<3, 3>() = axis_angle_rotation(r) * base.rotation();
  out.set_translation(base.translation() + v);
  return out;
}

std::vector<CameraPose> apply_pose_correction(const std::vector<CameraPose>& base,
                                              const PoseCorrection& corr) {
  if (corr.camera_count() != static_cast<int>(base.size())) {
    throw InvalidInputError("pose correction: camera count mismatch");
  }
  std::vector<CameraPose> out;
  out.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const int cam = static_cast<int>(i);
    out.push_back(apply_pose_correction(base[i], corr.r(cam), corr.v(cam)));
  }
  return out;
}

template <typename S>
TrainState<S> make_train_state(const RadianceField<S>& field, int camera_count) {
  TrainState<S> state;
  state.m_field = VectorX<S>::Zero(field.param_count());
  state.v_field = VectorX<S>::Zero(field.param_count());
  state.m_pose = Eigen::VectorXd::Zero(6 * camera_count);
  state.v_pose = Eigen::VectorXd::Zero(6 * camera_count);
  state.correction = PoseCorrection::zeros(camera_count);
  return state;
}

namespace {

// Distinct stream tag so pixel picks never collide with the sample jitter.
constexpr std::uint64_t kPixelStream = 0x517cc1b727220a95ull;

}  // namespace

template <typename S>
double batch_gradients(const RadianceField<S>& field, const TrainDataset& data,
                       const TrainConfig& cfg, const PoseCorrection& corr, std::int64_t step,
                       VectorX<S>& field_grad, Eigen::VectorXd* pose_grad) {
  data.validate();
  const int n_cameras = data.camera_count();
  if (corr.camera_count() != n_cameras) {
    throw InvalidInputError("batch gradients: correction camera count mismatch");
  }
  const int batch = cfg.rays_per_batch;
  const int n = cfg.samples_per_ray;
  const std::uint64_t pixels =
      static_cast<std::uint64_t>(data.intrinsics.width) * data.intrinsics.height;

  std::vector<Eigen::Matrix3d> rot(n_cameras);
  for (int cam = 0; cam < n_cameras; ++cam) rot[cam] = axis_angle_rotation(corr.r(cam));

  // Assemble the whole batch: pixel picks from the counter stream, t bounds
  // from the base pose, origin/direction from the corrected one.
  RayBundle<S> rays;
  rays.origins.resize(3, batch);
  rays.dirs.resize(3, batch);
  rays.t_near.resize(batch);
  rays.t_far.resize(batch);
  Matrix3X<double> gt(3, batch);
  Matrix3X<double> cur_dir(3, batch);  // corrected unit directions, for the pose fold
  std::vector<int> ray_camera(batch);
  const std::uint64_t stream = mix64(cfg.seed ^ kPixelStream);
  for (int k = 0; k < batch; ++k) {
    const std::uint64_t a =
        mix64(stream ^ mix64(static_cast<std::uint64_t>(step) ^ mix64(k)));
    const int cam = static_cast<int>(a % static_cast<std::uint64_t>(n_cameras));
    const std::uint64_t pix = mix64(a) % pixels;
    const int u = static_cast<int>(pix % static_cast<std::uint64_t>(data.intrinsics.width));
    const int v = static_cast<int>(pix / static_cast<std::uint64_t>(data.intrinsics.width));

    Ray ray = generate_ray(u, v, data.intrinsics, data.poses[cam]);
    set_ray_bounds(ray, cfg.field.bounds);
    const Eigen::Vector3d origin = ray.origin + corr.v(cam);
    const Eigen::Vector3d dir = rot[cam] * ray.direction;
    rays.origins.col(k) = origin.cast<S>();
    rays.dirs.col(k) = dir.cast<S>();
    rays.t_near[k] = static_cast<S>(ray.t_near);
    rays.t_far[k] = static_cast<S>(ray.t_far);
    cur_dir.col(k) = dir;
    ray_camera[k] = cam;
    gt.col(k) = data.images[cam].get_pixel(u, v).cast<double>();
  }

  field_grad = VectorX<S>::Zero(field.param_count());
  if (pose_grad) *pose_grad = Eigen::VectorXd::Zero(6 * n_cameras);
  Eigen::VectorXd g_omega = Eigen::VectorXd::Zero(3 * n_cameras);

  const Vector3<S> background = cfg.background.cast<S>();
  const double color_scale = 2.0 / (3.0 * batch);
  double loss = 0.0;

  for (int begin = 0; begin < batch; begin += cfg.rays_per_chunk) {
    const int count = std::min(cfg.rays_per_chunk, batch - begin);
    RayBundle<S> chunk;
    chunk.origins = rays.origins.middleCols(begin, count);
    chunk.dirs = rays.dirs.middleCols(begin, count);
    chunk.t_near = rays.t_near.segment(begin, count);
    chunk.t_far = rays.t_far.segment(begin, count);

    RayRenderContext<S> ctx;
    render_ray_bundle(field, chunk, n, cfg.stratified, cfg.seed,
                      static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(begin),
                      background, ctx);

    Matrix3X<S> d_colors(3, count);
    for (int k = 0; k < count; ++k) {
      const Eigen::Vector3d e =
          ctx.colors.col(k).template cast<double>() - gt.col(begin + k);
      loss += e.squaredNorm();
      d_colors.col(k) = (color_scale * e).cast<S>();
    }

    Matrix3X<S> d_o, d_d;
    render_ray_bundle_backward(field, ctx, d_colors, background, field_grad,
                               pose_grad ? &d_o : nullptr, pose_grad ? &d_d : nullptr);
    if (pose_grad) {
      for (int k = 0; k < count; ++k) {
        const int cam = ray_camera[begin + k];
        pose_grad->segment<3>(6 * cam + 3) += d_o.col(k).template cast<double>();
        g_omega.segment<3>(3 * cam) +=
            cur_dir.col(begin + k).cross(d_d.col(k).template cast<double>());
      }
    }
  }

  if (pose_grad) {
    for (int cam = 0; cam < n_cameras; ++cam) {
      pose_grad->segment<3>(6 * cam) =
          so3_left_jacobian(corr.r(cam)).transpose() * g_omega.segment<3>(3 * cam);
    }
  }
  return loss / (3.0 * batch);
}

template <typename S>
StepMetrics train_step(TrainState<S>& state, RadianceField<S>& field, const TrainDataset& data,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (state.m_field.size() != field.param_count() ||
      state.v_field.size() != field.param_count()) {
    throw InvalidInputError("train step: state moments do not match the field");
  }
  if (state.correction.camera_count() != data.camera_count()) {
    throw InvalidInputError("train step: state camera count does not match the dataset");
  }

  const bool want_pose = cfg.refine_poses && state.step >= cfg.pose_warmup_steps;
  VectorX<S> grad;
  Eigen::VectorXd pose_grad;
  const double loss = batch_gradients(field, data, cfg, state.correction, state.step, grad,
                                      want_pose ? &pose_grad : nullptr);
  if (!std::isfinite(loss)) {
    throw TrainingDivergedError("train step " + std::to_string(state.step) +
                                ": loss is not finite");
  }

  const double t = static_cast<double>(state.step + 1);
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  state.m_field = b1 * state.m_field + (S(1) - b1) * grad;
  state.v_field.array() =
      b2 * state.v_field.array() + (S(1) - b2) * grad.array().square();
  const S mc = static_cast<S>(1.0 / (1.0 - std::pow(cfg.beta1, t)));
  const S vc = static_cast<S>(1.0 / (1.0 - std::pow(cfg.beta2, t)));
  const S lr = static_cast<S>(field_lr_at(cfg, state.step));
  const S eps = static_cast<S>(cfg.adam_eps);
  field.params().array() -=
      lr * (mc * state.m_field.array()) / ((vc * state.v_field.array()).sqrt() + eps);

  if (want_pose) {
    const double tp = static_cast<double>(++state.pose_updates);
    state.m_pose = cfg.beta1 * state.m_pose + (1.0 - cfg.beta1) * pose_grad;
    state.v_pose.array() =
        cfg.beta2 * state.v_pose.array() + (1.0 - cfg.beta2) * pose_grad.array().square();
    const double mcp = 1.0 / (1.0 - std::pow(cfg.beta1, tp));
    const double vcp = 1.0 / (1.0 - std::pow(cfg.beta2, tp));
    state.correction.params.array() -=
        cfg.lr_pose * (mcp * state.m_pose.array()) /
        ((vcp * state.v_pose.array()).sqrt() + cfg.adam_eps);
  }

  StepMetrics out;
  out.step = state.step;
  out.loss = loss;
  out.psnr_db = psnr(loss);
  ++state.step;
  return out;
}

template <typename S>
TrainingSummary run_training_loop(RadianceField<S>& field, TrainState<S>& state,
                                  const TrainDataset& data, const TrainConfig& cfg,
                                  const std::string& out_dir) {
  cfg.validate();
  data.validate();
  fs::create_directories(out_dir);

  TrainingSummary sum;
  sum.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  sum.checkpoint_path = (fs::path(out_dir) / "checkpoint.tnrf").string();
  MetricsWriter metrics(sum.metrics_path);
  try {
    for (std::int64_t s = state.step; s < cfg.steps; ++s) {
      const StepMetrics m = train_step(state, field, data, cfg);
      metrics.append(m.step, m.loss, m.psnr_db);
      sum.final_loss = m.loss;
      sum.final_batch_psnr = m.psnr_db;
    }
  } catch (const TrainingDivergedError&) {
    metrics.flush();
    save_checkpoint(field, sum.checkpoint_path);
    throw;
  }
  metrics.flush();
  save_checkpoint(field, sum.checkpoint_path);

  std::vector<CameraPose> poses = data.poses;
  if (cfg.refine_poses) {
    poses = apply_pose_correction(data.poses, state.correction);
    std::vector<std::string> names = data.image_paths;
    if (names.empty()) {
      for (std::size_t i = 0; i < poses.size(); ++i) {
        names.push_back("frame_" + std::to_string(i) + ".png");
      }
    }
    sum.refined_manifest_path = (fs::path(out_dir) / "refined_poses.json").string();
    write_pose_manifest(poses, data.intrinsics, names, sum.refined_manifest_path);
  }

  if (cfg.eval_at_end) {
    RenderOptions opts;
    opts.n_samples = cfg.samples_per_ray;
    opts.stratified = false;
    opts.background = cfg.background;
    opts.bounds = cfg.field.bounds;
    opts.rays_per_chunk = cfg.rays_per_chunk;
    std::ofstream csv(fs::path(out_dir) / "eval_psnr.csv");
    if (!csv) throw IoError("cannot write eval CSV in " + out_dir);
    csv << "image,psnr_db\n";
    double total = 0.0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
      const Image rendered = render_image(field, poses[i], data.intrinsics, opts);
      const double db = psnr(image_mse(rendered, data.images[i]));
      sum.per_image_psnr.push_back(db);
      total += db;
      char row[64];
      std::snprintf(row, sizeof(row), "%zu,%.10g\n", i, db);
      csv << row;
    }
    sum.eval_psnr_mean = total / static_cast<double>(data.images.size());
  }
  return sum;
}

TrainingSummary run_training(const TrainDataset& data, const TrainConfig& cfg,
                             const std::string& out_dir) {
  cfg.validate();
  RadianceField<float> field(cfg.field, cfg.seed);
  TrainState<float> state = make_train_state(field, static_cast<int>(data.poses.size()));
  return run_training_loop(field, state, data, cfg, out_dir);
}

double mean_rotation_error_deg(const std::vector<CameraPose>& a,
                               const std::vector<CameraPose>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidInputError("rotation error: pose lists must match and be non-empty");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += rotation_angle_between(a[i].rotation(), b[i].rotation());
  }
  return total / static_cast<double>(a.size()) * (180.0 / EIGEN_PI);
}

template TrainState<float> make_train_state<float>(const RadianceField<float>&, int);
template TrainState<double> make_train_state<double>(const RadianceField<double>&, int);
template double batch_gradients<float>(const RadianceField<float>&, const TrainDataset&,
                                       const TrainConfig&, const PoseCorrection&, std::int64_t,
                                       VectorX<float>&, Eigen::VectorXd*);
template double batch_gradients<double>(const RadianceField<double>&, const TrainDataset&,
                                        const TrainConfig&, const PoseCorrection&, std::int64_t,
                                        VectorX<double>&, Eigen::VectorXd*);
template StepMetrics train_step<float>(TrainState<float>&, RadianceField<float>&,
                                       const TrainDataset&, const TrainConfig&);
template StepMetrics train_step<double>(TrainState<double>&, RadianceField<double>&,
                                        const TrainDataset&, const TrainConfig&);
template TrainingSummary run_training_loop<float>(RadianceField<float>&, TrainState<float>&,
                                                  const TrainDataset&, const TrainConfig&,
                                                  const std::string&);
template TrainingSummary run_training_loop<double>(RadianceField<double>&, TrainState<double>&,
                                                   const TrainDataset&, const TrainConfig&,
                                                   const std::string&);

}  // namespace trajnerf
