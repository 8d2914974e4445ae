#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajnerf/field.hpp"
#include "trajnerf/geometry.hpp"
#include "trajnerf/render.hpp"
#include "trajnerf/types.hpp"

namespace trajnerf {

// In-memory training set: one image per pose, all sharing one camera.
// Poses must already be normalized (OpenGL-style).
struct TrainDataset {
  std::vector<Image> images;
  std::vector<CameraPose> poses;
  std::vector<std::string> image_paths;  // carried through to output manifests
  CameraIntrinsics intrinsics;

  int camera_count() const { return static_cast<int>(poses.size()); }
  void validate() const;
};

// Reads a pose manifest and the images it references (paths resolved
// relative to the manifest file).
TrainDataset load_dataset(const std::string& manifest_path);

struct TrainConfig {
  std::int64_t steps = 20000;
  int rays_per_batch = 256;
  int samples_per_ray = 48;
  double lr_field = 1e-2;
  double lr_field_final = 1e-3;  // reached by exponential decay at the last step
  double lr_pose = 1e-3;
  std::int64_t pose_warmup_steps = 1000;  // pose gradients are zeroed before this
  bool refine_poses = false;
  std::uint64_t seed = 1;
  bool stratified = true;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-15;
  FieldConfig field;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  int rays_per_chunk = 1024;
  bool eval_at_end = true;  // per-image PSNR pass after the last step

  void validate() const;  // steps >= 1, learning rates > 0, counts >= 1
};

// Learning-rate schedule: lr_field at step 0 decaying exponentially to
// lr_field_final at step steps-1.
double field_lr_at(const TrainConfig& cfg, std::int64_t step);

// Learned per-camera extrinsic corrections, 6 parameters each: axis-angle
// r (radians) then translation offset v, flattened camera-major.
struct PoseCorrection {
  Eigen::VectorXd params;

  int camera_count() const { return static_cast<int>(params.size() / 6); }
  Eigen::Vector3d r(int cam) const { return params.segment<3>(6 * cam); }
  Eigen::Vector3d v(int cam) const { return params.segment<3>(6 * cam + 3); }
  static PoseCorrection zeros(int cameras);
};

// Rodrigues' formula, series-stabilized near zero. Orthonormal to machine
// precision for any input.
Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& r);

// Left Jacobian of the rotation exponential: exp([r + d]x) ~=
// exp([J_l(r) d]x) exp([r]x). Its transpose maps left-trivialized gradients
// back to axis-angle parameter gradients.
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& r);

// Corrected pose: rotation exp([r]x) R_base, translation t_base + v.
CameraPose apply_pose_correction(const CameraPose& base, const Eigen::Vector3d& r,
                                 const Eigen::Vector3d& v);
std::vector<CameraPose> apply_pose_correction(const std::vector<CameraPose>& base,
                                              const PoseCorrection& corr);

template <typename S>
struct TrainState {
  std::int64_t step = 0;
  VectorX<S> m_field, v_field;  // Adam moments, same shape as field params
  Eigen::VectorXd m_pose, v_pose;
  std::int64_t pose_updates = 0;  // Adam time index for the pose block
  PoseCorrection correction;
};

template <typename S>
TrainState<S> make_train_state(const RadianceField<S>& field, int camera_count);

struct StepMetrics {
  std::int64_t step = 0;
  double loss = 0.0;
  double psnr_db = 0.0;
};

// Loss and gradients of one mini-batch at a given step, without updating
// anything. Rays are picked by a counter-based stream over (seed, step, k);
// per-ray t bounds come from the base poses so the sampling geometry does
// not move with the correction. field_grad is resized and overwritten;
// pose_grad (6 per camera) likewise when non-null.
template <typename S>
double batch_gradients(const RadianceField<S>& field, const TrainDataset& data,
                       const TrainConfig& cfg, const PoseCorrection& corr, std::int64_t step,
                       VectorX<S>& field_grad, Eigen::VectorXd* pose_grad);

// One optimization step: batch_gradients followed by Adam updates on the
// field and (after warmup, when enabled) the pose correction. Throws
// TrainingDivergedError on a non-finite loss before touching parameters.
template <typename S>
StepMetrics train_step(TrainState<S>& state, RadianceField<S>& field, const TrainDataset& data,
                       const TrainConfig& cfg);

struct TrainingSummary {
  double final_loss = 0.0;
  double final_batch_psnr = 0.0;
  std::vector<double> per_image_psnr;  // filled when eval_at_end
  double eval_psnr_mean = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
  std::string refined_manifest_path;  // empty unless refine_poses
};

// Full loop over an existing field/state: writes out_dir/metrics.csv row per
// step, out_dir/checkpoint.tnrf at the end (also on divergence, before the
// error propagates), out_dir/refined_poses.json when refining, and
// out_dir/eval_psnr.csv from the eval pass.
template <typename S>
TrainingSummary run_training_loop(RadianceField<S>& field, TrainState<S>& state,
                                  const TrainDataset& data, const TrainConfig& cfg,
                                  const std::string& out_dir);

// Convenience entry point: fresh single-precision field seeded from cfg.
TrainingSummary run_training(const TrainDataset& data, const TrainConfig& cfg,
                             const std::string& out_dir);

// Mean angle in degrees between corresponding rotation blocks; the pose
// refinement quality measure.
double mean_rotation_error_deg(const std::vector<CameraPose>& a,
                               const std::vector<CameraPose>& b);

}  // namespace trajnerf
