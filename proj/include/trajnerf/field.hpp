#pragma once

#include <atomic>
#include <cstdint>
#include <string>

#include "trajnerf/types.hpp"

namespace trajnerf {

// Multiresolution hash-grid settings. Level l has resolution
// floor(base_resolution * per_level_scale^l) cells per axis and its own
// table of table_size feature rows.
struct HashGridConfig {
  int levels = 8;
  std::uint32_t table_size = 1u << 14;
  int features_per_level = 2;
  int base_resolution = 16;
  double per_level_scale = 1.5;

  int feature_dim() const { return levels * features_per_level; }
  int resolution(int level) const;
  Eigen::Index table_param_count() const {
    return static_cast<Eigen::Index>(levels) * table_size * features_per_level;
  }
  void validate() const;  // table_size power of 2, levels/features >= 1, scale > 1
};

// Everything that fixes the parameter shapes plus the scene box whose
// interior maps to the encoder's unit cube.
struct FieldConfig {
  HashGridConfig grid;
  int geo_features = 15;   // density MLP emits 1 raw density + these
  int hidden_width = 64;
  int dir_frequencies = 4;
  Aabb bounds;

  int dir_dim() const { return 6 * dir_frequencies; }
  void validate() const;
};

// Spatial hash of an integer grid corner, masked into the table.
inline std::uint32_t hash_index(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz,
                                std::uint32_t table_size) {
  return (ix * 1u ^ iy * 2654435761u ^ iz * 805459861u) & (table_size - 1u);
}

// Trilinear hash-grid encoding of unit-cube points (columns of `us`, already
// clamped to [0,1]). `table` is level-major: entry (l,h,f) at (l*T+h)*F+f.
// Output is feature_dim x N, levels concatenated.
template <typename S>
void hash_encode_batch(const HashGridConfig& cfg, const S* table, const Matrix3X<S>& us,
                       MatrixX<S>& out);

// Reverse of hash_encode_batch: scatters d_out into table_grad (+=) and, when
// d_us is non-null, writes the gradient w.r.t. the unit-cube inputs.
template <typename S>
void hash_encode_backward(const HashGridConfig& cfg, const S* table, const Matrix3X<S>& us,
                          const MatrixX<S>& d_out, S* table_grad, Matrix3X<S>* d_us);

// Single-point convenience wrapper; `tables` is the flat level-major buffer.
template <typename S>
VectorX<S> hash_encode(const Vector3<S>& x_unit, const HashGridConfig& cfg,
                       const VectorX<S>& tables);

template <typename S>
struct FieldSample {
  S density = S(0);        // >= 0, softplus of the raw MLP output
  Vector3<S> color = Vector3<S>::Zero();  // in (0,1)^3, sigmoid outputs
};

// Saved activations of one forward batch, consumed by backward_batch.
template <typename S>
struct FieldCache {
  Matrix3X<S> xs;       // scene-space inputs (for the clamp mask)
  Matrix3X<S> us;       // clamped unit-cube coordinates
  Matrix3X<S> d_unit;   // normalized directions
  VectorX<S> inv_norm;  // 1/|d| per column
  MatrixX<S> f0;        // encoder output
  MatrixX<S> a1;        // density hidden activation (softplus)
  VectorX<S> raw;       // raw density (pre-softplus)
  MatrixX<S> c0;        // color input [geo features; direction encoding]
  MatrixX<S> y1, y2;    // color hidden activations (softplus)
  Matrix3X<S> colors;   // sigmoid outputs
  VectorX<S> densities; // softplus outputs
  Eigen::Index count() const { return xs.cols(); }
};

// Copyable relaxed counter so diagnostic counts survive field copies while
// concurrent read-only forward passes stay race-free.
struct DiagCounter {
  std::atomic<std::uint64_t> value{0};
  DiagCounter() = default;
  DiagCounter(const DiagCounter& o) : value(o.value.load(std::memory_order_relaxed)) {}
  DiagCounter& operator=(const DiagCounter& o) {
    value.store(o.value.load(std::memory_order_relaxed), std::memory_order_relaxed);
    return *this;
  }
  void add(std::uint64_t n) const {
    const_cast<std::atomic<std::uint64_t>&>(value).fetch_add(n, std::memory_order_relaxed);
  }
  std::uint64_t get() const { return value.load(std::memory_order_relaxed); }
};

// Hash-grid radiance field. Density depends on position only; color on
// position and view direction. All parameters live in one flat vector so the
// optimizer and the checkpoint format see a single array.
template <typename S>
class RadianceField {
 public:
  using Scalar = S;

  explicit RadianceField(const FieldConfig& cfg, std::uint64_t seed = 42);

  const FieldConfig& config() const { return cfg_; }
  VectorX<S>& params() { return params_; }
  const VectorX<S>& params() const { return params_; }
  Eigen::Index param_count() const { return params_.size(); }

  // Scene-space position(s) and direction(s), one column per sample.
  // Positions outside the scene box are clamped (counted, not an error);
  // non-unit directions are normalized (counted).
  void forward_batch(const Matrix3X<S>& xs, const Matrix3X<S>& ds, FieldCache<S>& cache) const;

  // Accumulates (+=) parameter gradients; optionally emits input gradients.
  void backward_batch(const FieldCache<S>& cache, const VectorX<S>& d_density,
                      const Matrix3X<S>& d_color, VectorX<S>& param_grad,
                      Matrix3X<S>* d_xs = nullptr, Matrix3X<S>* d_ds = nullptr) const;

  // Density-only path for extraction (no cache, no color MLP).
  void density_batch(const Matrix3X<S>& xs, VectorX<S>& out) const;

  FieldSample<S> forward(const Vector3<S>& x, const Vector3<S>& d) const;
  S density(const Vector3<S>& x) const;

  // Shifts the raw-density bias, e.g. far negative to force an empty field.
  void set_raw_density_bias(S value);

  std::uint64_t clamp_count() const { return clamped_.get(); }
  std::uint64_t nonunit_dir_count() const { return nonunit_.get(); }

  // Flat-vector layout (offsets into params()); grid tables come first.
  Eigen::Index grid_offset() const { return 0; }
  Eigen::Index grid_size() const { return cfg_.grid.table_param_count(); }

 private:
  struct Layout {
    Eigen::Index dw1, db1, dw2, db2;
    Eigen::Index cw1, cb1, cw2, cb2, cw3, cb3;
    Eigen::Index total;
    int enc, geo, hidden, dir, color_in, dens_out;
  };
  static Layout make_layout(const FieldConfig& cfg);

  // Unit-cube mapping with clamping; returns how many points fell outside.
  std::uint64_t to_unit_cube(const Matrix3X<S>& xs, Matrix3X<S>& us) const;

  FieldConfig cfg_;
  Layout lay_;
  VectorX<S> params_;
  DiagCounter clamped_;
  DiagCounter nonunit_;
};

// Checkpoint: "TNRF" magic, version, scalar tag, full FieldConfig, then the
// parameter array with a 64-bit little-endian length. Same-scalar save/load
// round trips bit-exactly; cross-scalar loads convert.
template <typename S>
void save_checkpoint(const RadianceField<S>& field, const std::string& path);
template <typename S>
RadianceField<S> load_checkpoint(const std::string& path);

}  // namespace trajnerf
