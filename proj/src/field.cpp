#include "trajnerf/field.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "trajnerf/errors.hpp"

namespace trajnerf {
namespace {

template <typename S>
inline S softplus(S x) {
  return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename S>
inline S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

// Sigmoid kept inside the open interval (0,1) even where the plain form
// rounds to the boundary, so color-range guarantees hold for any input.
template <typename S>
inline S sigmoid_open(S x) {
  const S s = sigmoid(x);
  const S lo = std::numeric_limits<S>::min();
  const S hi = S(1) - std::numeric_limits<S>::epsilon() / S(2);
  return std::min(std::max(s, lo), hi);
}

constexpr double kUnitDirTol = 1e-6;

}  // namespace

int HashGridConfig::resolution(int level) const {
  return static_cast<int>(std::floor(base_resolution * std::pow(per_level_scale, level)));
}

void HashGridConfig::validate() const {
  if (levels < 1) throw InvalidInputError("hash grid: levels must be >= 1");
  if (features_per_level < 1) throw InvalidInputError("hash grid: features_per_level must be >= 1");
  if (base_resolution < 1) throw InvalidInputError("hash grid: base_resolution must be >= 1");
  if (per_level_scale <= 1.0) throw InvalidInputError("hash grid: per_level_scale must be > 1");
  if (table_size == 0 || (table_size & (table_size - 1)) != 0) {
    throw InvalidInputError("hash grid: table_size must be a power of 2");
  }
}

void FieldConfig::validate() const {
  grid.validate();
  if (geo_features < 1) throw InvalidInputError("field: geo_features must be >= 1");
  if (hidden_width < 1) throw InvalidInputError("field: hidden_width must be >= 1");
  if (dir_frequencies < 1) throw InvalidInputError("field: dir_frequencies must be >= 1");
  if (bounds.degenerate()) throw InvalidInputError("field: degenerate scene bounds");
}

template <typename S>
void hash_encode_batch(const HashGridConfig& cfg, const S* table, const Matrix3X<S>& us,
                       MatrixX<S>& out) {
  const Eigen::Index n = us.cols();
  const int enc = cfg.feature_dim();
  const int f_per = cfg.features_per_level;
  out.resize(enc, n);
  for (int l = 0; l < cfg.levels; ++l) {
    const int res = cfg.resolution(l);
    const S* tl = table + static_cast<std::size_t>(l) * cfg.table_size * f_per;
    for (Eigen::Index j = 0; j < n; ++j) {
      const S* u = us.data() + 3 * j;
      S frac[3];
      std::uint32_t base[3];
      for (int a = 0; a < 3; ++a) {
        S p = u[a] * static_cast<S>(res);
        int b = static_cast<int>(std::floor(p));
        if (b > res - 1) b = res - 1;  // u = 1 lands on the last cell
        if (b < 0) b = 0;
        base[a] = static_cast<std::uint32_t>(b);
        frac[a] = p - static_cast<S>(b);
      }
      S* o = out.data() + j * enc + static_cast<Eigen::Index>(l) * f_per;
      for (int f = 0; f < f_per; ++f) o[f] = S(0);
      for (int c = 0; c < 8; ++c) {
        const std::uint32_t dx = c & 1u, dy = (c >> 1) & 1u, dz = (c >> 2) & 1u;
        const S w = (dx ? frac[0] : S(1) - frac[0]) * (dy ? frac[1] : S(1) - frac[1]) *
                    (dz ? frac[2] : S(1) - frac[2]);
        const std::uint32_t h =
            hash_index(base[0] + dx, base[1] + dy, base[2] + dz, cfg.table_size);
        const S* entry = tl + static_cast<std::size_t>(h) * f_per;
        for (int f = 0; f < f_per; ++f) o[f] += w * entry[f];
      }
    }
  }
}

template <typename S>
void hash_encode_backward(const HashGridConfig& cfg, const S* table, const Matrix3X<S>& us,
                          const MatrixX<S>& d_out, S* table_grad, Matrix3X<S>* d_us) {
  const Eigen::Index n = us.cols();
  const int enc = cfg.feature_dim();
  const int f_per = cfg.features_per_level;
  if (d_out.rows() != enc || d_out.cols() != n) {
    throw InvalidInputError("hash_encode_backward: upstream gradient shape mismatch");
  }
  if (d_us) d_us->setZero(3, n);
  for (int l = 0; l < cfg.levels; ++l) {
    const int res = cfg.resolution(l);
    const S* tl = table + static_cast<std::size_t>(l) * cfg.table_size * f_per;
    S* gl = table_grad ? table_grad + static_cast<std::size_t>(l) * cfg.table_size * f_per
                       : nullptr;
    for (Eigen::Index j = 0; j < n; ++j) {
      const S* u = us.data() + 3 * j;
      S frac[3];
      std::uint32_t base[3];
      for (int a = 0; a < 3; ++a) {
        S p = u[a] * static_cast<S>(res);
        int b = static_cast<int>(std::floor(p));
        if (b > res - 1) b = res - 1;
        if (b < 0) b = 0;
        base[a] = static_cast<std::uint32_t>(b);
        frac[a] = p - static_cast<S>(b);
      }
      const S* g = d_out.data() + j * enc + static_cast<Eigen::Index>(l) * f_per;
      S du[3] = {S(0), S(0), S(0)};
      for (int c = 0; c < 8; ++c) {
        const std::uint32_t dx = c & 1u, dy = (c >> 1) & 1u, dz = (c >> 2) & 1u;
        const S wx = dx ? frac[0] : S(1) - frac[0];
        const S wy = dy ? frac[1] : S(1) - frac[1];
        const S wz = dz ? frac[2] : S(1) - frac[2];
        const S w = wx * wy * wz;
        const std::uint32_t h =
            hash_index(base[0] + dx, base[1] + dy, base[2] + dz, cfg.table_size);
        const S* entry = tl + static_cast<std::size_t>(h) * f_per;
        S dot = S(0);
        for (int f = 0; f < f_per; ++f) dot += g[f] * entry[f];
        if (gl) {
          S* ge = gl + static_cast<std::size_t>(h) * f_per;
          for (int f = 0; f < f_per; ++f) ge[f] += w * g[f];
        }
        if (d_us) {
          const S sx = dx ? S(1) : S(-1);
          const S sy = dy ? S(1) : S(-1);
          const S sz = dz ? S(1) : S(-1);
          du[0] += dot * sx * wy * wz;
          du[1] += dot * wx * sy * wz;
          du[2] += dot * wx * wy * sz;
        }
      }
      if (d_us) {
        S* o = d_us->data() + 3 * j;
        for (int a = 0; a < 3; ++a) o[a] += du[a] * static_cast<S>(res);
      }
    }
  }
}

template <typename S>
VectorX<S> hash_encode(const Vector3<S>& x_unit, const HashGridConfig& cfg,
                       const VectorX<S>& tables) {
  if (tables.size() != cfg.table_param_count()) {
    throw InvalidInputError("hash_encode: table buffer size mismatch");
  }
  Matrix3X<S> us(3, 1);
  us.col(0) = x_unit.cwiseMax(S(0)).cwiseMin(S(1));
  MatrixX<S> out;
  hash_encode_batch(cfg, tables.data(), us, out);
  return out.col(0);
}

template <typename S>
typename RadianceField<S>::Layout RadianceField<S>::make_layout(const FieldConfig& cfg) {
  Layout l;
  l.enc = cfg.grid.feature_dim();
  l.geo = cfg.geo_features;
  l.hidden = cfg.hidden_width;
  l.dir = cfg.dir_dim();
  l.color_in = l.geo + l.dir;
  l.dens_out = 1 + l.geo;
  Eigen::Index off = cfg.grid.table_param_count();
  auto take = [&off](Eigen::Index count) {
    const Eigen::Index at = off;
    off += count;
    return at;
  };
  l.dw1 = take(static_cast<Eigen::Index>(l.hidden) * l.enc);
  l.db1 = take(l.hidden);
  l.dw2 = take(static_cast<Eigen::Index>(l.dens_out) * l.hidden);
  l.db2 = take(l.dens_out);
  l.cw1 = take(static_cast<Eigen::Index>(l.hidden) * l.color_in);
  l.cb1 = take(l.hidden);
  l.cw2 = take(static_cast<Eigen::Index>(l.hidden) * l.hidden);
  l.cb2 = take(l.hidden);
  l.cw3 = take(static_cast<Eigen::Index>(3) * l.hidden);
  l.cb3 = take(3);
  l.total = off;
  return l;
}

template <typename S>
RadianceField<S>::RadianceField(const FieldConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  lay_ = make_layout(cfg_);
  params_.setZero(lay_.total);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> grid_init(-1e-4, 1e-4);
  for (Eigen::Index i = 0; i < grid_size(); ++i) {
    params_[i] = static_cast<S>(grid_init(rng));
  }
  // Uniform(-1/sqrt(fan_in), +) weight init, zero biases: the raw density of
  // a fresh field stays ~0, so its softplus is ~ln 2 everywhere.
  auto init_weights = [&](Eigen::Index offset, int rows, int cols) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(static_cast<double>(cols)),
                                             1.0 / std::sqrt(static_cast<double>(cols)));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows) * cols; ++i) {
      params_[offset + i] = static_cast<S>(u(rng));
    }
  };
  init_weights(lay_.dw1, lay_.hidden, lay_.enc);
  init_weights(lay_.dw2, lay_.dens_out, lay_.hidden);
  init_weights(lay_.cw1, lay_.hidden, lay_.color_in);
  init_weights(lay_.cw2, lay_.hidden, lay_.hidden);
  init_weights(lay_.cw3, 3, lay_.hidden);
}

template <typename S>
std::uint64_t RadianceField<S>::to_unit_cube(const Matrix3X<S>& xs, Matrix3X<S>& us) const {
  const Eigen::Index n = xs.cols();
  us.resize(3, n);
  const Vector3<S> lo = cfg_.bounds.min.cast<S>();
  const Vector3<S> inv_extent = cfg_.bounds.extent().cwiseInverse().cast<S>();
  std::uint64_t outside = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector3<S> u = (xs.col(j) - lo).cwiseProduct(inv_extent);
    const Vector3<S> c = u.cwiseMax(S(0)).cwiseMin(S(1));
    if ((c - u).cwiseAbs().maxCoeff() > S(0)) ++outside;
    us.col(j) = c;
  }
  return outside;
}

template <typename S>
void RadianceField<S>::forward_batch(const Matrix3X<S>& xs, const Matrix3X<S>& ds,
                                     FieldCache<S>& cache) const {
  const Eigen::Index n = xs.cols();
  if (ds.cols() != n) throw InvalidInputError("field: position/direction count mismatch");
  cache.xs = xs;
  clamped_.add(to_unit_cube(xs, cache.us));

  cache.inv_norm.resize(n);
  cache.d_unit.resize(3, n);
  std::uint64_t nonunit = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const S norm = ds.col(j).norm();
    if (norm <= S(0)) throw InvalidInputError("field: zero-length view direction");
    if (std::abs(norm - S(1)) > S(kUnitDirTol)) ++nonunit;
    cache.inv_norm[j] = S(1) / norm;
    cache.d_unit.col(j) = ds.col(j) * cache.inv_norm[j];
  }
  nonunit_.add(nonunit);

  hash_encode_batch(cfg_.grid, params_.data() + grid_offset(), cache.us, cache.f0);

  using Mat = MatrixX<S>;
  using CMap = Eigen::Map<const Mat>;
  using CVec = Eigen::Map<const VectorX<S>>;
  const S* p = params_.data();
  CMap w1(p + lay_.dw1, lay_.hidden, lay_.enc);
  CVec b1(p + lay_.db1, lay_.hidden);
  CMap w2(p + lay_.dw2, lay_.dens_out, lay_.hidden);
  CVec b2(p + lay_.db2, lay_.dens_out);
  CMap cw1(p + lay_.cw1, lay_.hidden, lay_.color_in);
  CVec cb1(p + lay_.cb1, lay_.hidden);
  CMap cw2(p + lay_.cw2, lay_.hidden, lay_.hidden);
  CVec cb2(p + lay_.cb2, lay_.hidden);
  CMap cw3(p + lay_.cw3, 3, lay_.hidden);
  CVec cb3(p + lay_.cb3, 3);

  cache.a1.noalias() = w1 * cache.f0;
  cache.a1.colwise() += b1;
  cache.a1 = cache.a1.unaryExpr([](S v) { return softplus(v); });

  Mat z2;
  z2.noalias() = w2 * cache.a1;
  z2.colwise() += b2;
  cache.raw = z2.row(0).transpose();
  cache.densities.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) cache.densities[j] = softplus(cache.raw[j]);

  cache.c0.resize(lay_.color_in, n);
  cache.c0.topRows(lay_.geo) = z2.bottomRows(lay_.geo);
  for (int k = 0; k < cfg_.dir_frequencies; ++k) {
    const S freq = static_cast<S>(1u << k);
    const int r = lay_.geo + 6 * k;
    cache.c0.middleRows(r, 3) = (cache.d_unit * freq).array().sin().matrix();
    cache.c0.middleRows(r + 3, 3) = (cache.d_unit * freq).array().cos().matrix();
  }

  cache.y1.noalias() = cw1 * cache.c0;
  cache.y1.colwise() += cb1;
  cache.y1 = cache.y1.unaryExpr([](S v) { return softplus(v); });
  cache.y2.noalias() = cw2 * cache.y1;
  cache.y2.colwise() += cb2;
  cache.y2 = cache.y2.unaryExpr([](S v) { return softplus(v); });

  Mat z3;
  z3.noalias() = cw3 * cache.y2;
  z3.colwise() += cb3;
  cache.colors.resize(3, n);
  for (Eigen::Index j = 0; j < 3 * n; ++j) cache.colors.data()[j] = sigmoid_open(z3.data()[j]);
}

template <typename S>
void RadianceField<S>::backward_batch(const FieldCache<S>& cache, const VectorX<S>& d_density,
                                      const Matrix3X<S>& d_color, VectorX<S>& param_grad,
                                      Matrix3X<S>* d_xs, Matrix3X<S>* d_ds) const {
  const Eigen::Index n = cache.count();
  if (d_density.size() != n || d_color.cols() != n) {
    throw InvalidInputError("field backward: upstream gradient shape mismatch");
  }
  if (param_grad.size() != params_.size()) {
    throw InvalidInputError("field backward: gradient buffer size mismatch");
  }

  using Mat = MatrixX<S>;
  using CMap = Eigen::Map<const Mat>;
  using GMap = Eigen::Map<Mat>;
  using GVec = Eigen::Map<VectorX<S>>;
  const S* p = params_.data();
  S* g = param_grad.data();
  CMap w1(p + lay_.dw1, lay_.hidden, lay_.enc);
  CMap w2(p + lay_.dw2, lay_.dens_out, lay_.hidden);
  CMap cw1(p + lay_.cw1, lay_.hidden, lay_.color_in);
  CMap cw2(p + lay_.cw2, lay_.hidden, lay_.hidden);
  CMap cw3(p + lay_.cw3, 3, lay_.hidden);
  GMap gw1(g + lay_.dw1, lay_.hidden, lay_.enc);
  GVec gb1(g + lay_.db1, lay_.hidden);
  GMap gw2(g + lay_.dw2, lay_.dens_out, lay_.hidden);
  GVec gb2(g + lay_.db2, lay_.dens_out);
  GMap gcw1(g + lay_.cw1, lay_.hidden, lay_.color_in);
  GVec gcb1(g + lay_.cb1, lay_.hidden);
  GMap gcw2(g + lay_.cw2, lay_.hidden, lay_.hidden);
  GVec gcb2(g + lay_.cb2, lay_.hidden);
  GMap gcw3(g + lay_.cw3, 3, lay_.hidden);
  GVec gcb3(g + lay_.cb3, 3);

  // Color head: sigmoid' = c(1-c); softplus' recovered from the activation
  // a = softplus(z) as sigmoid(z) = 1 - exp(-a).
  Mat dz3 = (d_color.array() * cache.colors.array() * (S(1) - cache.colors.array())).matrix();
  gcw3.noalias() += dz3 * cache.y2.transpose();
  gcb3 += dz3.rowwise().sum();
  Mat dy = cw3.transpose() * dz3;
  dy.array() *= S(1) - (-cache.y2.array()).exp();
  gcw2.noalias() += dy * cache.y1.transpose();
  gcb2 += dy.rowwise().sum();
  Mat dy1 = cw2.transpose() * dy;
  dy1.array() *= S(1) - (-cache.y1.array()).exp();
  gcw1.noalias() += dy1 * cache.c0.transpose();
  gcb1 += dy1.rowwise().sum();
  Mat dc0 = cw1.transpose() * dy1;

  // Density trunk: softplus' = sigmoid(raw).
  Mat dz2(lay_.dens_out, n);
  for (Eigen::Index j = 0; j < n; ++j) dz2(0, j) = d_density[j] * sigmoid(cache.raw[j]);
  dz2.bottomRows(lay_.geo) = dc0.topRows(lay_.geo);
  gw2.noalias() += dz2 * cache.a1.transpose();
  gb2 += dz2.rowwise().sum();
  Mat da1 = w2.transpose() * dz2;
  da1.array() *= S(1) - (-cache.a1.array()).exp();
  gw1.noalias() += da1 * cache.f0.transpose();
  gb1 += da1.rowwise().sum();
  Mat df0 = w1.transpose() * da1;

  Matrix3X<S> d_us;
  hash_encode_backward(cfg_.grid, p + grid_offset(), cache.us, df0,
                       g + grid_offset(), d_xs ? &d_us : nullptr);

  if (d_xs) {
    const Vector3<S> inv_extent = cfg_.bounds.extent().cwiseInverse().cast<S>();
    d_xs->resize(3, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (int a = 0; a < 3; ++a) {
        const S x = cache.xs(a, j);
        const bool clamped = x < static_cast<S>(cfg_.bounds.min[a]) ||
                             x > static_cast<S>(cfg_.bounds.max[a]);
        (*d_xs)(a, j) = clamped ? S(0) : d_us(a, j) * inv_extent[a];
      }
    }
  }

  if (d_ds) {
    d_ds->setZero(3, n);
    Matrix3X<S> d_hat = Matrix3X<S>::Zero(3, n);
    for (int k = 0; k < cfg_.dir_frequencies; ++k) {
      const S freq = static_cast<S>(1u << k);
      const int r = lay_.geo + 6 * k;
      // d sin(f d)/dd = f cos(f d); d cos(f d)/dd = -f sin(f d).
      d_hat.array() += freq * dc0.middleRows(r, 3).array() * cache.c0.middleRows(r + 3, 3).array();
      d_hat.array() -= freq * dc0.middleRows(r + 3, 3).array() * cache.c0.middleRows(r, 3).array();
    }
    // Through the normalization: (I - u u^T) / |d|.
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vector3<S> u = cache.d_unit.col(j);
      d_ds->col(j) = cache.inv_norm[j] * (d_hat.col(j) - u * u.dot(d_hat.col(j)));
    }
  }
}

template <typename S>
void RadianceField<S>::density_batch(const Matrix3X<S>& xs, VectorX<S>& out) const {
  const Eigen::Index n = xs.cols();
  Matrix3X<S> us;
  clamped_.add(to_unit_cube(xs, us));
  MatrixX<S> f0;
  hash_encode_batch(cfg_.grid, params_.data() + grid_offset(), us, f0);

  using CMap = Eigen::Map<const MatrixX<S>>;
  using CVec = Eigen::Map<const VectorX<S>>;
  const S* p = params_.data();
  CMap w1(p + lay_.dw1, lay_.hidden, lay_.enc);
  CVec b1(p + lay_.db1, lay_.hidden);
  // Density is row 0 of the second layer; geometry feature rows are skipped.
  CMap w2_row0(p + lay_.dw2, lay_.dens_out, lay_.hidden);

  MatrixX<S> a1;
  a1.noalias() = w1 * f0;
  a1.colwise() += b1;
  a1 = a1.unaryExpr([](S v) { return softplus(v); });
  VectorX<S> raw;
  raw.noalias() = a1.transpose() * w2_row0.row(0).transpose();
  raw.array() += p[lay_.db2];
  out.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) out[j] = softplus(raw[j]);
}

template <typename S>
FieldSample<S> RadianceField<S>::forward(const Vector3<S>& x, const Vector3<S>& d) const {
  Matrix3X<S> xs(3, 1), ds(3, 1);
  xs.col(0) = x;
  ds.col(0) = d;
  FieldCache<S> cache;
  forward_batch(xs, ds, cache);
  FieldSample<S> s;
  s.density = cache.densities[0];
  s.color = cache.colors.col(0);
  return s;
}

template <typename S>
S RadianceField<S>::density(const Vector3<S>& x) const {
  Matrix3X<S> xs(3, 1);
  xs.col(0) = x;
  VectorX<S> out;
  density_batch(xs, out);
  return out[0];
}

template <typename S>
void RadianceField<S>::set_raw_density_bias(S value) {
  params_[lay_.db2] = value;
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

constexpr char kMagic[4] = {'T', 'N', 'R', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& b, double v) { put_u64(b, std::bit_cast<std::uint64_t>(v)); }
void put_f32(std::string& b, float v) { put_u32(b, std::bit_cast<std::uint32_t>(v)); }

struct ByteReader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n) {
      throw ParseError(path, 0, "truncated checkpoint");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace

template <typename S>
void save_checkpoint(const RadianceField<S>& field, const std::string& path) {
  const FieldConfig& cfg = field.config();
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(sizeof(S)));
  put_u32(buf, static_cast<std::uint32_t>(cfg.grid.levels));
  put_u32(buf, cfg.grid.table_size);
  put_u32(buf, static_cast<std::uint32_t>(cfg.grid.features_per_level));
  put_u32(buf, static_cast<std::uint32_t>(cfg.grid.base_resolution));
  put_f64(buf, cfg.grid.per_level_scale);
  put_u32(buf, static_cast<std::uint32_t>(cfg.geo_features));
  put_u32(buf, static_cast<std::uint32_t>(cfg.hidden_width));
  put_u32(buf, static_cast<std::uint32_t>(cfg.dir_frequencies));
  for (int a = 0; a < 3; ++a) put_f64(buf, cfg.bounds.min[a]);
  for (int a = 0; a < 3; ++a) put_f64(buf, cfg.bounds.max[a]);
  put_u64(buf, static_cast<std::uint64_t>(field.param_count()));
  const VectorX<S>& params = field.params();
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if constexpr (sizeof(S) == 4) {
      put_f32(buf, static_cast<float>(params[i]));
    } else {
      put_f64(buf, static_cast<double>(params[i]));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

template <typename S>
RadianceField<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()),
               reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size(), path};
  r.need(4);
  if (std::memcmp(r.p, kMagic, 4) != 0) throw ParseError(path, 0, "not a field checkpoint");
  r.p += 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw ParseError(path, 0, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t scalar = r.u32();
  if (scalar != 4 && scalar != 8) throw ParseError(path, 0, "bad scalar tag");

  FieldConfig cfg;
  cfg.grid.levels = static_cast<int>(r.u32());
  cfg.grid.table_size = r.u32();
  cfg.grid.features_per_level = static_cast<int>(r.u32());
  cfg.grid.base_resolution = static_cast<int>(r.u32());
  cfg.grid.per_level_scale = r.f64();
  cfg.geo_features = static_cast<int>(r.u32());
  cfg.hidden_width = static_cast<int>(r.u32());
  cfg.dir_frequencies = static_cast<int>(r.u32());
  for (int a = 0; a < 3; ++a) cfg.bounds.min[a] = r.f64();
  for (int a = 0; a < 3; ++a) cfg.bounds.max[a] = r.f64();

  RadianceField<S> field(cfg, 0);
  const std::uint64_t count = r.u64();
  if (count != static_cast<std::uint64_t>(field.param_count())) {
    throw ParseError(path, 0, "checkpoint parameter count does not match its config");
  }
  VectorX<S>& params = field.params();
  for (std::uint64_t i = 0; i < count; ++i) {
    const double v = scalar == 4 ? static_cast<double>(r.f32()) : r.f64();
    params[static_cast<Eigen::Index>(i)] = static_cast<S>(v);
  }
  return field;
}

template void hash_encode_batch<float>(const HashGridConfig&, const float*,
                                       const Matrix3X<float>&, MatrixX<float>&);
template void hash_encode_batch<double>(const HashGridConfig&, const double*,
                                        const Matrix3X<double>&, MatrixX<double>&);
template void hash_encode_backward<float>(const HashGridConfig&, const float*,
                                          const Matrix3X<float>&, const MatrixX<float>&, float*,
                                          Matrix3X<float>*);
template void hash_encode_backward<double>(const HashGridConfig&, const double*,
                                           const Matrix3X<double>&, const MatrixX<double>&,
                                           double*, Matrix3X<double>*);
template VectorX<float> hash_encode<float>(const Vector3<float>&, const HashGridConfig&,
                                           const VectorX<float>&);
template VectorX<double> hash_encode<double>(const Vector3<double>&, const HashGridConfig&,
                                             const VectorX<double>&);
template class RadianceField<float>;
template class RadianceField<double>;
template void save_checkpoint<float>(const RadianceField<float>&, const std::string&);
template void save_checkpoint<double>(const RadianceField<double>&, const std::string&);
template RadianceField<float> load_checkpoint<float>(const std::string&);
template RadianceField<double> load_checkpoint<double>(const std::string&);

}  // namespace trajnerf
