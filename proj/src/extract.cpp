#include "trajnerf/extract.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace trajnerf {

void DensityGrid::validate() const {
  if ((resolution.array() < 2).any()) {
    throw InvalidInputError("density grid: resolution must be >= 2 per axis");
  }
  if (bbox.degenerate()) throw DegenerateGeometryError("density grid: degenerate box");
  if (values.size() != node_count()) {
    throw InvalidInputError("density grid: value count does not match the resolution");
  }
  for (float v : values) {
    if (!(v >= 0.0f)) throw InvalidInputError("density grid: densities must be >= 0");
  }
}

ColorizeStrategy ColorizeStrategy::fixed_direction(const Eigen::Vector3d& d) {
  ColorizeStrategy s;
  s.kind = Kind::FixedDirection;
  s.direction = d;
  s.validate();
  return s;
}

ColorizeStrategy ColorizeStrategy::direction_average(int k) {
  ColorizeStrategy s;
  s.kind = Kind::DirectionAverage;
  s.k = k;
  s.validate();
  return s;
}

void ColorizeStrategy::validate() const {
  if (kind == Kind::DirectionAverage) {
    if (k < 1) throw InvalidInputError("colorize: direction_average needs k >= 1");
  } else {
    if (!direction.allFinite() || direction.norm() == 0.0) {
      throw InvalidInputError("colorize: fixed direction must be finite and non-zero");
    }
  }
}

std::vector<Eigen::Vector3d> fibonacci_directions(int k) {
  if (k < 1) throw InvalidInputError("fibonacci directions: k must be >= 1");
  const double golden = EIGEN_PI * (3.0 - std::sqrt(5.0));
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / k;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

PointCloud threshold_filter(const DensityGrid& grid, double delta_t) {
  if (!(delta_t >= 0.0)) throw InvalidInputError("threshold filter: delta_t must be >= 0");
  grid.validate();
  PointCloud cloud;
  const int nx = grid.resolution.x(), ny = grid.resolution.y(), nz = grid.resolution.z();
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const float v = grid.values[grid.index(ix, iy, iz)];
        if (static_cast<double>(v) > delta_t) {
          const Eigen::Vector3d p = grid.node_position(ix, iy, iz);
          cloud.add(static_cast<float>(p.x()), static_cast<float>(p.y()),
                    static_cast<float>(p.z()));
          cloud.densities.push_back(v);
        }
      }
    }
  }
  return cloud;
}

namespace {

// Uniform spatial hash with cube cells. Coordinates are packed into one
// 64-bit key (21 bits per axis), so lookups are collision-free over the
// supported range and results match brute force exactly.
class SpatialHash {
 public:
  SpatialHash(const std::vector<float>& points, double cell) : points_(points), cell_(cell) {
    if (!(cell > 0.0) || !std::isfinite(cell)) {
      throw InvalidInputError("spatial hash: cell size must be positive and finite");
    }
    const std::size_t n = points.size() / 3;
    min_cell_.setConstant(std::numeric_limits<int>::max());
    max_cell_.setConstant(std::numeric_limits<int>::min());
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3i c = cell_of(point(i));
      min_cell_ = min_cell_.cwiseMin(c);
      max_cell_ = max_cell_.cwiseMax(c);
      cells_[key(c)].push_back(static_cast<int>(i));
    }
  }

  Eigen::Vector3d point(std::size_t i) const {
    return Eigen::Vector3d(points_[3 * i], points_[3 * i + 1], points_[3 * i + 2]);
  }

  Eigen::Vector3i cell_of(const Eigen::Vector3d& p) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
      const double v = std::floor(p[a] / cell_);
      if (std::abs(v) >= kBias) {
        throw InvalidInputError("spatial hash: point coordinates out of range for the cell size");
      }
      c[a] = static_cast<int>(v);
    }
    return c;
  }

  // Exact nearest-neighbor distance via expanding Chebyshev shells. A point
  // in a shell-k cell is at least (k-1)*cell away, so the search stops as
  // soon as that bound exceeds the best distance found.
  double nearest(const Eigen::Vector3d& q) const {
    const Eigen::Vector3i qc = cell_of(q);
    // Shells below k_start miss the occupied-cell box entirely; shells above
    // k_max contain no occupied cell.
    int k_start = 0, k_max = 0;
    for (int a = 0; a < 3; ++a) {
      k_start = std::max({k_start, min_cell_[a] - qc[a], qc[a] - max_cell_[a]});
      k_max = std::max(k_max, std::max(std::abs(qc[a] - min_cell_[a]),
                                       std::abs(qc[a] - max_cell_[a])));
    }
    double best = std::numeric_limits<double>::infinity();
    for (int k = k_start; k <= k_max; ++k) {
      const double lb = (static_cast<double>(k) - 1.0) * cell_;
      if (k > 0 && lb * lb > best) break;  // best holds a squared distance
      scan_shell(qc, k, q, best);
    }
    return std::sqrt(best);
  }

 private:
  static constexpr int kBias = 1 << 20;

  static std::uint64_t key(const Eigen::Vector3i& c) {
    const std::uint64_t x = static_cast<std::uint64_t>(c.x() + kBias);
    const std::uint64_t y = static_cast<std::uint64_t>(c.y() + kBias);
    const std::uint64_t z = static_cast<std::uint64_t>(c.z() + kBias);
    return (x << 42) | (y << 21) | z;
  }

  void scan_cell(const Eigen::Vector3i& c, const Eigen::Vector3d& q, double& best2) const {
    const auto it = cells_.find(key(c));
    if (it == cells_.end()) return;
    for (const int i : it->second) {
      best2 = std::min(best2, (point(static_cast<std::size_t>(i)) - q).squaredNorm());
    }
  }

  void scan_shell(const Eigen::Vector3i& qc, int k, const Eigen::Vector3d& q,
                  double& best2) const {
    if (k == 0) {
      scan_cell(qc, q, best2);
      return;
    }
    // Clamp to the occupied-cell box so distant queries stay cheap.
    const Eigen::Vector3i lo = (min_cell_ - qc).cwiseMax(Eigen::Vector3i::Constant(-k));
    const Eigen::Vector3i hi = (max_cell_ - qc).cwiseMin(Eigen::Vector3i::Constant(k));
    if ((lo.array() > hi.array()).any()) return;
    for (int dx = lo.x(); dx <= hi.x(); ++dx) {
      for (int dy = lo.y(); dy <= hi.y(); ++dy) {
        if (std::abs(dx) == k || std::abs(dy) == k) {
          // Side faces cover full rows; the remaining columns touch the
          // shell only at dz = +-k, so each shell cell is visited once.
          for (int dz = lo.z(); dz <= hi.z(); ++dz) {
            scan_cell(qc + Eigen::Vector3i(dx, dy, dz), q, best2);
          }
        } else {
          if (-k >= lo.z()) scan_cell(qc + Eigen::Vector3i(dx, dy, -k), q, best2);
          if (k <= hi.z()) scan_cell(qc + Eigen::Vector3i(dx, dy, k), q, best2);
        }
      }
    }
  }

  const std::vector<float>& points_;
  double cell_;
  Eigen::Vector3i min_cell_, max_cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

// `nearest` returns the square root of a squared distance; keep the same
// formula in any oracle comparing against these values.

}  // namespace

std::vector<double> nearest_neighbor_distances(const std::vector<float>& queries,
                                               const std::vector<float>& points,
                                               double cell_size) {
  if (points.empty() || points.size() % 3 != 0 || queries.size() % 3 != 0) {
    throw InvalidInputError("nearest neighbors: point buffers must be non-empty xyz triples");
  }
  const SpatialHash hash(points, cell_size);
  std::vector<double> out(queries.size() / 3);
  parallel_for_chunks(out.size(), 4096, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = hash.nearest(
          Eigen::Vector3d(queries[3 * i], queries[3 * i + 1], queries[3 * i + 2]));
    }
  });
  return out;
}

CloudStatsReport cloud_stats(const PointCloud& cloud, const PointCloud& reference,
                             double radius) {
  cloud.check_consistent();
  reference.check_consistent();
  if (cloud.size() == 0 || reference.size() == 0) {
    throw InvalidInputError("cloud stats: clouds must be non-empty");
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InvalidInputError("cloud stats: radius must be positive and finite");
  }

  const std::vector<double> cloud_to_ref =
      nearest_neighbor_distances(cloud.positions, reference.positions, radius);
  const std::vector<double> ref_to_cloud =
      nearest_neighbor_distances(reference.positions, cloud.positions, radius);

  CloudStatsReport report;
  report.cloud_points = cloud.size();
  report.reference_points = reference.size();
  report.radius = radius;

  std::size_t covered = 0;
  double sum_r = 0.0;
  for (const double d : ref_to_cloud) {
    if (d <= radius) ++covered;
    sum_r += d;
  }
  std::size_t artifacts = 0;
  double sum_c = 0.0;
  for (const double d : cloud_to_ref) {
    if (d > radius) ++artifacts;
    sum_c += d;
  }
  report.completeness = static_cast<double>(covered) / static_cast<double>(reference.size());
  report.artifact_fraction =
      static_cast<double>(artifacts) / static_cast<double>(cloud.size());
  report.chamfer = 0.5 * (sum_c / static_cast<double>(cloud.size()) +
                          sum_r / static_cast<double>(reference.size()));
  return report;
}

std::string CloudStatsReport::text() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "points:            %zu\n"
                "reference points:  %zu\n"
                "radius:            %.6g\n"
                "completeness:      %.6g\n"
                "artifact fraction: %.6g\n"
                "chamfer distance:  %.6g\n",
                cloud_points, reference_points, radius, completeness, artifact_fraction,
                chamfer);
  return buf;
}

std::string CloudStatsReport::csv_header() {
  return "cloud_points,reference_points,radius,completeness,artifact_fraction,chamfer";
}

std::string CloudStatsReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.10g,%.10g,%.10g,%.10g", cloud_points,
                reference_points, radius, completeness, artifact_fraction, chamfer);
  return buf;
}

}  // namespace trajnerf
