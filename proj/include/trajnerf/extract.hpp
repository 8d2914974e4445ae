#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajnerf/field.hpp"
#include "trajnerf/point_cloud.hpp"
#include "trajnerf/threading.hpp"
#include "trajnerf/types.hpp"

namespace trajnerf {

// Global density threshold applied by the extraction CLI unless overridden.
inline constexpr double kDefaultDensityThreshold = 15.0;

// Density values on a regular node lattice spanning a box. Node (ix,iy,iz)
// sits at bbox.min + index * spacing with spacing = extent / (resolution-1),
// so the lattice includes both box faces. Values are stored x-fastest.
struct DensityGrid {
  Aabb bbox;
  Eigen::Vector3i resolution = Eigen::Vector3i::Zero();  // nodes per axis
  std::vector<float> values;

  Eigen::Vector3d spacing() const {
    return bbox.extent().array() / (resolution.cast<double>().array() - 1.0);
  }
  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * resolution.y() + iy) * resolution.x() + ix;
  }
  Eigen::Vector3d node_position(int ix, int iy, int iz) const {
    return bbox.min.array() +
           Eigen::Vector3d(ix, iy, iz).array() * spacing().array();
  }
  std::size_t node_count() const {
    return static_cast<std::size_t>(resolution.x()) * resolution.y() * resolution.z();
  }
  void validate() const;
};

// How colorize picks view directions. The density field is view-independent
// but colors are not, so the choice is part of the output contract.
struct ColorizeStrategy {
  enum class Kind { FixedDirection, DirectionAverage };
  Kind kind = Kind::DirectionAverage;
  Eigen::Vector3d direction = -Eigen::Vector3d::UnitZ();  // FixedDirection only
  int k = 6;                                              // DirectionAverage only

  static ColorizeStrategy fixed_direction(const Eigen::Vector3d& d);
  static ColorizeStrategy direction_average(int k = 6);
  void validate() const;  // k >= 1, non-zero direction
};

// k directions spread over the unit sphere by the Fibonacci lattice. The
// z-components are 1 - (2i+1)/k, so even k is symmetric about the equator.
std::vector<Eigen::Vector3d> fibonacci_directions(int k);

struct CloudStatsReport {
  std::size_t cloud_points = 0;
  std::size_t reference_points = 0;
  double radius = 0.0;
  double completeness = 0.0;       // reference points with a cloud point in radius
  double artifact_fraction = 0.0;  // cloud points with no reference point in radius
  double chamfer = 0.0;            // mean symmetric nearest-neighbor distance

  std::string text() const;
  static std::string csv_header();
  std::string csv_row() const;
};

// Nearest-neighbor distance from each query point to the points set, exact
// (ring-bounded uniform spatial hash with cell size = radius hint).
std::vector<double> nearest_neighbor_distances(const std::vector<float>& queries,
                                               const std::vector<float>& points,
                                               double cell_size);

// Completeness / artifacts / chamfer of `cloud` measured against
// `reference`; see the report fields. Both clouds must be non-empty.
CloudStatsReport cloud_stats(const PointCloud& cloud, const PointCloud& reference,
                             double radius);

// Evaluates the field density at every lattice node. Works with any type
// exposing `Scalar` and `density_batch(positions, out)`; chunked so the
// field sees bounded batches.
template <typename Field>
DensityGrid sample_density_grid(const Field& field, const Aabb& bbox,
                                const Eigen::Vector3i& resolution) {
  using S = typename Field::Scalar;
  if ((resolution.array() < 2).any()) {
    throw InvalidInputError("density grid: resolution must be >= 2 per axis");
  }
  if (bbox.degenerate()) throw DegenerateGeometryError("density grid: degenerate box");

  DensityGrid grid;
  grid.bbox = bbox;
  grid.resolution = resolution;
  grid.values.resize(grid.node_count());

  const std::size_t chunk = 16384;
  parallel_for_chunks(grid.node_count(), chunk, [&](std::size_t, std::size_t begin,
                                                    std::size_t end) {
    const Eigen::Index count = static_cast<Eigen::Index>(end - begin);
    Matrix3X<S> xs(3, count);
    const int nx = resolution.x(), ny = resolution.y();
    for (Eigen::Index k = 0; k < count; ++k) {
      const std::size_t node = begin + static_cast<std::size_t>(k);
      const int ix = static_cast<int>(node % nx);
      const int iy = static_cast<int>((node / nx) % ny);
      const int iz = static_cast<int>(node / (static_cast<std::size_t>(nx) * ny));
      xs.col(k) = grid.node_position(ix, iy, iz).cast<S>();
    }
    VectorX<S> out;
    field.density_batch(xs, out);
    for (Eigen::Index k = 0; k < count; ++k) {
      grid.values[begin + static_cast<std::size_t>(k)] = static_cast<float>(out[k]);
    }
  });
  return grid;
}

// Keeps the nodes with density strictly above the threshold, in grid scan
// order (x fastest). Positions only; colors come from colorize.
PointCloud threshold_filter(const DensityGrid& grid, double delta_t);

// Queries the field color at every point and quantizes to 8 bits. Works
// with any type exposing `Scalar` and `forward_batch(xs, ds, cache)`.
template <typename Field>
PointCloud colorize(const Field& field, const PointCloud& cloud,
                    const ColorizeStrategy& strategy) {
  using S = typename Field::Scalar;
  strategy.validate();
  cloud.check_consistent();

  std::vector<Eigen::Vector3d> dirs;
  if (strategy.kind == ColorizeStrategy::Kind::FixedDirection) {
    dirs.push_back(strategy.direction);
  } else {
    dirs = fibonacci_directions(strategy.k);
  }

  PointCloud out = cloud;
  out.colors.assign(cloud.positions.size(), 0);

  const std::size_t chunk = 16384;
  parallel_for_chunks(cloud.size(), chunk, [&](std::size_t, std::size_t begin,
                                               std::size_t end) {
    const Eigen::Index count = static_cast<Eigen::Index>(end - begin);
    Matrix3X<S> xs(3, count);
    for (Eigen::Index k = 0; k < count; ++k) {
      const std::size_t p = 3 * (begin + static_cast<std::size_t>(k));
      xs.col(k) = Eigen::Vector3f(cloud.positions[p], cloud.positions[p + 1],
                                  cloud.positions[p + 2])
                      .cast<S>();
    }
    Eigen::Matrix<double, 3, Eigen::Dynamic> accum =
        Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, count);
    Matrix3X<S> ds(3, count);
    FieldCache<S> cache;
    for (const Eigen::Vector3d& d : dirs) {
      ds.colwise() = d.cast<S>();
      field.forward_batch(xs, ds, cache);
      accum += cache.colors.template cast<double>();
    }
    accum /= static_cast<double>(dirs.size());
    for (Eigen::Index k = 0; k < count; ++k) {
      const std::size_t p = 3 * (begin + static_cast<std::size_t>(k));
      for (int c = 0; c < 3; ++c) out.colors[p + c] = quantize8(accum(c, k));
    }
  });
  return out;
}

}  // namespace trajnerf
