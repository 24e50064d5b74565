#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "surfscatter/error.hpp"
#include "surfscatter/types.hpp"

namespace surfscatter {

using Vec3 = Eigen::Vector3d;

/// Orthonormal frame of the best-fit plane of a point set.
struct SurfacePlane {
  Vec3 centroid = Vec3::Zero();
  Vec3 basis_u = Vec3::UnitX();  ///< greatest in-plane variance
  Vec3 basis_v = Vec3::UnitY();  ///< normal x basis_u
  Vec3 normal = Vec3::UnitZ();   ///< least variance

  double residual(const Vec3& p) const { return normal.dot(p - centroid); }
};

namespace detail {

inline Vec3 position(const LidarPoint& p) { return {p.x, p.y, p.z}; }

/// Flips v so its largest-magnitude component is positive (first index wins ties).
inline Vec3 canonical_sign(const Vec3& v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < 3; ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  return v[arg] < 0.0 ? Vec3(-v) : v;
}

}  // namespace detail

/// Least-squares plane through the points via eigen-decomposition of the
/// centered covariance. When the two in-plane variances coincide (e.g. a
/// square grid) the in-plane axis is undetermined; basis_u is then the
/// projection of the coordinate axis lying most nearly in the plane.
inline SurfacePlane fit_surface_plane(std::span<const LidarPoint> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::DegenerateCloud, "plane fit needs at least 3 points, got " + std::to_string(points.size()));
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += detail::position(p);
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Vec3 d = detail::position(p) - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::DegenerateCloud, "covariance eigen-decomposition failed");
  const Eigen::Vector3d lambda = solver.eigenvalues();  // ascending
  if (!(lambda[2] > 0.0) || lambda[1] <= 1e-12 * lambda[2]) {
    throw Error(ErrorCode::DegenerateCloud, "points are collinear or coincident");
  }

  SurfacePlane plane;
  plane.centroid = centroid;
  plane.normal = detail::canonical_sign(solver.eigenvectors().col(0).normalized());
  Vec3 major = solver.eigenvectors().col(2);
  if (lambda[2] - lambda[1] <= 1e-9 * lambda[2]) {
    Eigen::Index best = 0;
    double best_norm = -1.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
      const Vec3 axis = Vec3::Unit(i);
      const double norm = (axis - plane.normal.dot(axis) * plane.normal).norm();
      if (norm > best_norm + 1e-12) {
        best_norm = norm;
        best = i;
      }
    }
    const Vec3 axis = Vec3::Unit(best);
    major = axis - plane.normal.dot(axis) * plane.normal;
  }
  plane.basis_u = detail::canonical_sign(major.normalized());
  plane.basis_v = plane.normal.cross(plane.basis_u).normalized();
  return plane;
}

struct Patch {
  std::int64_t grid_u = 0;
  std::int64_t grid_v = 0;
  std::vector<std::size_t> point_indices;
  Vec3 center = Vec3::Zero();
};

struct PatchGrid {
  std::string material_name;
  double bin_size = 0.03;
  SurfacePlane plane;
  std::vector<Patch> patches;        ///< ordered by (grid_u, grid_v)
  std::size_t discarded_count = 0;   ///< bins dropped for having < min_points
  std::size_t discarded_points = 0;  ///< points inside those bins
};

inline constexpr double kDefaultBinSize = 0.03;
inline constexpr std::size_t kDefaultMinPoints = 5;

/// Bins the scan's points into square cells of side `bin_size` on its fitted
/// plane. Cell (i, j) covers [i*s, (i+1)*s) x [j*s, (j+1)*s) measured from the
/// minimum in-plane coordinates of the cloud, so the grid moves with the cloud.
inline PatchGrid partition_into_patches(const SurfaceScan& scan, double bin_size = kDefaultBinSize,
                                        std::size_t min_points = kDefaultMinPoints) {
  if (!(bin_size > 0.0) || !std::isfinite(bin_size)) {
    throw Error(ErrorCode::InvalidArgument, "bin_size must be positive and finite");
  }
  if (min_points < 1) throw Error(ErrorCode::InvalidArgument, "min_points must be >= 1");
  if (scan.points.empty()) throw Error(ErrorCode::EmptyCloud, "scan '" + scan.material_name + "' has no points");

  PatchGrid grid;
  grid.material_name = scan.material_name;
  grid.bin_size = bin_size;
  if (scan.points.size() == 1) {
    grid.plane.centroid = detail::position(scan.points.front());
  } else {
    grid.plane = fit_surface_plane(scan.points);
  }

  const std::size_t n = scan.points.size();
  std::vector<double> u(n), v(n);
  double u_min = std::numeric_limits<double>::infinity();
  double v_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = detail::position(scan.points[i]) - grid.plane.centroid;
    u[i] = d.dot(grid.plane.basis_u);
    v[i] = d.dot(grid.plane.basis_v);
    u_min = std::min(u_min, u[i]);
    v_min = std::min(v_min, v[i]);
  }

  // A point lying on a cell boundary up to rounding belongs to the upper cell.
  constexpr double kBoundarySnap = 1e-9;
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> bins;
  for (std::size_t i = 0; i < n; ++i) {
    const auto gu = static_cast<std::int64_t>(std::floor((u[i] - u_min) / bin_size + kBoundarySnap));
    const auto gv = static_cast<std::int64_t>(std::floor((v[i] - v_min) / bin_size + kBoundarySnap));
    bins[{gu, gv}].push_back(i);
  }

  for (auto& [key, members] : bins) {
    if (members.size() < min_points) {
      ++grid.discarded_count;
      grid.discarded_points += members.size();
      continue;
    }
    Patch patch;
    patch.grid_u = key.first;
    patch.grid_v = key.second;
    const double cu = u_min + (static_cast<double>(key.first) + 0.5) * bin_size;
    const double cv = v_min + (static_cast<double>(key.second) + 0.5) * bin_size;
    patch.center = grid.plane.centroid + cu * grid.plane.basis_u + cv * grid.plane.basis_v;
    patch.point_indices = std::move(members);
    grid.patches.push_back(std::move(patch));
  }
  return grid;
}

struct PatchCountRow {
  std::string material;
  std::size_t points = 0;
  std::size_t patches = 0;
};

struct PatchCountReport {
  std::vector<PatchCountRow> rows;
  std::size_t total_points = 0;
  std::size_t total_patches = 0;
};

inline PatchCountReport patch_count_report(const Dataset& dataset, double bin_size = kDefaultBinSize,
                                           std::size_t min_points = kDefaultMinPoints) {
  PatchCountReport report;
  for (const auto& scan : dataset.scans) {
    const PatchGrid grid = partition_into_patches(scan, bin_size, min_points);
    report.rows.push_back({scan.material_name, scan.points.size(), grid.patches.size()});
    report.total_points += scan.points.size();
    report.total_patches += grid.patches.size();
  }
  return report;
}

}  // namespace surfscatter
