#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "surfscatter/error.hpp"
#include "surfscatter/matrix.hpp"
#include "surfscatter/patching.hpp"
#include "surfscatter/types.hpp"

namespace surfscatter {

inline constexpr double kDefaultEpsilon = 1e-9;
inline constexpr double kDefaultSpecularityThresholdDb = 10.0;

/// Model input columns, in this order.
inline constexpr std::array<const char*, 3> kModelFeatureNames = {"mean_elevation_angle", "log_linear_max",
                                                                  "max_to_mean_ratio"};

/// Angle of the point above the sensor's horizontal plane, in degrees.
inline double elevation_angle(const LidarPoint& p) {
  const double horizontal = std::hypot(p.x, p.y);
  if (horizontal == 0.0) throw Error(ErrorCode::ZeroHorizontalRange, "point lies on the sensor's vertical axis");
  return std::atan(p.z / horizontal) * 180.0 / std::numbers::pi;
}

/// ln(1 + linear), accurate for tiny arguments.
inline double log_scale(double linear) {
  if (linear < 0.0) throw Error(ErrorCode::NegativeIntensity, "linear intensity " + std::to_string(linear) + " < 0");
  return std::log1p(linear);
}

/// Peak-to-average ratio in dB: 10 log10(max / mean).
inline double specularity_db(std::span<const double> linear) {
  if (linear.empty()) throw Error(ErrorCode::InvalidArgument, "specularity of an empty set");
  double max = 0.0;
  double sum = 0.0;
  for (double x : linear) {
    if (x < 0.0) throw Error(ErrorCode::NegativeIntensity, "linear intensity " + std::to_string(x) + " < 0");
    max = std::max(max, x);
    sum += x;
  }
  const double mean = sum / static_cast<double>(linear.size());
  if (!(mean > 0.0)) throw Error(ErrorCode::AllZeroIntensities, "mean intensity is zero");
  return 10.0 * std::log10(max / mean);
}

/// Strictly greater than the threshold is semi-specular.
inline SurfaceClass assign_class(double specularity, double threshold_db = kDefaultSpecularityThresholdDb) {
  return specularity > threshold_db ? SurfaceClass::SemiSpecular : SurfaceClass::LowSpecular;
}

inline double surface_specularity(const SurfaceScan& scan) {
  std::vector<double> linear;
  linear.reserve(scan.points.size());
  for (const auto& p : scan.points) linear.push_back(p.intensity_linear);
  return specularity_db(linear);
}

struct PatchFeatures {
  double mean_elevation_angle = 0.0;  // degrees
  double log_linear_max = 0.0;
  double log_linear_mean = 0.0;
  double max_to_mean_ratio = 0.0;
  double mean_linear = 0.0;
  double specularity_db = 0.0;  // 0 for an all-zero patch

  std::array<double, 3> model_inputs() const { return {mean_elevation_angle, log_linear_max, max_to_mean_ratio}; }
};

inline PatchFeatures patch_features(const Patch& patch, const SurfaceScan& scan, double epsilon = kDefaultEpsilon) {
  if (patch.point_indices.empty()) throw Error(ErrorCode::EmptyPatch, "patch has no points");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");

  PatchFeatures f;
  double elevation_sum = 0.0;
  double log_sum = 0.0;
  double linear_sum = 0.0;
  double linear_max = 0.0;
  for (std::size_t idx : patch.point_indices) {
    if (idx >= scan.points.size()) throw Error(ErrorCode::InvalidArgument, "patch index out of range");
    const LidarPoint& p = scan.points[idx];
    const double l = log_scale(p.intensity_linear);
    elevation_sum += elevation_angle(p);
    log_sum += l;
    linear_sum += p.intensity_linear;
    f.log_linear_max = std::max(f.log_linear_max, l);
    linear_max = std::max(linear_max, p.intensity_linear);
  }
  const auto n = static_cast<double>(patch.point_indices.size());
  f.mean_elevation_angle = elevation_sum / n;
  f.log_linear_mean = log_sum / n;
  // Guard against the mean rounding above the max on constant patches.
  f.log_linear_mean = std::min(f.log_linear_mean, f.log_linear_max);
  f.max_to_mean_ratio = f.log_linear_max / (f.log_linear_mean + epsilon);
  f.mean_linear = linear_sum / n;
  f.specularity_db = f.mean_linear > 0.0 ? 10.0 * std::log10(linear_max / f.mean_linear) : 0.0;
  return f;
}

struct PatchRef {
  std::string material;
  std::int64_t grid_u = 0;
  std::int64_t grid_v = 0;
};

/// Model-ready table: three feature columns, one label and provenance per row.
struct FeatureMatrix {
  DesignMatrix rows{0, kModelFeatureNames.size()};
  std::vector<SurfaceClass> labels;
  std::vector<PatchRef> provenance;

  std::size_t size() const { return labels.size(); }

  void append(const PatchFeatures& f, SurfaceClass label, PatchRef ref) {
    const auto in = f.model_inputs();
    for (double v : in) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite feature for " + ref.material);
    }
    rows.append_row(in);
    labels.push_back(label);
    provenance.push_back(std::move(ref));
  }

  void append(const FeatureMatrix& other) {
    for (std::size_t i = 0; i < other.size(); ++i) {
      rows.append_row(other.rows.row(i));
      labels.push_back(other.labels[i]);
      provenance.push_back(other.provenance[i]);
    }
  }

  std::vector<int> label_indices() const {
    std::vector<int> out;
    out.reserve(labels.size());
    for (auto c : labels) out.push_back(class_index(c));
    return out;
  }
};

struct FeaturizeOptions {
  double bin_size = kDefaultBinSize;
  std::size_t min_points = kDefaultMinPoints;
  double epsilon = kDefaultEpsilon;
  double threshold_db = kDefaultSpecularityThresholdDb;
};

/// One scan carried through patching and feature extraction.
struct FeaturizedSurface {
  std::string material;
  SurfaceClass label = SurfaceClass::Unlabeled;  ///< canonical class, or threshold-derived when unlabeled
  double surface_specularity_db = 0.0;
  SurfaceClass threshold_class = SurfaceClass::Unlabeled;
  std::size_t point_count = 0;
  PatchGrid grid;
  std::vector<PatchFeatures> features;  ///< parallel to grid.patches

  FeatureMatrix matrix() const {
    FeatureMatrix m;
    for (std::size_t i = 0; i < features.size(); ++i) {
      m.append(features[i], label, {material, grid.patches[i].grid_u, grid.patches[i].grid_v});
    }
    return m;
  }
};

inline FeaturizedSurface featurize_scan(const SurfaceScan& scan, const FeaturizeOptions& options = {}) {
  FeaturizedSurface out;
  out.material = scan.material_name;
  out.point_count = scan.points.size();
  out.surface_specularity_db = surface_specularity(scan);
  out.threshold_class = assign_class(out.surface_specularity_db, options.threshold_db);
  out.label = scan.canonical_class == SurfaceClass::Unlabeled ? out.threshold_class : scan.canonical_class;
  out.grid = partition_into_patches(scan, options.bin_size, options.min_points);
  out.features.reserve(out.grid.patches.size());
  for (const auto& patch : out.grid.patches) out.features.push_back(patch_features(patch, scan, options.epsilon));
  return out;
}

}  // namespace surfscatter
