#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "surfscatter/error.hpp"
#include "surfscatter/features.hpp"
#include "surfscatter/random.hpp"
#include "surfscatter/types.hpp"

namespace surfscatter {

struct WaveSpec {
  double wavelength = 905e-9;    // meters
  double incidence_angle = 0.0;  // radians, [0, pi/2)
};

struct RoughnessSpec {
  double h_rms = 0.0;  // meters
};

namespace detail {

inline void validate(const WaveSpec& wave) {
  if (!(wave.wavelength > 0.0) || !std::isfinite(wave.wavelength)) {
    throw Error(ErrorCode::InvalidArgument, "wavelength must be positive and finite");
  }
  if (!(wave.incidence_angle >= 0.0)) throw Error(ErrorCode::InvalidArgument, "incidence angle must be >= 0");
  if (wave.incidence_angle >= std::numbers::pi / 2 || !(std::cos(wave.incidence_angle) > 0.0)) {
    throw Error(ErrorCode::GrazingIncidence, "incidence angle must be below pi/2");
  }
}

inline void validate(const RoughnessSpec& rough) {
  if (!(rough.h_rms >= 0.0) || !std::isfinite(rough.h_rms)) {
    throw Error(ErrorCode::InvalidArgument, "h_rms must be finite and >= 0");
  }
}

}  // namespace detail

/// Rayleigh critical height: lambda / (8 cos theta_i).
inline double rayleigh_threshold(const WaveSpec& wave) {
  detail::validate(wave);
  return wave.wavelength / (8.0 * std::cos(wave.incidence_angle));
}

/// Coherent-reflection attenuation exp[-8 (pi h_rms cos theta_i / lambda)^2].
inline double scattering_factor(const RoughnessSpec& rough, const WaveSpec& wave) {
  detail::validate(rough);
  detail::validate(wave);
  const double phase = std::numbers::pi * rough.h_rms * std::cos(wave.incidence_angle) / wave.wavelength;
  return std::exp(-8.0 * phase * phase);
}

/// Rayleigh roughness test (strict).
inline bool is_rough(const RoughnessSpec& rough, const WaveSpec& wave) {
  detail::validate(rough);
  return rough.h_rms > rayleigh_threshold(wave);
}

/// A flat rectangular panel facing the sensor, sampled on a regular grid.
///
/// The panel lies in the plane x = standoff, centered on the sensor boresight
/// (y = z = 0), and the boresight is always one of the grid points. Each return
/// combines a coherent lobe and an incoherent diffuse term:
///
///   I = base * [rho_s * exp(-(theta/lobe)^2) + (1 - rho_s) * albedo * cos(theta)]
///       + diffuse_floor + N(0, noise_std),   clamped at 0,
///
/// where theta is the point's incidence angle and rho_s the scattering factor
/// at that angle. Smooth panels therefore return one sharp near-normal peak
/// over a dim background; rough panels return a broad, even glow. The
/// boresight return carries no noise, so with h_rms = 0 and no floor it equals
/// base_reflectivity exactly. Depths are jittered by N(0, h_rms).
struct SyntheticSurfaceSpec {
  std::string material_name = "synthetic";
  double width = 0.8636;   // meters (34 in)
  double height = 0.4572;  // meters (18 in)
  double point_spacing = 0.01;
  double base_reflectivity = 100.0;
  double h_rms = 0.0;
  double diffuse_floor = 2.0;
  double noise_std = 0.5;
  double standoff = 1.1176;  // meters (44 in)
  double wavelength = 905e-9;
  double specular_lobe_deg = 3.0;
  double diffuse_albedo = 0.2;
  std::uint64_t seed = 0;
};

inline void validate(const SyntheticSurfaceSpec& s) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidSpec, std::string(name) + " must be positive and finite");
  };
  auto nonnegative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidSpec, std::string(name) + " must be finite and >= 0");
  };
  if (s.material_name.empty()) throw Error(ErrorCode::InvalidSpec, "material_name must be nonempty");
  positive(s.width, "width");
  positive(s.height, "height");
  positive(s.point_spacing, "point_spacing");
  positive(s.standoff, "standoff");
  positive(s.wavelength, "wavelength");
  positive(s.specular_lobe_deg, "specular_lobe_deg");
  nonnegative(s.base_reflectivity, "base_reflectivity");
  nonnegative(s.h_rms, "h_rms");
  nonnegative(s.diffuse_floor, "diffuse_floor");
  nonnegative(s.noise_std, "noise_std");
  nonnegative(s.diffuse_albedo, "diffuse_albedo");
  if (s.point_spacing > std::min(s.width, s.height)) {
    throw Error(ErrorCode::InvalidSpec, "point_spacing exceeds the panel size");
  }
}

/// Generates the panel described above. The class is whatever the
/// whole-surface specularity threshold assigns to the generated returns.
inline SurfaceScan generate_scan(const SyntheticSurfaceSpec& spec, double threshold_db = kDefaultSpecularityThresholdDb) {
  validate(spec);
  Rng rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  const auto half_cols = static_cast<long>(std::floor(spec.width / 2.0 / spec.point_spacing + 1e-9));
  const auto half_rows = static_cast<long>(std::floor(spec.height / 2.0 / spec.point_spacing + 1e-9));
  const double lobe = spec.specular_lobe_deg * std::numbers::pi / 180.0;

  SurfaceScan scan;
  scan.material_name = spec.material_name;
  scan.points.reserve(static_cast<std::size_t>((2 * half_cols + 1) * (2 * half_rows + 1)));
  for (long r = -half_rows; r <= half_rows; ++r) {
    for (long c = -half_cols; c <= half_cols; ++c) {
      const double y = static_cast<double>(c) * spec.point_spacing;
      const double z = static_cast<double>(r) * spec.point_spacing;
      const double depth_jitter = spec.h_rms * unit(rng);
      const double noise = spec.noise_std * unit(rng);
      const double theta = std::atan(std::hypot(y, z) / spec.standoff);
      const double rho = scattering_factor({spec.h_rms}, {spec.wavelength, theta});
      const double coherent = rho * std::exp(-(theta / lobe) * (theta / lobe));
      const double diffuse = (1.0 - rho) * spec.diffuse_albedo * std::cos(theta);
      const bool boresight = r == 0 && c == 0;
      double intensity = spec.base_reflectivity * (coherent + diffuse) + spec.diffuse_floor + (boresight ? 0.0 : noise);
      intensity = std::max(intensity, 0.0);

      LidarPoint p;
      p.x = spec.standoff + depth_jitter;
      p.y = y;
      p.z = z;
      p.intensity_raw = intensity;
      p.intensity_linear = intensity;
      scan.points.push_back(p);
    }
  }
  scan.canonical_class = assign_class(surface_specularity(scan), threshold_db);
  return scan;
}

inline void to_json(nlohmann::json& j, const SyntheticSurfaceSpec& s) {
  j = nlohmann::json{{"material_name", s.material_name},
                     {"width", s.width},
                     {"height", s.height},
                     {"point_spacing", s.point_spacing},
                     {"base_reflectivity", s.base_reflectivity},
                     {"h_rms", s.h_rms},
                     {"diffuse_floor", s.diffuse_floor},
                     {"noise_std", s.noise_std},
                     {"standoff", s.standoff},
                     {"wavelength", s.wavelength},
                     {"specular_lobe_deg", s.specular_lobe_deg},
                     {"diffuse_albedo", s.diffuse_albedo},
                     {"seed", s.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, SyntheticSurfaceSpec& s) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidSpec, "synthetic spec must be a JSON object");
  nlohmann::json defaults = s;
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw Error(ErrorCode::InvalidSpec, "unknown field '" + key + "'");
  }
  try {
    s.material_name = j.value("material_name", s.material_name);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.point_spacing = j.value("point_spacing", s.point_spacing);
    s.base_reflectivity = j.value("base_reflectivity", s.base_reflectivity);
    s.h_rms = j.value("h_rms", s.h_rms);
    s.diffuse_floor = j.value("diffuse_floor", s.diffuse_floor);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.standoff = j.value("standoff", s.standoff);
    s.wavelength = j.value("wavelength", s.wavelength);
    s.specular_lobe_deg = j.value("specular_lobe_deg", s.specular_lobe_deg);
    s.diffuse_albedo = j.value("diffuse_albedo", s.diffuse_albedo);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
}

/// h_rms of a panel at `multiple` times the normal-incidence Rayleigh height.
inline double h_rms_for(double multiple, double wavelength = 905e-9) {
  return multiple * rayleigh_threshold({wavelength, 0.0});
}

}  // namespace surfscatter
