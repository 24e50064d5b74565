#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surfscatter/error.hpp"

namespace surfscatter {

/// Two-way reflectivity class. The integer values double as class indices in
/// probability vectors and confusion matrices (LowSpecular first).
enum class SurfaceClass : int {
  LowSpecular = 0,
  SemiSpecular = 1,
  Unlabeled = 2,
};

inline constexpr std::size_t kNumClasses = 2;

inline constexpr int class_index(SurfaceClass c) { return static_cast<int>(c); }

inline SurfaceClass class_from_index(int index) {
  if (index != 0 && index != 1) {
    throw Error(ErrorCode::InvalidArgument, "class index must be 0 or 1, got " + std::to_string(index));
  }
  return static_cast<SurfaceClass>(index);
}

inline std::string_view to_string(SurfaceClass c) {
  switch (c) {
    case SurfaceClass::LowSpecular: return "low";
    case SurfaceClass::SemiSpecular: return "semi";
    case SurfaceClass::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline SurfaceClass surface_class_from_string(std::string_view s) {
  if (s == "semi") return SurfaceClass::SemiSpecular;
  if (s == "low") return SurfaceClass::LowSpecular;
  if (s == "unlabeled") return SurfaceClass::Unlabeled;
  throw Error(ErrorCode::InvalidArgument, "unknown class '" + std::string(s) + "' (expected semi|low|unlabeled)");
}

/// One LiDAR return in the sensor frame (meters).
struct LidarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity_raw = 0.0;
  double intensity_linear = 0.0;
  std::optional<int> ring;

  bool operator==(const LidarPoint&) const = default;
};

/// All returns of one named material.
struct SurfaceScan {
  std::string material_name;
  SurfaceClass canonical_class = SurfaceClass::Unlabeled;
  std::vector<LidarPoint> points;
};

struct Dataset {
  std::vector<SurfaceScan> scans;

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const auto& s : scans) n += s.points.size();
    return n;
  }

  const SurfaceScan* find(std::string_view material) const {
    for (const auto& s : scans) {
      if (s.material_name == material) return &s;
    }
    return nullptr;
  }
};

}  // namespace surfscatter
