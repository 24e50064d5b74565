#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surfscatter/features.hpp"
#include "surfscatter/learners/model.hpp"
#include "surfscatter/patching.hpp"

namespace surfscatter::evaluation {

struct ScatterRecord {
  std::string material;
  std::int64_t grid_u = 0;
  std::int64_t grid_v = 0;
  Vec3 center = Vec3::Zero();
  SurfaceClass predicted = SurfaceClass::LowSpecular;
  double p_semi = 0.0;
};

/// Per-patch predicted class over the geometry of one or more scans.
struct ScatterMap {
  std::vector<ScatterRecord> records;
};

/// One record per retained patch, in surface then grid order. Surface labels
/// are passed to the model so the oracle baseline can be mapped too.
inline ScatterMap build_scatter_map(const std::vector<FeaturizedSurface>& surfaces, const learners::Model& model) {
  ScatterMap map;
  for (const auto& s : surfaces) {
    const FeatureMatrix m = s.matrix();
    if (m.size() == 0) continue;
    const auto preds = learners::predict(model, m.rows, m.labels);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const Patch& p = s.grid.patches[i];
      map.records.push_back({s.material, p.grid_u, p.grid_v, p.center, preds[i].label, preds[i].probabilities[1]});
    }
  }
  return map;
}

}  // namespace surfscatter::evaluation
