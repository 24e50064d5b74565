#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfscatter/cloud_io.hpp"
#include "surfscatter/evaluation/metrics.hpp"
#include "surfscatter/evaluation/protocol.hpp"
#include "surfscatter/evaluation/scatter_map.hpp"
#include "surfscatter/features.hpp"
#include "surfscatter/patching.hpp"

// Machine-readable outputs. Every CSV starts with a "# config: {...}" line
// holding the effective configuration as compact JSON; the point-CSV reader
// and most plotting tools skip '#' lines.

namespace surfscatter::report {

using nlohmann::json;
using detail::format_double;

inline void write_config_line(std::ostream& out, const json& config) { out << "# config: " << config.dump() << '\n'; }

// ---------------------------------------------------------------------------
// Ingest: per-material point and patch counts

struct IngestRow {
  std::string material;
  SurfaceClass label = SurfaceClass::Unlabeled;
  std::size_t points = 0;
  std::size_t patches = 0;
  double specularity_db = 0.0;
  SurfaceClass threshold_class = SurfaceClass::Unlabeled;
};

struct IngestReport {
  std::vector<IngestRow> rows;
  std::size_t total_points = 0;
  std::size_t total_patches = 0;
};

inline IngestReport ingest_report(const Dataset& dataset, double bin_size, std::size_t min_points, double threshold_db) {
  IngestReport r;
  const PatchCountReport counts = patch_count_report(dataset, bin_size, min_points);
  for (std::size_t i = 0; i < dataset.scans.size(); ++i) {
    const auto& scan = dataset.scans[i];
    const double db = surface_specularity(scan);
    r.rows.push_back({scan.material_name, scan.canonical_class, scan.points.size(), counts.rows[i].patches, db,
                      assign_class(db, threshold_db)});
  }
  r.total_points = counts.total_points;
  r.total_patches = counts.total_patches;
  return r;
}

inline json to_json(const IngestReport& r, const json& config) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"material", row.material},
                    {"class", to_string(row.label)},
                    {"points", row.points},
                    {"patches", row.patches},
                    {"specularity_db", row.specularity_db},
                    {"threshold_class", to_string(row.threshold_class)}});
  }
  return {{"config", config},
          {"materials", rows},
          {"total_points", r.total_points},
          {"total_patches", r.total_patches}};
}

inline void write_csv(std::ostream& out, const IngestReport& r, const json& config) {
  write_config_line(out, config);
  out << "material,class,points,patches,specularity_db,threshold_class\n";
  for (const auto& row : r.rows) {
    out << row.material << ',' << to_string(row.label) << ',' << row.points << ',' << row.patches << ','
        << format_double(row.specularity_db) << ',' << to_string(row.threshold_class) << '\n';
  }
  out << "total,," << r.total_points << ',' << r.total_patches << ",,\n";
}

// ---------------------------------------------------------------------------
// Features: one row per retained patch

inline void write_feature_csv(std::ostream& out, const std::vector<FeaturizedSurface>& surfaces, const json& config) {
  write_config_line(out, config);
  out << "material,grid_u,grid_v,mean_elevation_angle,log_linear_max,log_linear_mean,max_to_mean_ratio,mean_linear,"
         "specularity_db,label\n";
  for (const auto& s : surfaces) {
    for (std::size_t i = 0; i < s.features.size(); ++i) {
      const auto& f = s.features[i];
      const auto& p = s.grid.patches[i];
      out << s.material << ',' << p.grid_u << ',' << p.grid_v << ',' << format_double(f.mean_elevation_angle) << ','
          << format_double(f.log_linear_max) << ',' << format_double(f.log_linear_mean) << ','
          << format_double(f.max_to_mean_ratio) << ',' << format_double(f.mean_linear) << ','
          << format_double(f.specularity_db) << ',' << to_string(s.label) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Evaluation results

inline json to_json(const evaluation::ClassMetrics& m) {
  return {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"support", m.support},
          {"precision_undefined", m.precision_undefined},
          {"recall_undefined", m.recall_undefined},
          {"f1_undefined", m.f1_undefined}};
}

inline json to_json(const evaluation::RunResult& r, bool include_patches) {
  json j = {{"model", r.model_id},
            {"model_seed", r.model_seed},
            {"train_surfaces", r.split.train},
            {"test_surfaces", r.split.test},
            {"accuracy", r.accuracy},
            {"single_class_training", r.single_class_training},
            {"confusion_matrix",
             {{"order", {"low", "semi"}}, {"rows", "true"}, {"columns", "predicted"}, {"counts", r.confusion.counts}}},
            {"metrics", {{"low", to_json(r.metrics[0])}, {"semi", to_json(r.metrics[1])}}}};
  if (include_patches) {
    json patches = json::array();
    for (std::size_t i = 0; i < r.patches.size(); ++i) {
      patches.push_back({{"material", r.patches[i].material},
                         {"grid_u", r.patches[i].grid_u},
                         {"grid_v", r.patches[i].grid_v},
                         {"true", to_string(r.truth[i])},
                         {"predicted", to_string(r.predicted[i])},
                         {"p_semi", r.p_semi[i]}});
    }
    j["patches"] = std::move(patches);
  }
  return j;
}

inline json to_json(const evaluation::SweepReport& r, const json& config) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"k", c.k},
                     {"model", c.model},
                     {"max", c.max},
                     {"mean", c.mean},
                     {"min", c.min},
                     {"std", c.std_dev},
                     {"repetitions", c.repetitions}});
  }
  json runs = json::array();
  for (const auto& run : r.runs) {
    json results = json::array();
    for (const auto& res : run.results) results.push_back(to_json(res, false));
    runs.push_back({{"k", run.k}, {"repetition", run.repetition}, {"seed", run.seed}, {"results", results}});
  }
  return {{"config", config}, {"models", r.models}, {"summary", cells}, {"runs", runs}};
}

/// Columns mirror the k-sweep table: k, model, max, mean, std (plus min and
/// the repetition count).
inline void write_csv(std::ostream& out, const evaluation::SweepReport& r, const json& config) {
  write_config_line(out, config);
  out << "k,model,max,mean,std,min,repetitions\n";
  for (const auto& c : r.cells) {
    out << c.k << ',' << c.model << ',' << format_double(c.max) << ',' << format_double(c.mean) << ','
        << format_double(c.std_dev) << ',' << format_double(c.min) << ',' << c.repetitions << '\n';
  }
}

inline void write_csv(std::ostream& out, const evaluation::PrCurve& curve, const json& config) {
  write_config_line(out, config);
  out << "threshold,precision,recall\n";
  for (const auto& p : curve.points) {
    out << format_double(p.threshold) << ',' << format_double(p.precision) << ',' << format_double(p.recall) << '\n';
  }
}

inline void write_csv(std::ostream& out, const evaluation::ScatterMap& map, const json& config) {
  write_config_line(out, config);
  out << "material,grid_u,grid_v,x,y,z,class,p_semi\n";
  for (const auto& r : map.records) {
    out << r.material << ',' << r.grid_u << ',' << r.grid_v << ',' << format_double(r.center.x()) << ','
        << format_double(r.center.y()) << ',' << format_double(r.center.z()) << ',' << to_string(r.predicted) << ','
        << format_double(r.p_semi) << '\n';
  }
}

}  // namespace surfscatter::report
