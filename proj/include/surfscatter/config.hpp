#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfscatter/cloud_io.hpp"
#include "surfscatter/error.hpp"
#include "surfscatter/evaluation/protocol.hpp"
#include "surfscatter/features.hpp"
#include "surfscatter/learners/model.hpp"
#include "surfscatter/patching.hpp"

namespace surfscatter {

inline std::string to_string(evaluation::SingleClassPolicy p) {
  return p == evaluation::SingleClassPolicy::Error ? "error" : "predict_present_class";
}

inline evaluation::SingleClassPolicy single_class_policy_from_string(const std::string& s) {
  if (s == "error") return evaluation::SingleClassPolicy::Error;
  if (s == "predict_present_class") return evaluation::SingleClassPolicy::PredictPresentClass;
  throw Error(ErrorCode::InvalidConfig, "single_class must be 'error' or 'predict_present_class', got '" + s + "'");
}

/// Everything a pipeline run depends on. Precedence when assembling one:
/// built-in defaults, then a JSON config file, then command-line flags.
struct RunConfig {
  std::string manifest;
  std::string output_dir = "out";
  CsvSchema columns;
  double bin_size = kDefaultBinSize;
  std::size_t min_points = kDefaultMinPoints;
  double epsilon = kDefaultEpsilon;
  double threshold_db = kDefaultSpecularityThresholdDb;
  std::vector<learners::ModelConfig> models = learners::default_model_configs();
  std::vector<std::string> test_surfaces = evaluation::kDefaultTestSurfaces;
  std::vector<std::string> train_surfaces = evaluation::kFixedTrainSurfaces;
  std::vector<std::size_t> k_values = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  std::size_t repeats = 50;
  evaluation::SingleClassPolicy single_class = evaluation::SingleClassPolicy::PredictPresentClass;
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;  ///< 0 = hardware concurrency; never changes results

  FeaturizeOptions featurize_options() const { return {bin_size, min_points, epsilon, threshold_db}; }
};

inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(c.bin_size > 0.0) || !std::isfinite(c.bin_size)) fail("bin_size must be > 0");
  if (c.min_points == 0) fail("min_points must be >= 1");
  if (!(c.epsilon > 0.0) || !std::isfinite(c.epsilon)) fail("epsilon must be > 0");
  if (!std::isfinite(c.threshold_db)) fail("threshold_db must be finite");
  if (c.repeats == 0) fail("repeats must be >= 1");
  if (c.k_values.empty()) fail("k_values must not be empty");
  for (std::size_t k : c.k_values) {
    if (k == 0) fail("k values must be >= 1");
  }
  if (c.models.empty()) fail("at least one model is required");
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (c.models[i].name == c.models[j].name) fail("duplicate model name '" + c.models[i].name + "'");
    }
  }
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"manifest", c.manifest},
       {"output_dir", c.output_dir},
       {"columns", {{"x", c.columns.x}, {"y", c.columns.y}, {"z", c.columns.z}, {"intensity", c.columns.intensity}, {"ring", c.columns.ring}}},
       {"bin_size", c.bin_size},
       {"min_points", c.min_points},
       {"epsilon", c.epsilon},
       {"threshold_db", c.threshold_db},
       {"models", c.models},
       {"test_surfaces", c.test_surfaces},
       {"train_surfaces", c.train_surfaces},
       {"k_values", c.k_values},
       {"repeats", c.repeats},
       {"single_class", to_string(c.single_class)},
       {"master_seed", c.master_seed},
       {"threads", c.threads}};
}

/// Overlays the keys present in `j` onto `c`; unknown keys are rejected.
inline void merge_config(RunConfig& c, const nlohmann::json& j) {
  try {
    learners::detail::reject_unknown_keys(j, c, "config");
    c.manifest = j.value("manifest", c.manifest);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("columns")) {
      const auto& cols = j.at("columns");
      learners::detail::reject_unknown_keys(cols, nlohmann::json(RunConfig{}).at("columns"), "columns");
      c.columns.x = cols.value("x", c.columns.x);
      c.columns.y = cols.value("y", c.columns.y);
      c.columns.z = cols.value("z", c.columns.z);
      c.columns.intensity = cols.value("intensity", c.columns.intensity);
      c.columns.ring = cols.value("ring", c.columns.ring);
    }
    c.bin_size = j.value("bin_size", c.bin_size);
    c.min_points = j.value("min_points", c.min_points);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.threshold_db = j.value("threshold_db", c.threshold_db);
    if (j.contains("models")) c.models = j.at("models").get<std::vector<learners::ModelConfig>>();
    c.test_surfaces = j.value("test_surfaces", c.test_surfaces);
    c.train_surfaces = j.value("train_surfaces", c.train_surfaces);
    c.k_values = j.value("k_values", c.k_values);
    c.repeats = j.value("repeats", c.repeats);
    if (j.contains("single_class")) c.single_class = single_class_policy_from_string(j.at("single_class").get<std::string>());
    c.master_seed = j.value("master_seed", c.master_seed);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

inline RunConfig read_config(const std::filesystem::path& file, RunConfig base = {}) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot open config " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
  }
  merge_config(base, j);
  // A relative manifest path in a config file is relative to that file.
  if (j.contains("manifest") && !base.manifest.empty() && std::filesystem::path(base.manifest).is_relative()) {
    base.manifest = (file.parent_path() / base.manifest).lexically_normal().string();
  }
  return base;
}

}  // namespace surfscatter
