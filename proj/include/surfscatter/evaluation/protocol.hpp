#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "surfscatter/cloud_io.hpp"
#include "surfscatter/error.hpp"
#include "surfscatter/evaluation/metrics.hpp"
#include "surfscatter/features.hpp"
#include "surfscatter/learners/model.hpp"
#include "surfscatter/parallel.hpp"
#include "surfscatter/random.hpp"

namespace surfscatter::evaluation {

/// Held-out surfaces of the reference experiment: two semi-specular, two low-specular.
inline const std::vector<std::string> kDefaultTestSurfaces = {"metal_tin", "tv", "styrofoam", "fabric_pinboard"};

/// Training surfaces of the fixed-split experiment.
inline const std::vector<std::string> kFixedTrainSurfaces = {
    "smooth_wood", "concrete_wall",    "rough_wood", "cardboard", "drywall",
    "corkboard",   "projector_screen", "linoleum",   "carpet",    "metal_copper"};

/// Featurizes every scan of a dataset, in dataset order.
inline std::vector<FeaturizedSurface> featurize_dataset(const Dataset& dataset, const FeaturizeOptions& options = {},
                                                        std::size_t threads = 1) {
  std::vector<FeaturizedSurface> out(dataset.scans.size());
  parallel_for(dataset.scans.size(), threads, [&](std::size_t i) { out[i] = featurize_scan(dataset.scans[i], options); });
  return out;
}

/// Which surfaces are held out and how the training surfaces are chosen.
/// With `train_surfaces` set, exactly those are used and `k` is ignored;
/// otherwise k surfaces are drawn uniformly without replacement from the
/// surfaces not held out.
struct SplitSpec {
  std::vector<std::string> test_surfaces = kDefaultTestSurfaces;
  std::size_t k = 11;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::string>> train_surfaces;
};

struct SurfaceInfo {
  std::string material;
  SurfaceClass label = SurfaceClass::Unlabeled;
};

inline std::vector<SurfaceInfo> surface_catalog(const std::vector<FeaturizedSurface>& surfaces) {
  std::vector<SurfaceInfo> out;
  out.reserve(surfaces.size());
  for (const auto& s : surfaces) out.push_back({s.material, s.label});
  return out;
}

/// Material names on each side of a split, each in catalog order.
struct SurfaceSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

inline SurfaceSplit select_surfaces(const std::vector<SurfaceInfo>& catalog, const SplitSpec& spec) {
  auto find = [&](const std::string& name) -> const SurfaceInfo* {
    for (const auto& s : catalog) {
      if (s.material == name) return &s;
    }
    return nullptr;
  };

  std::set<std::string> held_out;
  std::array<std::size_t, 2> per_class{};
  for (const auto& name : spec.test_surfaces) {
    const SurfaceInfo* s = find(name);
    if (s == nullptr) throw Error(ErrorCode::UnknownTestSurface, "test surface '" + name + "' is not in the dataset");
    if (!held_out.insert(name).second) throw Error(ErrorCode::InvalidSplit, "test surface '" + name + "' listed twice");
    if (s->label == SurfaceClass::Unlabeled) throw Error(ErrorCode::InvalidSplit, "test surface '" + name + "' has no label");
    ++per_class[static_cast<std::size_t>(class_index(s->label))];
  }
  if (per_class[0] != 2 || per_class[1] != 2) {
    throw Error(ErrorCode::InvalidSplit, "test set must hold two surfaces of each class");
  }

  SurfaceSplit split;
  for (const auto& s : catalog) {
    if (held_out.contains(s.material)) split.test.push_back(s.material);
  }

  if (spec.train_surfaces) {
    std::set<std::string> wanted;
    for (const auto& name : *spec.train_surfaces) {
      if (find(name) == nullptr) throw Error(ErrorCode::InvalidSplit, "training surface '" + name + "' is not in the dataset");
      if (held_out.contains(name)) throw Error(ErrorCode::InvalidSplit, "surface '" + name + "' is on both sides of the split");
      if (!wanted.insert(name).second) throw Error(ErrorCode::InvalidSplit, "training surface '" + name + "' listed twice");
    }
    for (const auto& s : catalog) {
      if (wanted.contains(s.material)) split.train.push_back(s.material);
    }
    return split;
  }

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (!held_out.contains(catalog[i].material)) pool.push_back(i);
  }
  if (spec.k == 0) throw Error(ErrorCode::InvalidSplit, "k must be at least 1");
  if (spec.k > pool.size()) {
    throw Error(ErrorCode::KTooLarge,
                "k = " + std::to_string(spec.k) + " exceeds the " + std::to_string(pool.size()) + " available training surfaces");
  }
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(spec.k);
  std::sort(pool.begin(), pool.end());
  for (std::size_t i : pool) split.train.push_back(catalog[i].material);
  return split;
}

/// Patch-level train and test tables for one split.
struct Split {
  SurfaceSplit surfaces;
  FeatureMatrix train;
  FeatureMatrix test;
};

inline Split materialize_split(const std::vector<FeaturizedSurface>& surfaces, const SurfaceSplit& chosen) {
  Split split;
  split.surfaces = chosen;
  auto gather = [&](const std::vector<std::string>& names, FeatureMatrix& into) {
    for (const auto& s : surfaces) {
      if (std::find(names.begin(), names.end(), s.material) != names.end()) into.append(s.matrix());
    }
  };
  gather(chosen.train, split.train);
  gather(chosen.test, split.test);
  return split;
}

inline Split leave_surface_out_split(const std::vector<FeaturizedSurface>& surfaces, const SplitSpec& spec) {
  return materialize_split(surfaces, select_surfaces(surface_catalog(surfaces), spec));
}

/// Outcome of one trained model on one split's test patches.
struct RunResult {
  std::string model_id;
  std::uint64_t model_seed = 0;
  SurfaceSplit split;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::array<ClassMetrics, 2> metrics;
  // Per test patch, in test-table order. Cleared in sweeps to bound memory.
  std::vector<PatchRef> patches;
  std::vector<SurfaceClass> truth;
  std::vector<SurfaceClass> predicted;
  std::vector<double> p_semi;
  bool single_class_training = false;  ///< scored under SingleClassPolicy::PredictPresentClass
};

inline RunResult score_predictions(std::string model_id, const Split& split, const std::vector<learners::Prediction>& preds) {
  RunResult r;
  r.model_id = std::move(model_id);
  r.split = split.surfaces;
  r.patches = split.test.provenance;
  r.truth = split.test.labels;
  for (const auto& p : preds) {
    r.predicted.push_back(p.label);
    r.p_semi.push_back(p.probabilities[1]);
  }
  r.confusion = confusion_matrix(r.truth, r.predicted);
  r.accuracy = r.confusion.accuracy();
  r.metrics = precision_recall_f1(r.confusion);
  return r;
}

/// What to do when every training patch has the same class.
enum class SingleClassPolicy {
  Error,                ///< propagate SingleClassTrainingSet
  PredictPresentClass,  ///< every model predicts the one class it saw, with probability 1
};

/// Trains every configured model on the split's training patches and scores
/// it on the test patches. Model j is seeded with derive_seed(seed, {j}).
/// The trained models are appended to `trained` when it is given.
inline std::vector<RunResult> evaluate_split(const Split& split, const std::vector<learners::ModelConfig>& configs,
                                             std::uint64_t seed, std::size_t threads = 1,
                                             std::vector<learners::Model>* trained = nullptr,
                                             SingleClassPolicy single_class = SingleClassPolicy::Error) {
  if (split.train.size() == 0) throw Error(ErrorCode::EmptyTrainingSet, "split has no training patches");
  const std::vector<int> y = split.train.label_indices();
  const bool one_class = std::all_of(y.begin(), y.end(), [&](int c) { return c == y.front(); });
  const bool degenerate = one_class && single_class == SingleClassPolicy::PredictPresentClass;
  std::vector<RunResult> results;
  results.reserve(configs.size());
  for (std::size_t j = 0; j < configs.size(); ++j) {
    const std::uint64_t model_seed = derive_seed(seed, {j});
    learners::Model model;
    if (degenerate) {
      // A single-leaf model of the only class, as any of the learners
      // would build if it were allowed to fit one class.
      learners::BaselineConfig constant;
      constant.oracle = false;
      constant.constant_class = y.front() == 1 ? SurfaceClass::SemiSpecular : SurfaceClass::LowSpecular;
      model = learners::Model{configs[j].name, learners::BaselineModel{constant, split.train.rows.cols()}};
    } else {
      model = learners::train_model(configs[j], split.train.rows, y, model_seed, threads);
    }
    RunResult r = score_predictions(configs[j].name, split, learners::predict(model, split.test.rows, split.test.labels));
    r.model_seed = model_seed;
    r.single_class_training = degenerate;
    results.push_back(std::move(r));
    if (trained != nullptr) trained->push_back(model);
  }
  return results;
}

inline std::vector<RunResult> evaluate_once(const std::vector<FeaturizedSurface>& surfaces, const SplitSpec& spec,
                                            const std::vector<learners::ModelConfig>& configs, std::size_t threads = 1) {
  return evaluate_split(leave_surface_out_split(surfaces, spec), configs, spec.seed, threads);
}

// ---------------------------------------------------------------------------
// k-sweep

struct SweepOptions {
  std::vector<std::size_t> k_values = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  std::size_t repeats = 50;
  std::uint64_t master_seed = 0;
  std::vector<std::string> test_surfaces = kDefaultTestSurfaces;
  std::size_t threads = 1;  ///< parallel repetitions; does not affect results
  // At small k a random draw can hold only low-specular surfaces.
  SingleClassPolicy single_class = SingleClassPolicy::PredictPresentClass;
};

/// Aggregate accuracy of one model at one k (population std).
struct SweepCell {
  std::size_t k = 0;
  std::string model;
  double max = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double std_dev = 0.0;
  std::size_t repetitions = 0;
};

struct SweepRun {
  std::size_t k = 0;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  std::vector<RunResult> results;  ///< one per model, per-patch vectors cleared
};

struct SweepReport {
  SweepOptions options;
  std::vector<std::string> models;
  std::vector<SweepCell> cells;  ///< ordered by (k, model)
  std::vector<SweepRun> runs;    ///< ordered by (k, repetition)
};

inline SweepCell summarize(std::size_t k, const std::string& model, const std::vector<double>& accuracies) {
  SweepCell c;
  c.k = k;
  c.model = model;
  c.repetitions = accuracies.size();
  if (accuracies.empty()) return c;
  c.max = *std::max_element(accuracies.begin(), accuracies.end());
  c.min = *std::min_element(accuracies.begin(), accuracies.end());
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  c.mean = sum / static_cast<double>(accuracies.size());
  double ss = 0.0;
  for (double a : accuracies) ss += (a - c.mean) * (a - c.mean);
  c.std_dev = std::sqrt(ss / static_cast<double>(accuracies.size()));
  // Rounding in the mean can push it a hair outside [min, max].
  c.mean = std::clamp(c.mean, c.min, c.max);
  return c;
}

/// For every k and repetition: a fresh split seeded by derive_seed(master,
/// {k, repetition}), shared by all models, which are themselves re-seeded
/// from that split seed. Repetitions may run in parallel; results are
/// stored and reduced in (k, repetition) order.
inline SweepReport sweep(const std::vector<FeaturizedSurface>& surfaces, const SweepOptions& options,
                         const std::vector<learners::ModelConfig>& configs) {
  if (options.repeats == 0) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  if (configs.empty()) throw Error(ErrorCode::InvalidArgument, "no models to evaluate");
  const auto catalog = surface_catalog(surfaces);

  // Validate every k up front so a bad value fails before any training.
  for (std::size_t k : options.k_values) {
    SplitSpec probe{options.test_surfaces, k, 0, std::nullopt};
    (void)select_surfaces(catalog, probe);
  }

  SweepReport report;
  report.options = options;
  for (const auto& c : configs) report.models.push_back(c.name);
  const std::size_t reps = options.repeats;
  report.runs.resize(options.k_values.size() * reps);
  std::vector<std::exception_ptr> failures(report.runs.size());

  parallel_for(report.runs.size(), options.threads, [&](std::size_t job) {
    SweepRun& run = report.runs[job];
    run.k = options.k_values[job / reps];
    run.repetition = job % reps;
    run.seed = derive_seed(options.master_seed, {run.k, run.repetition});
    try {
      const SplitSpec spec{options.test_surfaces, run.k, run.seed, std::nullopt};
      run.results = evaluate_split(materialize_split(surfaces, select_surfaces(catalog, spec)), configs, run.seed, 1,
                                   nullptr, options.single_class);
      for (auto& r : run.results) {
        r.patches.clear();
        r.truth.clear();
        r.predicted.clear();
        r.p_semi.clear();
      }
    } catch (const Error& e) {
      failures[job] = std::make_exception_ptr(Error(e.code(), "k=" + std::to_string(run.k) + " repetition=" +
                                                                  std::to_string(run.repetition) + ": " + e.detail()));
    } catch (...) {
      failures[job] = std::current_exception();
    }
  });
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  for (std::size_t ki = 0; ki < options.k_values.size(); ++ki) {
    for (std::size_t m = 0; m < configs.size(); ++m) {
      std::vector<double> acc;
      for (std::size_t rep = 0; rep < reps; ++rep) acc.push_back(report.runs[ki * reps + rep].results[m].accuracy);
      report.cells.push_back(summarize(options.k_values[ki], configs[m].name, acc));
    }
  }
  return report;
}

}  // namespace surfscatter::evaluation
