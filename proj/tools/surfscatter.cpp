// surfscatter: command-line front end for the surface reflectivity pipeline.
//
// Exit codes: 0 success, 2 usage/config/data error, 1 internal failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfscatter/surfscatter.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace surfscatter;

namespace {

/// Flag values; unset optionals leave the config file or defaults in place.
struct Flags {
  std::string config_file;
  std::optional<std::string> manifest;
  std::optional<std::string> output_dir;
  std::optional<double> bin_size;
  std::optional<std::size_t> min_points;
  std::optional<double> epsilon;
  std::optional<double> threshold_db;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> repeats;
  std::vector<std::size_t> k_values;
  std::vector<std::string> models;
  std::vector<std::string> test_surfaces;
  std::vector<std::string> train_surfaces;
};

void add_common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "JSON config file (defaults < file < flags)")->check(CLI::ExistingFile);
  cmd->add_option("--manifest", f.manifest, "dataset manifest (JSON)");
  cmd->add_option("--out", f.output_dir, "output directory");
  cmd->add_option("--bin-size", f.bin_size, "patch edge length in meters");
  cmd->add_option("--min-points", f.min_points, "minimum points per retained patch");
  cmd->add_option("--epsilon", f.epsilon, "MMR stabilizer");
  cmd->add_option("--threshold-db", f.threshold_db, "specularity threshold in dB");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--threads", f.threads, "worker threads (0 = all cores); results do not depend on it");
}

learners::ModelConfig model_by_name(const RunConfig& c, const std::string& name) {
  for (const auto& m : c.models) {
    if (m.name == name) return m;
  }
  return learners::model_config_for(name);
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (!f.config_file.empty()) c = read_config(f.config_file);
  if (f.manifest) c.manifest = *f.manifest;
  if (f.output_dir) c.output_dir = *f.output_dir;
  if (f.bin_size) c.bin_size = *f.bin_size;
  if (f.min_points) c.min_points = *f.min_points;
  if (f.epsilon) c.epsilon = *f.epsilon;
  if (f.threshold_db) c.threshold_db = *f.threshold_db;
  if (f.seed) c.master_seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.repeats) c.repeats = *f.repeats;
  if (!f.k_values.empty()) c.k_values = f.k_values;
  if (!f.test_surfaces.empty()) c.test_surfaces = f.test_surfaces;
  if (!f.train_surfaces.empty()) c.train_surfaces = f.train_surfaces;
  if (!f.models.empty()) {
    std::vector<learners::ModelConfig> chosen;
    for (const auto& name : f.models) chosen.push_back(model_by_name(c, name));
    c.models = std::move(chosen);
  }
  validate(c);
  return c;
}

Dataset load(const RunConfig& c) {
  if (c.manifest.empty()) throw Error(ErrorCode::InvalidConfig, "no manifest given (--manifest or config file)");
  return load_dataset(read_manifest(c.manifest), c.columns, c.threads);
}

fs::path output_path(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.output_dir);
  return fs::path(c.output_dir) / name;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + path.string());
  body(out);
  if (!out) throw Error(ErrorCode::FileUnreadable, "failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& c) {
  const json echo = c;
  const Dataset d = load(c);
  const auto r = report::ingest_report(d, c.bin_size, c.min_points, c.threshold_db);
  write_file(output_path(c, "ingest.csv"), [&](std::ostream& out) { report::write_csv(out, r, echo); });
  write_json(output_path(c, "ingest.json"), report::to_json(r, echo));
  for (const auto& row : r.rows) {
    std::cout << row.material << '\t' << to_string(row.label) << '\t' << row.points << '\t' << row.patches << '\n';
  }
  std::cout << "total\t\t" << r.total_points << '\t' << r.total_patches << '\n';
  return 0;
}

int cmd_featurize(const RunConfig& c) {
  const json echo = c;
  const auto surfaces = evaluation::featurize_dataset(load(c), c.featurize_options(), c.threads);
  std::size_t rows = 0;
  for (const auto& s : surfaces) rows += s.features.size();
  const auto path = output_path(c, "features.csv");
  write_file(path, [&](std::ostream& out) { report::write_feature_csv(out, surfaces, echo); });
  std::cout << rows << " patches from " << surfaces.size() << " surfaces -> " << path.string() << '\n';
  return 0;
}

int cmd_evaluate_fixed(const RunConfig& c, std::size_t seeds) {
  const json echo = c;
  const auto surfaces = evaluation::featurize_dataset(load(c), c.featurize_options(), c.threads);
  const evaluation::SurfaceSplit chosen = evaluation::select_surfaces(
      evaluation::surface_catalog(surfaces), {c.test_surfaces, 0, 0, c.train_surfaces});
  const evaluation::Split split = evaluation::materialize_split(surfaces, chosen);

  // Run i trains every model with seeds derived from (master_seed, i).
  std::vector<std::vector<evaluation::RunResult>> runs(seeds);
  std::vector<learners::Model> first_models;
  for (std::size_t i = 0; i < seeds; ++i) {
    runs[i] = evaluation::evaluate_split(split, c.models, derive_seed(c.master_seed, {i}), c.threads,
                                         i == 0 ? &first_models : nullptr);
  }

  json models = json::array();
  for (std::size_t m = 0; m < c.models.size(); ++m) {
    const std::string& name = c.models[m].name;
    double mean = 0.0;
    json per_seed = json::array();
    for (std::size_t i = 0; i < seeds; ++i) {
      mean += runs[i][m].accuracy;
      per_seed.push_back(report::to_json(runs[i][m], i == 0));
    }
    mean /= static_cast<double>(seeds);
    models.push_back({{"model", name}, {"mean_accuracy", mean}, {"runs", per_seed}});

    const auto& first = runs[0][m];
    const auto curve = evaluation::pr_curve(first.truth, first.p_semi);
    write_file(output_path(c, "pr_" + name + ".csv"), [&](std::ostream& out) { report::write_csv(out, curve, echo); });
    json model_json = learners::model_to_json(first_models[m]);
    model_json["run_config"] = echo;
    write_json(output_path(c, "model_" + name + ".json"), model_json);

    const auto& cm = first.confusion.counts;
    std::cout << name << "\taccuracy " << mean << "\tconfusion [[" << cm[0][0] << ',' << cm[0][1] << "],[" << cm[1][0] << ','
              << cm[1][1] << "]]\n";
  }
  write_json(output_path(c, "fixed.json"),
             {{"config", echo}, {"train_surfaces", chosen.train}, {"test_surfaces", chosen.test}, {"seeds", seeds}, {"models", models}});
  return 0;
}

int cmd_evaluate_sweep(const RunConfig& c) {
  const json echo = c;
  const auto surfaces = evaluation::featurize_dataset(load(c), c.featurize_options(), c.threads);
  evaluation::SweepOptions o;
  o.k_values = c.k_values;
  o.repeats = c.repeats;
  o.single_class = c.single_class;
  o.master_seed = c.master_seed;
  o.test_surfaces = c.test_surfaces;
  o.threads = c.threads;
  const auto r = evaluation::sweep(surfaces, o, c.models);
  write_json(output_path(c, "sweep.json"), report::to_json(r, echo));
  write_file(output_path(c, "sweep.csv"), [&](std::ostream& out) { report::write_csv(out, r, echo); });
  for (const auto& cell : r.cells) {
    std::cout << "k=" << cell.k << '\t' << cell.model << "\tmax " << cell.max << "\tmean " << cell.mean << "\tstd "
              << cell.std_dev << '\n';
  }
  return 0;
}

int cmd_scatter_map(const RunConfig& c, const std::string& model_file, const std::vector<std::string>& materials,
                    const std::vector<std::string>& scans, const std::string& intensity_mode) {
  const json echo = c;
  std::ifstream in(model_file);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot open model " + model_file);
  json model_json;
  try {
    model_json = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidModel, model_file + ": " + e.what());
  }
  const learners::Model model = learners::model_from_json(model_json);

  Dataset d;
  if (!scans.empty()) {
    const IntensityMode mode = intensity_mode_from_string(intensity_mode);
    for (const auto& path : scans) {
      ManifestEntry e;
      e.material = fs::path(path).stem().string();
      e.path = path;
      e.canonical_class = SurfaceClass::Unlabeled;
      e.intensity_mode = mode;
      d.scans.push_back(load_scan(e, c.columns));
    }
  } else {
    Dataset all = load(c);
    if (materials.empty()) {
      d = std::move(all);
    } else {
      for (const auto& name : materials) {
        const SurfaceScan* s = all.find(name);
        if (s == nullptr) throw Error(ErrorCode::InvalidArgument, "unknown material '" + name + "'");
        d.scans.push_back(*s);
      }
    }
  }
  const auto surfaces = evaluation::featurize_dataset(d, c.featurize_options(), c.threads);
  const auto map = evaluation::build_scatter_map(surfaces, model);
  const auto path = output_path(c, "scatter_map.csv");
  write_file(path, [&](std::ostream& out) { report::write_csv(out, map, echo); });
  std::size_t semi = 0;
  for (const auto& r : map.records) semi += r.predicted == SurfaceClass::SemiSpecular;
  std::cout << map.records.size() << " patches, " << semi << " semi-specular -> " << path.string() << '\n';
  return 0;
}

int cmd_synth(const RunConfig& c, const std::string& spec_file) {
  std::ifstream in(spec_file);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot open spec " + spec_file);
  json spec_json;
  try {
    spec_json = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, spec_file + ": " + e.what());
  }
  // One spec object, or an array of them (which also yields a manifest).
  const bool many = spec_json.is_array();
  std::vector<SyntheticSurfaceSpec> specs;
  try {
    if (many) {
      for (const auto& j : spec_json) specs.push_back(j.get<SyntheticSurfaceSpec>());
    } else {
      specs.push_back(spec_json.get<SyntheticSurfaceSpec>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  for (const auto& s : specs) validate(s);

  json manifest = json::array();
  for (const auto& spec : specs) {
    const SurfaceScan scan = generate_scan(spec, c.threshold_db);
    const json spec_echo = spec;
    const auto csv = output_path(c, spec.material_name + ".csv");
    write_file(csv, [&](std::ostream& out) {
      out << "# spec: " << spec_echo.dump() << '\n';
      write_point_csv(out, scan, c.columns);
    });
    write_json(output_path(c, spec.material_name + ".json"),
               {{"spec", spec_echo},
                {"class", to_string(scan.canonical_class)},
                {"surface_specularity_db", surface_specularity(scan)},
                {"threshold_db", c.threshold_db},
                {"points", scan.points.size()},
                {"csv", csv.filename().string()}});
    manifest.push_back({{"material", spec.material_name},
                        {"path", csv.filename().string()},
                        {"class", to_string(scan.canonical_class)},
                        {"intensity_mode", "identity"}});
    std::cout << spec.material_name << '\t' << to_string(scan.canonical_class) << '\t' << scan.points.size() << " points -> "
              << csv.string() << '\n';
  }
  if (many) write_json(output_path(c, "manifest.json"), manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR surface reflectivity classification pipeline"};
  app.require_subcommand(1);
  Flags flags;

  auto* ingest = app.add_subcommand("ingest", "load a dataset and report point and patch counts");
  add_common_flags(ingest, flags);

  auto* featurize = app.add_subcommand("featurize", "write one feature row per retained patch");
  add_common_flags(featurize, flags);

  auto* evaluate = app.add_subcommand("evaluate", "fixed-split experiment or leave-surface-out k-sweep");
  add_common_flags(evaluate, flags);
  std::string split_mode = "sweep";
  std::size_t seeds = 1;
  evaluate->add_option("--split", split_mode, "fixed | sweep")->check(CLI::IsMember({"fixed", "sweep"}));
  evaluate->add_option("--k", flags.k_values, "training-surface counts for the sweep")->delimiter(',');
  evaluate->add_option("--repeats", flags.repeats, "repetitions per k");
  evaluate->add_option("--models", flags.models, "forest,boosted,mlp,oracle,constant or names from the config")
      ->delimiter(',');
  evaluate->add_option("--test-surfaces", flags.test_surfaces, "held-out materials (2 per class)")->delimiter(',');
  evaluate->add_option("--train-surfaces", flags.train_surfaces, "training materials for --split fixed")->delimiter(',');
  evaluate->add_option("--seeds", seeds, "fixed split: number of seeds to average")->check(CLI::PositiveNumber);

  auto* scatter = app.add_subcommand("scatter-map", "per-patch predictions with 3-D patch centers");
  add_common_flags(scatter, flags);
  std::string model_file;
  std::vector<std::string> materials, scans;
  std::string intensity_mode = "identity";
  scatter->add_option("--model", model_file, "trained model JSON")->required();
  scatter->add_option("--material", materials, "materials from the manifest (default: all)")->delimiter(',');
  scatter->add_option("--scan", scans, "point CSV files instead of a manifest");
  scatter->add_option("--intensity-mode", intensity_mode, "identity | db (for --scan)");

  auto* synth = app.add_subcommand("synth", "generate synthetic scans with a ground-truth sidecar");
  add_common_flags(synth, flags);
  std::string spec_file;
  synth->add_option("--spec", spec_file, "surface spec JSON (object or array)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const RunConfig config = resolve(flags);
    if (*ingest) return cmd_ingest(config);
    if (*featurize) return cmd_featurize(config);
    if (*evaluate) {
      const bool sweep_flags = !flags.k_values.empty() || flags.repeats.has_value();
      if (split_mode == "fixed") {
        if (sweep_flags) throw Error(ErrorCode::InvalidConfig, "--k/--repeats apply to the sweep, not --split fixed");
        return cmd_evaluate_fixed(config, seeds);
      }
      return cmd_evaluate_sweep(config);
    }
    if (*scatter) return cmd_scatter_map(config, model_file, materials, scans, intensity_mode);
    if (*synth) return cmd_synth(config, spec_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
