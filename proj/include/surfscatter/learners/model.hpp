#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfscatter/error.hpp"
#include "surfscatter/learners/gradient_boosting.hpp"
#include "surfscatter/learners/mlp.hpp"
#include "surfscatter/learners/random_forest.hpp"
#include "surfscatter/learners/standardizer.hpp"
#include "surfscatter/types.hpp"

namespace surfscatter::learners {

inline constexpr int kModelFormatVersion = 1;

/// Reference predictors for tests and pipeline checks: the oracle echoes the
/// true label, the constant model always predicts one class.
struct BaselineConfig {
  bool oracle = true;
  SurfaceClass constant_class = SurfaceClass::LowSpecular;
};

using ModelParams = std::variant<ForestConfig, BoostConfig, MlpConfig, BaselineConfig>;

struct ModelConfig {
  std::string name;
  ModelParams params;
};

inline std::string_view kind_name(const ModelParams& p) {
  switch (p.index()) {
    case 0: return "forest";
    case 1: return "boosted";
    case 2: return "mlp";
    default: return std::get<BaselineConfig>(p).oracle ? "oracle" : "constant";
  }
}

/// The three classifiers with their tuned defaults.
inline std::vector<ModelConfig> default_model_configs() {
  return {{"forest", ForestConfig{}}, {"boosted", BoostConfig{}}, {"mlp", MlpConfig{}}};
}

/// Config for a kind name: forest | boosted | mlp | oracle | constant.
inline ModelConfig model_config_for(std::string_view kind) {
  if (kind == "forest") return {"forest", ForestConfig{}};
  if (kind == "boosted") return {"boosted", BoostConfig{}};
  if (kind == "mlp") return {"mlp", MlpConfig{}};
  if (kind == "oracle") return {"oracle", BaselineConfig{true, SurfaceClass::LowSpecular}};
  if (kind == "constant") return {"constant", BaselineConfig{false, SurfaceClass::LowSpecular}};
  throw Error(ErrorCode::InvalidConfig, "unknown model kind '" + std::string(kind) + "'");
}

struct MlpModel {
  MlpConfig config;
  Standardizer scaler;
  Mlp network;
  MlpTrainingReport report;
};

struct BaselineModel {
  BaselineConfig config;
  std::size_t n_features = 0;
};

using ModelImpl = std::variant<RandomForest, GradientBoostedTrees, MlpModel, BaselineModel>;

struct Model {
  std::string name;
  ModelImpl impl;

  std::size_t n_features() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, MlpModel>) {
            return m.network.input_size();
          } else {
            return m.n_features;
          }
        },
        impl);
  }
};

struct Prediction {
  std::array<double, 2> probabilities{};
  SurfaceClass label = SurfaceClass::LowSpecular;
};

/// Label = argmax of the probabilities; an exact tie goes to class 0.
inline SurfaceClass label_of(const std::array<double, 2>& p) {
  return p[1] > p[0] ? SurfaceClass::SemiSpecular : SurfaceClass::LowSpecular;
}

/// Trains one model. `seed` replaces the config's seed so that every
/// repetition of an experiment can re-seed its models. The network is the
/// only model that sees standardized inputs; its scaler is stored with it.
inline Model train_model(const ModelConfig& config, const DesignMatrix& x, std::span<const int> y, std::uint64_t seed,
                         std::size_t threads = 1) {
  Model model;
  model.name = config.name;
  std::visit(
      [&](const auto& params) {
        using T = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<T, ForestConfig>) {
          ForestConfig c = params;
          c.seed = seed;
          c.threads = threads;
          model.impl = train_random_forest(x, y, c);
        } else if constexpr (std::is_same_v<T, BoostConfig>) {
          BoostConfig c = params;
          c.seed = seed;
          model.impl = train_gbdt(x, y, c);
        } else if constexpr (std::is_same_v<T, MlpConfig>) {
          MlpConfig c = params;
          c.seed = seed;
          MlpModel m;
          m.config = c;
          m.scaler = fit_standardizer(x);
          TrainedMlp trained = train_mlp(m.scaler.apply(x), y, c);
          m.network = std::move(trained.network);
          m.report = std::move(trained.report);
          model.impl = std::move(m);
        } else {
          if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
          require_both_classes(y);
          model.impl = BaselineModel{params, x.cols()};
        }
      },
      config.params);
  return model;
}

/// Per-row class probabilities and labels. `truth` is consulted only by the
/// oracle baseline.
inline std::vector<Prediction> predict(const Model& model, const DesignMatrix& x, std::span<const SurfaceClass> truth = {}) {
  if (x.rows() > 0 && x.cols() != model.n_features()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.n_features()) + " features, got " +
                                                  std::to_string(x.cols()));
  }
  std::vector<Prediction> out(x.rows());
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MlpModel>) {
          const DesignMatrix z = m.scaler.apply(x);
          for (std::size_t i = 0; i < x.rows(); ++i) out[i].probabilities = m.network.predict_proba(z.row(i));
        } else if constexpr (std::is_same_v<T, BaselineModel>) {
          if (m.config.oracle && truth.size() != x.rows()) {
            throw Error(ErrorCode::InvalidArgument, "oracle model needs the true label of every row");
          }
          for (std::size_t i = 0; i < x.rows(); ++i) {
            const SurfaceClass c = m.config.oracle ? truth[i] : m.config.constant_class;
            if (c == SurfaceClass::Unlabeled) throw Error(ErrorCode::InvalidArgument, "oracle row without a label");
            out[i].probabilities = c == SurfaceClass::SemiSpecular ? std::array<double, 2>{0.0, 1.0} : std::array<double, 2>{1.0, 0.0};
          }
        } else {
          for (std::size_t i = 0; i < x.rows(); ++i) out[i].probabilities = m.predict_proba(x.row(i));
        }
      },
      model.impl);
  for (auto& p : out) p.label = label_of(p.probabilities);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <typename T>
void reject_unknown_keys(const nlohmann::json& j, const T& defaults, std::string_view what) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be a JSON object");
  const nlohmann::json known = defaults;
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string(what) + ": unknown field '" + key + "'");
  }
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ForestConfig& c) {
  j = {{"n_estimators", c.n_estimators},
       {"max_depth", c.max_depth},
       {"max_features", c.max_features == MaxFeatures::Sqrt ? "sqrt" : "all"},
       {"min_samples_split", c.min_samples_split},
       {"min_samples_leaf", c.min_samples_leaf},
       {"class_weight", c.class_weight_balanced ? "balanced" : "none"},
       {"bootstrap", c.bootstrap},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ForestConfig& c) {
  detail::reject_unknown_keys(j, ForestConfig{}, "forest config");
  c.n_estimators = j.value("n_estimators", c.n_estimators);
  c.max_depth = j.value("max_depth", c.max_depth);
  const std::string mf = j.value("max_features", std::string(c.max_features == MaxFeatures::Sqrt ? "sqrt" : "all"));
  if (mf != "sqrt" && mf != "all") throw Error(ErrorCode::InvalidConfig, "max_features must be sqrt or all");
  c.max_features = mf == "sqrt" ? MaxFeatures::Sqrt : MaxFeatures::All;
  c.min_samples_split = j.value("min_samples_split", c.min_samples_split);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  const std::string cw = j.value("class_weight", std::string(c.class_weight_balanced ? "balanced" : "none"));
  if (cw != "balanced" && cw != "none") throw Error(ErrorCode::InvalidConfig, "class_weight must be balanced or none");
  c.class_weight_balanced = cw == "balanced";
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.seed = j.value("seed", c.seed);
  if (c.n_estimators == 0 || c.max_depth == 0 || c.min_samples_split == 0 || c.min_samples_leaf == 0) {
    throw Error(ErrorCode::InvalidConfig, "forest counts must be positive");
  }
}

inline void to_json(nlohmann::json& j, const BoostConfig& c) {
  j = {{"n_estimators", c.n_estimators},   {"max_depth", c.max_depth},
       {"learning_rate", c.learning_rate}, {"subsample", c.subsample},
       {"colsample_bytree", c.colsample_bytree}, {"reg_alpha", c.reg_alpha},
       {"reg_lambda", c.reg_lambda},       {"gamma", c.gamma},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, BoostConfig& c) {
  detail::reject_unknown_keys(j, BoostConfig{}, "boosted config");
  c.n_estimators = j.value("n_estimators", c.n_estimators);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.subsample = j.value("subsample", c.subsample);
  c.colsample_bytree = j.value("colsample_bytree", c.colsample_bytree);
  c.reg_alpha = j.value("reg_alpha", c.reg_alpha);
  c.reg_lambda = j.value("reg_lambda", c.reg_lambda);
  c.gamma = j.value("gamma", c.gamma);
  c.seed = j.value("seed", c.seed);
  auto unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!unit(c.learning_rate) || !unit(c.subsample) || !unit(c.colsample_bytree)) {
    throw Error(ErrorCode::InvalidConfig, "learning_rate, subsample, colsample_bytree must lie in (0, 1]");
  }
  if (c.reg_alpha < 0.0 || c.reg_lambda < 0.0 || c.gamma < 0.0) throw Error(ErrorCode::InvalidConfig, "regularizers must be >= 0");
}

inline void to_json(nlohmann::json& j, const MlpConfig& c) {
  j = {{"hidden", c.hidden},
       {"dropout", c.dropout},
       {"learning_rate", c.learning_rate},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_epsilon", c.adam_epsilon},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"validation_fraction", c.validation_fraction},
       {"patience", c.patience},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, MlpConfig& c) {
  detail::reject_unknown_keys(j, MlpConfig{}, "mlp config");
  c.hidden = j.value("hidden", c.hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must lie in [0, 1)");
  if (c.batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
}

inline void to_json(nlohmann::json& j, const BaselineConfig& c) {
  j = {{"oracle", c.oracle}, {"constant_class", to_string(c.constant_class)}};
}

inline void from_json(const nlohmann::json& j, BaselineConfig& c) {
  detail::reject_unknown_keys(j, BaselineConfig{}, "baseline config");
  c.oracle = j.value("oracle", c.oracle);
  c.constant_class = surface_class_from_string(j.value("constant_class", std::string(to_string(c.constant_class))));
}

/// {"name": ..., "kind": forest|boosted|mlp|oracle|constant, "params": {...}}
inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"name", c.name}, {"kind", kind_name(c.params)}};
  std::visit([&](const auto& p) { j["params"] = p; }, c.params);
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object() || !j.contains("kind")) throw Error(ErrorCode::InvalidConfig, "model config needs a kind");
  const std::string kind = j.at("kind").get<std::string>();
  c = model_config_for(kind);
  c.name = j.value("name", c.name);
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  std::visit([&](auto& p) { p = params.get<std::decay_t<decltype(p)>>(); }, c.params);
  if (kind == "oracle" || kind == "constant") std::get<BaselineConfig>(c.params).oracle = kind == "oracle";
}

namespace detail {

template <typename Leaf, typename LeafToJson>
nlohmann::json tree_to_json(const Tree<Leaf>& tree, LeafToJson leaf_json) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : tree.nodes) {
    if (const auto* s = std::get_if<TreeSplit>(&node)) {
      nodes.push_back({{"feature", s->feature}, {"threshold", s->threshold}, {"left", s->left}, {"right", s->right}, {"gain", s->gain}});
    } else {
      nodes.push_back(leaf_json(std::get<Leaf>(node)));
    }
  }
  return nodes;
}

template <typename Leaf, typename LeafFromJson>
Tree<Leaf> tree_from_json(const nlohmann::json& nodes, std::size_t n_features, LeafFromJson leaf_from) {
  Tree<Leaf> tree;
  for (const auto& n : nodes) {
    if (n.contains("feature")) {
      TreeSplit s{n.at("feature").get<std::size_t>(), n.at("threshold").get<double>(), n.at("left").get<std::size_t>(),
                  n.at("right").get<std::size_t>(), n.at("gain").get<double>()};
      tree.nodes.emplace_back(s);
    } else {
      tree.nodes.emplace_back(leaf_from(n));
    }
  }
  if (tree.nodes.empty()) throw Error(ErrorCode::InvalidModel, "empty tree");
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (const auto* s = std::get_if<TreeSplit>(&tree.nodes[i])) {
      if (s->feature >= n_features || s->left <= i || s->right <= i || s->left >= tree.nodes.size() ||
          s->right >= tree.nodes.size() || !std::isfinite(s->threshold)) {
        throw Error(ErrorCode::InvalidModel, "malformed split node " + std::to_string(i));
      }
    }
  }
  return tree;
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model& model) {
  nlohmann::json j = {{"format_version", kModelFormatVersion}, {"name", model.name}, {"n_features", model.n_features()}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RandomForest>) {
          j["kind"] = "forest";
          j["config"] = m.config;
          auto& trees = j["trees"] = nlohmann::json::array();
          for (const auto& t : m.trees) {
            trees.push_back(detail::tree_to_json(t, [](const ClassLeaf& l) {
              return nlohmann::json{{"counts", l.weighted_counts}, {"probabilities", l.probabilities}};
            }));
          }
        } else if constexpr (std::is_same_v<T, GradientBoostedTrees>) {
          j["kind"] = "boosted";
          j["config"] = m.config;
          j["base_score"] = m.base_score;
          auto& trees = j["trees"] = nlohmann::json::array();
          for (const auto& t : m.trees) {
            trees.push_back(detail::tree_to_json(t, [](const ValueLeaf& l) {
              return nlohmann::json{{"value", l.value}, {"gradient_sum", l.gradient_sum}, {"hessian_sum", l.hessian_sum}};
            }));
          }
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          j["kind"] = "mlp";
          j["config"] = m.config;
          j["standardizer"] = {{"mean", m.scaler.mean}, {"std", m.scaler.std_dev}};
          j["layer_sizes"] = m.network.layer_sizes();
          j["parameters"] = m.network.parameters();
          j["training"] = {{"epochs_run", m.report.epochs_run},
                           {"best_epoch", m.report.best_epoch},
                           {"best_validation_loss", m.report.best_validation_loss},
                           {"warnings", m.report.warnings}};
        } else {
          j["kind"] = m.config.oracle ? "oracle" : "constant";
          j["config"] = m.config;
        }
      },
      model.impl);
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidModel, "model must be a JSON object");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::InvalidModel, "unsupported model format_version " + std::to_string(version));
    }
    Model model;
    model.name = j.value("name", std::string());
    const std::string kind = j.at("kind").get<std::string>();
    const auto n_features = j.at("n_features").get<std::size_t>();
    if (kind == "forest") {
      RandomForest f;
      f.config = j.at("config").get<ForestConfig>();
      f.n_features = n_features;
      for (const auto& t : j.at("trees")) {
        f.trees.push_back(detail::tree_from_json<ClassLeaf>(t, n_features, [](const nlohmann::json& n) {
          ClassLeaf l;
          l.weighted_counts = n.at("counts").get<std::array<double, 2>>();
          l.probabilities = n.at("probabilities").get<std::array<double, 2>>();
          return l;
        }));
      }
      if (f.trees.empty()) throw Error(ErrorCode::InvalidModel, "forest without trees");
      model.impl = std::move(f);
    } else if (kind == "boosted") {
      GradientBoostedTrees g;
      g.config = j.at("config").get<BoostConfig>();
      g.n_features = n_features;
      g.base_score = j.at("base_score").get<double>();
      for (const auto& t : j.at("trees")) {
        g.trees.push_back(detail::tree_from_json<ValueLeaf>(t, n_features, [](const nlohmann::json& n) {
          return ValueLeaf{n.at("value").get<double>(), n.at("gradient_sum").get<double>(), n.at("hessian_sum").get<double>()};
        }));
      }
      model.impl = std::move(g);
    } else if (kind == "mlp") {
      MlpModel m;
      m.config = j.at("config").get<MlpConfig>();
      m.scaler.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
      m.scaler.std_dev = j.at("standardizer").at("std").get<std::vector<double>>();
      m.network = Mlp(j.at("layer_sizes").get<std::vector<std::size_t>>(), j.at("parameters").get<std::vector<double>>());
      if (m.scaler.mean.size() != n_features || m.scaler.std_dev.size() != n_features || m.network.input_size() != n_features) {
        throw Error(ErrorCode::InvalidModel, "network/standardizer widths disagree with n_features");
      }
      if (j.contains("training")) {
        const auto& t = j.at("training");
        m.report.epochs_run = t.value("epochs_run", std::size_t{0});
        m.report.best_epoch = t.value("best_epoch", std::size_t{0});
        m.report.best_validation_loss = t.value("best_validation_loss", 0.0);
        m.report.warnings = t.value("warnings", std::vector<std::string>{});
      }
      model.impl = std::move(m);
    } else if (kind == "oracle" || kind == "constant") {
      BaselineModel b;
      b.config = j.value("config", nlohmann::json::object()).get<BaselineConfig>();
      b.config.oracle = kind == "oracle";
      b.n_features = n_features;
      model.impl = b;
    } else {
      throw Error(ErrorCode::InvalidModel, "unknown model kind '" + kind + "'");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidModel, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidModel) throw;
    throw Error(ErrorCode::InvalidModel, e.what());
  }
}

}  // namespace surfscatter::learners
