#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "surfscatter/learners/decision_tree.hpp"
#include "surfscatter/parallel.hpp"

namespace surfscatter::learners {

enum class MaxFeatures { Sqrt, All };

/// Defaults are the tuned ensemble settings used throughout the project.
struct ForestConfig {
  std::size_t n_estimators = 200;
  std::size_t max_depth = 10;
  MaxFeatures max_features = MaxFeatures::Sqrt;
  std::size_t min_samples_split = 5;
  std::size_t min_samples_leaf = 2;
  bool class_weight_balanced = true;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  ///< 0 = hardware concurrency; does not affect results
};

struct RandomForest {
  ForestConfig config;
  std::size_t n_features = 0;
  std::vector<ClassificationTree> trees;

  std::array<double, 2> predict_proba(std::span<const double> row) const {
    std::array<double, 2> p{};
    for (const auto& t : trees) {
      const auto& leaf = t.leaf_for(row);
      p[0] += leaf.probabilities[0];
      p[1] += leaf.probabilities[1];
    }
    const double total = p[0] + p[1];
    return {p[0] / total, p[1] / total};
  }
};

/// weight(c) = n / (k * n_c) for the k classes present.
inline std::vector<double> balanced_class_weights(std::span<const int> y) {
  std::array<double, 2> count{};
  for (int c : y) count[static_cast<std::size_t>(c)] += 1.0;
  const double k = (count[0] > 0) + (count[1] > 0);
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    w[i] = static_cast<double>(y.size()) / (k * count[static_cast<std::size_t>(y[i])]);
  }
  return w;
}

inline void require_both_classes(std::span<const int> y) {
  bool seen[2] = {false, false};
  for (int c : y) {
    if (c != 0 && c != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    seen[c] = true;
  }
  if (!seen[0] || !seen[1]) throw Error(ErrorCode::SingleClassTrainingSet, "training labels contain a single class");
}

/// Bagged CART ensemble. Tree i draws its bootstrap sample and feature
/// subsets from its own generator seeded by (seed, i), so the model does not
/// depend on how trees are scheduled across threads.
inline RandomForest train_random_forest(const DesignMatrix& x, std::span<const int> y, const ForestConfig& config) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  if (y.size() != x.rows()) throw Error(ErrorCode::DimensionMismatch, "label count does not match rows");
  require_both_classes(y);
  if (config.n_estimators == 0) throw Error(ErrorCode::InvalidArgument, "n_estimators must be positive");

  const std::vector<double> weights =
      config.class_weight_balanced ? balanced_class_weights(y) : std::vector<double>(y.size(), 1.0);

  TreeParams params;
  params.max_depth = config.max_depth;
  params.min_samples_split = config.min_samples_split;
  params.min_samples_leaf = config.min_samples_leaf;
  params.max_features = config.max_features == MaxFeatures::Sqrt
                            ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))))
                            : 0;

  RandomForest forest;
  forest.config = config;
  forest.n_features = x.cols();
  forest.trees.resize(config.n_estimators);
  const std::size_t n = x.rows();
  parallel_for(config.n_estimators, config.threads, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, {t}));
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (auto& r : rows) r = draw(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees[t] = train_tree_on_rows(x, y, weights, std::move(rows), params, rng);
  });
  return forest;
}

}  // namespace surfscatter::learners
