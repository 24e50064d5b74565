#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "surfscatter/learners/decision_tree.hpp"
#include "surfscatter/learners/random_forest.hpp"

namespace surfscatter::learners {

struct BoostConfig {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 5;
  double learning_rate = 0.1;
  double subsample = 0.8;
  double colsample_bytree = 0.8;
  double reg_alpha = 0.1;
  double reg_lambda = 1.0;
  double gamma = 1.0;
  std::uint64_t seed = 0;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Additive logistic model: margin = base_score + learning_rate * sum of tree leaves.
struct GradientBoostedTrees {
  BoostConfig config;
  std::size_t n_features = 0;
  double base_score = 0.0;  ///< prior log-odds
  std::vector<RegressionTree> trees;

  double margin(std::span<const double> row) const {
    double m = 0.0;
    for (const auto& t : trees) m += t.leaf_for(row).value;
    return base_score + config.learning_rate * m;
  }

  std::array<double, 2> predict_proba(std::span<const double> row) const {
    const double p1 = sigmoid(margin(row));
    return {1.0 - p1, p1};
  }
};

/// L1-soft-thresholded Newton step: -sign(G) max(|G| - alpha, 0) / (H + lambda).
inline double boosting_leaf_value(double g, double h, double alpha, double lambda) {
  const double denom = h + lambda;
  if (!(denom > 0.0)) return 0.0;
  const double shrunk = std::max(std::abs(g) - alpha, 0.0);
  return g > 0.0 ? -shrunk / denom : shrunk / denom;
}

/// Structure score improvement of splitting (G, H) into (GL, HL) + (GR, HR).
inline double boosting_split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  auto score = [lambda](double g, double h) { return h + lambda > 0.0 ? g * g / (h + lambda) : 0.0; };
  return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma;
}

namespace detail {

class RegressionTreeBuilder {
 public:
  RegressionTreeBuilder(const DesignMatrix& x, std::span<const double> g, std::span<const double> h,
                        std::span<const std::size_t> features, const BoostConfig& config)
      : x_(x), g_(g), h_(h), features_(features), config_(config) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    double gsum = 0.0, hsum = 0.0;
    for (std::size_t r : rows) {
      gsum += g_[r];
      hsum += h_[r];
    }
    auto leaf = [&] {
      tree_.nodes.emplace_back(ValueLeaf{boosting_leaf_value(gsum, hsum, config_.reg_alpha, config_.reg_lambda), gsum, hsum});
      return tree_.nodes.size() - 1;
    };
    if (depth >= config_.max_depth || rows.size() < 2) return leaf();

    double best_gain = 0.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    bool found = false;
    for (std::size_t f : features_) {
      const auto order = sorted_by_feature(x_, rows, f);
      double gl = 0.0, hl = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        gl += g_[order[i]];
        hl += h_[order[i]];
        const double lo = x_(order[i], f);
        const double hi = x_(order[i + 1], f);
        if (!(lo < hi)) continue;
        const double gain = boosting_split_gain(gl, hl, gsum - gl, hsum - hl, config_.reg_lambda, config_.gamma);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = f;
          best_threshold = midpoint(lo, hi);
          found = true;
        }
      }
    }
    if (!found) return leaf();

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    const std::size_t self = tree_.nodes.size();
    tree_.nodes.emplace_back(TreeSplit{best_feature, best_threshold, 0, 0, best_gain});
    const std::size_t l = grow(std::move(left), depth + 1);
    const std::size_t r = grow(std::move(right), depth + 1);
    auto& split = std::get<TreeSplit>(tree_.nodes[self]);
    split.left = l;
    split.right = r;
    return self;
  }

  const DesignMatrix& x_;
  std::span<const double> g_;
  std::span<const double> h_;
  std::span<const std::size_t> features_;
  const BoostConfig& config_;
  RegressionTree tree_;
};

inline std::size_t sample_size(double fraction, std::size_t n) {
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
}

}  // namespace detail

/// Second-order gradient boosting on the logistic loss.
///
/// Each round computes g = p - y and h = p(1 - p) at the current margins,
/// grows one regression tree on a row subsample (without replacement) and a
/// per-tree column subsample, accepting only splits with positive regularized
/// gain. A round whose tree cannot split at all contributes nothing, so a
/// model whose gamma forbids every split predicts the prior log-odds.
inline GradientBoostedTrees train_gbdt(const DesignMatrix& x, std::span<const int> y, const BoostConfig& config) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  if (y.size() != x.rows()) throw Error(ErrorCode::DimensionMismatch, "label count does not match rows");
  require_both_classes(y);
  if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0) || !(config.subsample > 0.0 && config.subsample <= 1.0) ||
      !(config.colsample_bytree > 0.0 && config.colsample_bytree <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning_rate, subsample and colsample_bytree must lie in (0, 1]");
  }
  if (config.reg_alpha < 0.0 || config.reg_lambda < 0.0 || config.gamma < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "regularizers must be >= 0");
  }

  const std::size_t n = x.rows();
  const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  GradientBoostedTrees model;
  model.config = config;
  model.n_features = x.cols();
  model.base_score = std::log(positives / (static_cast<double>(n) - positives));

  Rng rng(config.seed);
  std::vector<double> margin(n, model.base_score), g(n), h(n);
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  const std::size_t row_count = detail::sample_size(config.subsample, n);
  const std::size_t col_count = detail::sample_size(config.colsample_bytree, x.cols());

  for (std::size_t round = 0; round < config.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      g[i] = p - static_cast<double>(y[i]);
      h[i] = p * (1.0 - p);
    }
    std::vector<std::size_t> rows = all_rows;
    if (row_count < n) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(row_count);
      std::sort(rows.begin(), rows.end());
    }
    const auto features = detail::sample_features(x.cols(), col_count, rng);

    RegressionTree tree = detail::RegressionTreeBuilder(x, g, h, features, config).build(std::move(rows));
    if (tree.split_count() == 0) continue;
    for (std::size_t i = 0; i < n; ++i) margin[i] += config.learning_rate * tree.leaf_for(x.row(i)).value;
    model.trees.push_back(std::move(tree));
  }
  return model;
}

/// Mean logistic loss of the model on (x, y).
inline double log_loss(const GradientBoostedTrees& model, const DesignMatrix& x, std::span<const int> y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double m = model.margin(x.row(i));
    // log(1 + e^m) - y m, evaluated stably.
    loss += std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m))) - static_cast<double>(y[i]) * m;
  }
  return loss / static_cast<double>(x.rows());
}

}  // namespace surfscatter::learners
