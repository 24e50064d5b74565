#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <variant>
#include <vector>

#include "surfscatter/error.hpp"
#include "surfscatter/matrix.hpp"
#include "surfscatter/random.hpp"

namespace surfscatter::learners {

/// Internal node: rows with x[feature] <= threshold go left.
struct TreeSplit {
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  double gain = 0.0;
};

/// Leaf of a classification tree.
struct ClassLeaf {
  std::array<double, 2> weighted_counts{};
  std::array<double, 2> probabilities{};
};

/// Leaf of a boosting tree: additive log-odds contribution (before shrinkage).
struct ValueLeaf {
  double value = 0.0;
  double gradient_sum = 0.0;
  double hessian_sum = 0.0;
};

/// Binary tree stored as a flat node array; node 0 is the root.
template <typename Leaf>
struct Tree {
  using Node = std::variant<TreeSplit, Leaf>;
  std::vector<Node> nodes;

  const Leaf& leaf_for(std::span<const double> row) const {
    std::size_t i = 0;
    for (;;) {
      const Node& node = nodes[i];
      if (const auto* leaf = std::get_if<Leaf>(&node)) return *leaf;
      const auto& split = std::get<TreeSplit>(node);
      i = row[split.feature] <= split.threshold ? split.left : split.right;
    }
  }

  std::size_t split_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return std::holds_alternative<TreeSplit>(n); }));
  }

  std::size_t depth() const { return depth_from(0); }

 private:
  std::size_t depth_from(std::size_t i) const {
    if (const auto* s = std::get_if<TreeSplit>(&nodes[i])) return 1 + std::max(depth_from(s->left), depth_from(s->right));
    return 0;
  }
};

using ClassificationTree = Tree<ClassLeaf>;
using RegressionTree = Tree<ValueLeaf>;

namespace detail {

/// Split point between two consecutive distinct sorted values. Falls back to
/// the lower value when the midpoint rounds up to the upper one.
inline double midpoint(double lo, double hi) {
  double mid = lo + (hi - lo) / 2.0;
  if (mid >= hi || !std::isfinite(mid)) mid = lo;
  return mid;
}

/// Node rows sorted by one feature; ties keep row-index order.
inline std::vector<std::size_t> sorted_by_feature(const DesignMatrix& x, std::span<const std::size_t> rows, std::size_t f) {
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
  return order;
}

/// `count` distinct features drawn uniformly from [0, d), returned ascending.
inline std::vector<std::size_t> sample_features(std::size_t d, std::size_t count, Rng& rng) {
  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), 0);
  if (count >= d) return all;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

inline double gini(const std::array<double, 2>& w) {
  const double total = w[0] + w[1];
  if (total <= 0.0) return 0.0;
  const double p0 = w[0] / total;
  const double p1 = w[1] / total;
  return 1.0 - p0 * p0 - p1 * p1;
}

}  // namespace detail

struct TreeParams {
  std::size_t max_depth = 10;
  std::size_t min_samples_split = 5;
  std::size_t min_samples_leaf = 2;
  std::size_t max_features = 0;  ///< features examined per split; 0 = all
};

namespace detail {

class ClassificationTreeBuilder {
 public:
  ClassificationTreeBuilder(const DesignMatrix& x, std::span<const int> y, std::span<const double> w,
                            const TreeParams& params, Rng& rng)
      : x_(x), y_(y), w_(w), params_(params), rng_(rng) {}

  ClassificationTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::array<double, 2> class_weights(std::span<const std::size_t> rows) const {
    std::array<double, 2> c{};
    for (std::size_t r : rows) c[static_cast<std::size_t>(y_[r])] += w_[r];
    return c;
  }

  std::size_t make_leaf(const std::array<double, 2>& counts, std::span<const std::size_t> rows) {
    ClassLeaf leaf;
    leaf.weighted_counts = counts;
    double total = counts[0] + counts[1];
    std::array<double, 2> basis = counts;
    if (total <= 0.0) {  // all-zero weights: fall back to raw counts
      basis = {};
      for (std::size_t r : rows) basis[static_cast<std::size_t>(y_[r])] += 1.0;
      total = basis[0] + basis[1];
    }
    leaf.probabilities = {basis[0] / total, basis[1] / total};
    tree_.nodes.emplace_back(leaf);
    return tree_.nodes.size() - 1;
  }

  std::size_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const auto counts = class_weights(rows);
    const bool pure = counts[0] == 0.0 || counts[1] == 0.0;
    if (depth >= params_.max_depth || rows.size() < params_.min_samples_split || pure) return make_leaf(counts, rows);

    const std::size_t d = x_.cols();
    const std::size_t k = params_.max_features == 0 ? d : std::min(params_.max_features, d);
    const auto features = sample_features(d, k, rng_);

    const double total = counts[0] + counts[1];
    const double parent = total * gini(counts);
    const double tie_tolerance = 1e-12 * std::max(total, 1.0);
    // Any admissible split beats none, even at zero gain (an XOR-like node
    // only pays off one level down).
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    bool found = false;
    const std::size_t min_leaf = std::max<std::size_t>(params_.min_samples_leaf, 1);

    for (std::size_t f : features) {
      const auto order = sorted_by_feature(x_, rows, f);
      std::array<double, 2> left{};
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left[static_cast<std::size_t>(y_[order[i]])] += w_[order[i]];
        const double lo = x_(order[i], f);
        const double hi = x_(order[i + 1], f);
        if (!(lo < hi)) continue;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf || order.size() - n_left < min_leaf) continue;
        const std::array<double, 2> right = {counts[0] - left[0], counts[1] - left[1]};
        const double wl = left[0] + left[1];
        const double wr = right[0] + right[1];
        const double gain = parent - wl * gini(left) - wr * gini(right);
        if (gain > best_gain + tie_tolerance) {
          best_gain = gain;
          best_feature = f;
          best_threshold = midpoint(lo, hi);
          found = true;
        }
      }
    }
    if (!found) return make_leaf(counts, rows);

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) (x_(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);

    const std::size_t self = tree_.nodes.size();
    tree_.nodes.emplace_back(TreeSplit{best_feature, best_threshold, 0, 0, best_gain});
    const std::size_t l = grow(std::move(left_rows), depth + 1);
    const std::size_t r = grow(std::move(right_rows), depth + 1);
    auto& split = std::get<TreeSplit>(tree_.nodes[self]);
    split.left = l;
    split.right = r;
    return self;
  }

  const DesignMatrix& x_;
  std::span<const int> y_;
  std::span<const double> w_;
  const TreeParams& params_;
  Rng& rng_;
  ClassificationTree tree_;
};

inline void check_training_inputs(const DesignMatrix& x, std::span<const int> y, std::span<const double> w) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  if (y.size() != x.rows() || w.size() != x.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "labels/weights do not match the number of rows");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw Error(ErrorCode::InvalidArgument, "sample weights must be finite and >= 0");
    sum += w[i];
  }
  if (!(sum > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample weights sum to zero");
}

}  // namespace detail

/// Greedy CART on weighted Gini impurity. Every split maximizes the weighted
/// impurity decrease over candidate thresholds at midpoints of consecutive
/// distinct values; equal gains keep the earliest (lowest feature index, then
/// lowest threshold). Growth stops at max_depth, below min_samples_split, on
/// pure nodes, or when no split leaves min_samples_leaf rows on both sides.
inline ClassificationTree train_tree(const DesignMatrix& x, std::span<const int> y, std::span<const double> sample_weights,
                                     const TreeParams& params, Rng& rng) {
  detail::check_training_inputs(x, y, sample_weights);
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return detail::ClassificationTreeBuilder(x, y, sample_weights, params, rng).build(std::move(rows));
}

/// Same, over an explicit multiset of row indices (bootstrap draws).
inline ClassificationTree train_tree_on_rows(const DesignMatrix& x, std::span<const int> y, std::span<const double> sample_weights,
                                             std::vector<std::size_t> rows, const TreeParams& params, Rng& rng) {
  detail::check_training_inputs(x, y, sample_weights);
  if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  return detail::ClassificationTreeBuilder(x, y, sample_weights, params, rng).build(std::move(rows));
}

}  // namespace surfscatter::learners
