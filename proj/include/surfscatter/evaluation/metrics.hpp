#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "surfscatter/error.hpp"
#include "surfscatter/types.hpp"

namespace surfscatter::evaluation {

/// 2x2 counts, rows = true class, columns = predicted class, both ordered
/// (LowSpecular, SemiSpecular).
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  std::size_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  std::size_t row_sum(std::size_t true_class) const { return counts[true_class][0] + counts[true_class][1]; }
  std::size_t column_sum(std::size_t predicted) const { return counts[0][predicted] + counts[1][predicted]; }
  double accuracy() const {
    const std::size_t n = total();
    return n == 0 ? 0.0 : static_cast<double>(counts[0][0] + counts[1][1]) / static_cast<double>(n);
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion_matrix(std::span<const SurfaceClass> truth, std::span<const SurfaceClass> predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorCode::DimensionMismatch, "truth and prediction lengths differ");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m.counts[static_cast<std::size_t>(class_index(truth[i]))][static_cast<std::size_t>(class_index(predicted[i]))];
  }
  return m;
}

/// Per-class scores. A ratio whose denominator is zero is reported as 0 and
/// flagged as undefined.
struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

inline std::array<ClassMetrics, 2> precision_recall_f1(const ConfusionMatrix& m) {
  std::array<ClassMetrics, 2> out;
  for (std::size_t c = 0; c < 2; ++c) {
    ClassMetrics& s = out[c];
    const auto tp = static_cast<double>(m.counts[c][c]);
    const std::size_t predicted = m.column_sum(c);
    const std::size_t actual = m.row_sum(c);
    s.support = actual;
    if (predicted == 0) {
      s.precision_undefined = true;
    } else {
      s.precision = tp / static_cast<double>(predicted);
    }
    if (actual == 0) {
      s.recall_undefined = true;
    } else {
      s.recall = tp / static_cast<double>(actual);
    }
    if (s.precision + s.recall > 0.0) {
      s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    } else {
      s.f1_undefined = true;
    }
  }
  return out;
}

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision-recall curve for the SemiSpecular class. One point per distinct
/// score, ascending; a row counts as positive when its score >= threshold.
struct PrCurve {
  std::vector<PrPoint> points;
};

inline PrCurve pr_curve(std::span<const SurfaceClass> truth, std::span<const double> p_semi) {
  if (truth.size() != p_semi.size()) throw Error(ErrorCode::DimensionMismatch, "truth and score lengths differ");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == SurfaceClass::Unlabeled) throw Error(ErrorCode::InvalidArgument, "unlabeled row in PR curve input");
    if (!(p_semi[i] >= 0.0 && p_semi[i] <= 1.0)) throw Error(ErrorCode::InvalidArgument, "scores must lie in [0, 1]");
    positives += truth[i] == SurfaceClass::SemiSpecular;
  }
  if (positives == 0 || positives == truth.size()) {
    throw Error(ErrorCode::SingleClassLabels, "PR curve needs both positive and negative rows");
  }

  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_semi[a] > p_semi[b]; });

  // Sweep from the highest score down, emitting a point after each group of
  // equal scores; then reverse into ascending-threshold order.
  PrCurve curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = p_semi[order[i]];
    for (; i < order.size() && p_semi[order[i]] == t; ++i) {
      (truth[order[i]] == SurfaceClass::SemiSpecular ? tp : fp) += 1;
    }
    curve.points.push_back({t, static_cast<double>(tp) / static_cast<double>(tp + fp),
                            static_cast<double>(tp) / static_cast<double>(positives)});
  }
  std::reverse(curve.points.begin(), curve.points.end());
  return curve;
}

/// Step-wise area under the PR curve: sum over thresholds of
/// (R_i - R_{i+1}) * P_i with R beyond the highest threshold taken as 0.
inline double average_precision(const PrCurve& curve) {
  double ap = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const double next_recall = i + 1 < curve.points.size() ? curve.points[i + 1].recall : 0.0;
    ap += (curve.points[i].recall - next_recall) * curve.points[i].precision;
  }
  return ap;
}

}  // namespace surfscatter::evaluation
