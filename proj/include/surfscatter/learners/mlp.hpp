#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "surfscatter/error.hpp"
#include "surfscatter/learners/random_forest.hpp"
#include "surfscatter/matrix.hpp"
#include "surfscatter/random.hpp"

namespace surfscatter::learners {

struct MlpConfig {
  std::vector<std::size_t> hidden = {64, 32};
  double dropout = 0.3;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 500;
  double validation_fraction = 0.15;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
};

/// Fully connected ReLU network with a two-way softmax head. All weights and
/// biases live in one flat parameter vector: for each layer, the out x in
/// weight matrix (row-major) followed by its out biases.
class Mlp {
 public:
  Mlp() = default;

  /// He-normal initialization for the ReLU layers, Glorot-normal for the head.
  Mlp(std::vector<std::size_t> layer_sizes, Rng& rng) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2 || sizes_.back() != 2) throw Error(ErrorCode::InvalidArgument, "network must end in 2 outputs");
    for (std::size_t s : sizes_) {
      if (s == 0) throw Error(ErrorCode::InvalidArgument, "layer sizes must be positive");
    }
    params_.assign(parameter_count(), 0.0);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double fan_in = static_cast<double>(sizes_[l]);
      const double fan_out = static_cast<double>(sizes_[l + 1]);
      const bool head = l + 2 == sizes_.size();
      const double scale = head ? std::sqrt(2.0 / (fan_in + fan_out)) : std::sqrt(2.0 / fan_in);
      const std::size_t w = weight_offset(l);
      for (std::size_t i = 0; i < sizes_[l + 1] * sizes_[l]; ++i) params_[w + i] = scale * unit(rng);
    }
  }

  Mlp(std::vector<std::size_t> layer_sizes, std::vector<double> parameters)
      : sizes_(std::move(layer_sizes)), params_(std::move(parameters)) {
    if (sizes_.size() < 2 || sizes_.back() != 2 || params_.size() != parameter_count()) {
      throw Error(ErrorCode::InvalidModel, "network parameters do not match layer sizes");
    }
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += sizes_[l + 1] * (sizes_[l] + 1);
    return n;
  }

  /// Inference pass (dropout off).
  std::array<double, 2> predict_proba(std::span<const double> row) const {
    if (row.size() != input_size()) throw Error(ErrorCode::DimensionMismatch, "row width does not match network input");
    std::vector<double> a(row.begin(), row.end());
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      a = affine(l, a);
      if (l + 2 < sizes_.size()) {
        for (double& v : a) v = std::max(v, 0.0);
      }
    }
    return softmax(a);
  }

  /// Mean cross-entropy over `batch` and its gradient (same layout as the
  /// parameters). With a generator and dropout > 0, hidden activations are
  /// dropped with inverted scaling; without one the pass is deterministic.
  double loss_and_gradient(const DesignMatrix& x, std::span<const int> y, std::span<const std::size_t> batch,
                           std::vector<double>& grad, double dropout = 0.0, Rng* rng = nullptr) const {
    grad.assign(params_.size(), 0.0);
    if (batch.empty()) return 0.0;
    const std::size_t layers = sizes_.size() - 1;
    const bool drop = rng != nullptr && dropout > 0.0;
    const double keep = 1.0 - dropout;
    std::bernoulli_distribution keep_unit(drop ? keep : 1.0);

    std::vector<std::vector<double>> act(layers + 1), pre(layers), mask(layers);
    double loss = 0.0;
    for (std::size_t r : batch) {
      act[0].assign(x.row(r).begin(), x.row(r).end());
      for (std::size_t l = 0; l < layers; ++l) {
        pre[l] = affine(l, act[l]);
        act[l + 1] = pre[l];
        if (l + 1 < layers) {
          mask[l].assign(pre[l].size(), 1.0);
          for (std::size_t j = 0; j < pre[l].size(); ++j) {
            if (drop) mask[l][j] = keep_unit(*rng) ? 1.0 / keep : 0.0;
            act[l + 1][j] = std::max(pre[l][j], 0.0) * mask[l][j];
          }
        }
      }
      const auto& logits = pre[layers - 1];
      const double top = std::max(logits[0], logits[1]);
      const double log_norm = top + std::log(std::exp(logits[0] - top) + std::exp(logits[1] - top));
      const auto target = static_cast<std::size_t>(y[r]);
      loss -= logits[target] - log_norm;

      std::vector<double> delta = {std::exp(logits[0] - log_norm), std::exp(logits[1] - log_norm)};
      delta[target] -= 1.0;
      for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = sizes_[l];
        const std::size_t out = sizes_[l + 1];
        const std::size_t w = weight_offset(l);
        const std::size_t b = w + out * in;
        for (std::size_t o = 0; o < out; ++o) {
          grad[b + o] += delta[o];
          for (std::size_t i = 0; i < in; ++i) grad[w + o * in + i] += delta[o] * act[l][i];
        }
        if (l == 0) break;
        std::vector<double> prev(in, 0.0);
        for (std::size_t i = 0; i < in; ++i) {
          if (pre[l - 1][i] <= 0.0 || mask[l - 1][i] == 0.0) continue;
          double s = 0.0;
          for (std::size_t o = 0; o < out; ++o) s += params_[w + o * in + i] * delta[o];
          prev[i] = s * mask[l - 1][i];
        }
        delta = std::move(prev);
      }
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (double& gv : grad) gv *= scale;
    return loss * scale;
  }

  /// Mean cross-entropy with dropout off.
  double loss(const DesignMatrix& x, std::span<const int> y, std::span<const std::size_t> rows) const {
    double total = 0.0;
    for (std::size_t r : rows) {
      const auto p = predict_proba(x.row(r));
      total -= std::log(std::max(p[static_cast<std::size_t>(y[r])], std::numeric_limits<double>::min()));
    }
    return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
  }

 private:
  std::size_t weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += sizes_[l + 1] * (sizes_[l] + 1);
    return off;
  }

  std::vector<double> affine(std::size_t l, const std::vector<double>& in) const {
    const std::size_t n_in = sizes_[l];
    const std::size_t n_out = sizes_[l + 1];
    const std::size_t w = weight_offset(l);
    const std::size_t b = w + n_out * n_in;
    std::vector<double> out(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double s = params_[b + o];
      for (std::size_t i = 0; i < n_in; ++i) s += params_[w + o * n_in + i] * in[i];
      out[o] = s;
    }
    return out;
  }

  static std::array<double, 2> softmax(const std::vector<double>& z) {
    const double top = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - top);
    const double e1 = std::exp(z[1] - top);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
  }

  std::vector<std::size_t> sizes_;
  std::vector<double> params_;
};

struct MlpTrainingReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  std::size_t validation_rows = 0;
  std::vector<std::string> warnings;
};

struct TrainedMlp {
  Mlp network;
  MlpTrainingReport report;
};

namespace detail {

/// Stratified holdout: round(fraction * n_c) rows of each class, at least one
/// per class when that class has two or more rows.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const int> y, double fraction,
                                                                                        Rng& rng) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);
  std::vector<std::size_t> train, valid;
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    if (fraction > 0.0 && take == 0 && rows.size() >= 2) take = 1;
    if (take >= rows.size()) take = rows.size() - 1;
    valid.insert(valid.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    train.insert(train.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(valid.begin(), valid.end());
  return {train, valid};
}

}  // namespace detail

/// Mini-batch Adam on mean cross-entropy with inverted dropout on the hidden
/// layers. A stratified validation split drives early stopping; the weights
/// with the lowest validation loss are returned. Inputs are expected to be
/// standardized already; a training column mean outside [-3, 3] only adds a
/// warning to the report.
inline TrainedMlp train_mlp(const DesignMatrix& x, std::span<const int> y, const MlpConfig& config) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
  if (y.size() != x.rows()) throw Error(ErrorCode::DimensionMismatch, "label count does not match rows");
  require_both_classes(y);
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout must lie in [0, 1)");
  if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "validation_fraction must lie in [0, 1)");
  }

  TrainedMlp result;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= static_cast<double>(x.rows());
    if (std::abs(mean) > 3.0) {
      result.report.warnings.push_back("NonStandardizedInput: feature " + std::to_string(c) + " has mean " + std::to_string(mean));
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> sizes = {x.cols()};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(2);
  Mlp net(sizes, rng);

  auto [train_rows, valid_rows] = detail::stratified_holdout(y, config.validation_fraction, rng);
  const bool early_stopping = !valid_rows.empty();
  result.report.validation_rows = valid_rows.size();

  const std::size_t n_params = net.parameter_count();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grad;
  std::vector<double> best = net.parameters();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, train_rows.size());
      const std::span<const std::size_t> batch(train_rows.data() + start, end - start);
      net.loss_and_gradient(x, y, batch, grad, config.dropout, &rng);
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto& p = net.parameters();
      for (std::size_t i = 0; i < n_params; ++i) {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        p[i] -= config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.adam_epsilon);
      }
    }
    result.report.epochs_run = epoch + 1;

    const double monitored = early_stopping ? net.loss(x, y, valid_rows) : net.loss(x, y, train_rows);
    if (monitored < best_loss) {
      best_loss = monitored;
      best = net.parameters();
      result.report.best_epoch = epoch + 1;
      since_best = 0;
    } else if (++since_best >= config.patience && early_stopping) {
      break;
    }
  }
  net.parameters() = best;
  result.report.best_validation_loss = best_loss;
  result.network = std::move(net);
  return result;
}

}  // namespace surfscatter::learners
