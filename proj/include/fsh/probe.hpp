#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsh/data_model.hpp"
#include "fsh/error.hpp"
#include "fsh/matrix.hpp"

/**
 * @file probe.hpp
 *
 * @brief Multinomial logistic probe on frozen features, trained by full-batch
 * gradient descent from zero weights.
 *
 * The objective is the mean cross-entropy plus (l2_penalty / 2) * |W|^2; the
 * bias is not penalized.
 */

namespace fsh {

struct ProbeConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  double l2_penalty = 1e-4;
  std::uint64_t seed = 0;
  double convergence_tol = 1e-7;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail_validation("learning_rate must be positive");
    if (epochs == 0) fail_validation("epochs must be positive");
    if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) fail_validation("l2_penalty must be nonnegative");
    if (!(convergence_tol > 0.0)) fail_validation("convergence_tol must be positive");
  }
};

/**
 * Reads `key = value` lines into `config` (keys as in ProbeConfig). Blank
 * lines and lines starting with '#' are ignored.
 */
inline ProbeConfig load_probe_config(const std::filesystem::path& path, ProbeConfig config = {}) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open probe config '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_comment_or_blank(line)) continue;
    const auto where = path.string() + " line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_validation(where + ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      if (key == "learning_rate") {
        config.learning_rate = std::stod(value, &used);
      } else if (key == "epochs") {
        config.epochs = std::stoull(value, &used);
      } else if (key == "l2_penalty") {
        config.l2_penalty = std::stod(value, &used);
      } else if (key == "seed") {
        config.seed = std::stoull(value, &used);
      } else if (key == "convergence_tol") {
        config.convergence_tol = std::stod(value, &used);
      } else {
        fail_validation(where + ": unknown key '" + key + "'");
      }
      if (used != value.size()) fail_validation(where + ": bad value '" + value + "'");
    } catch (const std::logic_error&) {
      fail_validation(where + ": bad value '" + value + "'");
    }
  }
  config.validate();
  return config;
}

struct ProbeModel {
  Eigen::MatrixXd weights;  // labels x dim
  Eigen::VectorXd bias;     // labels
  std::vector<std::string> label_order;
  std::vector<double> train_loss_trace;  // objective before each update
};

namespace detail {

/// Feature rows and label positions of a list of examples.
struct PackedExamples {
  RowMatrix x;
  std::vector<std::size_t> y;
};

inline std::size_t label_position(const std::vector<std::string>& order, const std::string& label) {
  auto it = std::lower_bound(order.begin(), order.end(), label);
  if (it == order.end() || *it != label) fail_validation("label '" + label + "' is unknown to the probe");
  return static_cast<std::size_t>(it - order.begin());
}

inline PackedExamples pack(const FeatureDataset& ds, std::span<const std::size_t> idx,
                           const std::vector<std::string>& label_order) {
  PackedExamples out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(ds.dim));
  out.y.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& ex = ds.examples[idx[r]];
    std::copy(ex.features.begin(), ex.features.end(), out.x.row(static_cast<Eigen::Index>(r)).data());
    out.y.push_back(label_position(label_order, ex.label));
  }
  return out;
}

/// Row-wise log-softmax normalizer of `logits`.
inline Eigen::VectorXd log_sum_exp(const Eigen::MatrixXd& logits) {
  const Eigen::VectorXd m = logits.rowwise().maxCoeff();
  Eigen::VectorXd lse(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    lse(r) = m(r) + std::log((logits.row(r).array() - m(r)).exp().sum());
  }
  return lse;
}

struct Objective {
  double value = 0.0;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};

inline Objective probe_objective(const PackedExamples& data, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                                 double l2_penalty) {
  const auto n = static_cast<double>(data.y.size());
  Eigen::MatrixXd logits = data.x * w.transpose();
  logits.rowwise() += b.transpose();
  const Eigen::VectorXd lse = log_sum_exp(logits);

  Objective obj;
  double ce = 0.0;
  Eigen::MatrixXd residual(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto gold = static_cast<Eigen::Index>(data.y[static_cast<std::size_t>(r)]);
    ce += lse(r) - logits(r, gold);
    residual.row(r) = (logits.row(r).array() - lse(r)).exp();
    residual(r, gold) -= 1.0;
  }
  residual /= n;
  obj.value = ce / n + 0.5 * l2_penalty * w.squaredNorm();
  obj.grad_weights = residual.transpose() * data.x + l2_penalty * w;
  obj.grad_bias = residual.colwise().sum().transpose();
  return obj;
}

inline std::vector<std::string> train_labels(const FeatureDataset& ds, std::span<const std::size_t> idx) {
  std::vector<std::string> labels;
  for (auto i : idx) labels.push_back(ds.examples[i].label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

}  // namespace detail

/// Trains on the examples at `train` (dataset indices).
inline ProbeModel train_probe(const FeatureDataset& ds, std::span<const std::size_t> train, const ProbeConfig& config) {
  config.validate();
  ProbeModel model;
  model.label_order = detail::train_labels(ds, train);
  if (model.label_order.size() < 2) {
    fail_validation("probe training needs at least 2 labels, got " + std::to_string(model.label_order.size()));
  }
  const auto data = detail::pack(ds, train, model.label_order);
  const auto k = static_cast<Eigen::Index>(model.label_order.size());
  model.weights = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(ds.dim));
  model.bias = Eigen::VectorXd::Zero(k);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto obj = detail::probe_objective(data, model.weights, model.bias, config.l2_penalty);
    if (!std::isfinite(obj.value)) {
      fail_computation("non-finite training loss at epoch " + std::to_string(epoch) +
                       " (learning rate too large?)");
    }
    model.train_loss_trace.push_back(obj.value);
    if (epoch > 0 && std::abs(model.train_loss_trace[epoch - 1] - obj.value) < config.convergence_tol) break;
    model.weights -= config.learning_rate * obj.grad_weights;
    model.bias -= config.learning_rate * obj.grad_bias;
  }
  return model;
}

inline ProbeModel train_probe(const SplitPair& split, const FeatureDataset& ds, const ProbeConfig& config) {
  return train_probe(ds, split.train, config);
}

struct ProbeEvaluation {
  double accuracy = 0.0;
  double mean_log_loss = 0.0;
};

namespace detail {

inline ProbeEvaluation evaluate_packed(const ProbeModel& model, const PackedExamples& data) {
  if (data.y.empty()) fail_validation("probe evaluation needs a non-empty test set");
  if (data.x.cols() != model.weights.cols()) fail_validation("feature dimension does not match the probe");
  Eigen::MatrixXd logits = data.x * model.weights.transpose();
  logits.rowwise() += model.bias.transpose();
  const Eigen::VectorXd lse = log_sum_exp(logits);
  std::size_t correct = 0;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto gold = static_cast<Eigen::Index>(data.y[static_cast<std::size_t>(r)]);
    Eigen::Index arg = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, arg)) arg = c;
    }
    if (arg == gold) ++correct;
    loss += lse(r) - logits(r, gold);
  }
  const auto n = static_cast<double>(data.y.size());
  return {static_cast<double>(correct) / n, loss / n};
}

}  // namespace detail

/// Accuracy (argmax ties go to the first label) and mean gold-label log loss.
inline ProbeEvaluation evaluate_probe(const ProbeModel& model, const FeatureDataset& ds,
                                      std::span<const std::size_t> test) {
  if (ds.dim != static_cast<std::size_t>(model.weights.cols())) {
    fail_validation("feature dimension does not match the probe");
  }
  return detail::evaluate_packed(model, detail::pack(ds, test, model.label_order));
}

inline ProbeEvaluation evaluate_probe(const ProbeModel& model, std::span<const Example> test) {
  detail::PackedExamples data;
  data.x.resize(static_cast<Eigen::Index>(test.size()), model.weights.cols());
  for (std::size_t r = 0; r < test.size(); ++r) {
    if (test[r].features.size() != static_cast<std::size_t>(model.weights.cols())) {
      fail_validation("feature dimension of '" + test[r].id + "' does not match the probe");
    }
    std::copy(test[r].features.begin(), test[r].features.end(), data.x.row(static_cast<Eigen::Index>(r)).data());
    data.y.push_back(detail::label_position(model.label_order, test[r].label));
  }
  return detail::evaluate_packed(model, data);
}

/// Index into `label_order` of the highest-scoring label; ties go to the first.
inline std::size_t predict(const ProbeModel& model, std::span<const double> features) {
  if (features.size() != static_cast<std::size_t>(model.weights.cols())) {
    fail_validation("feature dimension does not match the probe");
  }
  const Eigen::Map<const Eigen::VectorXd> x(features.data(), static_cast<Eigen::Index>(features.size()));
  const Eigen::VectorXd logits = model.weights * x + model.bias;
  Eigen::Index arg = 0;
  for (Eigen::Index c = 1; c < logits.size(); ++c) {
    if (logits(c) > logits(arg)) arg = c;
  }
  return static_cast<std::size_t>(arg);
}

enum class MfhMode { difference, ratio };

/// Few-shot accuracy normalized against the majority baseline.
inline double mfh(double accuracy, double majority, MfhMode mode = MfhMode::difference) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) fail_validation("accuracy must lie in [0, 1]");
  if (!(majority >= 0.0 && majority <= 1.0)) fail_validation("majority baseline must lie in [0, 1]");
  if (mode == MfhMode::difference) return accuracy - majority;
  if (majority == 0.0) fail_validation("ratio normalization needs a positive majority baseline");
  return accuracy / majority;
}

}  // namespace fsh
