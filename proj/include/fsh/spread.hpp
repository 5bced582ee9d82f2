#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsh/data_model.hpp"
#include "fsh/error.hpp"
#include "fsh/matrix.hpp"

/**
 * @file spread.hpp
 *
 * @brief Distance of test examples to their closest same-label train example,
 * and the mean of those distances over a test set.
 */

namespace fsh {

/**
 * Squared Euclidean distance, accumulated in a fixed order. The value depends
 * only on the two vectors, so minima over any superset of candidates can only
 * decrease.
 */
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t k = 0; k < 4; ++k) {
      const double d = a[i + k] - b[i + k];
      acc[k] += d * d;
    }
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[0] += d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

struct NearestTrain {
  double distance = 0.0;
  std::string nearest_id;
  std::size_t position = 0;  // index into the train list that was searched
};

/// Exhaustive scan over same-label train examples; ties go to the earliest one.
inline NearestTrain nearest_same_label_distance(const Example& query, std::span<const Example> train) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_pos = train.size();
  for (std::size_t j = 0; j < train.size(); ++j) {
    if (train[j].label != query.label) continue;
    if (train[j].features.size() != query.features.size()) {
      fail_validation("dimension mismatch between '" + query.id + "' and '" + train[j].id + "'");
    }
    const double d = squared_distance(query.features, train[j].features);
    if (d < best) {
      best = d;
      best_pos = j;
    }
  }
  if (best_pos == train.size()) fail_validation("no train example with label '" + query.label + "'");
  return {std::sqrt(best), train[best_pos].id, best_pos};
}

struct SpreadOptions {
  bool normalize = false;       // L2-normalize every feature vector first
  bool skip_unmatched = false;  // drop test examples whose label has no train example
};

struct ExampleDistance {
  std::string test_id;
  double distance = 0.0;
  std::string nearest_train_id;
};

struct SpreadReport {
  double spread = 0.0;
  std::vector<ExampleDistance> per_example;  // test-set order, skipped examples omitted
  std::vector<std::string> skipped;
  bool normalized = false;
};

namespace detail {

inline std::vector<double> l2_normalized(const std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  std::vector<double> out(v);
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : out) x *= inv;
  }
  return out;
}

/// Train examples of one label packed for blocked search.
struct LabelBlock {
  std::vector<std::size_t> members;  // dataset indices, in train-list order
  RowMatrix points;
  Eigen::VectorXd sq_norms;
  double max_sq_norm = 0.0;
};

/// Rounding bound: n*u / (1 - n*u) with u the unit roundoff.
inline double gamma_bound(std::size_t n) {
  const double u = std::numeric_limits<double>::epsilon() / 2.0;
  const double nu = static_cast<double>(n) * u;
  return nu / (1.0 - nu);
}

}  // namespace detail

/**
 * @brief Mean distance of each test example to its nearest same-label train
 * example.
 *
 * Candidates are located by the norm expansion |q|^2 + |t|^2 - 2 q.t computed
 * blockwise with a matrix product. Every train point whose expanded value lies
 * within a rigorous rounding bound of the smallest one is re-scored with
 * `squared_distance`, so the reported nearest neighbour and distance are those
 * of an exhaustive scan. The mean is accumulated in test-set order.
 */
inline SpreadReport spread(const FeatureDataset& ds, const SplitPair& split, const SpreadOptions& opts = {}) {
  if (split.test.empty()) fail_validation("spread needs a non-empty test set");

  std::vector<std::vector<double>> normalized;
  std::vector<std::size_t> slot;
  if (opts.normalize) {
    slot.assign(ds.examples.size(), 0);
    auto add = [&](std::size_t i) {
      slot[i] = normalized.size();
      normalized.push_back(detail::l2_normalized(ds.examples[i].features));
    };
    for (auto i : split.train) add(i);
    for (auto i : split.test) add(i);
  }
  auto features = [&](std::size_t i) -> std::span<const double> {
    return opts.normalize ? std::span<const double>(normalized[slot[i]])
                          : std::span<const double>(ds.examples[i].features);
  };

  const std::size_t dim = ds.dim;
  std::map<std::string, detail::LabelBlock> blocks;
  for (auto i : split.train) blocks[ds.examples[i].label].members.push_back(i);
  for (auto& [label, block] : blocks) {
    block.points.resize(static_cast<Eigen::Index>(block.members.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < block.members.size(); ++r) {
      const auto f = features(block.members[r]);
      std::copy(f.begin(), f.end(), block.points.row(static_cast<Eigen::Index>(r)).data());
    }
    block.sq_norms = block.points.rowwise().squaredNorm();
    block.max_sq_norm = block.sq_norms.size() ? block.sq_norms.maxCoeff() : 0.0;
  }

  // Group test positions by label, keeping test order inside each group.
  std::map<std::string, std::vector<std::size_t>> test_groups;
  for (std::size_t p = 0; p < split.test.size(); ++p) {
    test_groups[ds.examples[split.test[p]].label].push_back(p);
  }

  std::vector<double> sq_dist(split.test.size(), -1.0);
  std::vector<std::size_t> nearest(split.test.size(), 0);
  const double tolerance_scale = 16.0 * detail::gamma_bound(dim + 3);
  constexpr std::size_t block_rows = 256;

  for (const auto& [label, positions] : test_groups) {
    auto found = blocks.find(label);
    if (found == blocks.end()) {
      if (!opts.skip_unmatched) {
        fail_validation("test label '" + label + "' has no train example (use skip_unmatched to drop it)");
      }
      continue;
    }
    const auto& block = found->second;
    const auto n_train = static_cast<Eigen::Index>(block.members.size());

    for (std::size_t start = 0; start < positions.size(); start += block_rows) {
      const std::size_t rows = std::min(block_rows, positions.size() - start);
      RowMatrix queries(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
      for (std::size_t r = 0; r < rows; ++r) {
        const auto f = features(split.test[positions[start + r]]);
        std::copy(f.begin(), f.end(), queries.row(static_cast<Eigen::Index>(r)).data());
      }
      const Eigen::VectorXd q_norms = queries.rowwise().squaredNorm();
      const Eigen::MatrixXd dots = queries * block.points.transpose();

      for (std::size_t r = 0; r < rows; ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        double approx_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n_train; ++j) {
          approx_min = std::min(approx_min, q_norms(ri) + block.sq_norms(j) - 2.0 * dots(ri, j));
        }
        const double margin = tolerance_scale * (q_norms(ri) + block.max_sq_norm);
        const auto query = features(split.test[positions[start + r]]);
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index best_j = 0;
        for (Eigen::Index j = 0; j < n_train; ++j) {
          const double approx = q_norms(ri) + block.sq_norms(j) - 2.0 * dots(ri, j);
          if (approx > approx_min + margin) continue;
          const double d = squared_distance(query, features(block.members[static_cast<std::size_t>(j)]));
          if (d < best) {
            best = d;
            best_j = j;
          }
        }
        sq_dist[positions[start + r]] = best;
        nearest[positions[start + r]] = block.members[static_cast<std::size_t>(best_j)];
      }
    }
  }

  SpreadReport report;
  report.normalized = opts.normalize;
  double sum = 0.0;
  for (std::size_t p = 0; p < split.test.size(); ++p) {
    const auto& ex = ds.examples[split.test[p]];
    if (sq_dist[p] < 0.0) {
      report.skipped.push_back(ex.id);
      continue;
    }
    const double d = std::sqrt(sq_dist[p]);
    sum += d;
    report.per_example.push_back({ex.id, d, ds.examples[nearest[p]].id});
  }
  if (report.per_example.empty()) fail_validation("every test example was skipped; spread is undefined");
  report.spread = sum / static_cast<double>(report.per_example.size());
  return report;
}

}  // namespace fsh
