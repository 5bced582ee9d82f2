#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsh/data_model.hpp"
#include "fsh/error.hpp"

namespace fsh {

/// Fractional ranks starting at 1; tied values share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman's rho: Pearson correlation of the average ranks.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) fail_validation("spearman: length mismatch");
  if (xs.size() < 3) fail_validation("spearman: at least 3 paired values are required");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  // Mean rank is (n + 1) / 2 regardless of ties.
  const double mean = 0.5 * static_cast<double>(xs.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail_validation("spearman: constant input has no rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Intrinsic hardness of one dataset: the mean of its per-method scores.
inline double ifh(std::span<const double> scores) {
  if (scores.empty()) fail_validation("ifh: empty score collection");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

/**
 * @brief Symmetric matrix of pairwise rank correlations.
 *
 * A cell is empty when fewer than 3 shared observations exist or one side is
 * constant over them; `n_shared` still records the count.
 */
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> values;
  std::vector<std::vector<std::size_t>> n_shared;
};

namespace detail {

/// Spearman over rows where both columns are present; empty if undefined.
inline std::optional<double> paired_spearman(const ScoreTable& a, std::size_t col_a, const ScoreTable& b,
                                             std::size_t col_b, std::size_t& n_out) {
  std::vector<double> xs, ys;
  for (std::size_t r = 0; r < a.rows().size(); ++r) {
    const auto rb = b.row_of(a.rows()[r]);
    if (!rb) continue;
    const auto x = a.get(r, col_a);
    const auto y = b.get(*rb, col_b);
    if (x && y) {
      xs.push_back(*x);
      ys.push_back(*y);
    }
  }
  n_out = xs.size();
  if (xs.size() < 3) return std::nullopt;
  const bool x_const = std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs.front(); });
  const bool y_const = std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys.front(); });
  if (x_const || y_const) return std::nullopt;
  return spearman(xs, ys);
}

}  // namespace detail

inline CorrelationMatrix method_correlation_matrix(const ScoreTable& table) {
  const auto m = table.cols().size();
  CorrelationMatrix out;
  out.names = table.cols();
  out.values.assign(m, std::vector<std::optional<double>>(m));
  out.n_shared.assign(m, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t n = 0;
    for (std::size_t r = 0; r < table.rows().size(); ++r) n += table.get(r, i).has_value();
    out.values[i][i] = 1.0;
    out.n_shared[i][i] = n;
    for (std::size_t j = i + 1; j < m; ++j) {
      std::size_t shared = 0;
      const auto rho = detail::paired_spearman(table, i, table, j, shared);
      out.values[i][j] = out.values[j][i] = rho;
      out.n_shared[i][j] = out.n_shared[j][i] = shared;
    }
  }
  return out;
}

/// Mean of the defined off-diagonal cells; empty if there are none.
inline std::optional<double> mean_off_diagonal(const CorrelationMatrix& cm) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < cm.names.size(); ++i) {
    for (std::size_t j = i + 1; j < cm.names.size(); ++j) {
      if (cm.values[i][j]) {
        sum += *cm.values[i][j];
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/**
 * Averages cells over method categories (e.g. prompt-based vs lightweight
 * finetuning). Cell (a, b) is the mean over defined cells (i, j) with i in a,
 * j in b and i != j; methods without a category are ignored.
 */
inline CorrelationMatrix category_average(const CorrelationMatrix& cm,
                                          const std::map<std::string, std::string>& category_of) {
  std::vector<std::string> categories;
  for (const auto& name : cm.names) {
    auto it = category_of.find(name);
    if (it != category_of.end() && std::find(categories.begin(), categories.end(), it->second) == categories.end()) {
      categories.push_back(it->second);
    }
  }
  const auto c = categories.size();
  CorrelationMatrix out;
  out.names = categories;
  out.values.assign(c, std::vector<std::optional<double>>(c));
  out.n_shared.assign(c, std::vector<std::size_t>(c, 0));
  auto cat_index = [&](const std::string& method) -> std::optional<std::size_t> {
    auto it = category_of.find(method);
    if (it == category_of.end()) return std::nullopt;
    return static_cast<std::size_t>(std::find(categories.begin(), categories.end(), it->second) - categories.begin());
  };
  std::vector<std::vector<double>> sums(c, std::vector<double>(c, 0.0));
  for (std::size_t i = 0; i < cm.names.size(); ++i) {
    for (std::size_t j = 0; j < cm.names.size(); ++j) {
      if (i == j || !cm.values[i][j]) continue;
      const auto a = cat_index(cm.names[i]);
      const auto b = cat_index(cm.names[j]);
      if (!a || !b) continue;
      sums[*a][*b] += *cm.values[i][j];
      ++out.n_shared[*a][*b];
    }
  }
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = 0; b < c; ++b) {
      if (out.n_shared[a][b] > 0) out.values[a][b] = sums[a][b] / static_cast<double>(out.n_shared[a][b]);
    }
  }
  return out;
}

/// IFH per dataset row with at least `min_methods` scores (all columns if 0).
inline std::map<std::string, double> ifh_by_dataset(const ScoreTable& table, std::size_t min_methods = 0) {
  const auto need = min_methods == 0 ? table.cols().size() : min_methods;
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < table.rows().size(); ++r) {
    std::vector<double> scores;
    for (std::size_t c = 0; c < table.cols().size(); ++c) {
      if (auto v = table.get(r, c)) scores.push_back(*v);
    }
    if (!scores.empty() && scores.size() >= need) out[table.rows()[r]] = ifh(scores);
  }
  return out;
}

struct MetricCorrelation {
  double rho = 0.0;      // Spearman(metric, -IFH): positive when the metric tracks hardness
  double abs_rho = 0.0;
  std::size_t n = 0;     // datasets used
};

/**
 * Correlates a hardness metric with -IFH across datasets. Higher metric
 * values mean harder datasets; IFH grows with accuracy, hence the sign flip.
 */
inline MetricCorrelation metric_vs_ifh(const std::map<std::string, double>& metric_scores, const ScoreTable& table,
                                       std::size_t min_methods = 0) {
  const auto ifhs = ifh_by_dataset(table, min_methods);
  std::vector<double> xs, ys;
  for (const auto& [dataset, value] : metric_scores) {
    auto it = ifhs.find(dataset);
    if (it == ifhs.end()) continue;
    xs.push_back(value);
    ys.push_back(-it->second);
  }
  if (xs.size() < 3) {
    fail_validation("metric_vs_ifh: need at least 3 datasets with metric and IFH values, have " +
                    std::to_string(xs.size()));
  }
  MetricCorrelation out;
  out.rho = spearman(xs, ys);
  out.abs_rho = std::abs(out.rho);
  out.n = xs.size();
  return out;
}

struct MethodCorrelation {
  std::string method;
  std::optional<double> rho;
  std::size_t n_shared = 0;
};

/// Per shared method, Spearman of its dataset scores between two tables.
inline std::vector<MethodCorrelation> cross_model_correlation(const ScoreTable& a, const ScoreTable& b) {
  std::vector<MethodCorrelation> out;
  bool any_dataset = false;
  for (const auto& row : a.rows()) any_dataset = any_dataset || b.row_of(row).has_value();
  if (!any_dataset) fail_validation("cross_model_correlation: the tables share no datasets");
  for (std::size_t ca = 0; ca < a.cols().size(); ++ca) {
    const auto cb = b.col_of(a.cols()[ca]);
    if (!cb) continue;
    MethodCorrelation mc;
    mc.method = a.cols()[ca];
    mc.rho = detail::paired_spearman(a, ca, b, *cb, mc.n_shared);
    out.push_back(std::move(mc));
  }
  if (out.empty()) fail_validation("cross_model_correlation: the tables share no methods");
  return out;
}

struct TimingRecord {
  std::string metric;
  double wall_seconds = 0.0;
  std::string dataset;
  std::string hardware;
};

/// Wall-clock time of one end-to-end metric run. Exceptions propagate.
inline TimingRecord time_metric(const std::string& metric, const std::string& dataset,
                                const std::function<void()>& runner, std::string hardware = "cpu, single thread") {
  const auto start = std::chrono::steady_clock::now();
  runner();
  const auto stop = std::chrono::steady_clock::now();
  return {metric, std::chrono::duration<double>(stop - start).count(), dataset, std::move(hardware)};
}

}  // namespace fsh
