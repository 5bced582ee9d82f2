#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsh/data_model.hpp"
#include "fsh/error.hpp"
#include "fsh/matrix.hpp"
#include "fsh/probe.hpp"
#include "fsh/rng.hpp"
#include "fsh/spread.hpp"

/**
 * @file decomposition.hpp
 *
 * @brief Clustering-based dataset decomposition: k-means over train features,
 * one few-shot probe per cluster, and nearest-centroid routing of test
 * examples. A control condition routes each test example to a random probe.
 */

namespace fsh {

struct Clustering {
  RowMatrix centroids;                   // P x dim
  std::vector<std::size_t> assignments;  // one per clustered point, in input order
  std::vector<std::string> ids;          // ids of the clustered points, when known
  std::size_t clusters = 0;
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  std::uint64_t seed = 0;
  std::size_t best_restart = 0;
  // Inertia after every assignment step, then the final inertia, per restart.
  std::vector<std::vector<double>> inertia_traces;
};

namespace detail {

inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index r) {
  return {m.row(r).data(), static_cast<std::size_t>(m.cols())};
}

inline std::size_t nearest_centroid(std::span<const double> x, const RowMatrix& centroids, double* sq_dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, row_span(centroids, c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (sq_dist) *sq_dist = best_d;
  return best;
}

inline double assigned_inertia(const RowMatrix& points, const RowMatrix& centroids,
                               const std::vector<std::size_t>& assign) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += squared_distance(row_span(points, i),
                              row_span(centroids, static_cast<Eigen::Index>(assign[static_cast<std::size_t>(i)])));
  }
  return total;
}

/// k-means++ seeding: first centre uniform, then proportional to squared distance.
inline RowMatrix seed_centroids(const RowMatrix& points, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  RowMatrix centroids(static_cast<Eigen::Index>(k), points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      d2[i] = std::min(d2[i], squared_distance(row_span(points, ii), row_span(centroids, static_cast<Eigen::Index>(c - 1))));
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
  }
  return centroids;
}

struct LloydRun {
  RowMatrix centroids;
  std::vector<std::size_t> assign;
  std::vector<double> trace;
  std::size_t iterations = 0;
  double inertia = 0.0;
};

inline LloydRun lloyd(const RowMatrix& points, std::size_t k, std::size_t max_iter, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  LloydRun run;
  run.centroids = seed_centroids(points, k, rng);
  run.assign.assign(n, k);  // k marks "unassigned"
  std::vector<double> d2(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = nearest_centroid(row_span(points, static_cast<Eigen::Index>(i)), run.centroids, &d2[i]);
      if (c != run.assign[i]) {
        run.assign[i] = c;
        changed = true;
      }
    }
    // An empty cluster takes over the point farthest from its centre.
    std::vector<std::size_t> sizes(k, 0);
    for (auto c : run.assign) ++sizes[c];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[run.assign[i]] > 1 && (far == n || d2[i] > d2[far])) far = i;
      }
      --sizes[run.assign[far]];
      ++sizes[c];
      run.assign[far] = c;
      run.centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
      d2[far] = 0.0;
      changed = true;
    }
    double inertia = 0.0;
    for (double v : d2) inertia += v;
    run.trace.push_back(inertia);
    ++run.iterations;
    if (!changed) break;

    run.centroids.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      run.centroids.row(static_cast<Eigen::Index>(run.assign[i])) += points.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t c = 0; c < k; ++c) {
      run.centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    }
  }
  run.inertia = assigned_inertia(points, run.centroids, run.assign);
  run.trace.push_back(run.inertia);
  return run;
}

/**
 * Hartigan single-point transfers on a converged Lloyd run: move a point to
 * another cluster whenever that lowers the inertia, updating both centroids.
 * Escapes Lloyd fixed points that are not local optima under such moves. One
 * trace entry per pass that moved anything.
 */
inline void transfer_refine(const RowMatrix& points, LloydRun& run, std::size_t max_passes) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<std::size_t>(run.centroids.rows());
  std::vector<std::size_t> sizes(k, 0);
  for (auto c : run.assign) ++sizes[c];
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = run.assign[i];
      if (sizes[a] < 2) continue;
      const auto x = points.row(static_cast<Eigen::Index>(i));
      const double na = static_cast<double>(sizes[a]);
      const double leave = na / (na - 1.0) * (x - run.centroids.row(static_cast<Eigen::Index>(a))).squaredNorm();
      std::size_t target = a;
      double join = leave;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(sizes[b]);
        const double cost = nb / (nb + 1.0) * (x - run.centroids.row(static_cast<Eigen::Index>(b))).squaredNorm();
        if (cost < join) {
          join = cost;
          target = b;
        }
      }
      // Demand a relative gain well above rounding so the trace stays monotone.
      if (target == a || join >= leave * (1.0 - 1e-12)) continue;
      const double nb = static_cast<double>(sizes[target]);
      run.centroids.row(static_cast<Eigen::Index>(a)) = (na * run.centroids.row(static_cast<Eigen::Index>(a)) - x) / (na - 1.0);
      run.centroids.row(static_cast<Eigen::Index>(target)) =
          (nb * run.centroids.row(static_cast<Eigen::Index>(target)) + x) / (nb + 1.0);
      --sizes[a];
      ++sizes[target];
      run.assign[i] = target;
      moved = true;
    }
    if (!moved) break;
    // Recompute centroids exactly to drop drift from the incremental updates.
    run.centroids.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      run.centroids.row(static_cast<Eigen::Index>(run.assign[i])) += points.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t c = 0; c < k; ++c) run.centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    run.inertia = assigned_inertia(points, run.centroids, run.assign);
    run.trace.push_back(run.inertia);
  }
}

}  // namespace detail

/**
 * @brief Lloyd's algorithm with k-means++ seeding; the restart with the lowest
 * inertia wins (earliest on ties).
 *
 * Restart `r` draws from the substream ("kmeans-restart", r) of `seed`, so the
 * result is a pure function of the arguments.
 */
inline Clustering kmeans(const RowMatrix& points, std::size_t clusters, std::uint64_t seed,
                         std::size_t max_iter = 100, std::size_t restarts = 10) {
  if (clusters == 0) fail_validation("kmeans: number of clusters must be positive");
  if (static_cast<std::size_t>(points.rows()) < clusters) {
    fail_validation("kmeans: " + std::to_string(points.rows()) + " points cannot form " + std::to_string(clusters) +
                    " clusters");
  }
  if (max_iter == 0 || restarts == 0) fail_validation("kmeans: max_iter and restarts must be positive");

  Clustering best;
  best.clusters = clusters;
  best.seed = seed;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(substream(seed, "kmeans-restart", r));
    auto run = detail::lloyd(points, clusters, max_iter, rng);
    detail::transfer_refine(points, run, max_iter);
    best.inertia_traces.push_back(run.trace);
    if (run.inertia < best.inertia) {
      best.inertia = run.inertia;
      best.centroids = std::move(run.centroids);
      best.assignments = std::move(run.assign);
      best.iterations_run = run.iterations;
      best.best_restart = r;
    }
  }
  return best;
}

/// Nearest centroid; ties go to the lowest cluster index.
inline std::size_t route(std::span<const double> features, const Clustering& clustering) {
  if (features.size() != static_cast<std::size_t>(clustering.centroids.cols())) {
    fail_validation("route: feature dimension does not match the centroids");
  }
  return detail::nearest_centroid(features, clustering.centroids);
}

inline std::size_t route(const Example& example, const Clustering& clustering) {
  return route(std::span<const double>(example.features), clustering);
}

enum class RoutingMode { ours, control };

inline std::string_view to_string(RoutingMode m) { return m == RoutingMode::ours ? "ours" : "control"; }

struct DecomposeOptions {
  std::size_t clusters = 2;
  std::size_t shots = 64;
  ProbeConfig probe;
  std::uint64_t seed = 0;
  RoutingMode mode = RoutingMode::ours;
  std::size_t restarts = 10;
  std::size_t max_iter = 100;
};

struct ClusterReport {
  std::size_t cluster = 0;
  std::size_t train_members = 0;
  std::size_t test_routed = 0;
  std::size_t test_correct = 0;
  std::vector<std::string> fallback_labels;  // sampled from the whole train split
};

struct DecompositionResult {
  RoutingMode mode = RoutingMode::ours;
  double accuracy = 0.0;
  double majority = 0.0;
  double mfh = 0.0;
  Clustering clustering;  // fit on train examples; ids are train ids
  std::vector<ClusterReport> clusters;
};

/**
 * @brief Trains one probe per k-means cluster of the train split and scores
 * the routed predictions on the test split.
 *
 * Each cluster samples `shots` examples of every train label from its own
 * members; a label with too few members in the cluster is sampled from the
 * whole train split instead and listed in `fallback_labels`.
 */
inline DecompositionResult evaluate_decomposed(const FeatureDataset& ds, const DecomposeOptions& opts) {
  opts.probe.validate();
  if (opts.shots == 0) fail_validation("decompose: shots must be positive");
  const auto train = ds.indices(Split::train);
  const auto test = ds.indices(Split::test);
  if (test.empty()) fail_validation("decompose: empty test split");

  RowMatrix points(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(ds.dim));
  for (std::size_t r = 0; r < train.size(); ++r) {
    const auto& f = ds.examples[train[r]].features;
    std::copy(f.begin(), f.end(), points.row(static_cast<Eigen::Index>(r)).data());
  }

  DecompositionResult result;
  result.mode = opts.mode;
  result.clustering = kmeans(points, opts.clusters, substream(opts.seed, "kmeans"), opts.max_iter, opts.restarts);
  for (auto i : train) result.clustering.ids.push_back(ds.examples[i].id);

  const auto whole = detail::group_by_label(ds, Split::train);
  std::vector<ProbeModel> probes;
  for (std::size_t c = 0; c < opts.clusters; ++c) {
    ClusterReport rep;
    rep.cluster = c;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t r = 0; r < train.size(); ++r) {
      if (result.clustering.assignments[r] == c) members[ds.examples[train[r]].label].push_back(train[r]);
    }
    for (const auto& [label, m] : members) rep.train_members += m.size();

    Rng rng(substream(opts.seed, "decompose-sampling", c));
    std::vector<std::size_t> shots;
    for (const auto& [label, pool] : whole) {
      auto own = members.find(label);
      const bool enough = own != members.end() && own->second.size() >= opts.shots;
      const auto& source = enough ? own->second : pool;
      if (!enough) rep.fallback_labels.push_back(label);
      if (source.size() < opts.shots) {
        fail_validation("decompose: label '" + label + "' has " + std::to_string(source.size()) +
                        " train examples, " + std::to_string(opts.shots) + " shots requested");
      }
      auto drawn = detail::draw_without_replacement(source, opts.shots, rng);
      shots.insert(shots.end(), drawn.begin(), drawn.end());
    }
    std::sort(shots.begin(), shots.end());
    try {
      probes.push_back(train_probe(ds, shots, opts.probe));
    } catch (const Error& e) {
      throw Error(e.kind(), "decompose cluster " + std::to_string(c) + ": " + e.what());
    }
    result.clusters.push_back(std::move(rep));
  }

  Rng control(substream(opts.seed, "control-routing"));
  std::size_t correct = 0;
  for (auto i : test) {
    const auto& ex = ds.examples[i];
    const auto c = opts.mode == RoutingMode::ours ? route(ex, result.clustering)
                                                  : static_cast<std::size_t>(control.below(opts.clusters));
    const auto& probe = probes[c];
    const bool hit = probe.label_order[predict(probe, ex.features)] == ex.label;
    ++result.clusters[c].test_routed;
    result.clusters[c].test_correct += hit;
    correct += hit;
  }
  SplitPair whole_split;
  whole_split.train = train;
  whole_split.test = test;
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  result.majority = majority_baseline(ds, whole_split);
  result.mfh = mfh(result.accuracy, result.majority);
  return result;
}

/// Labeled matrix of Jaccard indices between two groupings of the same ids.
struct JaccardMatrix {
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
  std::vector<std::vector<double>> values;
};

/**
 * Jaccard index |A n B| / |A u B| between every group of `rows` and every group
 * of `cols`, both given as id -> group. Only ids present in both maps count.
 * `row_names`, if given, fixes the row order (and may list empty groups).
 */
inline JaccardMatrix jaccard_matrix(const std::map<std::string, std::string>& rows,
                                    const std::map<std::string, std::string>& cols,
                                    std::vector<std::string> row_names = {}) {
  std::vector<std::pair<const std::string*, const std::string*>> shared;
  for (const auto& [id, g] : rows) {
    auto it = cols.find(id);
    if (it != cols.end()) shared.emplace_back(&g, &it->second);
  }
  if (shared.empty()) fail_validation("jaccard: the two groupings share no example ids");

  JaccardMatrix out;
  std::map<std::string, std::size_t> row_size, col_size;
  for (const auto& [r, c] : shared) {
    ++row_size[*r];
    ++col_size[*c];
  }
  if (row_names.empty()) {
    for (const auto& [name, n] : row_size) row_names.push_back(name);
  }
  out.row_names = std::move(row_names);
  for (const auto& [name, n] : col_size) out.col_names.push_back(name);

  std::map<std::pair<std::string, std::string>, std::size_t> both;
  for (const auto& [r, c] : shared) ++both[{*r, *c}];
  out.values.assign(out.row_names.size(), std::vector<double>(out.col_names.size(), 0.0));
  for (std::size_t i = 0; i < out.row_names.size(); ++i) {
    auto rs = row_size.find(out.row_names[i]);
    const std::size_t a = rs == row_size.end() ? 0 : rs->second;
    for (std::size_t j = 0; j < out.col_names.size(); ++j) {
      auto hit = both.find({out.row_names[i], out.col_names[j]});
      const std::size_t inter = hit == both.end() ? 0 : hit->second;
      const std::size_t uni = a + col_size[out.col_names[j]] - inter;
      out.values[i][j] = static_cast<double>(inter) / static_cast<double>(uni);
    }
  }
  return out;
}

/// Clusters (rows, named "0".."P-1") against reference groups (columns).
inline JaccardMatrix jaccard_overlap(const Clustering& clustering, const std::map<std::string, std::string>& reference) {
  if (clustering.ids.size() != clustering.assignments.size()) {
    fail_validation("jaccard: clustering carries no example ids");
  }
  std::map<std::string, std::string> rows;
  for (std::size_t i = 0; i < clustering.ids.size(); ++i) {
    rows[clustering.ids[i]] = std::to_string(clustering.assignments[i]);
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < clustering.clusters; ++c) names.push_back(std::to_string(c));
  return jaccard_matrix(rows, reference, names);
}

/// Reads `example_id,group` CSV (header required).
inline std::map<std::string, std::string> load_reference_groups(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open reference groups '" + path.string() + "'");
  std::map<std::string, std::string> groups;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_comment_or_blank(line)) continue;
    const auto fields = detail::split_csv_line(line);
    const auto where = path.string() + " line " + std::to_string(line_no);
    if (!header) {
      if (fields != std::vector<std::string>{"example_id", "group"}) fail_validation(where + ": expected header 'example_id,group'");
      header = true;
      continue;
    }
    if (fields.size() != 2 || fields[0].empty()) fail_validation(where + ": expected 'example_id,group'");
    if (!groups.emplace(fields[0], fields[1]).second) fail_validation(where + ": duplicate id '" + fields[0] + "'");
  }
  if (!header) fail_validation(path.string() + ": missing header 'example_id,group'");
  return groups;
}

}  // namespace fsh
