#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsh/data_model.hpp"
#include "fsh/error.hpp"
#include "fsh/probe.hpp"
#include "fsh/rng.hpp"

// Loss-curve hardness: mean test log-loss of probes trained on growing
// few-shot slices, summarized by the area under that curve.

namespace fsh {

struct SliceSchedule {
  std::vector<std::size_t> sizes;  // shots per label, strictly increasing
  std::size_t seeds_per_slice = 3;

  void validate() const {
    if (sizes.empty()) fail_validation("slice schedule is empty");
    if (seeds_per_slice == 0) fail_validation("seeds_per_slice must be positive");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] == 0) fail_validation("slice sizes must be positive");
      if (i > 0 && sizes[i] <= sizes[i - 1]) fail_validation("slice sizes must be strictly increasing");
    }
  }
};

/// Doubling grid 1, 2, 4, ... clamped to and always ending at `max_shots`.
inline SliceSchedule default_schedule(std::size_t max_shots) {
  if (max_shots == 0) fail_validation("max_shots must be at least 1");
  SliceSchedule schedule;
  for (std::size_t s = 1; s < max_shots; s *= 2) schedule.sizes.push_back(s);
  schedule.sizes.push_back(max_shots);
  return schedule;
}

enum class AucMode {
  mean,           // uniform weight per schedule point
  trapezoid_log,  // trapezoid over log2(size), divided by the log2 range
};

inline std::string_view to_string(AucMode m) { return m == AucMode::mean ? "mean" : "trapezoid_log"; }

struct CurvePoint {
  std::size_t slice = 0;
  double mean_loss = 0.0;
  double std_loss = 0.0;  // sample standard deviation across seeds; 0 for one seed
};

struct RdaReport {
  double auc = 0.0;
  AucMode auc_mode = AucMode::mean;
  std::vector<CurvePoint> curve;
};

/// Running mean; returns the common value exactly when all inputs are equal.
inline double running_mean(std::span<const double> xs) {
  double m = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) m += (xs[i] - m) / static_cast<double>(i + 1);
  return m;
}

/// Area under a loss curve given slice sizes and per-slice losses.
inline double curve_auc(std::span<const std::size_t> sizes, std::span<const double> losses, AucMode mode) {
  if (losses.empty() || sizes.size() != losses.size()) fail_validation("curve needs matching, non-empty sizes and losses");
  if (mode == AucMode::mean || losses.size() == 1) return running_mean(losses);
  double area = 0.0;
  for (std::size_t i = 1; i < losses.size(); ++i) {
    const double width = std::log2(static_cast<double>(sizes[i])) - std::log2(static_cast<double>(sizes[i - 1]));
    area += 0.5 * width * (losses[i] + losses[i - 1]);
  }
  return area / (std::log2(static_cast<double>(sizes.back())) - std::log2(static_cast<double>(sizes.front())));
}

/**
 * @brief Trains `seeds_per_slice` probes per slice size on independent
 * samples and averages their test log-loss.
 *
 * The sampling seed of run `k` at slice `s` is derived from `seed` alone, so
 * the report is reproducible and independent of evaluation order.
 */
inline RdaReport rda_score(const FeatureDataset& ds, const SliceSchedule& schedule, const ProbeConfig& probe,
                           std::uint64_t seed, AucMode mode = AucMode::mean) {
  schedule.validate();
  probe.validate();
  const auto test = ds.indices(Split::test);
  if (test.empty()) fail_validation("rda needs a non-empty test split");

  // Every probe is trained on all train labels; pack the test set once.
  const auto labels = detail::train_labels(ds, ds.indices(Split::train));
  const auto packed_test = detail::pack(ds, test, labels);

  RdaReport report;
  report.auc_mode = mode;
  std::vector<double> means;
  for (auto size : schedule.sizes) {
    std::vector<double> losses;
    for (std::size_t k = 0; k < schedule.seeds_per_slice; ++k) {
      const auto run_seed = substream(substream(seed, "rda-slice", size), "rda-run", k);
      SplitPair split;
      try {
        split = sample_few_shot(ds, size, run_seed);
      } catch (const Error& e) {
        throw Error(e.kind(), "rda slice " + std::to_string(size) + ": " + e.what());
      }
      try {
        const auto model = train_probe(ds, split.train, probe);
        losses.push_back(detail::evaluate_packed(model, packed_test).mean_log_loss);
      } catch (const Error& e) {
        throw Error(e.kind(), "rda slice " + std::to_string(size) + " run " + std::to_string(k) + ": " + e.what());
      }
    }
    const double mean = running_mean(losses);
    double var = 0.0;
    for (double l : losses) var += (l - mean) * (l - mean);
    const double sd = losses.size() > 1 ? std::sqrt(var / static_cast<double>(losses.size() - 1)) : 0.0;
    report.curve.push_back({size, mean, sd});
    means.push_back(mean);
  }
  report.auc = curve_auc(schedule.sizes, means, mode);
  return report;
}

}  // namespace fsh
