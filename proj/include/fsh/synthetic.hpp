#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsh/data_model.hpp"
#include "fsh/error.hpp"
#include "fsh/rng.hpp"

namespace fsh {

/**
 * @brief Gaussian class blobs with a displaced test distribution.
 *
 * Class means are random unit vectors. Each coordinate carries noise with
 * standard deviation overlap / sqrt(dim), so a noise vector has norm close to
 * `overlap` in any dimension. Every label's test blob is moved by
 * `test_shift` along its own random unit direction.
 */
struct SyntheticSpec {
  std::size_t n_labels = 2;
  std::size_t train_per_label = 64;
  std::size_t test_per_label = 64;
  std::size_t dim = 16;
  double test_shift = 0.0;
  double overlap = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_labels < 2) fail_validation("synthetic: n_labels must be at least 2");
    if (train_per_label == 0 || test_per_label == 0) fail_validation("synthetic: points per label must be positive");
    if (dim == 0) fail_validation("synthetic: dim must be positive");
    if (!(test_shift >= 0.0) || !std::isfinite(test_shift)) fail_validation("synthetic: test_shift must be nonnegative");
    if (!(overlap >= 0.0) || !std::isfinite(overlap)) fail_validation("synthetic: overlap must be nonnegative");
  }
};

namespace detail {

inline std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

inline std::string label_name(std::size_t l) { return "L" + std::to_string(l); }

}  // namespace detail

/// Train records come first (label-major), then test records. All random
/// draws happen in a fixed order that does not depend on `test_shift`.
inline FeatureDataset generate_synthetic(const SyntheticSpec& spec, std::string name = "synthetic") {
  spec.validate();
  Rng rng(substream(spec.seed, "synthetic"));
  std::vector<std::vector<double>> means, shifts;
  for (std::size_t l = 0; l < spec.n_labels; ++l) means.push_back(detail::random_unit(spec.dim, rng));
  for (std::size_t l = 0; l < spec.n_labels; ++l) shifts.push_back(detail::random_unit(spec.dim, rng));
  const double sigma = spec.overlap / std::sqrt(static_cast<double>(spec.dim));

  FeatureDataset ds;
  ds.name = std::move(name);
  auto emit = [&](Split split, std::size_t l, std::size_t i, double shift) {
    Example ex;
    ex.id = std::string(to_string(split)) + "-" + detail::label_name(l) + "-" + std::to_string(i);
    ex.split = split;
    ex.label = detail::label_name(l);
    ex.features.resize(spec.dim);
    for (std::size_t d = 0; d < spec.dim; ++d) {
      ex.features[d] = means[l][d] + shift * shifts[l][d] + sigma * rng.normal();
    }
    ds.examples.push_back(std::move(ex));
  };
  for (std::size_t l = 0; l < spec.n_labels; ++l) {
    for (std::size_t i = 0; i < spec.train_per_label; ++i) emit(Split::train, l, i, 0.0);
  }
  for (std::size_t l = 0; l < spec.n_labels; ++l) {
    for (std::size_t i = 0; i < spec.test_per_label; ++i) emit(Split::test, l, i, spec.test_shift);
  }
  finalize_dataset(ds);
  return ds;
}

/**
 * @brief Two well-separated feature modes whose label rules disagree.
 *
 * Mode m sits at (-1)^(m+1) * separation / 2 on axis 0. In mode 0 the label is
 * "pos" when axis 1 is positive; in mode 1 the rule is reversed, so no single
 * linear boundary fits both modes.
 */
struct ModesSpec {
  std::size_t train_per_cell = 64;  // per (mode, label)
  std::size_t test_per_cell = 64;
  std::size_t dim = 4;
  double separation = 4.0;
  double noise = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (train_per_cell == 0 || test_per_cell == 0) fail_validation("modes: points per cell must be positive");
    if (dim < 2) fail_validation("modes: dim must be at least 2");
    if (!(separation > 0.0) || !(noise >= 0.0)) fail_validation("modes: separation must be positive, noise nonnegative");
  }
};

struct ModesDataset {
  FeatureDataset dataset;
  std::map<std::string, std::string> mode_of;  // example id -> "mode0" / "mode1"
};

inline ModesDataset generate_conflicting_modes(const ModesSpec& spec, std::string name = "modes") {
  spec.validate();
  Rng rng(substream(spec.seed, "modes"));
  ModesDataset out;
  out.dataset.name = std::move(name);
  for (Split split : {Split::train, Split::test}) {
    const auto per_cell = split == Split::train ? spec.train_per_cell : spec.test_per_cell;
    for (std::size_t mode = 0; mode < 2; ++mode) {
      for (std::size_t positive = 0; positive < 2; ++positive) {
        const double axis0 = (mode == 0 ? -0.5 : 0.5) * spec.separation;
        const bool upper = (positive == 1) == (mode == 0);
        for (std::size_t i = 0; i < per_cell; ++i) {
          Example ex;
          ex.label = positive ? "pos" : "neg";
          ex.id = std::string(to_string(split)) + "-m" + std::to_string(mode) + "-" + ex.label + "-" + std::to_string(i);
          ex.split = split;
          ex.features.resize(spec.dim);
          for (std::size_t d = 0; d < spec.dim; ++d) ex.features[d] = spec.noise * rng.normal();
          ex.features[0] += axis0;
          ex.features[1] += upper ? 1.0 : -1.0;
          out.mode_of[ex.id] = "mode" + std::to_string(mode);
          out.dataset.examples.push_back(std::move(ex));
        }
      }
    }
  }
  finalize_dataset(out.dataset);
  return out;
}

}  // namespace fsh
