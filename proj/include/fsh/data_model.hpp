#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "fsh/error.hpp"
#include "fsh/rng.hpp"

/**
 * @file data_model.hpp
 *
 * @brief Labeled feature datasets, few-shot splits and score tables.
 *
 * A feature file stores one JSON object per line:
 *
 *     {"id": "ex-1", "split": "train", "label": "A", "features": [0.1, 2.0, ...]}
 *
 * A score table is a CSV file with the header `dataset,method,score`; a pair
 * that has no row, or whose score field is empty or `NA`, is missing.
 */

namespace fsh {

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct Example {
  std::string id;
  Split split = Split::train;
  std::string label;
  std::vector<double> features;
};

/**
 * @brief Immutable view of a dataset after validation.
 *
 * `labels` holds the distinct labels of all examples in lexicographic order.
 */
struct FeatureDataset {
  std::string name;
  std::size_t dim = 0;
  std::vector<Example> examples;
  std::vector<std::string> labels;

  std::vector<std::size_t> indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (examples[i].split == split) out.push_back(i);
    }
    return out;
  }
};

namespace detail {

inline std::string record_context(std::size_t record) {
  return "record " + std::to_string(record);
}

}  // namespace detail

/// Validates the dataset invariants and fills in `dim` and `labels`.
inline void finalize_dataset(FeatureDataset& ds) {
  if (ds.examples.empty()) fail_validation("dataset '" + ds.name + "' has no examples");
  ds.dim = ds.examples.front().features.size();
  std::unordered_set<std::string_view> ids;
  std::vector<std::string> labels;
  std::unordered_set<std::string_view> train_labels;
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const Example& ex = ds.examples[i];
    const auto where = detail::record_context(i + 1);
    if (ex.features.empty()) fail_validation("empty feature vector at " + where);
    if (ex.features.size() != ds.dim) fail_validation("dimension mismatch at " + where);
    for (double v : ex.features) {
      if (!std::isfinite(v)) fail_validation("non-finite feature at " + where);
    }
    if (!ids.insert(ex.id).second) fail_validation("duplicate id '" + ex.id + "' at " + where);
    labels.push_back(ex.label);
    if (ex.split == Split::train) train_labels.insert(ex.label);
  }
  if (train_labels.size() < 2) {
    fail_validation("dataset '" + ds.name + "' needs at least 2 labels in the train split, found " +
                    std::to_string(train_labels.size()));
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  ds.labels = std::move(labels);
}

inline FeatureDataset parse_feature_dataset(std::istream& in, std::string name) {
  FeatureDataset ds;
  ds.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "line " + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_validation("schema violation at " + where + ": " + e.what());
    }
    if (!rec.is_object()) fail_validation("schema violation at " + where + ": record is not an object");
    auto string_field = [&](const char* key) -> std::string {
      auto it = rec.find(key);
      if (it == rec.end() || !it->is_string()) {
        fail_validation("schema violation at " + where + ": field '" + key + "' must be a string");
      }
      return it->get<std::string>();
    };
    Example ex;
    ex.id = string_field("id");
    const auto split = string_field("split");
    if (split == "train") {
      ex.split = Split::train;
    } else if (split == "test") {
      ex.split = Split::test;
    } else {
      fail_validation("schema violation at " + where + ": split must be \"train\" or \"test\"");
    }
    ex.label = string_field("label");
    auto feats = rec.find("features");
    if (feats == rec.end() || !feats->is_array()) {
      fail_validation("schema violation at " + where + ": field 'features' must be an array");
    }
    ex.features.reserve(feats->size());
    for (const auto& v : *feats) {
      if (!v.is_number()) fail_validation("schema violation at " + where + ": non-numeric feature");
      ex.features.push_back(v.get<double>());
    }
    if (!ds.examples.empty() && ex.features.size() != ds.examples.front().features.size()) {
      fail_validation("dimension mismatch at " + detail::record_context(ds.examples.size() + 1) +
                      " (" + where + ")");
    }
    ds.examples.push_back(std::move(ex));
  }
  finalize_dataset(ds);
  return ds;
}

/// Loads a feature file; the dataset is named after the file stem.
inline FeatureDataset load_feature_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open feature file '" + path.string() + "'");
  return parse_feature_dataset(in, path.stem().string());
}

inline void write_feature_dataset(std::ostream& out, const FeatureDataset& ds) {
  for (const auto& ex : ds.examples) {
    nlohmann::json rec = {{"id", ex.id},
                          {"split", std::string(to_string(ex.split))},
                          {"label", ex.label},
                          {"features", ex.features}};
    out << rec.dump() << '\n';
  }
}

inline void write_feature_dataset(const std::filesystem::path& path, const FeatureDataset& ds) {
  std::ofstream out(path);
  if (!out) fail_validation("cannot write feature file '" + path.string() + "'");
  write_feature_dataset(out, ds);
}

/**
 * @brief A few-shot training set and the test set it is evaluated on.
 *
 * Both lists index into the dataset the split was drawn from. Test labels
 * with no train example are listed in `unmatched_labels`.
 */
struct SplitPair {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::size_t shots_per_label = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> unmatched_labels;
};

namespace detail {

inline std::map<std::string, std::vector<std::size_t>> group_by_label(const FeatureDataset& ds,
                                                                      Split split) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    if (ds.examples[i].split == split) groups[ds.examples[i].label].push_back(i);
  }
  return groups;
}

/// Draws `k` of `pool` uniformly without replacement; the result keeps pool order.
inline std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> pool, std::size_t k,
                                                         Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline std::vector<std::string> unmatched_test_labels(const FeatureDataset& ds,
                                                      const std::vector<std::size_t>& train,
                                                      const std::vector<std::size_t>& test) {
  std::unordered_set<std::string_view> have;
  for (auto i : train) have.insert(ds.examples[i].label);
  std::vector<std::string> missing;
  for (auto i : test) {
    const auto& label = ds.examples[i].label;
    if (!have.count(label) && std::find(missing.begin(), missing.end(), label) == missing.end()) {
      missing.push_back(label);
    }
  }
  std::sort(missing.begin(), missing.end());
  return missing;
}

}  // namespace detail

/**
 * @brief Samples `shots_per_label` train examples of every train label.
 *
 * Sampling is uniform without replacement within each label and depends only
 * on the dataset contents, its name, `shots_per_label` and `seed`. The test set
 * is the full test split in file order.
 */
inline SplitPair sample_few_shot(const FeatureDataset& ds, std::size_t shots_per_label, std::uint64_t seed) {
  if (shots_per_label == 0) fail_validation("shots_per_label must be positive");
  const auto groups = detail::group_by_label(ds, Split::train);
  for (const auto& [label, members] : groups) {
    if (members.size() < shots_per_label) {
      fail_validation("label '" + label + "' has " + std::to_string(members.size()) +
                      " train examples, " + std::to_string(shots_per_label) + " shots requested");
    }
  }
  Rng rng(substream(seed, "sampling/" + ds.name));
  SplitPair split;
  split.shots_per_label = shots_per_label;
  split.seed = seed;
  for (const auto& [label, members] : groups) {
    auto drawn = detail::draw_without_replacement(members, shots_per_label, rng);
    split.train.insert(split.train.end(), drawn.begin(), drawn.end());
  }
  std::sort(split.train.begin(), split.train.end());
  split.test = ds.indices(Split::test);
  split.unmatched_labels = detail::unmatched_test_labels(ds, split.train, split.test);
  return split;
}

/// Where the majority label is read from. Accuracy is always scored on test.
enum class MajoritySource { test, train };

/**
 * Accuracy on the test set of always predicting the majority label. Ties
 * between labels go to the lexicographically smallest label.
 */
inline double majority_baseline(const FeatureDataset& ds, const SplitPair& split,
                                MajoritySource source = MajoritySource::test) {
  if (split.test.empty()) fail_validation("majority baseline needs a non-empty test set");
  auto count = [&](const std::vector<std::size_t>& idx) {
    std::map<std::string, std::size_t> counts;
    for (auto i : idx) ++counts[ds.examples[i].label];
    return counts;
  };
  const auto test_counts = count(split.test);
  const auto& ref = source == MajoritySource::test ? test_counts : count(split.train);
  if (ref.empty()) fail_validation("majority baseline needs a non-empty train set");
  auto best = ref.begin();
  for (auto it = ref.begin(); it != ref.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  auto hit = test_counts.find(best->first);
  const double correct = hit == test_counts.end() ? 0.0 : static_cast<double>(hit->second);
  return correct / static_cast<double>(split.test.size());
}

/**
 * @brief (dataset x method) grid of scores with optional entries.
 *
 * Rows and columns keep first-insertion order.
 */
class ScoreTable {
public:
  const std::vector<std::string>& rows() const { return rows_; }
  const std::vector<std::string>& cols() const { return cols_; }

  std::size_t add_row(const std::string& name) { return intern(name, rows_, row_index_, true); }
  std::size_t add_col(const std::string& name) { return intern(name, cols_, col_index_, false); }

  void set(const std::string& row, const std::string& col, std::optional<double> value) {
    const auto r = add_row(row);
    const auto c = add_col(col);
    values_[r][c] = value;
  }

  std::optional<double> get(std::size_t r, std::size_t c) const { return values_[r][c]; }

  std::optional<double> get(const std::string& row, const std::string& col) const {
    auto r = row_index_.find(row);
    auto c = col_index_.find(col);
    if (r == row_index_.end() || c == col_index_.end()) return std::nullopt;
    return values_[r->second][c->second];
  }

  std::optional<std::size_t> row_of(const std::string& name) const {
    auto it = row_index_.find(name);
    return it == row_index_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  }

  std::optional<std::size_t> col_of(const std::string& name) const {
    auto it = col_index_.find(name);
    return it == col_index_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  }

private:
  std::size_t intern(const std::string& name, std::vector<std::string>& names,
                     std::unordered_map<std::string, std::size_t>& index, bool is_row) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    const auto id = names.size();
    names.push_back(name);
    index.emplace(name, id);
    if (is_row) {
      values_.emplace_back(cols_.size());
    } else {
      for (auto& row : values_) row.emplace_back();
    }
    return id;
  }

  std::vector<std::string> rows_;
  std::vector<std::string> cols_;
  std::unordered_map<std::string, std::size_t> row_index_;
  std::unordered_map<std::string, std::size_t> col_index_;
  std::vector<std::vector<std::optional<double>>> values_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

inline bool is_comment_or_blank(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace detail

/// Parses `dataset,method,score` CSV. Lines starting with '#' are ignored.
inline ScoreTable parse_score_table(std::istream& in, const std::string& source = "score table") {
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_comment_or_blank(line)) continue;
    const auto fields = detail::split_csv_line(line);
    const auto where = source + " line " + std::to_string(line_no);
    if (!saw_header) {
      if (fields != std::vector<std::string>{"dataset", "method", "score"}) {
        fail_validation(where + ": expected header 'dataset,method,score'");
      }
      saw_header = true;
      continue;
    }
    if (fields.size() != 3) fail_validation(where + ": expected 3 fields");
    if (fields[0].empty() || fields[1].empty()) fail_validation(where + ": empty dataset or method");
    if (!seen.insert(fields[0] + '\x1f' + fields[1]).second) {
      fail_validation(where + ": duplicate entry for (" + fields[0] + ", " + fields[1] + ")");
    }
    std::optional<double> value;
    if (!fields[2].empty() && fields[2] != "NA") {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[2], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[2].size() || !std::isfinite(v)) fail_validation(where + ": bad score '" + fields[2] + "'");
      value = v;
    }
    table.set(fields[0], fields[1], value);
  }
  if (!saw_header) fail_validation(source + ": missing header 'dataset,method,score'");
  return table;
}

inline ScoreTable load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_validation("cannot open score table '" + path.string() + "'");
  return parse_score_table(in, path.string());
}

}  // namespace fsh
