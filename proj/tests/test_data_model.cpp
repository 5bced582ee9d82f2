#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fsh/data_model.hpp"
#include "fsh/rng.hpp"
#include "test_util.hpp"

using namespace fsh;
using fsh::testing::make_dataset;
using fsh::testing::make_example;

namespace {

FeatureDataset parse(const std::string& text, const std::string& name = "d") {
  std::istringstream in(text);
  return parse_feature_dataset(in, name);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
    return e.what();
  }
  ADD_FAILURE() << "expected a validation error";
  return {};
}

std::string record(const std::string& id, const std::string& split, const std::string& label, const std::string& feats) {
  return "{\"id\":\"" + id + "\",\"split\":\"" + split + "\",\"label\":\"" + label + "\",\"features\":[" + feats + "]}\n";
}

}  // namespace

TEST(LoadFeatureDataset, MinimalFile) {
  const auto ds = parse(record("a", "train", "A", "1,2,3") + record("b", "train", "B", "4,5,6") +
                        record("c", "test", "A", "0,0,0"));
  EXPECT_EQ(ds.examples.size(), 3u);
  EXPECT_EQ(ds.dim, 3u);
  EXPECT_EQ(ds.labels, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(ds.examples[2].split, Split::test);
  EXPECT_EQ(ds.examples[1].features, (std::vector<double>{4, 5, 6}));
}

TEST(LoadFeatureDataset, DimensionMismatchNamesRecord) {
  std::string text;
  for (int i = 1; i <= 4; ++i) text += record("r" + std::to_string(i), "train", i % 2 ? "A" : "B", "1,2,3");
  text += record("r5", "train", "A", "1,2,3,4");
  EXPECT_NE(error_of(text).find("dimension mismatch at record 5"), std::string::npos);
}

TEST(LoadFeatureDataset, SchemaViolationsCarryLineNumbers) {
  const auto good = record("a", "train", "A", "1") + record("b", "train", "B", "2");
  EXPECT_NE(error_of(good + "{not json}\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of(good + "{\"id\":\"c\",\"split\":\"dev\",\"label\":\"A\",\"features\":[1]}\n").find("line 3"),
            std::string::npos);
  EXPECT_NE(error_of(good + "{\"id\":\"c\",\"split\":\"test\",\"label\":\"A\"}\n").find("features"), std::string::npos);
  EXPECT_NE(error_of(good + "{\"id\":3,\"split\":\"test\",\"label\":\"A\",\"features\":[1]}\n").find("'id'"),
            std::string::npos);
  EXPECT_NE(error_of(good + record("c", "test", "A", "1,\"x\"")).find("non-numeric"), std::string::npos);
}

TEST(LoadFeatureDataset, RejectsInvariantViolations) {
  EXPECT_NE(error_of(record("a", "train", "A", "1") + record("b", "test", "B", "2")).find("at least 2 labels"),
            std::string::npos);
  EXPECT_NE(error_of(record("a", "train", "A", "1") + record("a", "train", "B", "2")).find("duplicate id"),
            std::string::npos);
  EXPECT_NE(error_of(record("a", "train", "A", "") + record("b", "train", "B", "")).find("empty feature"),
            std::string::npos);
  EXPECT_THROW(parse(record("a", "train", "A", "1e999") + record("b", "train", "B", "2")), Error);
  EXPECT_THROW(parse(""), Error);
}

TEST(LoadFeatureDataset, NonFiniteFeatureRejected) {
  std::vector<Example> ex{make_example("a", Split::train, "A", {1.0}),
                          make_example("b", Split::train, "B", {std::nan("")})};
  EXPECT_THROW(make_dataset(ex), Error);
  ex[1].features[0] = INFINITY;
  EXPECT_THROW(make_dataset(ex), Error);
}

TEST(LoadFeatureDataset, MissingFileNamesPath) {
  try {
    load_feature_dataset("/nonexistent/features.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/features.jsonl"), std::string::npos);
  }
}

// 10,000 records of dim 1024 load; per-label counts agree with a plain
// substring scan of the same file.
TEST(LoadFeatureDataset, LargeFileCountsMatchStreamingScan) {
  const auto dir = fsh::testing::temp_dir("large_load");
  const auto path = dir / "big.jsonl";
  {
    std::ofstream out(path);
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
      out << "{\"id\":\"e" << i << "\",\"split\":\"" << (i % 5 == 0 ? "test" : "train") << "\",\"label\":\"L"
          << rng.below(7) << "\",\"features\":[";
      for (int d = 0; d < 1024; ++d) out << (d ? "," : "") << static_cast<double>((i + d) % 9) * 0.5;
      out << "]}\n";
    }
  }
  const auto ds = load_feature_dataset(path);
  EXPECT_EQ(ds.examples.size(), 10000u);
  EXPECT_EQ(ds.dim, 1024u);
  EXPECT_EQ(ds.name, "big");

  std::map<std::string, std::size_t> scanned;
  std::ifstream in(path);
  std::string line;
  const std::string key = "\"label\":\"";
  while (std::getline(in, line)) {
    const auto pos = line.find(key) + key.size();
    ++scanned[line.substr(pos, line.find('"', pos) - pos)];
  }
  std::map<std::string, std::size_t> loaded;
  for (const auto& ex : ds.examples) ++loaded[ex.label];
  EXPECT_EQ(loaded, scanned);
}

TEST(LoadFeatureDataset, WriteThenLoadRoundTripsBitwise) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Example> ex;
    const auto dim = 1 + rng.below(6);
    const auto n = 2 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> f(dim);
      for (auto& v : f) v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(40)) - 20.0);
      ex.push_back(make_example("id-" + std::to_string(i), i % 3 == 2 ? Split::test : Split::train,
                                i % 2 ? "y\"q" : "x", std::move(f)));
    }
    const auto ds = make_dataset(ex, "rt");
    std::ostringstream out;
    write_feature_dataset(out, ds);
    const auto back = parse(out.str(), "rt");
    ASSERT_EQ(back.examples.size(), ds.examples.size());
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
      EXPECT_EQ(back.examples[i].id, ds.examples[i].id);
      EXPECT_EQ(back.examples[i].label, ds.examples[i].label);
      EXPECT_EQ(back.examples[i].split, ds.examples[i].split);
      ASSERT_EQ(back.examples[i].features.size(), dim);
      EXPECT_EQ(std::memcmp(back.examples[i].features.data(), ds.examples[i].features.data(), dim * sizeof(double)), 0);
    }
  }
}

TEST(SampleFewShot, NoChoiceWithOneExamplePerLabel) {
  const auto ds = make_dataset({make_example("a", Split::train, "A", {0}), make_example("b", Split::train, "B", {1}),
                                make_example("t", Split::test, "A", {2})});
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto split = sample_few_shot(ds, 1, seed);
    EXPECT_EQ(split.train, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(split.test, (std::vector<std::size_t>{2}));
  }
}

TEST(SampleFewShot, SixtyFourShotsDeterministic) {
  const auto ds = fsh::testing::random_dataset(3, 3, 100, 10, 2);
  const auto a = sample_few_shot(ds, 64, 7);
  const auto b = sample_few_shot(ds, 64, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.train.size(), 3u * 64u);
  std::map<std::string, std::size_t> per_label;
  for (auto i : a.train) ++per_label[ds.examples[i].label];
  for (const auto& [label, n] : per_label) EXPECT_EQ(n, 64u) << label;
  EXPECT_NE(sample_few_shot(ds, 64, 8).train, a.train);
  EXPECT_EQ(a.test.size(), 30u);
}

TEST(SampleFewShot, InsufficientShotsReportsLabel) {
  const auto ds = fsh::testing::random_dataset(3, 2, 5, 1, 2);
  try {
    sample_few_shot(ds, 6, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("label 'c0' has 5 train examples, 6 shots requested"), std::string::npos);
  }
  EXPECT_THROW(sample_few_shot(ds, 0, 0), Error);
}

// Each of 100 examples should be drawn with probability shots / label_count.
TEST(SampleFewShot, InclusionFrequencyMatchesHypergeometric) {
  const auto ds = fsh::testing::random_dataset(4, 2, 50, 1, 1);
  const std::size_t shots = 3, seeds = 1000;
  std::vector<std::size_t> hits(ds.examples.size(), 0);
  for (std::size_t s = 0; s < seeds; ++s) {
    for (auto i : sample_few_shot(ds, shots, s).train) ++hits[i];
  }
  const double p = 3.0 / 50.0;
  const double mean = static_cast<double>(seeds) * p;
  const double sigma = std::sqrt(static_cast<double>(seeds) * p * (1.0 - p));
  for (auto i : ds.indices(Split::train)) {
    EXPECT_LE(std::abs(static_cast<double>(hits[i]) - mean), 3.0 * sigma) << ds.examples[i].id;
  }
}

TEST(SampleFewShot, RecordsUnmatchedTestLabels) {
  const auto ds = make_dataset({make_example("a", Split::train, "A", {0}), make_example("b", Split::train, "B", {1}),
                                make_example("t", Split::test, "C", {2})});
  EXPECT_EQ(sample_few_shot(ds, 1, 0).unmatched_labels, (std::vector<std::string>{"C"}));
}

namespace {

FeatureDataset with_test_labels(const std::vector<std::string>& labels) {
  std::vector<Example> ex{make_example("a", Split::train, "A", {0}), make_example("b", Split::train, "B", {1})};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ex.push_back(make_example("t" + std::to_string(i), Split::test, labels[i], {0}));
  }
  return make_dataset(ex);
}

}  // namespace

TEST(MajorityBaseline, Counts) {
  const auto ds = with_test_labels({"A", "A", "B"});
  EXPECT_DOUBLE_EQ(majority_baseline(ds, sample_few_shot(ds, 1, 0)), 2.0 / 3.0);
  const auto balanced = with_test_labels({"A", "B", "B", "A"});
  EXPECT_EQ(majority_baseline(balanced, sample_few_shot(balanced, 1, 0)), 0.5);
}

TEST(MajorityBaseline, RteShapedTestSet) {
  std::vector<std::string> labels(147, "entailed");
  labels.insert(labels.end(), 130, "not_entailed");
  std::vector<Example> ex{make_example("a", Split::train, "entailed", {0}),
                          make_example("b", Split::train, "not_entailed", {1})};
  for (std::size_t i = 0; i < labels.size(); ++i) ex.push_back(make_example("t" + std::to_string(i), Split::test, labels[i], {0}));
  const auto ds = make_dataset(ex);
  const double m = majority_baseline(ds, sample_few_shot(ds, 1, 0));
  EXPECT_EQ(m, 147.0 / 277.0);
  EXPECT_NEAR(m, 0.5307, 1e-4);
}

TEST(MajorityBaseline, TrainSourceScoresTrainMajorityOnTest) {
  const auto ds = make_dataset({make_example("a", Split::train, "A", {0}), make_example("b", Split::train, "B", {1}),
                                make_example("c", Split::train, "B", {1}), make_example("t0", Split::test, "A", {0}),
                                make_example("t1", Split::test, "A", {0}), make_example("t2", Split::test, "B", {0})});
  SplitPair split = fsh::testing::full_split(ds);
  EXPECT_DOUBLE_EQ(majority_baseline(ds, split, MajoritySource::test), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(majority_baseline(ds, split, MajoritySource::train), 1.0 / 3.0);
}

TEST(MajorityBaseline, AtLeastOneOverLabelCount) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = 1 + rng.below(5);
    std::vector<std::string> labels;
    std::set<std::string> distinct;
    const auto n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(std::string(1, static_cast<char>('A' + rng.below(k))));
      distinct.insert(labels.back());
    }
    const auto ds = with_test_labels(labels);
    EXPECT_GE(majority_baseline(ds, sample_few_shot(ds, 1, 0)), 1.0 / static_cast<double>(distinct.size()));
  }
}

TEST(MajorityBaseline, EmptyTestIsAnError) {
  const auto ds = with_test_labels({});
  EXPECT_THROW(majority_baseline(ds, sample_few_shot(ds, 1, 0)), Error);
}

TEST(ScoreTable, ParsesMissingEntries) {
  std::istringstream in("# produced elsewhere\ndataset,method,score\nd1,m1,0.5\nd1,m2,NA\nd2,m1,\nd2,m2,-1e-3\n");
  const auto t = parse_score_table(in);
  EXPECT_EQ(t.rows(), (std::vector<std::string>{"d1", "d2"}));
  EXPECT_EQ(t.cols(), (std::vector<std::string>{"m1", "m2"}));
  EXPECT_EQ(t.get("d1", "m1"), 0.5);
  EXPECT_FALSE(t.get("d1", "m2"));
  EXPECT_FALSE(t.get("d2", "m1"));
  EXPECT_EQ(t.get("d2", "m2"), -1e-3);
  EXPECT_FALSE(t.get("d3", "m1"));
}

TEST(ScoreTable, RejectsBadInput) {
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(parse_score_table(in), Error) << text;
  };
  bad("");
  bad("data,method,score\n");
  bad("dataset,method,score\nd1,m1\n");
  bad("dataset,method,score\nd1,m1,abc\n");
  bad("dataset,method,score\nd1,m1,1\nd1,m1,2\n");
  bad("dataset,method,score\n,m1,1\n");
}
