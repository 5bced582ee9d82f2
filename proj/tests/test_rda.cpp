#include <gtest/gtest.h>

#include <cmath>

#include "fsh/rda.hpp"
#include "fsh/rng.hpp"
#include "test_util.hpp"

using namespace fsh;
using fsh::testing::make_dataset;
using fsh::testing::make_example;

namespace {

// Two Gaussian classes along axis 0; `sep` controls how easy the task is.
FeatureDataset two_class(std::uint64_t seed, double sep, std::size_t train_per, std::size_t test_per,
                         std::size_t dim = 4) {
  Rng rng(seed);
  std::vector<Example> ex;
  for (Split split : {Split::train, Split::test}) {
    const auto per = split == Split::train ? train_per : test_per;
    for (int label = 0; label < 2; ++label) {
      for (std::size_t i = 0; i < per; ++i) {
        std::vector<double> f(dim);
        for (auto& v : f) v = rng.normal();
        f[0] += label ? sep / 2 : -sep / 2;
        ex.push_back(make_example(std::string(to_string(split)) + std::to_string(label) + "-" + std::to_string(i), split,
                                  label ? "b" : "a", f));
      }
    }
  }
  return make_dataset(ex, "two_class");
}

}  // namespace

TEST(SliceSchedule, DefaultDoublingGrid) {
  EXPECT_EQ(default_schedule(64).sizes, (std::vector<std::size_t>{1, 2, 4, 8, 16, 32, 64}));
  EXPECT_EQ(default_schedule(1).sizes, (std::vector<std::size_t>{1}));
  EXPECT_EQ(default_schedule(48).sizes, (std::vector<std::size_t>{1, 2, 4, 8, 16, 32, 48}));
  EXPECT_EQ(default_schedule(3).sizes, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(default_schedule(64).seeds_per_slice, 3u);
  EXPECT_THROW(default_schedule(0), Error);
}

TEST(SliceSchedule, Validation) {
  EXPECT_THROW((SliceSchedule{{}, 3}.validate()), Error);
  EXPECT_THROW((SliceSchedule{{1, 1}, 3}.validate()), Error);
  EXPECT_THROW((SliceSchedule{{4, 2}, 3}.validate()), Error);
  EXPECT_THROW((SliceSchedule{{0, 2}, 3}.validate()), Error);
  EXPECT_THROW((SliceSchedule{{1, 2}, 0}.validate()), Error);
  EXPECT_NO_THROW((SliceSchedule{{1, 2}, 1}.validate()));
}

TEST(CurveAuc, ConstantCurveIsExact) {
  const std::vector<std::size_t> sizes{1, 2, 4, 8, 16, 32, 64};
  for (double c : {0.1, 0.3, 0.693147, 1.0 / 3.0, 2.0}) {
    const std::vector<double> losses(sizes.size(), c);
    EXPECT_EQ(curve_auc(sizes, losses, AucMode::mean), c);
    EXPECT_NEAR(curve_auc(sizes, losses, AucMode::trapezoid_log), c, 1e-15);
  }
}

TEST(CurveAuc, UniformMean) {
  const std::vector<std::size_t> sizes{1, 2, 4};
  const std::vector<double> losses{1.0, 0.5, 0.25};
  EXPECT_NEAR(curve_auc(sizes, losses, AucMode::mean), 0.58333, 1e-5);
  EXPECT_NEAR(curve_auc(sizes, losses, AucMode::mean), 7.0 / 12.0, 1e-15);
}

TEST(CurveAuc, TrapezoidOverLogSize) {
  const std::vector<std::size_t> sizes{1, 2, 8};
  const std::vector<double> losses{1.0, 0.5, 0.25};
  // widths 1 and 2 in log2, range 3
  const double expected = (0.5 * 1 * 1.5 + 0.5 * 2 * 0.75) / 3.0;
  EXPECT_NEAR(curve_auc(sizes, losses, AucMode::trapezoid_log), expected, 1e-15);
  const std::vector<std::size_t> one{5};
  const std::vector<double> l1{0.4};
  EXPECT_EQ(curve_auc(one, l1, AucMode::trapezoid_log), 0.4);
  EXPECT_THROW(curve_auc(sizes, l1, AucMode::mean), Error);
}

TEST(RdaScore, CurveShapeAndSampleSd) {
  const auto ds = two_class(1, 2.0, 16, 40);
  const SliceSchedule schedule{{1, 2, 4, 8}, 3};
  const auto rep = rda_score(ds, schedule, ProbeConfig{}, 7);
  ASSERT_EQ(rep.curve.size(), 4u);
  std::vector<double> means;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(rep.curve[i].slice, schedule.sizes[i]);
    EXPECT_GE(rep.curve[i].std_loss, 0.0);
    means.push_back(rep.curve[i].mean_loss);
  }
  EXPECT_EQ(rep.auc, running_mean(means));
  EXPECT_EQ(rep.auc_mode, AucMode::mean);

  const auto single = rda_score(ds, SliceSchedule{{1, 2}, 1}, ProbeConfig{}, 7);
  for (const auto& p : single.curve) EXPECT_EQ(p.std_loss, 0.0);
}

TEST(RdaScore, EasyTaskScoresBelowHardTask) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto easy = two_class(seed, 6.0, 32, 100);
    const auto hard = two_class(seed, 0.2, 32, 100);
    const auto schedule = default_schedule(32);
    const double a = rda_score(easy, schedule, ProbeConfig{}, seed).auc;
    const double b = rda_score(hard, schedule, ProbeConfig{}, seed).auc;
    EXPECT_LT(a, b) << "seed " << seed;
  }
}

// A test split that duplicates the train split is easier than the same split
// with its labels permuted.
TEST(RdaScore, DuplicatedTrainBeatsPermutedLabels) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto base = two_class(seed, 3.0, 32, 0);
    std::vector<Example> dup = base.examples, perm = base.examples;
    Rng rng(seed);
    std::vector<std::string> labels;
    for (const auto& e : base.examples) labels.push_back(e.label);
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);
    for (std::size_t i = 0; i < base.examples.size(); ++i) {
      auto t = base.examples[i];
      t.id = "copy-" + t.id;
      t.split = Split::test;
      dup.push_back(t);
      t.label = labels[i];
      perm.push_back(t);
    }
    const auto schedule = default_schedule(32);
    const double a = rda_score(make_dataset(dup), schedule, ProbeConfig{}, seed).auc;
    const double b = rda_score(make_dataset(perm), schedule, ProbeConfig{}, seed).auc;
    EXPECT_LT(a, b) << "seed " << seed;
  }
}

TEST(RdaScore, DeterministicForFixedSeed) {
  const auto ds = two_class(3, 1.0, 16, 30);
  const auto schedule = default_schedule(16);
  const auto a = rda_score(ds, schedule, ProbeConfig{}, 11);
  const auto b = rda_score(ds, schedule, ProbeConfig{}, 11);
  EXPECT_EQ(a.auc, b.auc);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].mean_loss, b.curve[i].mean_loss);
    EXPECT_EQ(a.curve[i].std_loss, b.curve[i].std_loss);
  }
  EXPECT_NE(rda_score(ds, schedule, ProbeConfig{}, 12).auc, a.auc);
}

TEST(RdaScore, TrapezoidModeUsesSameCurve) {
  const auto ds = two_class(4, 1.5, 16, 30);
  const auto schedule = default_schedule(16);
  const auto a = rda_score(ds, schedule, ProbeConfig{}, 5, AucMode::mean);
  const auto b = rda_score(ds, schedule, ProbeConfig{}, 5, AucMode::trapezoid_log);
  std::vector<double> means;
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].mean_loss, b.curve[i].mean_loss);
    means.push_back(b.curve[i].mean_loss);
  }
  EXPECT_EQ(b.auc, curve_auc(schedule.sizes, means, AucMode::trapezoid_log));
  EXPECT_EQ(b.auc_mode, AucMode::trapezoid_log);
}

TEST(RdaScore, Errors) {
  const auto ds = two_class(5, 1.0, 4, 10);
  try {
    rda_score(ds, SliceSchedule{{2, 8}, 1}, ProbeConfig{}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("slice 8"), std::string::npos) << e.what();
  }
  EXPECT_THROW(rda_score(ds, SliceSchedule{{}, 1}, ProbeConfig{}, 0), Error);
  const auto no_test = two_class(5, 1.0, 4, 0);
  EXPECT_THROW(rda_score(no_test, default_schedule(4), ProbeConfig{}, 0), Error);
}
