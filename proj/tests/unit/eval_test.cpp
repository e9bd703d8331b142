#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "convsv/common/error.hpp"
#include "convsv/common/random.hpp"
#include "convsv/eval/eval.hpp"
#include "synthetic.hpp"

namespace convsv {
namespace {

std::vector<ScoredPair> scored(std::vector<double> pos, std::vector<double> neg) {
  std::vector<ScoredPair> out;
  for (double s : pos) out.push_back(ScoredPair{.label = Label::kPositive, .score = s});
  for (double s : neg) out.push_back(ScoredPair{.label = Label::kNegative, .score = s});
  return out;
}

TEST(ScorePairs, CosineOfRows) {
  EmbeddingTable t;
  t.backend_id = "t";
  t.dim = 2;
  t.add("x", Vector{1.0, 1.0}, 5);
  t.add("y", Vector{1.0, 0.0}, 6);
  t.add("z", Vector{0.0, 1.0}, 7);
  t.add("zero", Vector{0.0, 0.0}, 5);
  std::vector<PairInstance> pairs{{"p1", "x", "x", Label::kPositive},
                                  {"p2", "y", "z", Label::kNegative},
                                  {"p3", "x", "y", Label::kNegative},
                                  {"p4", "x", "zero", Label::kNegative}};
  const auto r = score_pairs(pairs, t);
  EXPECT_DOUBLE_EQ(r.pairs[0].score, 1.0);
  EXPECT_DOUBLE_EQ(r.pairs[1].score, 0.0);
  EXPECT_NEAR(r.pairs[2].score, 0.7071067811865476, 1e-12);
  EXPECT_EQ(r.pairs[2].len_a, 5u);
  EXPECT_EQ(r.pairs[2].len_b, 6u);
  EXPECT_TRUE(r.pairs[3].degenerate);
  EXPECT_EQ(r.degenerate, 1u);
  std::vector<PairInstance> missing{{"p", "x", "nope", Label::kPositive}};
  EXPECT_THROW(score_pairs(missing, t), Error);
}

TEST(Auc, HandExamples) {
  EXPECT_EQ(compute_auc(Vector{0.9, 0.8}, Vector{0.3, 0.4}), 1.0);
  EXPECT_EQ(compute_auc(Vector{0.6, 0.4}, Vector{0.5, 0.3}), 0.75);
  EXPECT_EQ(compute_auc(Vector{0.5}, Vector{0.5}), 0.5);
  EXPECT_THROW(compute_auc(Vector{0.5}, Vector{}), Error);
}

TEST(Auc, EqualsBruteForceWithTies) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    Vector pos(1 + rng.below(60));
    Vector neg(1 + rng.below(60));
    const std::uint64_t levels = 2 + rng.below(10);
    for (auto& x : pos) x = static_cast<double>(rng.below(levels)) / 4.0;
    for (auto& x : neg) x = rng.uniform() < 0.5 ? static_cast<double>(rng.below(levels)) / 4.0
                                                : rng.normal();
    EXPECT_EQ(compute_auc(pos, neg), testing::brute_force_auc(pos, neg));
  }
}

TEST(Auc, MonotoneTransformAndLabelReversal) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Vector pos(20);
    Vector neg(25);
    for (auto& x : pos) x = rng.normal(0.5);
    for (auto& x : neg) x = rng.normal();
    const double auc = compute_auc(pos, neg);
    auto transformed = [](Vector v, auto f) {
      for (auto& x : v) x = f(x);
      return v;
    };
    auto affine = [](double x) { return 2.0 * x + 1.0; };
    auto squash = [](double x) { return std::tanh(x); };
    EXPECT_NEAR(compute_auc(transformed(pos, affine), transformed(neg, affine)), auc, 1e-12);
    EXPECT_NEAR(compute_auc(transformed(pos, squash), transformed(neg, squash)), auc, 1e-12);
    EXPECT_NEAR(compute_auc(neg, pos), 1.0 - auc, 1e-12);
  }
}

TEST(Auc, FromScoredPairs) {
  EXPECT_EQ(compute_auc(scored({0.6, 0.4}, {0.5, 0.3})), 0.75);
}

TEST(Calibrate, WidestGapMidpoint) {
  const auto dev = scored({0.9, 0.8}, {0.2, 0.1});
  const auto cal = calibrate_threshold(dev);
  EXPECT_DOUBLE_EQ(cal.threshold, 0.5);
  EXPECT_DOUBLE_EQ(cal.dev_accuracy, 1.0);
  EXPECT_EQ(cal.candidate_count, 5u);  // -inf, 0.15, 0.5, 0.85, +inf
}

TEST(Calibrate, InterleavedScoresReturnBestAchievable) {
  const auto dev = scored({0.1, 0.3, 0.5}, {0.2, 0.4, 0.6});
  const auto cal = calibrate_threshold(dev);
  EXPECT_GE(cal.dev_accuracy, 0.5);
  EXPECT_LT(cal.dev_accuracy, 1.0);
  EXPECT_EQ(cal.threshold, calibrate_threshold(dev).threshold);
}

TEST(Calibrate, SingleClassRejected) {
  EXPECT_THROW(calibrate_threshold(scored({0.1, 0.2}, {})), Error);
}

TEST(Calibrate, OptimalAmongAllCandidates) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    Vector pos(5 + rng.below(30));
    Vector neg(5 + rng.below(30));
    for (auto& x : pos) x = std::round(rng.normal(0.4) * 10.0) / 10.0;
    for (auto& x : neg) x = std::round(rng.normal() * 10.0) / 10.0;
    const auto dev = scored(pos, neg);
    for (auto objective : {ThresholdObjective::kAccuracy, ThresholdObjective::kMacroF1}) {
      const auto cal = calibrate_threshold(dev, objective);
      const auto at_best = classify_and_score(dev, cal.threshold);
      EXPECT_DOUBLE_EQ(at_best.accuracy, cal.dev_accuracy);
      std::vector<double> values;
      for (const auto& p : dev) values.push_back(p.score);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      std::vector<double> candidates{-std::numeric_limits<double>::infinity(),
                                     std::numeric_limits<double>::infinity()};
      for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        candidates.push_back(values[i] + (values[i + 1] - values[i]) / 2.0);
      }
      EXPECT_EQ(cal.candidate_count, candidates.size());
      for (double t : candidates) {
        const auto other = classify_and_score(dev, t);
        if (objective == ThresholdObjective::kAccuracy) {
          EXPECT_GE(at_best.accuracy, other.accuracy);
        } else {
          EXPECT_GE(at_best.macro_f1, other.macro_f1);
        }
      }
    }
  }
}

TEST(Classify, HandExamples) {
  const std::vector<char> labels{1, 1, 0, 0};
  const auto perfect = classification_metrics(labels, labels);
  EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(perfect.macro_f1, 1.0);
  const auto partial = classification_metrics(labels, std::vector<char>{1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(partial.accuracy, 0.75);
  EXPECT_NEAR(partial.macro_f1, (2.0 / 3.0 + 0.8) / 2.0, 1e-12);
  const auto all_pos = classification_metrics(labels, std::vector<char>{1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(all_pos.accuracy, 0.5);
}

TEST(Classify, ThresholdEqualityIsPositive) {
  const auto pairs = scored({0.5}, {0.4});
  const auto c = classify_and_score(pairs, 0.5);
  EXPECT_DOUBLE_EQ(c.accuracy, 1.0);
}

TEST(Summarize, PopulationStd) {
  const auto s = summarize({0.8, 0.9, 1.0});
  EXPECT_NEAR(s.mean, 0.9, 1e-12);
  EXPECT_NEAR(s.std, std::sqrt(0.02 / 3.0), 1e-12);
  EXPECT_EQ(summarize({0.7}).std, 0.0);
}

ExperimentConfig cluster_experiment(std::size_t rounds) {
  ExperimentConfig c;
  c.rounds = rounds;
  c.seed = 21;
  c.dataset.unseen_fraction = 0.25;
  c.dataset.dev_fraction = 0.17;
  c.dataset.holdout_fraction = 0.25;
  c.dataset.train_pairs_per_group = 60;
  c.dataset.dev_pairs_per_group = 30;
  c.dataset.test_pairs_per_group = 30;
  return c;
}

TEST(MultiRound, SingleRoundHasZeroStd) {
  const auto data = testing::gaussian_clusters(12, 8, 8, 8, 0.0, 4);
  const auto report = multi_round_eval(data.sets, data.table, cluster_experiment(1));
  ASSERT_FALSE(report.cells.empty());
  for (const auto& [_, cell] : report.cells) {
    EXPECT_EQ(cell.auc.std, 0.0);
    EXPECT_EQ(cell.accuracy.std, 0.0);
  }
}

TEST(MultiRound, ForcedEqualRoundsHaveZeroStd) {
  const auto data = testing::gaussian_clusters(12, 8, 8, 8, 0.0, 4);
  const auto cfg = cluster_experiment(1);
  const auto dataset = [&] {
    auto d = cfg.dataset;
    d.seed = cfg.seed;
    return build_dataset(data.sets, d);
  }();
  std::vector<RoundResult> rounds;
  for (int r = 0; r < 3; ++r) rounds.push_back(evaluate_bundle(dataset, data.table));
  const auto report = aggregate_rounds(rounds);
  for (const auto& [_, cell] : report.cells) EXPECT_EQ(cell.auc.std, 0.0);
}

TEST(MultiRound, SeparableDataScoresHighAndStable) {
  const auto data = testing::gaussian_clusters(12, 8, 8, 8, 0.0, 4);
  const auto report = multi_round_eval(data.sets, data.table, cluster_experiment(3));
  EXPECT_EQ(report.rounds, 3u);
  ASSERT_FALSE(report.cells.empty());
  for (const auto& [key, cell] : report.cells) {
    EXPECT_GT(cell.auc.mean, 0.95) << to_string(key.first) << "/" << to_string(key.second);
    EXPECT_LT(cell.auc.std, 0.05);
  }
}

TEST(MultiRound, SummaryMatchesPerRoundValues) {
  const auto data = testing::gaussian_clusters(12, 8, 8, 8, 1.0, 4);
  const auto report = multi_round_eval(data.sets, data.table, cluster_experiment(3));
  for (const auto& [key, cell] : report.cells) {
    std::vector<double> aucs;
    for (const auto& round : report.per_round) {
      if (auto it = round.cells.find(key); it != round.cells.end()) aucs.push_back(it->second.auc);
    }
    ASSERT_EQ(aucs, cell.auc.values);
    double mean = 0.0;
    for (double a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    double var = 0.0;
    for (double a : aucs) var += (a - mean) * (a - mean);
    EXPECT_NEAR(cell.auc.mean, mean, 1e-12);
    EXPECT_NEAR(cell.auc.std, std::sqrt(var / static_cast<double>(aucs.size())), 1e-12);
  }
}

TEST(MultiRound, RoundsUseConsecutiveSeeds) {
  const auto data = testing::gaussian_clusters(12, 8, 8, 8, 1.0, 4);
  const auto report = multi_round_eval(data.sets, data.table, cluster_experiment(2));
  ASSERT_EQ(report.per_round.size(), 2u);
  EXPECT_EQ(report.per_round[0].seed, 21u);
  EXPECT_EQ(report.per_round[1].seed, 22u);
}

TEST(MultiRound, TrainedHeadPath) {
  const auto data = testing::gaussian_clusters(12, 8, 8, 8, 1.0, 4);
  auto cfg = cluster_experiment(1);
  cfg.train = TrainConfig{};
  cfg.train->learning_rate = 0.1;
  cfg.train->batch_size = 16;
  const auto report = multi_round_eval(data.sets, data.table, cfg);
  EXPECT_FALSE(report.cells.empty());
}

ScoredPair at_length(std::size_t len, bool positive, double score) {
  ScoredPair p;
  p.label = positive ? Label::kPositive : Label::kNegative;
  p.score = score;
  p.len_a = len;
  p.len_b = len + 3;
  return p;
}

TEST(Sweep, OnlyFirstBucketPopulated) {
  std::vector<ScoredPair> pairs{at_length(5, true, 0.9), at_length(5, false, 0.1)};
  for (auto& p : pairs) p.len_b = 5;
  const std::vector<std::size_t> bounds{5, 10, 20};
  const auto buckets = utterance_count_sweep(pairs, bounds);
  ASSERT_EQ(buckets.size(), 3u);
  EXPECT_EQ(buckets[0].pairs, 2u);
  EXPECT_EQ(buckets[0].auc, 1.0);
  EXPECT_EQ(buckets[1].pairs, 0u);
  EXPECT_FALSE(buckets[2].upper.has_value());
}

TEST(Sweep, SingleClassBucketHasNoAuc) {
  std::vector<ScoredPair> pairs{at_length(12, true, 0.9), at_length(12, true, 0.3),
                                at_length(5, true, 0.9), at_length(5, false, 0.1)};
  const std::vector<std::size_t> bounds{5, 10};
  const auto buckets = utterance_count_sweep(pairs, bounds);
  EXPECT_TRUE(buckets[0].auc.has_value());
  EXPECT_EQ(buckets[1].positives, 2u);
  EXPECT_FALSE(buckets[1].auc.has_value());
}

TEST(Sweep, LowerNoiseForLongerSetsRaisesAuc) {
  Rng rng(8);
  std::vector<ScoredPair> pairs;
  const std::size_t lengths[] = {6, 12, 17};
  const double noise[] = {1.5, 0.8, 0.3};
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < 500; ++i) {
      pairs.push_back(at_length(lengths[b], true, 0.5 + noise[b] * rng.normal()));
      pairs.push_back(at_length(lengths[b], false, noise[b] * rng.normal()));
    }
  }
  const std::vector<std::size_t> bounds{5, 10, 15};
  const auto buckets = utterance_count_sweep(pairs, bounds);
  ASSERT_TRUE(buckets[0].auc && buckets[1].auc && buckets[2].auc);
  EXPECT_LE(*buckets[0].auc, *buckets[1].auc);
  EXPECT_LE(*buckets[1].auc, *buckets[2].auc);
}

TEST(Sweep, BoundsMustIncrease) {
  const std::vector<std::size_t> bounds{10, 5};
  EXPECT_THROW(utterance_count_sweep({}, bounds), Error);
}

TEST(Reports, CsvAndMarkdownShape) {
  const auto data = testing::gaussian_clusters(12, 8, 8, 8, 1.0, 4);
  const auto report = multi_round_eval(data.sets, data.table, cluster_experiment(2));
  const auto csv = report_csv(report);
  EXPECT_EQ(csv.rfind("exposure,level,metric,mean,std\n", 0), 0u);
  EXPECT_NE(csv.find(",auc,"), std::string::npos);
  const auto md = report_markdown(report);
  EXPECT_NE(md.find("±"), std::string::npos);
  EXPECT_NE(md.find("SeenSeen"), std::string::npos);
  std::size_t lines = 0;
  for (char c : scores_jsonl(report)) lines += c == '\n';
  std::size_t expected = 0;
  for (const auto& r : report.per_round) expected += r.scores.size();
  EXPECT_EQ(lines, expected);
}

TEST(Names, ParseObjectiveAndMode) {
  EXPECT_EQ(parse_objective("accuracy"), ThresholdObjective::kAccuracy);
  EXPECT_EQ(parse_objective("macro_f1"), ThresholdObjective::kMacroF1);
  EXPECT_EQ(parse_calibration_mode("global"), CalibrationMode::kGlobal);
  EXPECT_THROW(parse_objective("auc"), Error);
}

}  // namespace
}  // namespace convsv
