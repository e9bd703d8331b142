#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convsv/corpus/corpus.hpp"
#include "convsv/embedding/embedding.hpp"
#include "convsv/metric/metric.hpp"
#include "convsv/pairing/pairing.hpp"

namespace convsv {

struct ScoredPair {
  std::string pair_id;
  std::string set_a;
  std::string set_b;
  Label label = Label::kNegative;
  Level level = Level::kBase;
  Exposure exposure = Exposure::kTrain;
  double score = 0.0;
  std::size_t len_a = 0;
  std::size_t len_b = 0;
  // One side embedded to the zero vector; score is 0 by convention.
  bool degenerate = false;

  bool positive() const { return label == Label::kPositive; }
};

struct ScoreResult {
  std::vector<ScoredPair> pairs;
  std::size_t degenerate = 0;
};

// Cosine of the (optionally projected) set embeddings, in input order.
// Throws Error(kMissing) when a set has no row in `table`.
ScoreResult score_pairs(std::span<const PairInstance> pairs, const EmbeddingTable& table,
                        const ProjectionHead* head = nullptr);

// Mann-Whitney AUC with ties counted one half. Exact: the statistic is
// accumulated as an integer before the single division.
// Throws Error(kValidation) unless both classes are present.
double compute_auc(std::span<const double> positives, std::span<const double> negatives);
double compute_auc(std::span<const ScoredPair> pairs);

enum class ThresholdObjective { kAccuracy, kMacroF1 };
enum class CalibrationMode { kPerCell, kGlobal };

const char* to_string(ThresholdObjective objective);
ThresholdObjective parse_objective(std::string_view s);
const char* to_string(CalibrationMode mode);
CalibrationMode parse_calibration_mode(std::string_view s);

struct ThresholdCalibration {
  double threshold = 0.0;
  double dev_accuracy = 0.0;
  double dev_macro_f1 = 0.0;
  // Evaluated thresholds, including the two infinite sentinels.
  std::size_t candidate_count = 0;
};

// Candidates are midpoints between adjacent distinct dev scores plus -inf
// and +inf. Best objective wins; ties go to the widest gap, then the smaller
// threshold.
ThresholdCalibration calibrate_threshold(std::span<const ScoredPair> dev,
                                         ThresholdObjective objective = ThresholdObjective::kAccuracy);

struct Classification {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Positive iff score >= threshold.
Classification classify_and_score(std::span<const ScoredPair> pairs, double threshold);

// Accuracy and macro-F1 from parallel label / prediction vectors.
Classification classification_metrics(std::span<const char> labels, std::span<const char> predicted);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> values;
};

MetricSummary summarize(std::vector<double> values);

struct CellRound {
  double auc = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double threshold = 0.0;
  std::size_t pairs = 0;
};

struct RoundResult {
  std::uint64_t seed = 0;
  std::map<GroupKey, CellRound> cells;
  std::vector<ScoredPair> scores;  // dev and test pairs
  std::vector<std::string> warnings;
};

struct CellMetrics {
  MetricSummary auc;
  MetricSummary accuracy;
  MetricSummary macro_f1;
};

struct MetricsReport {
  std::size_t rounds = 0;
  std::map<GroupKey, CellMetrics> cells;
  std::vector<RoundResult> per_round;
  std::vector<std::string> warnings;
};

// Scores every Dev and test group of `bundle`, calibrates on Dev and fills
// one cell per non-empty, two-class test group.
RoundResult evaluate_bundle(const DatasetBundle& bundle, const EmbeddingTable& table,
                            ThresholdObjective objective = ThresholdObjective::kAccuracy,
                            CalibrationMode mode = CalibrationMode::kPerCell);

MetricsReport aggregate_rounds(std::vector<RoundResult> rounds);

struct ExperimentConfig {
  SetExtractionConfig extraction;
  DatasetConfig dataset;
  // Absent: score the frozen base embeddings.
  std::optional<TrainConfig> train;
  std::size_t rounds = 3;
  ThresholdObjective objective = ThresholdObjective::kAccuracy;
  CalibrationMode calibration = CalibrationMode::kPerCell;
  std::uint64_t seed = 0;
};

// Round r rebuilds the dataset and the head with seed + r. Errors are
// rethrown with the round index prepended.
MetricsReport multi_round_eval(const Corpus& corpus, const SetEncoder& encoder,
                               const ExperimentConfig& config);

// Same, starting from already-extracted sets and their base embeddings.
MetricsReport multi_round_eval(const std::vector<UtteranceSet>& sets, const EmbeddingTable& base,
                               const ExperimentConfig& config);

struct SweepBucket {
  std::size_t lower = 0;
  std::optional<std::size_t> upper;  // exclusive; open-ended when absent
  std::size_t pairs = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::optional<double> auc;  // absent when a class is missing
};

// Buckets by min(len_a, len_b) into [b0, b1), ..., [b_last, inf). Pairs below
// b0 are dropped. Bounds must be strictly increasing.
std::vector<SweepBucket> utterance_count_sweep(std::span<const ScoredPair> pairs,
                                               std::span<const std::size_t> bounds);

// report.csv: exposure,level,metric,mean,std
std::string report_csv(const MetricsReport& report);
// Grid with one row per test exposure and AUC/ACC/F1 columns per level.
std::string report_markdown(const MetricsReport& report);
std::string scores_jsonl(const MetricsReport& report);
std::string sweep_csv(std::span<const SweepBucket> buckets);

}  // namespace convsv
