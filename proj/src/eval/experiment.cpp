#include <algorithm>
#include <array>

#include "convsv/common/error.hpp"
#include "convsv/eval/eval.hpp"

namespace convsv {
namespace {

bool two_class(std::span<const ScoredPair> pairs) {
  bool pos = false;
  bool neg = false;
  for (const auto& p : pairs) (p.positive() ? pos : neg) = true;
  return pos && neg;
}

std::string cell_name(const GroupKey& key) {
  return std::string(to_string(key.first)) + "/" + to_string(key.second);
}

}  // namespace

RoundResult evaluate_bundle(const DatasetBundle& bundle, const EmbeddingTable& table,
                            ThresholdObjective objective, CalibrationMode mode) {
  RoundResult round;
  round.seed = bundle.plan.seed;

  std::map<GroupKey, std::vector<ScoredPair>> scored;
  for (const auto& [key, pairs] : bundle.groups) {
    if (key.first == Exposure::kTrain || pairs.empty()) continue;
    auto result = score_pairs(pairs, table);
    if (result.degenerate > 0) {
      round.warnings.push_back(cell_name(key) + ": " + std::to_string(result.degenerate) +
                               " pair(s) with a zero embedding scored 0");
    }
    scored[key] = std::move(result.pairs);
  }

  std::vector<ScoredPair> all_dev;
  for (const auto& [key, pairs] : scored) {
    if (key.first == Exposure::kDev) all_dev.insert(all_dev.end(), pairs.begin(), pairs.end());
  }
  if (!two_class(all_dev)) {
    throw Error(ErrorKind::kValidation, "evaluation: dev pairs do not cover both labels");
  }
  const auto global = calibrate_threshold(all_dev, objective);

  for (const auto& [key, pairs] : scored) {
    if (key.first == Exposure::kDev) continue;
    if (!two_class(pairs)) {
      round.warnings.push_back(cell_name(key) + ": single-label group skipped");
      continue;
    }
    double threshold = global.threshold;
    if (mode == CalibrationMode::kPerCell) {
      auto dev = scored.find({Exposure::kDev, key.second});
      if (dev != scored.end() && two_class(dev->second)) {
        threshold = calibrate_threshold(dev->second, objective).threshold;
      } else {
        round.warnings.push_back(cell_name(key) + ": no usable dev group, global threshold used");
      }
    }
    const auto cls = classify_and_score(pairs, threshold);
    round.cells[key] = CellRound{compute_auc(pairs), cls.accuracy, cls.macro_f1, threshold, pairs.size()};
  }

  for (auto& [key, pairs] : scored) {
    round.scores.insert(round.scores.end(), std::make_move_iterator(pairs.begin()),
                        std::make_move_iterator(pairs.end()));
  }
  return round;
}

MetricsReport aggregate_rounds(std::vector<RoundResult> rounds) {
  if (rounds.empty()) throw Error(ErrorKind::kValidation, "aggregate_rounds: no rounds");
  MetricsReport report;
  report.rounds = rounds.size();
  std::map<GroupKey, std::array<std::vector<double>, 3>> values;
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    for (const auto& [key, cell] : rounds[r].cells) {
      auto& v = values[key];
      v[0].push_back(cell.auc);
      v[1].push_back(cell.accuracy);
      v[2].push_back(cell.macro_f1);
    }
    for (const auto& w : rounds[r].warnings) {
      report.warnings.push_back("round " + std::to_string(r) + ": " + w);
    }
  }
  for (auto& [key, v] : values) {
    if (v[0].size() != rounds.size()) {
      report.warnings.push_back(cell_name(key) + ": present in " + std::to_string(v[0].size()) +
                                " of " + std::to_string(rounds.size()) + " rounds");
    }
    report.cells[key] = CellMetrics{summarize(std::move(v[0])), summarize(std::move(v[1])),
                                    summarize(std::move(v[2]))};
  }
  report.per_round = std::move(rounds);
  return report;
}

MetricsReport multi_round_eval(const std::vector<UtteranceSet>& sets, const EmbeddingTable& base,
                               const ExperimentConfig& config) {
  if (config.rounds == 0) throw Error(ErrorKind::kValidation, "multi_round_eval: rounds must be >= 1");
  std::vector<RoundResult> rounds;
  for (std::size_t r = 0; r < config.rounds; ++r) {
    try {
      auto dataset_config = config.dataset;
      dataset_config.seed = config.seed + r;
      const auto bundle = build_dataset(sets, dataset_config);

      if (config.train) {
        std::vector<PairInstance> train_pairs;
        for (const auto& [key, pairs] : bundle.groups) {
          if (key.first == Exposure::kTrain) train_pairs.insert(train_pairs.end(), pairs.begin(), pairs.end());
        }
        auto train_config = *config.train;
        train_config.seed = config.seed + r;
        const auto metric = train_projection(train_pairs, base, train_config);
        rounds.push_back(evaluate_bundle(bundle, project_table(base, metric.head), config.objective,
                                         config.calibration));
      } else {
        rounds.push_back(evaluate_bundle(bundle, base, config.objective, config.calibration));
      }
      rounds.back().seed = config.seed + r;
      for (const auto& w : bundle.warnings) rounds.back().warnings.push_back(w);
    } catch (const Error& e) {
      throw Error(e.kind(), "round " + std::to_string(r) + ": " + e.what());
    }
  }
  return aggregate_rounds(std::move(rounds));
}

MetricsReport multi_round_eval(const Corpus& corpus, const SetEncoder& encoder,
                               const ExperimentConfig& config) {
  const auto sets = extract_utterance_sets(corpus, config.extraction);
  return multi_round_eval(sets, encoder.encode(sets), config);
}

}  // namespace convsv
