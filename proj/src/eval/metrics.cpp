#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "convsv/common/error.hpp"
#include "convsv/eval/eval.hpp"
#include "convsv/kernels/kernels.hpp"

namespace convsv {

const char* to_string(ThresholdObjective objective) {
  return objective == ThresholdObjective::kAccuracy ? "accuracy" : "macro_f1";
}

ThresholdObjective parse_objective(std::string_view s) {
  if (s == "accuracy") return ThresholdObjective::kAccuracy;
  if (s == "macro_f1" || s == "f1") return ThresholdObjective::kMacroF1;
  throw Error(ErrorKind::kValidation, "unknown threshold objective '" + std::string(s) + "'");
}

const char* to_string(CalibrationMode mode) {
  return mode == CalibrationMode::kPerCell ? "per_cell" : "global";
}

CalibrationMode parse_calibration_mode(std::string_view s) {
  if (s == "per_cell") return CalibrationMode::kPerCell;
  if (s == "global") return CalibrationMode::kGlobal;
  throw Error(ErrorKind::kValidation, "unknown calibration mode '" + std::string(s) + "'");
}

ScoreResult score_pairs(std::span<const PairInstance> pairs, const EmbeddingTable& table,
                        const ProjectionHead* head) {
  ScoreResult result;
  result.pairs.reserve(pairs.size());
  std::vector<kernels::IndexPair> index;
  index.reserve(pairs.size());
  for (const auto& p : pairs) {
    const std::size_t a = table.index_of(p.set_a);
    const std::size_t b = table.index_of(p.set_b);
    index.push_back({a, b});
    ScoredPair s;
    s.pair_id = p.pair_id;
    s.set_a = p.set_a;
    s.set_b = p.set_b;
    s.label = p.label;
    s.level = p.level;
    s.exposure = p.exposure;
    s.len_a = table.num_pooled[a];
    s.len_b = table.num_pooled[b];
    result.pairs.push_back(std::move(s));
  }

  std::span<const double> rows = table.data;
  std::size_t dim = table.dim;
  std::vector<double> projected;
  if (head != nullptr) {
    projected.resize(table.size() * head->out_dim);
    kernels::parallel::project_rows(table.data, *head, projected);
    rows = projected;
    dim = head->out_dim;
  }
  std::vector<double> cosines(pairs.size());
  kernels::parallel::pair_cosines(rows, dim, index, cosines);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& s = result.pairs[i];
    s.score = cosines[i];
    s.degenerate = is_degenerate(rows.subspan(index[i].a * dim, dim), rows.subspan(index[i].b * dim, dim));
    if (!std::isfinite(s.score)) {
      throw Error(ErrorKind::kNonFinite, "score_pairs: non-finite score for " + s.pair_id);
    }
    if (s.degenerate) ++result.degenerate;
  }
  return result;
}

double compute_auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorKind::kValidation, "compute_auc: both classes are required");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.emplace_back(s, true);
  for (double s : negatives) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  // Twice the Mann-Whitney U: each tied (pos, neg) pair adds 1, each
  // strictly ordered one adds 2.
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? pos : neg) += 1;
      ++j;
    }
    twice_u += pos * (2 * negatives_below + neg);
    negatives_below += neg;
    i = j;
  }
  const std::uint64_t denom = 2ULL * positives.size() * negatives.size();
  return static_cast<double>(twice_u) / static_cast<double>(denom);
}

double compute_auc(std::span<const ScoredPair> pairs) {
  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& p : pairs) (p.positive() ? pos : neg).push_back(p.score);
  return compute_auc(pos, neg);
}

namespace {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t correct() const { return tp + tn; }
  std::size_t total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(total());
  }
  double macro_f1() const {
    auto f1 = [](std::size_t hit, std::size_t miss) {
      return hit == 0 && miss == 0 ? 0.0
                                   : 2.0 * static_cast<double>(hit) /
                                         static_cast<double>(2 * hit + miss);
    };
    return 0.5 * (f1(tp, fp + fn) + f1(tn, fp + fn));
  }
};

}  // namespace

Classification classification_metrics(std::span<const char> labels, std::span<const char> predicted) {
  if (labels.size() != predicted.size()) {
    throw Error(ErrorKind::kMismatch, "classification_metrics: length mismatch");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      (predicted[i] ? c.tp : c.fn) += 1;
    } else {
      (predicted[i] ? c.fp : c.tn) += 1;
    }
  }
  return {c.accuracy(), c.macro_f1()};
}

Classification classify_and_score(std::span<const ScoredPair> pairs, double threshold) {
  std::vector<char> labels;
  std::vector<char> predicted;
  labels.reserve(pairs.size());
  predicted.reserve(pairs.size());
  for (const auto& p : pairs) {
    labels.push_back(p.positive() ? 1 : 0);
    predicted.push_back(p.score >= threshold ? 1 : 0);
  }
  return classification_metrics(labels, predicted);
}

ThresholdCalibration calibrate_threshold(std::span<const ScoredPair> dev, ThresholdObjective objective) {
  std::vector<std::pair<double, bool>> sorted;
  std::size_t total_pos = 0;
  for (const auto& p : dev) {
    sorted.emplace_back(p.score, p.positive());
    if (p.positive()) ++total_pos;
  }
  const std::size_t total_neg = sorted.size() - total_pos;
  if (total_pos == 0 || total_neg == 0) {
    throw Error(ErrorKind::kValidation, "calibrate_threshold: dev set needs both classes");
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  // Group by distinct score: pos/neg counts per value, ascending.
  struct Group {
    double value;
    std::size_t pos;
    std::size_t neg;
  };
  std::vector<Group> levels;
  for (const auto& [s, positive] : sorted) {
    if (levels.empty() || levels.back().value != s) levels.push_back({s, 0, 0});
    (positive ? levels.back().pos : levels.back().neg) += 1;
  }

  const double inf = std::numeric_limits<double>::infinity();
  ThresholdCalibration best;
  double best_key = -1.0;
  double best_gap = -1.0;
  bool have = false;
  std::size_t candidates = 0;

  // Threshold just above levels[0..k-1]: those predict negative.
  std::size_t neg_below = 0;
  std::size_t pos_below = 0;
  auto consider = [&](double threshold, double gap) {
    ++candidates;
    Confusion c;
    c.tn = neg_below;
    c.fn = pos_below;
    c.tp = total_pos - pos_below;
    c.fp = total_neg - neg_below;
    const double key = objective == ThresholdObjective::kAccuracy
                           ? static_cast<double>(c.correct())
                           : c.macro_f1();
    const bool better = !have || key > best_key ||
                        (key == best_key && (gap > best_gap ||
                                             (gap == best_gap && threshold < best.threshold)));
    if (better) {
      have = true;
      best_key = key;
      best_gap = gap;
      best.threshold = threshold;
      best.dev_accuracy = c.accuracy();
      best.dev_macro_f1 = c.macro_f1();
    }
  };

  consider(-inf, 0.0);
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    neg_below += levels[k].neg;
    pos_below += levels[k].pos;
    const double lo = levels[k].value;
    const double hi = levels[k + 1].value;
    consider(lo + (hi - lo) / 2.0, hi - lo);
  }
  neg_below = total_neg;
  pos_below = total_pos;
  consider(inf, 0.0);

  best.candidate_count = candidates;
  return best;
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const auto n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  return s;
}

std::vector<SweepBucket> utterance_count_sweep(std::span<const ScoredPair> pairs,
                                               std::span<const std::size_t> bounds) {
  if (bounds.empty()) throw Error(ErrorKind::kValidation, "sweep: at least one bound is required");
  for (std::size_t i = 1; i < bounds.size(); ++i) {
    if (bounds[i] <= bounds[i - 1]) {
      throw Error(ErrorKind::kValidation, "sweep: bounds must be strictly increasing");
    }
  }
  std::vector<SweepBucket> buckets(bounds.size());
  std::vector<std::vector<double>> pos(bounds.size());
  std::vector<std::vector<double>> neg(bounds.size());
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    buckets[i].lower = bounds[i];
    if (i + 1 < bounds.size()) buckets[i].upper = bounds[i + 1];
  }
  for (const auto& p : pairs) {
    const std::size_t len = std::min(p.len_a, p.len_b);
    if (len < bounds.front()) continue;
    const auto it = std::upper_bound(bounds.begin(), bounds.end(), len);
    const auto b = static_cast<std::size_t>(it - bounds.begin()) - 1;
    (p.positive() ? pos[b] : neg[b]).push_back(p.score);
  }
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    buckets[i].positives = pos[i].size();
    buckets[i].negatives = neg[i].size();
    buckets[i].pairs = pos[i].size() + neg[i].size();
    if (!pos[i].empty() && !neg[i].empty()) buckets[i].auc = compute_auc(pos[i], neg[i]);
  }
  return buckets;
}

}  // namespace convsv
