#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "convsv/corpus/corpus.hpp"

namespace convsv {

enum class Label { kNegative = 0, kPositive = 1 };
enum class Level { kBase, kHard, kHarder };
enum class Exposure { kTrain, kDev, kSeenSeen, kSeenUnseen, kUnseenUnseen };

inline constexpr Level kAllLevels[] = {Level::kBase, Level::kHard, Level::kHarder};
inline constexpr Exposure kTestExposures[] = {Exposure::kSeenSeen, Exposure::kSeenUnseen,
                                              Exposure::kUnseenUnseen};

const char* to_string(Label label);
const char* to_string(Level level);
const char* to_string(Exposure exposure);
Label parse_label(std::string_view s);
Level parse_level(std::string_view s);
Exposure parse_exposure(std::string_view s);

struct PairInstance {
  std::string pair_id;
  std::string set_a;
  std::string set_b;
  Label label = Label::kNegative;
  Level level = Level::kBase;
  Exposure exposure = Exposure::kTrain;

  friend bool operator==(const PairInstance&, const PairInstance&) = default;
};

// Unordered identity of a pair, used to keep Seen-Seen pairs distinct from
// the Train pairs they re-combine.
using PairKey = std::pair<std::string, std::string>;
PairKey pair_key(std::string_view a, std::string_view b);

struct SplitPlan {
  std::uint64_t seed = 0;
  std::set<std::string> seen_speakers;
  std::set<std::string> unseen_speakers;
  // Speakers reserved for threshold calibration; neither seen nor unseen.
  std::set<std::string> dev_speakers;
  std::set<std::string> train_set_ids;
  std::set<std::string> dev_set_ids;
  std::set<std::string> excluded_conversation_ids;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

class SetIndex {
 public:
  explicit SetIndex(std::span<const UtteranceSet> sets);

  const UtteranceSet& at(std::string_view set_id) const;
  const UtteranceSet* find(std::string_view set_id) const;
  std::span<const UtteranceSet> sets() const { return sets_; }

 private:
  std::span<const UtteranceSet> sets_;
  std::unordered_map<std::string_view, std::size_t> index_;
};

// Partitions the speakers that own at least one set. `unseen_fraction` and
// `dev_fraction` are applied to the total speaker count with round-half-up.
SplitPlan split_speakers(std::span<const UtteranceSet> sets, double unseen_fraction,
                         std::uint64_t seed, double dev_fraction = 0.0);

// Holds out a seeded sample of whole conversations from training.
SplitPlan isolate_conversations(SplitPlan plan, std::span<const UtteranceSet> sets,
                                double holdout_fraction, std::uint64_t seed);

// Constraint a negative pair must meet at `level`.
bool level_holds(const UtteranceSet& a, const UtteranceSet& b, Level level);
bool exposure_holds(const UtteranceSet& a, const UtteranceSet& b, const SplitPlan& plan,
                    Exposure exposure);

struct BuildResult {
  std::vector<PairInstance> pairs;
  // True when fewer than pairs_per_group / 2 pairs of either label exist.
  bool shortfall = false;
  std::size_t positive_candidates = 0;
  std::size_t negative_candidates = 0;
};

// Samples pairs_per_group / 2 positive and negative pair identities without
// replacement. Throws Error(kUnsatisfiable) for Harder when no conversation
// offers two eligible speakers.
BuildResult build_pairs(const SetIndex& sets, const SplitPlan& plan, Level level,
                        Exposure exposure, std::uint64_t seed, std::size_t pairs_per_group,
                        const std::set<PairKey>* exclude = nullptr);

// Down-samples the majority label. Survivors keep their relative order.
std::vector<PairInstance> balance_pairs(std::vector<PairInstance> pairs, std::uint64_t seed);

using GroupKey = std::pair<Exposure, Level>;

struct CountsRow {
  Exposure exposure;
  Level level;
  std::size_t speakers = 0;
  std::size_t pairs = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct DatasetBundle {
  SplitPlan plan;
  std::vector<UtteranceSet> sets;
  std::map<GroupKey, std::vector<PairInstance>> groups;
  std::vector<CountsRow> counts;
  // Groups that came back short or unsatisfiable while building.
  std::vector<std::string> warnings;
};

// Rejects any unbalanced group.
DatasetBundle bundle_dataset(SplitPlan plan, std::vector<UtteranceSet> sets,
                             std::map<GroupKey, std::vector<PairInstance>> groups);

struct DatasetConfig {
  double unseen_fraction = 0.2;
  double dev_fraction = 0.1;
  double holdout_fraction = 0.2;
  std::size_t train_pairs_per_group = 1000;
  std::size_t dev_pairs_per_group = 200;
  std::size_t test_pairs_per_group = 200;
  std::vector<Level> levels{Level::kBase, Level::kHard, Level::kHarder};
  std::uint64_t seed = 0;
};

// split -> isolate -> build every (exposure, level) group -> balance -> bundle.
DatasetBundle build_dataset(std::vector<UtteranceSet> sets, const DatasetConfig& config);

struct BundleFiles {
  std::string pairs_jsonl;
  std::string sets_jsonl;
  std::string plan_json;
  std::string counts_csv;
  std::string content_hash;
};

BundleFiles serialize_bundle(const DatasetBundle& bundle);
// Writes pairs.jsonl, sets.jsonl, plan.json, counts.csv and bundle.json.
std::string write_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle);
DatasetBundle load_bundle(const std::filesystem::path& dir);

std::string sets_jsonl(std::span<const UtteranceSet> sets);
std::vector<UtteranceSet> parse_sets_jsonl(std::string_view data);

}  // namespace convsv
