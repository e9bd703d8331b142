#include <algorithm>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/random.hpp"
#include "convsv/pairing/pairing.hpp"

namespace convsv {

const char* to_string(Label label) {
  return label == Label::kPositive ? "positive" : "negative";
}

const char* to_string(Level level) {
  switch (level) {
    case Level::kBase: return "Base";
    case Level::kHard: return "Hard";
    case Level::kHarder: return "Harder";
  }
  return "?";
}

const char* to_string(Exposure exposure) {
  switch (exposure) {
    case Exposure::kTrain: return "Train";
    case Exposure::kDev: return "Dev";
    case Exposure::kSeenSeen: return "SeenSeen";
    case Exposure::kSeenUnseen: return "SeenUnseen";
    case Exposure::kUnseenUnseen: return "UnseenUnseen";
  }
  return "?";
}

Label parse_label(std::string_view s) {
  if (s == "positive") return Label::kPositive;
  if (s == "negative") return Label::kNegative;
  throw Error(ErrorKind::kParse, "unknown label '" + std::string(s) + "'");
}

Level parse_level(std::string_view s) {
  for (Level l : kAllLevels) {
    if (s == to_string(l)) return l;
  }
  throw Error(ErrorKind::kParse, "unknown level '" + std::string(s) + "'");
}

Exposure parse_exposure(std::string_view s) {
  for (Exposure e : {Exposure::kTrain, Exposure::kDev, Exposure::kSeenSeen,
                     Exposure::kSeenUnseen, Exposure::kUnseenUnseen}) {
    if (s == to_string(e)) return e;
  }
  throw Error(ErrorKind::kParse, "unknown exposure '" + std::string(s) + "'");
}

PairKey pair_key(std::string_view a, std::string_view b) {
  if (b < a) std::swap(a, b);
  return {std::string(a), std::string(b)};
}

SetIndex::SetIndex(std::span<const UtteranceSet> sets) : sets_(sets) {
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (!index_.emplace(sets[i].set_id, i).second) {
      throw Error(ErrorKind::kDuplicate, "duplicate set_id '" + sets[i].set_id + "'");
    }
  }
}

const UtteranceSet* SetIndex::find(std::string_view set_id) const {
  auto it = index_.find(set_id);
  return it == index_.end() ? nullptr : &sets_[it->second];
}

const UtteranceSet& SetIndex::at(std::string_view set_id) const {
  const auto* s = find(set_id);
  if (s == nullptr) throw Error(ErrorKind::kMissing, "unknown set_id '" + std::string(set_id) + "'");
  return *s;
}

SplitPlan split_speakers(std::span<const UtteranceSet> sets, double unseen_fraction,
                         std::uint64_t seed, double dev_fraction) {
  if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) {
    throw Error(ErrorKind::kValidation, "unseen_fraction must lie in (0, 1)");
  }
  if (!(dev_fraction >= 0.0 && dev_fraction < 1.0)) {
    throw Error(ErrorKind::kValidation, "dev_fraction must lie in [0, 1)");
  }
  std::set<std::string> distinct;
  for (const auto& s : sets) distinct.insert(s.speaker_id);
  if (distinct.size() < 2) {
    throw Error(ErrorKind::kValidation, "need at least 2 speakers with extractable sets");
  }

  std::vector<std::string> speakers(distinct.begin(), distinct.end());
  const std::size_t n = speakers.size();
  const std::size_t n_unseen = round_half_up(unseen_fraction, n);
  const std::size_t n_dev = round_half_up(dev_fraction, n);
  if (n_unseen == 0) {
    throw Error(ErrorKind::kValidation, "unseen_fraction yields 0 unseen speakers");
  }
  if (n_unseen + n_dev >= n) {
    throw Error(ErrorKind::kValidation, "split leaves 0 seen speakers");
  }

  Rng rng(derive_seed(seed, "split_speakers"));
  rng.shuffle(speakers);

  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_unseen) {
      plan.unseen_speakers.insert(speakers[i]);
    } else if (i < n_unseen + n_dev) {
      plan.dev_speakers.insert(speakers[i]);
    } else {
      plan.seen_speakers.insert(speakers[i]);
    }
  }
  for (const auto& s : sets) {
    if (plan.seen_speakers.contains(s.speaker_id)) plan.train_set_ids.insert(s.set_id);
    if (plan.dev_speakers.contains(s.speaker_id)) plan.dev_set_ids.insert(s.set_id);
  }
  return plan;
}

SplitPlan isolate_conversations(SplitPlan plan, std::span<const UtteranceSet> sets,
                                double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction <= 1.0)) {
    throw Error(ErrorKind::kValidation, "holdout_fraction must lie in [0, 1]");
  }
  std::set<std::string> distinct;
  for (const auto& s : sets) distinct.insert(s.conversation_id);
  std::vector<std::string> conversations(distinct.begin(), distinct.end());

  Rng rng(derive_seed(seed, "isolate_conversations"));
  const std::size_t k = round_half_up(holdout_fraction, conversations.size());
  for (std::size_t i : rng.sample_indices(conversations.size(), k)) {
    plan.excluded_conversation_ids.insert(conversations[i]);
  }
  for (const auto& s : sets) {
    if (plan.excluded_conversation_ids.contains(s.conversation_id)) {
      plan.train_set_ids.erase(s.set_id);
    }
  }
  return plan;
}

bool level_holds(const UtteranceSet& a, const UtteranceSet& b, Level level) {
  switch (level) {
    case Level::kBase:
      return a.source_id != b.source_id;
    case Level::kHard:
      return a.source_id == b.source_id && a.speaker_id != b.speaker_id;
    case Level::kHarder:
      return a.conversation_id == b.conversation_id && a.speaker_id != b.speaker_id;
  }
  return false;
}

bool exposure_holds(const UtteranceSet& a, const UtteranceSet& b, const SplitPlan& plan,
                    Exposure exposure) {
  const bool a_train = plan.train_set_ids.contains(a.set_id);
  const bool b_train = plan.train_set_ids.contains(b.set_id);
  switch (exposure) {
    case Exposure::kTrain:
    case Exposure::kSeenSeen:
      return a_train && b_train;
    case Exposure::kDev:
      return plan.dev_set_ids.contains(a.set_id) && plan.dev_set_ids.contains(b.set_id);
    case Exposure::kSeenUnseen:
      return (a_train != b_train) && plan.seen_speakers.contains(a.speaker_id) &&
             plan.seen_speakers.contains(b.speaker_id);
    case Exposure::kUnseenUnseen:
      return plan.unseen_speakers.contains(a.speaker_id) &&
             plan.unseen_speakers.contains(b.speaker_id);
  }
  return false;
}

}  // namespace convsv
