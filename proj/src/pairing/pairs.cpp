#include <algorithm>
#include <cstdio>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/random.hpp"
#include "convsv/pairing/pairing.hpp"

namespace convsv {
namespace {

struct Candidate {
  std::size_t order;
  const UtteranceSet* a;
  const UtteranceSet* b;
};

// Uniform sample of k candidates from a stream of unknown length.
class Reservoir {
 public:
  Reservoir(std::size_t k, Rng& rng) : k_(k), rng_(rng) {}

  void offer(const UtteranceSet* a, const UtteranceSet* b) {
    if (items_.size() < k_) {
      items_.push_back({seen_, a, b});
    } else if (k_ > 0) {
      const auto j = static_cast<std::size_t>(rng_.below(seen_ + 1));
      if (j < k_) items_[j] = {seen_, a, b};
    }
    ++seen_;
  }

  std::size_t seen() const { return seen_; }

  std::vector<Candidate> take() {
    std::sort(items_.begin(), items_.end(),
              [](const Candidate& x, const Candidate& y) { return x.order < y.order; });
    return std::move(items_);
  }

 private:
  std::size_t k_;
  Rng& rng_;
  std::size_t seen_ = 0;
  std::vector<Candidate> items_;
};

bool participates(const UtteranceSet& s, const SplitPlan& plan, Exposure exposure) {
  switch (exposure) {
    case Exposure::kTrain:
    case Exposure::kSeenSeen:
      return plan.train_set_ids.contains(s.set_id);
    case Exposure::kDev:
      return plan.dev_set_ids.contains(s.set_id);
    case Exposure::kSeenUnseen:
      return plan.seen_speakers.contains(s.speaker_id);
    case Exposure::kUnseenUnseen:
      return plan.unseen_speakers.contains(s.speaker_id);
  }
  return false;
}

std::string make_pair_id(Exposure exposure, Level level, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return std::string(to_string(exposure)) + "-" + to_string(level) + "-" + buf;
}

}  // namespace

BuildResult build_pairs(const SetIndex& sets, const SplitPlan& plan, Level level,
                        Exposure exposure, std::uint64_t seed, std::size_t pairs_per_group,
                        const std::set<PairKey>* exclude) {
  std::vector<const UtteranceSet*> eligible;
  for (const auto& s : sets.sets()) {
    if (participates(s, plan, exposure)) eligible.push_back(&s);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const UtteranceSet* x, const UtteranceSet* y) { return x->set_id < y->set_id; });

  const std::size_t per_label = pairs_per_group / 2;
  Rng rng(derive_seed(seed, std::string("build_pairs/") + to_string(exposure) + "/" +
                                to_string(level)));

  auto admissible = [&](const UtteranceSet* a, const UtteranceSet* b) {
    if (!exposure_holds(*a, *b, plan, exposure)) return false;
    return exclude == nullptr || !exclude->contains(pair_key(a->set_id, b->set_id));
  };

  // Negatives.
  Reservoir negatives(per_label, rng);
  std::set<std::string> harder_conversations;
  if (level == Level::kBase) {
    std::map<std::string, std::vector<const UtteranceSet*>> by_source;
    for (const auto* s : eligible) by_source[s->source_id].push_back(s);
    for (auto it = by_source.begin(); it != by_source.end(); ++it) {
      for (auto jt = std::next(it); jt != by_source.end(); ++jt) {
        for (const auto* a : it->second) {
          for (const auto* b : jt->second) {
            if (admissible(a, b)) negatives.offer(a, b);
          }
        }
      }
    }
  } else {
    std::map<std::string, std::vector<const UtteranceSet*>> groups;
    for (const auto* s : eligible) {
      groups[level == Level::kHard ? s->source_id : s->conversation_id].push_back(s);
    }
    for (const auto& [_, members] : groups) {
      for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
          const auto* a = members[i];
          const auto* b = members[j];
          if (a->speaker_id == b->speaker_id || !admissible(a, b)) continue;
          negatives.offer(a, b);
          if (level == Level::kHarder) harder_conversations.insert(a->conversation_id);
        }
      }
    }
  }
  if (level == Level::kHarder && negatives.seen() == 0) {
    throw Error(ErrorKind::kUnsatisfiable,
                std::string("Harder ") + to_string(exposure) +
                    ": no conversation has two eligible speakers" +
                    (exclude != nullptr && !exclude->empty()
                         ? " outside pairs already used by Train"
                         : ""));
  }

  // Positives.
  Reservoir positives(per_label, rng);
  std::map<std::string, std::vector<const UtteranceSet*>> by_speaker;
  for (const auto* s : eligible) {
    if (level == Level::kHarder && !harder_conversations.contains(s->conversation_id)) continue;
    by_speaker[s->speaker_id].push_back(s);
  }
  for (const auto& [_, members] : by_speaker) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        if (admissible(members[i], members[j])) positives.offer(members[i], members[j]);
      }
    }
  }

  BuildResult result;
  result.positive_candidates = positives.seen();
  result.negative_candidates = negatives.seen();

  auto emit = [&](const Candidate& c, Label label) {
    const UtteranceSet* a = c.a;
    const UtteranceSet* b = c.b;
    bool swap = b->set_id < a->set_id;
    if (exposure == Exposure::kSeenUnseen) swap = !plan.train_set_ids.contains(a->set_id);
    if (swap) std::swap(a, b);
    PairInstance p;
    p.set_a = a->set_id;
    p.set_b = b->set_id;
    p.label = label;
    p.level = level;
    p.exposure = exposure;
    result.pairs.push_back(std::move(p));
  };
  auto pos = positives.take();
  auto neg = negatives.take();
  result.shortfall = pos.size() < per_label || neg.size() < per_label;
  for (const auto& c : pos) emit(c, Label::kPositive);
  for (const auto& c : neg) emit(c, Label::kNegative);

  rng.shuffle(result.pairs);
  for (std::size_t i = 0; i < result.pairs.size(); ++i) {
    result.pairs[i].pair_id = make_pair_id(exposure, level, i);
  }
  return result;
}

std::vector<PairInstance> balance_pairs(std::vector<PairInstance> pairs, std::uint64_t seed) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (pairs[i].label == Label::kPositive ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorKind::kValidation, "balance_pairs: one label is absent");
  }
  if (pos.size() == neg.size()) return pairs;

  auto& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  Rng rng(derive_seed(seed, "balance_pairs"));
  std::vector<bool> drop(pairs.size(), false);
  std::vector<bool> kept(majority.size(), false);
  for (std::size_t i : rng.sample_indices(majority.size(), keep)) kept[i] = true;
  for (std::size_t i = 0; i < majority.size(); ++i) {
    if (!kept[i]) drop[majority[i]] = true;
  }

  std::vector<PairInstance> out;
  out.reserve(2 * keep);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!drop[i]) out.push_back(std::move(pairs[i]));
  }
  return out;
}

}  // namespace convsv
