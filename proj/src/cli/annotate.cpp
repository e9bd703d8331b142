#include <algorithm>
#include <set>

#include "convsv/cli/cli.hpp"
#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/random.hpp"

namespace convsv::cli {
namespace fs = std::filesystem;
namespace {

constexpr std::string_view kSystemPrompt =
    "[Objective]\n"
    "Two samples of dialogue text follow. Decide whether the person behind the first sample is "
    "the same person behind the second.\n"
    "\n"
    "[Scoring System]\n"
    "- TRUE: one speaker produced both samples\n"
    "- FALSE: the samples were produced by two different speakers\n"
    "\n"
    "[Guidance for Evaluators]\n"
    "- Look at vocabulary, phrasing, length and tone of the turns.\n"
    "- Names, places and topics mentioned by the speaker count as evidence.\n"
    "- Always commit to TRUE or FALSE, even when unsure.";

constexpr std::string_view kQuestion = "Same speaker in both samples? TRUE or FALSE?";
constexpr std::string_view kCotSuffix = "Let's analyse step by step:";

int shot_count(const std::string& shots) {
  if (shots == "0" || shots == "cot") return 0;
  if (shots == "2") return 2;
  if (shots == "4") return 4;
  if (shots == "6") return 6;
  throw Error(ErrorKind::kValidation, "annotation: shots must be one of 0, cot, 2, 4, 6");
}

std::string render_sample(const UtteranceSet& set, const Corpus& corpus, AnnotationMode mode) {
  std::string out;
  if (mode == AnnotationMode::kUtterances) {
    for (const auto& t : set.texts) out += "- " + t + "\n";
    return out;
  }
  const auto* conv = corpus.find(set.conversation_id);
  if (conv == nullptr) {
    throw Error(ErrorKind::kMissing, "annotation: conversation '" + set.conversation_id + "' is not in the corpus");
  }
  // Interlocutors are anonymised by order of first appearance.
  std::map<std::string, std::string> alias;
  for (const auto& u : conv->utterances) {
    if (u.speaker_id == set.speaker_id || alias.contains(u.speaker_id)) continue;
    const auto k = alias.size();
    alias[u.speaker_id] = "Speaker " + std::string(1, static_cast<char>('A' + k % 26)) +
                          (k >= 26 ? std::to_string(k / 26) : "");
  }
  for (const auto& u : conv->utterances) {
    const auto& who = u.speaker_id == set.speaker_id ? std::string("Target Speaker") : alias[u.speaker_id];
    out += who + ": " + u.text + "\n";
  }
  return out;
}

std::string user_turn(const std::string& a, const std::string& b, AnnotationMode mode) {
  std::string out = "Sample 1:\n" + a + "\nSample 2:\n" + b + "\n";
  if (mode == AnnotationMode::kConversation) out += "Judge only the turns of 'Target Speaker'.\n";
  out += std::string(kQuestion);
  return out;
}

std::string questionnaire(const std::string& item_id, const std::string& a, const std::string& b,
                          AnnotationMode mode) {
  std::string out = "## " + item_id + "\n\n";
  out += mode == AnnotationMode::kUtterances
             ? "Read both sets of utterances and decide whether one person wrote both.\n\n"
             : "Read both conversations and decide whether 'Target Speaker' is the same person in each.\n\n";
  out += "Things worth checking: formality and length of turns, subject matter, recurring expressions, "
         "and names or other identifying hints.\n\n";
  out += "### Sample 1\n\n```\n" + a + "```\n\n### Sample 2\n\n```\n" + b + "```\n\n";
  out += "### Verdict\n\n[ ] TRUE (same speaker)\n[ ] FALSE (different speakers)\n\n";
  out += "### Reasoning\n\nWhich observations decided your answer?\n\nAnswer:\n\n";
  return out;
}

}  // namespace

AnnotationMode parse_annotation_mode(std::string_view s) {
  if (s == "conversation") return AnnotationMode::kConversation;
  if (s == "utterances") return AnnotationMode::kUtterances;
  throw Error(ErrorKind::kValidation, "annotation: mode must be 'conversation' or 'utterances'");
}

const char* to_string(AnnotationMode m) {
  return m == AnnotationMode::kConversation ? "conversation" : "utterances";
}

AnnotationBundle export_annotation_bundle(const DatasetBundle& dataset, const Corpus& corpus,
                                          const AnnotationRequest& request) {
  const int shots = shot_count(request.shots);
  if (request.count == 0) throw Error(ErrorKind::kValidation, "annotation: count must be >= 1");

  std::vector<const PairInstance*> pool;
  std::vector<const PairInstance*> train;
  for (const auto& [key, pairs] : dataset.groups) {
    for (const auto& p : pairs) {
      if (key.first == request.pool) pool.push_back(&p);
      if (key.first == Exposure::kTrain) train.push_back(&p);
    }
  }
  if (pool.size() < request.count) {
    throw Error(ErrorKind::kValidation, "annotation: pool " + std::string(to_string(request.pool)) + " holds " +
                                            std::to_string(pool.size()) + " pairs, " +
                                            std::to_string(request.count) + " requested");
  }
  Rng item_rng(derive_seed(request.seed, "annotation/items"));
  std::vector<const PairInstance*> items;
  for (auto i : item_rng.sample_indices(pool.size(), request.count)) items.push_back(pool[i]);

  std::set<std::string> item_sets;
  std::set<PairKey> item_keys;
  for (const auto* p : items) {
    item_sets.insert(p->set_a);
    item_sets.insert(p->set_b);
    item_keys.insert(pair_key(p->set_a, p->set_b));
  }
  std::vector<const PairInstance*> demo_pos;
  std::vector<const PairInstance*> demo_neg;
  for (const auto* p : train) {
    if (item_sets.contains(p->set_a) || item_sets.contains(p->set_b)) continue;
    if (item_keys.contains(pair_key(p->set_a, p->set_b))) continue;
    (p->label == Label::kPositive ? demo_pos : demo_neg).push_back(p);
  }
  const auto half = static_cast<std::size_t>(shots / 2);
  if (demo_pos.size() < half || demo_neg.size() < half) {
    throw Error(ErrorKind::kValidation, "annotation: Train pool cannot supply " + std::to_string(half) +
                                            " positive and negative demonstrations disjoint from the items");
  }

  const SetIndex index(dataset.sets);
  auto render = [&](const PairInstance& p) {
    return std::pair{render_sample(index.at(p.set_a), corpus, request.mode),
                     render_sample(index.at(p.set_b), corpus, request.mode)};
  };

  AnnotationBundle bundle;
  bundle.request = request;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& p = *items[i];
    AnnotationItem item;
    item.item_id = "item-" + std::to_string(i + 1);
    item.pair_id = p.pair_id;
    item.label = p.label;

    Json messages = Json::array();
    if (half > 0) {
      Rng rng(derive_seed(request.seed, "annotation/demos/" + item.item_id));
      std::vector<const PairInstance*> demos;
      for (auto k : rng.sample_indices(demo_pos.size(), half)) demos.push_back(demo_pos[k]);
      for (auto k : rng.sample_indices(demo_neg.size(), half)) demos.push_back(demo_neg[k]);
      rng.shuffle(demos);
      for (const auto* d : demos) {
        const auto [a, b] = render(*d);
        messages.push_back({{"role", "user"}, {"content", user_turn(a, b, request.mode)}});
        messages.push_back({{"role", "assistant"}, {"content", d->label == Label::kPositive ? "TRUE" : "FALSE"}});
        item.demo_pair_ids.push_back(d->pair_id);
      }
    }
    const auto [a, b] = render(p);
    auto target = user_turn(a, b, request.mode);
    if (request.shots == "cot") target += "\n" + std::string(kCotSuffix);
    messages.push_back({{"role", "user"}, {"content", target}});
    item.prompt = Json{{"system", kSystemPrompt}, {"messages", std::move(messages)}};
    item.questionnaire = questionnaire(item.item_id, a, b, request.mode);
    bundle.items.push_back(std::move(item));
  }
  return bundle;
}

void write_annotation_bundle(const fs::path& dir, const AnnotationBundle& bundle) {
  fs::create_directories(dir);
  std::string items;
  std::string key;
  std::string md = "# Speaker verification questionnaire\n\n";
  for (const auto& it : bundle.items) {
    OrderedJson j;
    j["item_id"] = it.item_id;
    j["pair_id"] = it.pair_id;
    j["mode"] = to_string(bundle.request.mode);
    j["shots"] = bundle.request.shots;
    j["prompt"] = it.prompt;
    j["demo_pair_ids"] = it.demo_pair_ids;
    items += j.dump() + "\n";
    OrderedJson k;
    k["item_id"] = it.item_id;
    k["pair_id"] = it.pair_id;
    k["label"] = to_string(it.label);
    key += k.dump() + "\n";
    md += it.questionnaire;
  }
  OrderedJson manifest;
  manifest["mode"] = to_string(bundle.request.mode);
  manifest["shots"] = bundle.request.shots;
  manifest["count"] = bundle.items.size();
  manifest["seed"] = bundle.request.seed;
  manifest["pool"] = to_string(bundle.request.pool);
  manifest["items_sha256"] = sha256_hex(items);
  write_file_atomic(dir / "items.jsonl", items);
  write_file_atomic(dir / "questionnaire.md", md);
  write_file_atomic(dir / "answer_key.jsonl", key);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace convsv::cli
