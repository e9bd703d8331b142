#include "convsv/corpus/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/common/random.hpp"
#include "convsv/common/text.hpp"

namespace convsv {

std::vector<std::string> Conversation::speaker_ids() const {
  std::set<std::string> ids;
  for (const auto& u : utterances) ids.insert(u.speaker_id);
  return {ids.begin(), ids.end()};
}

std::size_t Corpus::num_utterances() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.utterances.size();
  return n;
}

const Conversation* Corpus::find(std::string_view conversation_id) const {
  for (const auto& c : conversations) {
    if (c.conversation_id == conversation_id) return &c;
  }
  return nullptr;
}

namespace {

void sort_canonical(std::vector<Conversation>& conversations) {
  std::sort(conversations.begin(), conversations.end(),
            [](const Conversation& a, const Conversation& b) {
              if (a.source_id != b.source_id) return a.source_id < b.source_id;
              return a.conversation_id < b.conversation_id;
            });
}

const std::string& require_string(const Json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error(ErrorKind::kParse,
                "line " + std::to_string(line) + ": missing string field '" + key + "'", line);
  }
  return it->get_ref<const std::string&>();
}

}  // namespace

IngestResult ingest_conversations(std::istream& records, std::string_view source_id) {
  IngestResult result;
  std::unordered_set<std::string> seen_ids;

  for_each_jsonl(records, [&](const Json& rec, std::size_t line) {
    if (!rec.is_object()) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": record is not an object",
                  line);
    }
    Conversation conv;
    conv.conversation_id = require_string(rec, "conversation_id", line);
    if (conv.conversation_id.empty()) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": empty conversation_id",
                  line);
    }
    if (auto it = rec.find("source_id"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw Error(ErrorKind::kParse,
                    "line " + std::to_string(line) + ": source_id must be a string", line);
      }
      conv.source_id = it->get<std::string>();
      if (!source_id.empty() && conv.source_id != source_id) {
        throw Error(ErrorKind::kParse,
                    "line " + std::to_string(line) + ": record source '" + conv.source_id +
                        "' does not match ingested source '" + std::string(source_id) + "'",
                    line);
      }
    } else if (!source_id.empty()) {
      conv.source_id = std::string(source_id);
    } else {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": missing source_id", line);
    }

    auto turns = rec.find("turns");
    if (turns == rec.end() || !turns->is_array() || turns->empty()) {
      throw Error(ErrorKind::kParse,
                  "line " + std::to_string(line) + ": 'turns' must be a non-empty array", line);
    }
    if (!seen_ids.insert(conv.conversation_id).second) {
      throw Error(ErrorKind::kDuplicate,
                  "line " + std::to_string(line) + ": duplicate conversation_id '" +
                      conv.conversation_id + "'",
                  line);
    }

    std::size_t turn_index = 0;
    for (const auto& turn : *turns) {
      if (!turn.is_object()) {
        throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": turn is not an object",
                    line);
      }
      Utterance u;
      u.speaker_id = require_string(turn, "speaker_id", line);
      u.text = require_string(turn, "text", line);
      if (u.speaker_id.empty()) {
        throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": empty speaker_id", line);
      }
      const std::size_t index = turn_index++;
      if (text::trim(u.text).empty()) {
        ++result.dropped_empty_utterances;
        continue;
      }
      u.turn_index = index;
      u.conversation_id = conv.conversation_id;
      u.utterance_id = conv.conversation_id + "#" + std::to_string(index);
      conv.utterances.push_back(std::move(u));
    }
    if (conv.utterances.empty()) {
      ++result.dropped_empty_conversations;
      return;
    }
    result.corpus.conversations.push_back(std::move(conv));
  });

  sort_canonical(result.corpus.conversations);
  result.manifest = make_manifest(result.corpus);
  return result;
}

IngestResult ingest_file(const std::filesystem::path& path, std::string_view source_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return ingest_conversations(in, source_id);
}

Corpus merge_corpora(std::vector<Corpus> parts) {
  Corpus merged;
  std::unordered_set<std::string> ids;
  for (auto& part : parts) {
    for (auto& conv : part.conversations) {
      if (!ids.insert(conv.conversation_id).second) {
        throw Error(ErrorKind::kDuplicate,
                    "duplicate conversation_id '" + conv.conversation_id + "' across sources");
      }
      merged.conversations.push_back(std::move(conv));
    }
  }
  sort_canonical(merged.conversations);
  return merged;
}

Corpus filter_corpus(const Corpus& corpus, const FilterConfig& config) {
  Corpus current = corpus;
  while (true) {
    bool changed = false;

    auto short_end = std::remove_if(
        current.conversations.begin(), current.conversations.end(),
        [&](const Conversation& c) { return c.utterances.size() < config.min_turns; });
    if (short_end != current.conversations.end()) {
      current.conversations.erase(short_end, current.conversations.end());
      changed = true;
    }

    std::unordered_map<std::string, std::size_t> occurrences;
    for (const auto& c : current.conversations) {
      if (config.occurrence_mode == OccurrenceMode::kConversations) {
        for (const auto& s : c.speaker_ids()) ++occurrences[s];
      } else {
        for (const auto& u : c.utterances) ++occurrences[u.speaker_id];
      }
    }
    for (auto& c : current.conversations) {
      auto rare_end = std::remove_if(c.utterances.begin(), c.utterances.end(),
                                     [&](const Utterance& u) {
                                       return occurrences[u.speaker_id] <
                                              config.min_speaker_occurrences;
                                     });
      if (rare_end != c.utterances.end()) {
        c.utterances.erase(rare_end, c.utterances.end());
        changed = true;
      }
    }

    if (!changed) break;
  }
  if (current.conversations.empty()) {
    throw Error(ErrorKind::kEmpty, "corpus is empty after filtering");
  }
  return current;
}

CorpusStats aggregate_stats(const std::map<std::string, SourceStats>& per_source) {
  CorpusStats stats;
  stats.per_source = per_source;
  for (const auto& [_, s] : per_source) {
    stats.total.num_speakers += s.num_speakers;
    stats.total.num_utterances += s.num_utterances;
    stats.total.num_conversations += s.num_conversations;
  }
  return stats;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  std::map<std::string, SourceStats> per_source;
  std::map<std::string, std::set<std::string>> speakers;
  for (const auto& c : corpus.conversations) {
    auto& s = per_source[c.source_id];
    s.num_conversations += 1;
    s.num_utterances += c.utterances.size();
    for (const auto& u : c.utterances) speakers[c.source_id].insert(u.speaker_id);
  }
  for (auto& [source, s] : per_source) s.num_speakers = speakers[source].size();
  return aggregate_stats(per_source);
}

std::vector<UtteranceSet> extract_utterance_sets(const Corpus& corpus,
                                                 const SetExtractionConfig& config) {
  std::vector<UtteranceSet> sets;
  for (const auto& conv : corpus.conversations) {
    // Utterances are stored in turn order, so per-speaker buckets are too.
    std::map<std::string, std::vector<const Utterance*>> by_speaker;
    for (const auto& u : conv.utterances) by_speaker[u.speaker_id].push_back(&u);

    for (auto& [speaker, utts] : by_speaker) {
      if (utts.size() < config.min_len) continue;
      if (utts.size() > config.max_len) {
        if (config.sample_seed) {
          Rng rng(derive_seed(*config.sample_seed, conv.conversation_id + "::" + speaker));
          std::vector<const Utterance*> kept;
          for (std::size_t i : rng.sample_indices(utts.size(), config.max_len)) {
            kept.push_back(utts[i]);
          }
          utts = std::move(kept);
        } else {
          utts.resize(config.max_len);
        }
      }
      UtteranceSet set;
      set.set_id = conv.conversation_id + "::" + speaker;
      set.speaker_id = speaker;
      set.conversation_id = conv.conversation_id;
      set.source_id = conv.source_id;
      for (const auto* u : utts) {
        set.utterance_ids.push_back(u->utterance_id);
        set.texts.push_back(u->text);
        set.turn_indices.push_back(u->turn_index);
      }
      sets.push_back(std::move(set));
    }
  }
  return sets;
}

}  // namespace convsv
