#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace convsv {

struct Utterance {
  std::string utterance_id;
  std::string conversation_id;
  std::string speaker_id;
  std::size_t turn_index = 0;  // position in the source record's turn array
  std::string text;
};

struct Conversation {
  std::string conversation_id;
  std::string source_id;
  std::vector<Utterance> utterances;

  // Distinct speakers, sorted.
  std::vector<std::string> speaker_ids() const;
};

// Conversations are kept ordered by (source_id, conversation_id); that order
// is part of the canonical serialization.
struct Corpus {
  std::vector<Conversation> conversations;

  std::size_t num_utterances() const;
  const Conversation* find(std::string_view conversation_id) const;
};

enum class OccurrenceMode { kConversations, kUtterances };

struct FilterConfig {
  std::size_t min_turns = 5;
  std::size_t min_speaker_occurrences = 5;
  OccurrenceMode occurrence_mode = OccurrenceMode::kConversations;
};

struct SourceStats {
  std::size_t num_speakers = 0;
  std::size_t num_utterances = 0;
  std::size_t num_conversations = 0;

  double avg_turns() const {
    return num_conversations == 0
               ? 0.0
               : static_cast<double>(num_utterances) / static_cast<double>(num_conversations);
  }
  friend bool operator==(const SourceStats&, const SourceStats&) = default;
};

// Totals are the sums of the per-source rows; a speaker id that occurs in two
// sources is counted once per source.
struct CorpusStats {
  std::map<std::string, SourceStats> per_source;
  SourceStats total;
};

CorpusStats aggregate_stats(const std::map<std::string, SourceStats>& per_source);

struct CorpusManifest {
  std::string corpus_id;
  std::vector<std::string> sources;
  std::map<std::string, SourceStats> counts;
  std::optional<FilterConfig> filter_config;
  std::string content_hash;
};

struct IngestResult {
  Corpus corpus;
  CorpusManifest manifest;
  std::size_t dropped_empty_utterances = 0;
  std::size_t dropped_empty_conversations = 0;
};

// Parses conversation interchange JSONL. `source_id` may be empty, in which
// case every record must carry its own; otherwise records that name a
// different source are rejected.
IngestResult ingest_conversations(std::istream& records, std::string_view source_id);
IngestResult ingest_file(const std::filesystem::path& path, std::string_view source_id);

// Union of corpora. Conversation ids must be unique across all inputs.
Corpus merge_corpora(std::vector<Corpus> parts);

// Iterates short-conversation and rare-speaker removal to a fixed point.
// Throws Error(kEmpty) when nothing survives.
Corpus filter_corpus(const Corpus& corpus, const FilterConfig& config = {});

CorpusStats corpus_stats(const Corpus& corpus);

std::string canonical_jsonl(const Corpus& corpus);
std::string content_hash(const Corpus& corpus);
CorpusManifest make_manifest(const Corpus& corpus,
                             std::optional<FilterConfig> filter_config = std::nullopt,
                             std::string corpus_id = {});

std::string manifest_json(const CorpusManifest& manifest);

// On-disk store: conversations.jsonl plus manifest.json.
void write_store(const std::filesystem::path& dir, const Corpus& corpus,
                 const CorpusManifest& manifest);

struct LoadedStore {
  Corpus corpus;
  CorpusManifest manifest;
};

// Verifies that the stored content hash matches the data.
LoadedStore load_store(const std::filesystem::path& dir);

// One speaker's utterances within one conversation.
struct UtteranceSet {
  std::string set_id;
  std::string speaker_id;
  std::string conversation_id;
  std::string source_id;
  std::vector<std::string> utterance_ids;
  std::vector<std::string> texts;
  std::vector<std::size_t> turn_indices;

  std::size_t size() const { return utterance_ids.size(); }
};

struct SetExtractionConfig {
  std::size_t min_len = 5;
  std::size_t max_len = 20;
  // When set, an over-long set keeps a seeded random subset (in turn order)
  // instead of its first max_len utterances.
  std::optional<std::uint64_t> sample_seed;
};

std::vector<UtteranceSet> extract_utterance_sets(const Corpus& corpus,
                                                 const SetExtractionConfig& config = {});

}  // namespace convsv
