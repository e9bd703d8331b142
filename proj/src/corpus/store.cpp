#include <fstream>
#include <sstream>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/corpus/corpus.hpp"

namespace convsv {

std::string canonical_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& conv : corpus.conversations) {
    OrderedJson rec;
    rec["conversation_id"] = conv.conversation_id;
    rec["source_id"] = conv.source_id;
    OrderedJson turns = OrderedJson::array();
    for (const auto& u : conv.utterances) {
      OrderedJson t;
      t["speaker_id"] = u.speaker_id;
      t["text"] = u.text;
      t["turn_index"] = u.turn_index;
      turns.push_back(std::move(t));
    }
    rec["turns"] = std::move(turns);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::string content_hash(const Corpus& corpus) { return sha256_hex(canonical_jsonl(corpus)); }

CorpusManifest make_manifest(const Corpus& corpus, std::optional<FilterConfig> filter_config,
                             std::string corpus_id) {
  CorpusManifest m;
  m.content_hash = content_hash(corpus);
  m.corpus_id = corpus_id.empty() ? "corpus-" + m.content_hash.substr(0, 12) : std::move(corpus_id);
  auto stats = corpus_stats(corpus);
  m.counts = stats.per_source;
  for (const auto& [source, _] : stats.per_source) m.sources.push_back(source);
  m.filter_config = filter_config;
  return m;
}

std::string manifest_json(const CorpusManifest& manifest) {
  OrderedJson doc;
  doc["corpus_id"] = manifest.corpus_id;
  doc["sources"] = manifest.sources;
  OrderedJson counts = OrderedJson::object();
  for (const auto& [source, s] : manifest.counts) {
    OrderedJson row;
    row["num_speakers"] = s.num_speakers;
    row["num_utterances"] = s.num_utterances;
    row["num_conversations"] = s.num_conversations;
    row["avg_turns"] = s.avg_turns();
    counts[source] = std::move(row);
  }
  doc["counts"] = std::move(counts);
  if (manifest.filter_config) {
    OrderedJson f;
    f["min_turns"] = manifest.filter_config->min_turns;
    f["min_speaker_occurrences"] = manifest.filter_config->min_speaker_occurrences;
    f["occurrence_mode"] = manifest.filter_config->occurrence_mode == OccurrenceMode::kConversations
                               ? "conversations"
                               : "utterances";
    doc["filter_config"] = std::move(f);
  } else {
    doc["filter_config"] = nullptr;
  }
  doc["content_hash"] = manifest.content_hash;
  return doc.dump(2) + "\n";
}

void write_store(const std::filesystem::path& dir, const Corpus& corpus,
                 const CorpusManifest& manifest) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "conversations.jsonl", canonical_jsonl(corpus));
  write_file_atomic(dir / "manifest.json", manifest_json(manifest));
}

namespace {

CorpusManifest parse_manifest(const Json& doc) {
  CorpusManifest m;
  m.corpus_id = doc.at("corpus_id").get<std::string>();
  m.sources = doc.at("sources").get<std::vector<std::string>>();
  for (const auto& [source, row] : doc.at("counts").items()) {
    SourceStats s;
    s.num_speakers = row.at("num_speakers").get<std::size_t>();
    s.num_utterances = row.at("num_utterances").get<std::size_t>();
    s.num_conversations = row.at("num_conversations").get<std::size_t>();
    m.counts[source] = s;
  }
  if (const auto& f = doc.at("filter_config"); !f.is_null()) {
    FilterConfig fc;
    fc.min_turns = f.at("min_turns").get<std::size_t>();
    fc.min_speaker_occurrences = f.at("min_speaker_occurrences").get<std::size_t>();
    fc.occurrence_mode = f.value("occurrence_mode", "conversations") == "utterances"
                             ? OccurrenceMode::kUtterances
                             : OccurrenceMode::kConversations;
    m.filter_config = fc;
  }
  m.content_hash = doc.at("content_hash").get<std::string>();
  return m;
}

}  // namespace

LoadedStore load_store(const std::filesystem::path& dir) {
  LoadedStore store;
  std::ifstream in(dir / "conversations.jsonl", std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "no corpus store at " + dir.string());

  for_each_jsonl(in, [&](const Json& rec, std::size_t line) {
    try {
      Conversation conv;
      conv.conversation_id = rec.at("conversation_id").get<std::string>();
      conv.source_id = rec.at("source_id").get<std::string>();
      std::size_t fallback = 0;
      for (const auto& t : rec.at("turns")) {
        Utterance u;
        u.conversation_id = conv.conversation_id;
        u.speaker_id = t.at("speaker_id").get<std::string>();
        u.text = t.at("text").get<std::string>();
        u.turn_index = t.value("turn_index", fallback);
        fallback = u.turn_index + 1;
        u.utterance_id = conv.conversation_id + "#" + std::to_string(u.turn_index);
        conv.utterances.push_back(std::move(u));
      }
      store.corpus.conversations.push_back(std::move(conv));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + e.what(), line);
    }
  });

  try {
    store.manifest = parse_manifest(Json::parse(read_file(dir / "manifest.json")));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, "manifest.json: " + std::string(e.what()));
  }
  const auto actual = content_hash(store.corpus);
  if (actual != store.manifest.content_hash) {
    throw Error(ErrorKind::kMismatch, "corpus store hash mismatch: manifest says " +
                                          store.manifest.content_hash + ", data hashes to " +
                                          actual);
  }
  return store;
}

}  // namespace convsv
