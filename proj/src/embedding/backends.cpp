#include "convsv/common/error.hpp"
#include "convsv/embedding/embedding.hpp"

namespace convsv {

LexiconBackend::LexiconBackend(CategoryLexicon lexicon, std::string id)
    : lexicon_(std::move(lexicon)), id_(std::move(id)) {}

void LexiconBackend::embed(std::string_view, std::string_view text, std::span<double> out) const {
  const std::string t(text);
  const auto profile = category_profile(std::span<const std::string>(&t, 1), lexicon_);
  std::copy(profile.proportions.begin(), profile.proportions.end(), out.begin());
}

HashedNgramBackend::HashedNgramBackend(std::size_t dim, std::size_t n)
    : dim_(dim), n_(n), id_("hashed-ngram") {
  if (dim_ < 2) throw Error(ErrorKind::kValidation, "hashed-ngram backend: dim must be >= 2");
  if (n_ < 1) throw Error(ErrorKind::kValidation, "hashed-ngram backend: n must be >= 1");
}

void HashedNgramBackend::embed(std::string_view, std::string_view text,
                               std::span<double> out) const {
  const auto v = hashed_ngram_embed(text, dim_, n_);
  std::copy(v.begin(), v.end(), out.begin());
}

ExternalBackend::ExternalBackend(std::shared_ptr<const ExternalEmbeddings> table)
    : table_(std::move(table)) {}

void ExternalBackend::embed(std::string_view utterance_id, std::string_view,
                            std::span<double> out) const {
  auto it = table_->vectors.find(std::string(utterance_id));
  if (it == table_->vectors.end()) {
    throw Error(ErrorKind::kMissing, "backend '" + table_->backend_id +
                                         "' has no vector for utterance '" +
                                         std::string(utterance_id) + "'");
  }
  std::copy(it->second.begin(), it->second.end(), out.begin());
}

}  // namespace convsv

#include <cmath>
#include <sstream>

#include "convsv/common/jsonl.hpp"

namespace convsv {

std::size_t EmbeddingTable::index_of(std::string_view set_id) const {
  auto it = index_.find(std::string(set_id));
  if (it == index_.end()) {
    throw Error(ErrorKind::kMissing, "no embedding for set '" + std::string(set_id) + "'");
  }
  return it->second;
}

bool EmbeddingTable::contains(std::string_view set_id) const {
  return index_.contains(std::string(set_id));
}

void EmbeddingTable::add(std::string set_id, std::span<const double> values, std::size_t pooled) {
  if (values.size() != dim) {
    throw Error(ErrorKind::kMismatch, "embedding table: row for '" + set_id + "' has dim " +
                                          std::to_string(values.size()) + ", expected " +
                                          std::to_string(dim));
  }
  if (!index_.emplace(set_id, ids.size()).second) {
    throw Error(ErrorKind::kDuplicate, "embedding table: duplicate set '" + set_id + "'");
  }
  ids.push_back(std::move(set_id));
  num_pooled.push_back(pooled);
  data.insert(data.end(), values.begin(), values.end());
}

SetEmbedding EmbeddingTable::embedding(std::size_t i) const {
  SetEmbedding e;
  e.set_id = ids[i];
  e.backend_id = backend_id;
  auto r = row(i);
  e.values.assign(r.begin(), r.end());
  e.num_pooled = num_pooled[i];
  return e;
}

std::string table_jsonl(const EmbeddingTable& table) {
  OrderedJson header;
  header["backend_id"] = table.backend_id;
  header["dim"] = table.dim;
  std::string out = header.dump() + "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    OrderedJson rec;
    rec["set_id"] = table.ids[i];
    auto r = table.row(i);
    rec["values"] = std::vector<double>(r.begin(), r.end());
    rec["num_pooled"] = table.num_pooled[i];
    out += rec.dump();
    out += '\n';
  }
  return out;
}

EmbeddingTable parse_table_jsonl(std::string_view data) {
  EmbeddingTable table;
  bool have_header = false;
  std::istringstream in{std::string(data)};
  for_each_jsonl(in, [&](const Json& rec, std::size_t line) {
    try {
      if (!have_header) {
        table.backend_id = rec.at("backend_id").get<std::string>();
        table.dim = rec.at("dim").get<std::size_t>();
        have_header = true;
        return;
      }
      const auto values = rec.at("values").get<std::vector<double>>();
      for (double v : values) {
        if (!std::isfinite(v)) {
          throw Error(ErrorKind::kNonFinite, "line " + std::to_string(line) + ": non-finite value",
                      line);
        }
      }
      table.add(rec.at("set_id").get<std::string>(), values, rec.value("num_pooled", 0));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + e.what(), line);
    }
  });
  if (!have_header) throw Error(ErrorKind::kParse, "set embedding file has no header line");
  return table;
}

}  // namespace convsv
