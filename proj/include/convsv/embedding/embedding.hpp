#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "convsv/corpus/corpus.hpp"

namespace convsv {

using Vector = std::vector<double>;

// Word-pattern lexicon in the LIWC mould. Patterns are lowercase; a trailing
// '*' turns a pattern into a prefix match.
struct CategoryLexicon {
  std::vector<std::string> categories;
  std::map<std::string, std::vector<std::size_t>> exact;
  std::map<std::string, std::vector<std::size_t>> prefix;  // keys stored without '*'

  std::size_t num_patterns() const { return exact.size() + prefix.size(); }

  // Sorted, de-duplicated category indices matched by `token`.
  std::vector<std::size_t> match(std::string_view token) const;

  // Hash of the canonical serialization.
  std::string hash() const;
};

CategoryLexicon parse_lexicon(std::string_view json_text);
CategoryLexicon load_lexicon(const std::filesystem::path& path);

struct CategoryProfile {
  Vector proportions;
  std::size_t token_count = 0;
};

// Proportion of tokens (over all texts) that match each category.
CategoryProfile category_profile(std::span<const std::string> texts, const CategoryLexicon& lexicon);

// Mean over categories of 1 - |a - b| / (a + b + epsilon).
double lsm_similarity(const CategoryProfile& a, const CategoryProfile& b, double epsilon = 1e-9);

struct UtteranceVector {
  std::string utterance_id;
  std::string backend_id;
  Vector values;

  std::size_t dim() const { return values.size(); }
};

UtteranceVector lexicon_style_vector(std::span<const std::string> texts,
                                     const CategoryLexicon& lexicon,
                                     std::string utterance_id = {});

// Signed feature hashing of lowercased character n-grams, L2-normalized.
// Texts shorter than n contribute themselves as a single gram.
Vector hashed_ngram_embed(std::string_view text, std::size_t dim = 1024, std::size_t n = 3);

struct SetEmbedding {
  std::string set_id;
  std::string backend_id;
  Vector values;
  std::size_t num_pooled = 0;
};

// Zero vectors get cosine 0 by convention; see is_degenerate.
double cosine(std::span<const double> a, std::span<const double> b);
bool is_degenerate(std::span<const double> a, std::span<const double> b);
inline double set_distance(std::span<const double> a, std::span<const double> b) {
  return 1.0 - cosine(a, b);
}
double l2_norm(std::span<const double> v);

// L2-normalizes every block and concatenates them in input order.
SetEmbedding mix_embeddings(std::span<const SetEmbedding> per_backend);

// Per-utterance vector source. Implementations are immutable after
// construction and safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual void embed(std::string_view utterance_id, std::string_view text,
                     std::span<double> out) const = 0;

  Vector embed(std::string_view utterance_id, std::string_view text) const {
    Vector v(dim());
    embed(utterance_id, text, v);
    return v;
  }
};

class LexiconBackend final : public Backend {
 public:
  explicit LexiconBackend(CategoryLexicon lexicon, std::string id = "lexicon");
  const std::string& id() const override { return id_; }
  std::size_t dim() const override { return lexicon_.categories.size(); }
  void embed(std::string_view utterance_id, std::string_view text,
             std::span<double> out) const override;
  const CategoryLexicon& lexicon() const { return lexicon_; }

 private:
  CategoryLexicon lexicon_;
  std::string id_;
};

class HashedNgramBackend final : public Backend {
 public:
  explicit HashedNgramBackend(std::size_t dim = 1024, std::size_t n = 3);
  const std::string& id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  void embed(std::string_view utterance_id, std::string_view text,
             std::span<double> out) const override;

 private:
  std::size_t dim_;
  std::size_t n_;
  std::string id_;
};

struct ExternalEmbeddings {
  std::string backend_id;
  std::size_t dim = 0;
  std::unordered_map<std::string, Vector> vectors;

  // Load diagnostics.
  std::vector<std::size_t> rejected_lines;     // non-finite values
  std::size_t unknown_skipped = 0;             // ids absent from the corpus
  std::vector<std::string> missing_ids;        // corpus ids without a vector, sorted
  std::size_t corpus_utterances = 0;

  double coverage() const {
    return corpus_utterances == 0
               ? 1.0
               : static_cast<double>(corpus_utterances - missing_ids.size()) /
                     static_cast<double>(corpus_utterances);
  }
};

// Reads the embedding interchange JSONL. When `corpus` is given, vectors for
// unknown ids are skipped and coverage is reported against its utterances.
ExternalEmbeddings load_external_embeddings(std::istream& in, const Corpus* corpus = nullptr);
ExternalEmbeddings load_external_embeddings(const std::filesystem::path& path,
                                            const Corpus* corpus = nullptr);

class ExternalBackend final : public Backend {
 public:
  explicit ExternalBackend(std::shared_ptr<const ExternalEmbeddings> table);
  const std::string& id() const override { return table_->backend_id; }
  std::size_t dim() const override { return table_->dim; }
  // Throws Error(kMissing) for an id without a vector.
  void embed(std::string_view utterance_id, std::string_view text,
             std::span<double> out) const override;

 private:
  std::shared_ptr<const ExternalEmbeddings> table_;
};

// Column means of an n x out.size() row-major block; exactly invariant to row
// order.
void mean_of_rows(std::span<const double> rows, std::size_t n, std::span<double> out);

// Mean of the set's utterance vectors.
SetEmbedding encode_set(const UtteranceSet& set, const Backend& backend);

// Row-major block of set embeddings addressed by set_id.
struct EmbeddingTable {
  std::string backend_id;
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<std::size_t> num_pooled;
  std::vector<double> data;

  std::size_t size() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * dim, dim);
  }
  std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * dim, dim); }
  // Throws Error(kMissing) for an unknown id.
  std::size_t index_of(std::string_view set_id) const;
  bool contains(std::string_view set_id) const;
  std::span<const double> row(std::string_view set_id) const { return row(index_of(set_id)); }

  void add(std::string set_id, std::span<const double> values, std::size_t pooled);
  SetEmbedding embedding(std::size_t i) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Header {"backend_id", "dim"} followed by {"set_id", "values", "num_pooled"}.
std::string table_jsonl(const EmbeddingTable& table);
EmbeddingTable parse_table_jsonl(std::string_view data);

}  // namespace convsv
