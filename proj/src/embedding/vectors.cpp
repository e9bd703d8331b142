#include <algorithm>
#include <cmath>
#include <set>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/text.hpp"
#include "convsv/embedding/embedding.hpp"

namespace convsv {

Vector hashed_ngram_embed(std::string_view text, std::size_t dim, std::size_t n) {
  if (dim < 2) throw Error(ErrorKind::kValidation, "hashed_ngram_embed: dim must be >= 2");
  if (n < 1) throw Error(ErrorKind::kValidation, "hashed_ngram_embed: n must be >= 1");
  Vector v(dim, 0.0);
  const auto cps = text::lowercase(text::decode_utf8(text));
  if (cps.empty()) return v;

  auto add = [&](std::u32string_view gram) {
    const std::uint64_t h = mix64(fnv1a64(text::encode_utf8(gram)));
    const std::size_t bucket = static_cast<std::size_t>(h % dim);
    const bool negative = ((h / dim) & 1U) != 0;
    v[bucket] += negative ? -1.0 : 1.0;
  };
  if (cps.size() < n) {
    add(cps);
  } else {
    const std::u32string_view view(cps);
    for (std::size_t i = 0; i + n <= cps.size(); ++i) add(view.substr(i, n));
  }

  const double norm = l2_norm(v);
  if (norm > 0.0) {
    for (auto& x : v) x /= norm;
  }
  return v;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kMismatch, "cosine: dimension mismatch (" + std::to_string(a.size()) +
                                          " vs " + std::to_string(b.size()) + ")");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

bool is_degenerate(std::span<const double> a, std::span<const double> b) {
  return l2_norm(a) == 0.0 || l2_norm(b) == 0.0;
}

SetEmbedding mix_embeddings(std::span<const SetEmbedding> per_backend) {
  if (per_backend.size() < 2) {
    throw Error(ErrorKind::kValidation, "mix_embeddings: at least two backends are required");
  }
  std::set<std::string> ids;
  SetEmbedding mixed;
  mixed.set_id = per_backend.front().set_id;
  mixed.backend_id = "mixed";
  mixed.num_pooled = per_backend.front().num_pooled;
  for (const auto& block : per_backend) {
    if (!ids.insert(block.backend_id).second) {
      throw Error(ErrorKind::kDuplicate, "mix_embeddings: duplicate backend '" + block.backend_id + "'");
    }
    if (block.set_id != mixed.set_id) {
      throw Error(ErrorKind::kMismatch, "mix_embeddings: blocks belong to different sets");
    }
    for (double x : block.values) {
      if (!std::isfinite(x)) {
        throw Error(ErrorKind::kNonFinite, "mix_embeddings: non-finite value in '" + block.backend_id + "'");
      }
    }
    const double norm = l2_norm(block.values);
    for (double x : block.values) mixed.values.push_back(norm > 0.0 ? x / norm : 0.0);
  }
  return mixed;
}

void mean_of_rows(std::span<const double> rows, std::size_t n, std::span<double> out) {
  const std::size_t dim = out.size();
  std::fill(out.begin(), out.end(), 0.0);
  if (n == 0) return;
  // Summing each column in sorted order makes the mean independent of the
  // order of the rows, bit for bit.
  std::vector<double> column(n);
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < n; ++i) column[i] = rows[i * dim + d];
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double x : column) s += x;
    out[d] = s / static_cast<double>(n);
  }
}

SetEmbedding encode_set(const UtteranceSet& set, const Backend& backend) {
  SetEmbedding e;
  e.set_id = set.set_id;
  e.backend_id = backend.id();
  e.values.assign(backend.dim(), 0.0);
  e.num_pooled = set.size();
  const std::size_t dim = backend.dim();
  std::vector<double> rows(set.size() * dim);
  for (std::size_t i = 0; i < set.size(); ++i) {
    backend.embed(set.utterance_ids[i], set.texts[i], std::span<double>(rows).subspan(i * dim, dim));
  }
  mean_of_rows(rows, set.size(), e.values);
  return e;
}

}  // namespace convsv
