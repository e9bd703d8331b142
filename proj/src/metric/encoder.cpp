#include "convsv/common/error.hpp"
#include "convsv/kernels/kernels.hpp"
#include "convsv/metric/metric.hpp"

namespace convsv {

SetEncoder::SetEncoder(std::vector<std::shared_ptr<const Backend>> backends,
                       std::optional<ProjectionHead> head)
    : backends_(std::move(backends)) {
  if (backends_.empty()) throw Error(ErrorKind::kValidation, "encoder: no backends");
  for (const auto& b : backends_) {
    if (!b) throw Error(ErrorKind::kValidation, "encoder: null backend");
  }
  set_head(std::move(head));
}

void SetEncoder::set_head(std::optional<ProjectionHead> head) {
  if (head && head->in_dim != base_dim()) {
    throw Error(ErrorKind::kMismatch, "encoder: head expects dim " + std::to_string(head->in_dim) +
                                          ", base is " + std::to_string(base_dim()));
  }
  head_ = std::move(head);
}

std::string SetEncoder::id() const {
  std::string out;
  if (backends_.size() > 1) out = "mixed(";
  for (std::size_t i = 0; i < backends_.size(); ++i) {
    if (i > 0) out += ",";
    out += backends_[i]->id();
  }
  if (backends_.size() > 1) out += ")";
  if (head_) out += "+" + head_->id();
  return out;
}

std::size_t SetEncoder::base_dim() const {
  std::size_t d = 0;
  for (const auto& b : backends_) d += b->dim();
  return d;
}

std::size_t SetEncoder::dim() const { return head_ ? head_->out_dim : base_dim(); }

EmbeddingTable SetEncoder::encode_base(std::span<const UtteranceSet> sets) const {
  EmbeddingTable table;
  table.dim = base_dim();
  if (backends_.size() == 1) {
    table.backend_id = backends_.front()->id();
    std::vector<double> rows(sets.size() * table.dim);
    kernels::parallel::encode_sets(sets, *backends_.front(), rows);
    for (std::size_t i = 0; i < sets.size(); ++i) {
      table.add(sets[i].set_id, std::span<const double>(rows).subspan(i * table.dim, table.dim),
                sets[i].size());
    }
    return table;
  }

  table.backend_id = id();
  if (head_) table.backend_id = table.backend_id.substr(0, table.backend_id.rfind('+'));
  std::vector<std::vector<double>> blocks;
  for (const auto& b : backends_) {
    blocks.emplace_back(sets.size() * b->dim());
    kernels::parallel::encode_sets(sets, *b, blocks.back());
  }
  std::vector<SetEmbedding> parts(backends_.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t k = 0; k < backends_.size(); ++k) {
      const std::size_t d = backends_[k]->dim();
      parts[k].set_id = sets[i].set_id;
      parts[k].backend_id = backends_[k]->id();
      parts[k].values.assign(blocks[k].begin() + static_cast<std::ptrdiff_t>(i * d),
                             blocks[k].begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    }
    const auto mixed = mix_embeddings(parts);
    table.add(sets[i].set_id, mixed.values, sets[i].size());
  }
  return table;
}

EmbeddingTable SetEncoder::encode(std::span<const UtteranceSet> sets) const {
  auto base = encode_base(sets);
  return head_ ? project_table(base, *head_) : base;
}

Vector SetEncoder::encode(const UtteranceSet& set) const {
  auto table = encode(std::span<const UtteranceSet>(&set, 1));
  auto r = table.row(0);
  return Vector(r.begin(), r.end());
}

}  // namespace convsv
