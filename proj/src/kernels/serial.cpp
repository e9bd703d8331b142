#include <algorithm>

#include "convsv/kernels/kernels.hpp"

namespace convsv::kernels {

std::size_t gradient_chunk_size(std::size_t batch) {
  constexpr std::size_t kMinChunk = 32;
  constexpr std::size_t kMaxChunks = 16;
  return std::max(kMinChunk, (batch + kMaxChunks - 1) / kMaxChunks);
}

namespace serial {

void encode_sets(std::span<const UtteranceSet> sets, const Backend& backend,
                 std::span<double> out) {
  const std::size_t dim = backend.dim();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto e = encode_set(sets[i], backend);
    std::copy(e.values.begin(), e.values.end(), out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
}

void pair_cosines(std::span<const double> table, std::size_t dim,
                  std::span<const IndexPair> pairs, std::span<double> out) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out[i] = cosine(table.subspan(pairs[i].a * dim, dim), table.subspan(pairs[i].b * dim, dim));
  }
}

void cosine_matrix(std::span<const double> a, std::span<const double> b, std::size_t dim,
                   std::span<double> out) {
  const std::size_t na = a.size() / dim;
  const std::size_t nb = b.size() / dim;
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      out[i * nb + j] = cosine(a.subspan(i * dim, dim), b.subspan(j * dim, dim));
    }
  }
}

double contrastive_gradient(std::span<const double> table, std::size_t dim,
                            std::span<const LabeledIndexPair> pairs, const ProjectionHead& head,
                            double margin, bool clamp, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (pairs.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(pairs.size());
  double loss = 0.0;
  for (const auto& p : pairs) {
    loss += accumulate_pair_gradient(head, table.subspan(p.a * dim, dim),
                                     table.subspan(p.b * dim, dim), p.positive, margin, clamp,
                                     scale, grad);
  }
  return loss * scale;
}

void project_rows(std::span<const double> in, const ProjectionHead& head, std::span<double> out) {
  const std::size_t rows = in.size() / head.in_dim;
  for (std::size_t r = 0; r < rows; ++r) {
    head.apply(in.subspan(r * head.in_dim, head.in_dim), out.subspan(r * head.out_dim, head.out_dim));
  }
}

}  // namespace serial
}  // namespace convsv::kernels
