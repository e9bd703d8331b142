#include <omp.h>

#include <algorithm>
#include <exception>
#include <limits>

#include "convsv/kernels/kernels.hpp"

namespace convsv::kernels::parallel {
namespace {

// Keeps the exception thrown by the lowest loop index so failures are
// reported the same way regardless of scheduling.
class FirstError {
 public:
  void capture(std::size_t index) {
#pragma omp critical(convsv_first_error)
    {
      if (index < index_) {
        index_ = index;
        error_ = std::current_exception();
      }
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::size_t index_ = std::numeric_limits<std::size_t>::max();
  std::exception_ptr error_;
};

}  // namespace

void encode_sets(std::span<const UtteranceSet> sets, const Backend& backend,
                 std::span<double> out) {
  const std::size_t dim = backend.dim();
  const auto n = static_cast<std::ptrdiff_t>(sets.size());
  FirstError error;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto e = encode_set(sets[static_cast<std::size_t>(i)], backend);
      std::copy(e.values.begin(), e.values.end(), out.begin() + i * static_cast<std::ptrdiff_t>(dim));
    } catch (...) {
      error.capture(static_cast<std::size_t>(i));
    }
  }
  error.rethrow();
}

void pair_cosines(std::span<const double> table, std::size_t dim,
                  std::span<const IndexPair> pairs, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] =
        cosine(table.subspan(p.a * dim, dim), table.subspan(p.b * dim, dim));
  }
}

void cosine_matrix(std::span<const double> a, std::span<const double> b, std::size_t dim,
                   std::span<double> out) {
  const auto na = static_cast<std::ptrdiff_t>(a.size() / dim);
  const std::size_t nb = b.size() / dim;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < na; ++i) {
    const auto row = a.subspan(static_cast<std::size_t>(i) * dim, dim);
    for (std::size_t j = 0; j < nb; ++j) {
      out[static_cast<std::size_t>(i) * nb + j] = cosine(row, b.subspan(j * dim, dim));
    }
  }
}

double contrastive_gradient(std::span<const double> table, std::size_t dim,
                            std::span<const LabeledIndexPair> pairs, const ProjectionHead& head,
                            double margin, bool clamp, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (pairs.empty()) return 0.0;
  const std::size_t batch = pairs.size();
  const std::size_t chunk = gradient_chunk_size(batch);
  const std::size_t num_chunks = (batch + chunk - 1) / chunk;
  const std::size_t width = grad.size();
  const double scale = 1.0 / static_cast<double>(batch);

  std::vector<double> partial(num_chunks * width, 0.0);
  std::vector<double> losses(num_chunks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(num_chunks); ++c) {
    const auto cu = static_cast<std::size_t>(c);
    auto acc = std::span<double>(partial).subspan(cu * width, width);
    const std::size_t end = std::min(batch, (cu + 1) * chunk);
    double loss = 0.0;
    for (std::size_t i = cu * chunk; i < end; ++i) {
      const auto& p = pairs[i];
      loss += accumulate_pair_gradient(head, table.subspan(p.a * dim, dim),
                                       table.subspan(p.b * dim, dim), p.positive, margin, clamp,
                                       scale, acc);
    }
    losses[cu] = loss;
  }

  // Pairwise tree over chunk index; the order depends only on num_chunks.
  for (std::size_t stride = 1; stride < num_chunks; stride *= 2) {
    for (std::size_t c = 0; c + stride < num_chunks; c += 2 * stride) {
      double* dst = partial.data() + c * width;
      const double* src = partial.data() + (c + stride) * width;
      for (std::size_t k = 0; k < width; ++k) dst[k] += src[k];
      losses[c] += losses[c + stride];
    }
  }
  std::copy(partial.begin(), partial.begin() + static_cast<std::ptrdiff_t>(width), grad.begin());
  return losses[0] * scale;
}

void project_rows(std::span<const double> in, const ProjectionHead& head, std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(in.size() / head.in_dim);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    head.apply(in.subspan(ru * head.in_dim, head.in_dim), out.subspan(ru * head.out_dim, head.out_dim));
  }
}

}  // namespace convsv::kernels::parallel
