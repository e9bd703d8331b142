#pragma once

// Data-parallel kernels. Each kernel has a plain serial reference and an
// OpenMP version with the same signature; the library calls `parallel::`,
// the tests check it against `serial::`.
//
// Row-major tables are passed as (data, dim) with rows = data.size() / dim.

#include <cstddef>
#include <span>

#include "convsv/embedding/embedding.hpp"
#include "convsv/metric/metric.hpp"

namespace convsv::kernels {

struct IndexPair {
  std::size_t a;
  std::size_t b;
};

struct LabeledIndexPair {
  std::size_t a;
  std::size_t b;
  bool positive;
};

// Fixed partition of a batch for gradient reduction; depends on the batch
// size only, never on the thread count.
std::size_t gradient_chunk_size(std::size_t batch);

namespace serial {

// Mean-pooled set embeddings, one row per set.
void encode_sets(std::span<const UtteranceSet> sets, const Backend& backend,
                 std::span<double> out);

// Cosine of each (row a, row b) pair.
void pair_cosines(std::span<const double> table, std::size_t dim,
                  std::span<const IndexPair> pairs, std::span<double> out);

// out[i * rows(b) + j] = cosine(a row i, b row j).
void cosine_matrix(std::span<const double> a, std::span<const double> b, std::size_t dim,
                   std::span<double> out);

// Batch-mean contrastive loss; writes the batch-mean gradient to `grad`.
double contrastive_gradient(std::span<const double> table, std::size_t dim,
                            std::span<const LabeledIndexPair> pairs, const ProjectionHead& head,
                            double margin, bool clamp, std::span<double> grad);

// Applies the head to every row of `in`.
void project_rows(std::span<const double> in, const ProjectionHead& head, std::span<double> out);

}  // namespace serial

namespace parallel {

// Mean-pooled set embeddings, one row per set.
void encode_sets(std::span<const UtteranceSet> sets, const Backend& backend,
                 std::span<double> out);

// Cosine of each (row a, row b) pair.
void pair_cosines(std::span<const double> table, std::size_t dim,
                  std::span<const IndexPair> pairs, std::span<double> out);

// out[i * rows(b) + j] = cosine(a row i, b row j).
void cosine_matrix(std::span<const double> a, std::span<const double> b, std::size_t dim,
                   std::span<double> out);

// Batch-mean contrastive loss; writes the batch-mean gradient to `grad`.
double contrastive_gradient(std::span<const double> table, std::size_t dim,
                            std::span<const LabeledIndexPair> pairs, const ProjectionHead& head,
                            double margin, bool clamp, std::span<double> grad);

// Applies the head to every row of `in`.
void project_rows(std::span<const double> in, const ProjectionHead& head, std::span<double> out);

}  // namespace parallel

}  // namespace convsv::kernels
