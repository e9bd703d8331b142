#include <gtest/gtest.h>

#include <omp.h>

#include "convsv/common/random.hpp"
#include "convsv/kernels/kernels.hpp"
#include "synthetic.hpp"

namespace convsv::kernels {
namespace {

class ThreadCount : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(GetParam());
  }
  void TearDown() override { omp_set_num_threads(saved_); }

 private:
  int saved_ = 1;
};

Vector random_table(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Vector t(rows * dim);
  for (auto& x : t) x = rng.normal();
  // A zero row exercises the degenerate-cosine path.
  std::fill(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(dim), 0.0);
  return t;
}

TEST_P(ThreadCount, EncodeSetsMatchesSerial) {
  const auto sets = extract_utterance_sets(testing::toy_corpus());
  HashedNgramBackend backend(128, 3);
  Vector serial_out(sets.size() * 128);
  Vector parallel_out(sets.size() * 128);
  serial::encode_sets(sets, backend, serial_out);
  parallel::encode_sets(sets, backend, parallel_out);
  EXPECT_EQ(serial_out, parallel_out);
}

TEST_P(ThreadCount, PairCosinesMatchSerial) {
  const std::size_t dim = 12;
  const auto table = random_table(50, dim, 1);
  Rng rng(2);
  std::vector<IndexPair> pairs;
  for (int i = 0; i < 400; ++i) pairs.push_back({rng.below(50), rng.below(50)});
  Vector a(pairs.size());
  Vector b(pairs.size());
  serial::pair_cosines(table, dim, pairs, a);
  parallel::pair_cosines(table, dim, pairs, b);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_NEAR(a[i],
                testing::naive_cosine(std::span(table).subspan(pairs[i].a * dim, dim),
                                      std::span(table).subspan(pairs[i].b * dim, dim)),
                1e-12);
  }
}

TEST_P(ThreadCount, CosineMatrixMatchesSerial) {
  const std::size_t dim = 7;
  const auto a = random_table(13, dim, 3);
  const auto b = random_table(17, dim, 4);
  Vector s(13 * 17);
  Vector p(13 * 17);
  serial::cosine_matrix(a, b, dim, s);
  parallel::cosine_matrix(a, b, dim, p);
  EXPECT_EQ(s, p);
}

TEST_P(ThreadCount, ProjectRowsMatchesSerial) {
  const auto in = random_table(40, 9, 5);
  const auto head = ProjectionHead::initialized(9, 5, 6, 0.3);
  Vector s(40 * 5);
  Vector p(40 * 5);
  serial::project_rows(in, head, s);
  parallel::project_rows(in, head, p);
  EXPECT_EQ(s, p);
}

TEST_P(ThreadCount, GradientMatchesSerial) {
  const std::size_t dim = 10;
  const auto table = random_table(60, dim, 7);
  const auto head = ProjectionHead::initialized(dim, 6, 8, 0.2);
  Rng rng(9);
  std::vector<LabeledIndexPair> pairs;
  for (int i = 0; i < 333; ++i) pairs.push_back({rng.below(60), rng.below(60), rng.below(2) == 1});
  Vector gs(head.weight.size());
  Vector gp(head.weight.size());
  const double ls = serial::contrastive_gradient(table, dim, pairs, head, 0.5, true, gs);
  const double lp = parallel::contrastive_gradient(table, dim, pairs, head, 0.5, true, gp);
  EXPECT_NEAR(ls, lp, 1e-12);
  for (std::size_t k = 0; k < gs.size(); ++k) EXPECT_NEAR(gs[k], gp[k], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Threads, ThreadCount, ::testing::Values(1, 2, 3, 8));

TEST(ParallelGradient, BitIdenticalAcrossThreadCounts) {
  const std::size_t dim = 10;
  const auto table = random_table(60, dim, 7);
  const auto head = ProjectionHead::initialized(dim, 6, 8, 0.2);
  Rng rng(9);
  std::vector<LabeledIndexPair> pairs;
  for (int i = 0; i < 1000; ++i) pairs.push_back({rng.below(60), rng.below(60), rng.below(2) == 1});
  const int saved = omp_get_max_threads();
  Vector reference(head.weight.size());
  omp_set_num_threads(1);
  const double loss1 = parallel::contrastive_gradient(table, dim, pairs, head, 0.5, true, reference);
  for (int threads : {2, 4, 7}) {
    omp_set_num_threads(threads);
    Vector g(head.weight.size());
    EXPECT_EQ(parallel::contrastive_gradient(table, dim, pairs, head, 0.5, true, g), loss1);
    EXPECT_EQ(g, reference) << threads << " threads";
  }
  omp_set_num_threads(saved);
}

TEST(ParallelGradient, ChunkSizeDependsOnBatchOnly) {
  EXPECT_EQ(gradient_chunk_size(10), 32u);
  EXPECT_EQ(gradient_chunk_size(1024), 64u);
}

TEST(ParallelGradient, EmptyBatch) {
  const auto head = ProjectionHead::identity(3);
  Vector g(9, 1.0);
  EXPECT_EQ(parallel::contrastive_gradient(Vector(6), 3, {}, head, 0.5, true, g), 0.0);
  EXPECT_EQ(g, Vector(9, 0.0));
}

}  // namespace
}  // namespace convsv::kernels
