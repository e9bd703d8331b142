#pragma once

// Seeded generators and brute-force oracles shared by the unit and acceptance
// tests.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "convsv/corpus/corpus.hpp"
#include "convsv/embedding/embedding.hpp"
#include "convsv/metric/metric.hpp"
#include "convsv/pairing/pairing.hpp"

namespace convsv::testing {

struct ToyCorpusOptions {
  std::size_t sources = 3;
  std::size_t speakers_per_source = 4;
  std::size_t conversations_per_source = 8;
  std::size_t speakers_per_conversation = 2;
  std::size_t turns_per_speaker = 6;
  std::uint64_t seed = 1;
};

// Conversation interchange JSONL. Speaker k of source s is "s<s>-spk<k>";
// conversation c takes speakers_per_conversation consecutive speakers
// starting at c, so every speaker recurs across the source's conversations.
std::string toy_corpus_jsonl(const ToyCorpusOptions& options = {});
Corpus toy_corpus(const ToyCorpusOptions& options = {});

// Sets whose base embeddings are Gaussian draws around a per-speaker center.
// The first `signal_dims` coordinates carry the speaker; the rest are shared
// noise with standard deviation `noise`.
struct ClusterData {
  std::vector<UtteranceSet> sets;
  EmbeddingTable table;
};

ClusterData gaussian_clusters(std::size_t speakers, std::size_t sets_per_speaker, std::size_t dim,
                              std::size_t signal_dims, double noise, std::uint64_t seed);

// `count` pairs over `sets`, half positive, drawn with a seeded RNG.
std::vector<PairInstance> random_pairs(std::span<const UtteranceSet> sets, std::size_t count,
                                       std::uint64_t seed, Exposure exposure = Exposure::kTrain);

// Straight-line Mann-Whitney count over every (positive, negative) pair.
double brute_force_auc(std::span<const double> positives, std::span<const double> negatives);

// Two-pass textbook cosine, zero when either side is the zero vector.
double naive_cosine(std::span<const double> a, std::span<const double> b);

// Central finite differences of projected_loss with respect to every weight.
Vector finite_difference_gradient(const ProjectionHead& head, std::span<const double> a,
                                  std::span<const double> b, bool positive, double margin,
                                  bool clamp, double h = 1e-5);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace convsv::testing
