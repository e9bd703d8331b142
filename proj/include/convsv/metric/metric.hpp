#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convsv/common/jsonl.hpp"
#include "convsv/embedding/embedding.hpp"
#include "convsv/pairing/pairing.hpp"

namespace convsv {

// Linear map applied to frozen base set embeddings. `weight` is row-major
// out_dim x in_dim.
struct ProjectionHead {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::uint64_t init_seed = 0;
  Vector weight;

  static ProjectionHead identity(std::size_t dim);
  // Identity-padded matrix plus N(0, noise^2) perturbation.
  static ProjectionHead initialized(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
                                    double noise = 1e-3);

  double at(std::size_t r, std::size_t c) const { return weight[r * in_dim + c]; }
  void apply(std::span<const double> in, std::span<double> out) const;
  Vector apply(std::span<const double> in) const;

  std::string hash() const;
  std::string id() const;  // short stable name derived from the hash
};

struct TrainConfig {
  double margin = 0.5;
  double learning_rate = 2e-5;
  std::size_t epochs = 5;
  std::size_t batch_size = 1024;
  double warmup_fraction = 0.10;
  std::uint64_t seed = 0;
  bool clamp_negative_term = true;
  std::size_t out_dim = 0;  // 0 keeps the base dimension
  double init_noise = 1e-3;

  // Throws Error(kValidation) on a broken invariant.
  void validate() const;
};

OrderedJson train_config_to_json(const TrainConfig& config);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const Json& doc);

struct LossPoint {
  std::size_t step;
  double loss;
};

struct TrainedMetric {
  ProjectionHead head;
  std::string backend_id;
  std::vector<LossPoint> loss_curve;
  TrainConfig config;
  std::string hash;
};

// y * dist + (1 - y) * g(margin - dist), dist = 1 - cos(x_i, x_j);
// g is the hinge max(0, .) when `clamp` is set and the identity otherwise.
double contrastive_loss(std::span<const double> x_i, std::span<const double> x_j, bool positive,
                        double margin, bool clamp = true);

// Loss of one pair of base embeddings under `head`. Adds
// scale * d(loss)/d(weight) into `grad` (out_dim * in_dim entries).
// At the hinge kink and for zero projections the gradient contribution is 0.
double accumulate_pair_gradient(const ProjectionHead& head, std::span<const double> a,
                                std::span<const double> b, bool positive, double margin,
                                bool clamp, double scale, std::span<double> grad);

// Gradient of the batch-mean loss over the given pairs with respect to the
// head weights. Pair i is (a[i], b[i], positive[i]).
Vector loss_gradient(std::span<const double> a, std::span<const double> b, bool positive,
                     double margin, const ProjectionHead& head, bool clamp = true);

// Pair loss evaluated through the head.
double projected_loss(const ProjectionHead& head, std::span<const double> a,
                      std::span<const double> b, bool positive, double margin, bool clamp = true);

// Mini-batch gradient descent with linear warmup. Pairs reference rows of
// `base` by set_id.
TrainedMetric train_projection(std::span<const PairInstance> pairs, const EmbeddingTable& base,
                               const TrainConfig& config);

SetEmbedding project(const SetEmbedding& embedding, const ProjectionHead& head);

std::string head_json(const TrainedMetric& metric);
TrainedMetric parse_head_json(std::string_view json_text);

// Base backends (mixed when more than one) followed by an optional head.
class SetEncoder {
 public:
  SetEncoder(std::vector<std::shared_ptr<const Backend>> backends,
             std::optional<ProjectionHead> head = std::nullopt);

  std::string id() const;
  std::size_t base_dim() const;
  std::size_t dim() const;

  // Base (pre-projection) embeddings for every set, in order.
  EmbeddingTable encode_base(std::span<const UtteranceSet> sets) const;
  EmbeddingTable encode(std::span<const UtteranceSet> sets) const;
  Vector encode(const UtteranceSet& set) const;

  const std::optional<ProjectionHead>& head() const { return head_; }
  void set_head(std::optional<ProjectionHead> head);

 private:
  std::vector<std::shared_ptr<const Backend>> backends_;
  std::optional<ProjectionHead> head_;
};

// Applies the head to every row.
EmbeddingTable project_table(const EmbeddingTable& table, const ProjectionHead& head);

}  // namespace convsv
