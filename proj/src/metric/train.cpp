#include <cmath>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/random.hpp"
#include "convsv/kernels/kernels.hpp"
#include "convsv/metric/metric.hpp"

namespace convsv {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kValidation, "train config: " + what);
  };
  if (!(margin > 0.0) || !std::isfinite(margin)) fail("margin must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (epochs == 0) fail("epochs must be >= 1");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) fail("warmup_fraction must be in [0, 1)");
  if (!(init_noise >= 0.0) || !std::isfinite(init_noise)) fail("init_noise must be >= 0");
}

TrainedMetric train_projection(std::span<const PairInstance> pairs, const EmbeddingTable& base,
                               const TrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw Error(ErrorKind::kEmpty, "train: no training pairs");
  if (base.dim == 0) throw Error(ErrorKind::kValidation, "train: base embeddings have dim 0");

  std::vector<kernels::LabeledIndexPair> indexed;
  indexed.reserve(pairs.size());
  bool has_pos = false;
  bool has_neg = false;
  for (const auto& p : pairs) {
    const bool positive = p.label == Label::kPositive;
    indexed.push_back({base.index_of(p.set_a), base.index_of(p.set_b), positive});
    (positive ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw Error(ErrorKind::kValidation, "train: need both positive and negative pairs");
  }

  const std::size_t out_dim = config.out_dim == 0 ? base.dim : config.out_dim;
  TrainedMetric result;
  result.config = config;
  result.backend_id = base.backend_id;
  result.head = ProjectionHead::initialized(base.dim, out_dim, config.seed, config.init_noise);
  auto& head = result.head;

  const std::size_t batches_per_epoch = (indexed.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;
  const auto warmup_steps =
      static_cast<std::size_t>(std::floor(config.warmup_fraction * static_cast<double>(total_steps)));

  Vector grad(head.weight.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "epoch/" + std::to_string(epoch)));
    rng.shuffle(indexed);
    for (std::size_t start = 0; start < indexed.size(); start += config.batch_size, ++step) {
      const std::size_t len = std::min(config.batch_size, indexed.size() - start);
      const double loss = kernels::parallel::contrastive_gradient(
          base.data, base.dim, std::span<const kernels::LabeledIndexPair>(indexed).subspan(start, len),
          head, config.margin, config.clamp_negative_term, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::kNonFinite, "train: non-finite loss at step " + std::to_string(step));
      }
      const double lr = step < warmup_steps
                            ? config.learning_rate * static_cast<double>(step + 1) /
                                  static_cast<double>(warmup_steps)
                            : config.learning_rate;
      for (std::size_t k = 0; k < grad.size(); ++k) {
        head.weight[k] -= lr * grad[k];
        if (!std::isfinite(head.weight[k])) {
          throw Error(ErrorKind::kNonFinite,
                      "train: non-finite weight at step " + std::to_string(step));
        }
      }
      result.loss_curve.push_back({step, loss});
    }
  }

  Sha256 h;
  h.update(head.hash()).update(base.backend_id);
  result.hash = h.hex();
  return result;
}

}  // namespace convsv
