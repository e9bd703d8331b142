#include "synthetic.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include <unistd.h>

#include "convsv/common/hashing.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/common/random.hpp"

namespace convsv::testing {
namespace {

constexpr const char* kWords[] = {"river", "lantern", "copper", "meadow", "signal", "harbor",
                                  "velvet", "orbit",  "pepper", "quartz", "timber", "willow",
                                  "ember",  "falcon", "garnet", "hollow", "ivory",  "juniper"};
constexpr const char* kFunction[] = {"the", "a", "and", "but", "i", "you", "we", "not",
                                     "very", "of", "in", "to", "is", "was", "really", "so"};

std::string sentence(Rng& rng, std::size_t speaker_key) {
  std::string s;
  const std::size_t n = 4 + rng.below(6);
  for (std::size_t i = 0; i < n; ++i) {
    if (!s.empty()) s += ' ';
    // Speakers lean on their own slice of the vocabulary.
    if (rng.uniform() < 0.5) {
      s += kWords[(speaker_key * 3 + rng.below(3)) % std::size(kWords)];
    } else {
      s += kFunction[rng.below(std::size(kFunction))];
    }
  }
  return s + (speaker_key % 2 == 0 ? "." : "!");
}

}  // namespace

std::string toy_corpus_jsonl(const ToyCorpusOptions& o) {
  Rng rng(derive_seed(o.seed, "toy_corpus"));
  std::string out;
  for (std::size_t s = 0; s < o.sources; ++s) {
    const std::string source = "src" + std::to_string(s);
    for (std::size_t c = 0; c < o.conversations_per_source; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t k = 0; k < o.speakers_per_conversation; ++k) {
        members.push_back((c + k) % o.speakers_per_source);
      }
      OrderedJson turns = OrderedJson::array();
      for (std::size_t t = 0; t < o.turns_per_speaker; ++t) {
        for (std::size_t m : members) {
          turns.push_back({{"speaker_id", "s" + std::to_string(s) + "-spk" + std::to_string(m)},
                           {"text", sentence(rng, s * o.speakers_per_source + m)}});
        }
      }
      OrderedJson rec;
      rec["conversation_id"] = source + "-c" + std::to_string(c);
      rec["source_id"] = source;
      rec["turns"] = std::move(turns);
      out += rec.dump() + "\n";
    }
  }
  return out;
}

Corpus toy_corpus(const ToyCorpusOptions& options) {
  std::istringstream in(toy_corpus_jsonl(options));
  return ingest_conversations(in, "").corpus;
}

ClusterData gaussian_clusters(std::size_t speakers, std::size_t sets_per_speaker, std::size_t dim,
                              std::size_t signal_dims, double noise, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "gaussian_clusters"));
  std::vector<Vector> centers(speakers, Vector(dim, 0.0));
  for (auto& c : centers) {
    for (std::size_t d = 0; d < signal_dims; ++d) c[d] = rng.normal();
  }
  ClusterData out;
  out.table.backend_id = "synthetic";
  out.table.dim = dim;
  for (std::size_t s = 0; s < speakers; ++s) {
    for (std::size_t k = 0; k < sets_per_speaker; ++k) {
      UtteranceSet set;
      set.speaker_id = "spk" + std::to_string(s);
      set.conversation_id = "conv" + std::to_string(k);
      set.source_id = "src" + std::to_string(s % 2);
      set.set_id = set.speaker_id + ":" + set.conversation_id;
      for (std::size_t u = 0; u < 5; ++u) {
        set.utterance_ids.push_back(set.set_id + ":" + std::to_string(u));
        set.texts.push_back("x");
        set.turn_indices.push_back(u);
      }
      Vector v(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        v[d] = centers[s][d] + (d < signal_dims ? 0.3 : noise) * rng.normal();
      }
      out.table.add(set.set_id, v, set.size());
      out.sets.push_back(std::move(set));
    }
  }
  return out;
}

std::vector<PairInstance> random_pairs(std::span<const UtteranceSet> sets, std::size_t count,
                                       std::uint64_t seed, Exposure exposure) {
  Rng rng(derive_seed(seed, "random_pairs"));
  std::vector<PairInstance> out;
  std::size_t pos = 0;
  std::size_t neg = 0;
  while (pos + neg < count) {
    const auto& a = sets[rng.below(sets.size())];
    const auto& b = sets[rng.below(sets.size())];
    if (a.set_id == b.set_id) continue;
    const bool same = a.speaker_id == b.speaker_id;
    if (same && pos >= count / 2) continue;
    if (!same && neg >= count - count / 2) continue;
    PairInstance p;
    p.pair_id = "p" + std::to_string(out.size());
    p.set_a = a.set_id;
    p.set_b = b.set_id;
    p.label = same ? Label::kPositive : Label::kNegative;
    p.exposure = exposure;
    (same ? pos : neg) += 1;
    out.push_back(std::move(p));
  }
  return out;
}

double brute_force_auc(std::span<const double> positives, std::span<const double> negatives) {
  std::uint64_t twice = 0;
  for (double p : positives) {
    for (double n : negatives) {
      if (p > n) twice += 2;
      else if (p == n) twice += 1;
    }
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

double naive_cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Vector finite_difference_gradient(const ProjectionHead& head, std::span<const double> a,
                                  std::span<const double> b, bool positive, double margin,
                                  bool clamp, double h) {
  Vector grad(head.weight.size());
  ProjectionHead probe = head;
  for (std::size_t k = 0; k < grad.size(); ++k) {
    const double w = head.weight[k];
    probe.weight[k] = w + h;
    const double up = projected_loss(probe, a, b, positive, margin, clamp);
    probe.weight[k] = w - h;
    const double down = projected_loss(probe, a, b, positive, margin, clamp);
    probe.weight[k] = w;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("convsv-" + tag + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter.fetch_add(1)));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace convsv::testing
