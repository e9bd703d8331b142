#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convsv/corpus/corpus.hpp"
#include "convsv/embedding/embedding.hpp"
#include "convsv/eval/eval.hpp"
#include "convsv/metric/metric.hpp"

namespace convsv {

// Generated conversations of one model. Each (role, conversation) becomes one
// utterance set with id "gen:<model>:<role>:<conversation>".
struct RoleplayBundle {
  std::string model_id;
  std::vector<std::string> roles;  // sorted
  // Per role, sorted by conversation_id.
  std::map<std::string, std::vector<UtteranceSet>> generated;
  // (role, conversation) -> role of the self-chat partner.
  std::map<std::pair<std::string, std::string>, std::string> counterpart_map;

  // Roles that share at least one generated conversation, both orders.
  std::set<std::pair<std::string, std::string>> counterpart_roles() const;
  std::vector<UtteranceSet> all_sets() const;
};

// One bundle per model_id found in the file, sorted by model_id.
std::vector<RoleplayBundle> parse_roleplay_jsonl(std::istream& in);
std::vector<RoleplayBundle> load_roleplay_bundles(const std::filesystem::path& path);

struct RoleEntry {
  std::string role_id;
  std::string speaker_id;
};

// {"roles": [{"role_id", "speaker_id"}]}
std::vector<RoleEntry> parse_role_manifest(std::string_view json_text);

struct RealReference {
  std::string role_id;
  std::vector<UtteranceSet> real_sets;
};

// Sets of each role's speaker. Throws Error(kEmpty) for a role without sets.
std::vector<RealReference> build_references(const Corpus& corpus, std::span<const RoleEntry> roles,
                                            const SetExtractionConfig& extraction = {});

// Embeds every generated and reference set with `encoder`, keyed by set_id.
EmbeddingTable encode_roleplay_sets(std::span<const RoleplayBundle> bundles,
                                    std::span<const RealReference> references,
                                    const SetEncoder& encoder);

// Mean cosine over (generated, real) set pairs from different conversations;
// empty when no pair remains. The model and Real rows both go through here,
// so a model echoing the references reproduces the Real value bit for bit.
std::optional<double> mean_cross_cosine(std::span<const UtteranceSet> generated,
                                        std::span<const UtteranceSet> real,
                                        const EmbeddingTable& table);

// Order-independent mean of the sets' rows in `table`.
Vector mean_embedding(std::span<const UtteranceSet> sets, const EmbeddingTable& table);

struct SimReport {
  std::string model_id;
  std::map<std::string, double> per_role;  // x100
  double aggregate = 0.0;
  std::size_t roles = 0;
  std::vector<std::string> warnings;
};

struct DistReport {
  std::string model_id;
  std::map<std::string, double> per_role;  // x100
  double aggregate = 0.0;
  std::size_t excluded_pairs = 0;  // ordered (r, r') comparisons skipped
  std::vector<std::string> warnings;
};

// Mean cosine, x100, between each generated set of a role and each real set
// of that role, skipping pairs from the same conversation.
SimReport simulation_score(const RoleplayBundle& bundle, std::span<const RealReference> references,
                           const EmbeddingTable& table);

// Mean over r' != r of 1 - cos between per-role mean generated embeddings,
// x100, skipping self-chat counterparts.
DistReport distinction_score(const RoleplayBundle& bundle, const EmbeddingTable& table);

// Distinction over explicit per-role embeddings. `excluded` holds ordered
// (r, r') pairs to skip.
DistReport distinction_from_embeddings(const std::map<std::string, Vector>& role_embeddings,
                                       const std::set<std::pair<std::string, std::string>>& excluded,
                                       std::string model_id = {});

struct RealBaseline {
  SimReport sim;
  DistReport dist;
};

// Model id "Real". Sim: real sets against each other; roles with a single
// real set are left out with a warning. Dist: per-role mean real embeddings.
RealBaseline real_baseline(std::span<const RealReference> references, const EmbeddingTable& table);

struct AssignedRoleRank {
  std::string model_id;
  std::string role_id;
  double rank = 0.0;  // 1-based; ties share the mean rank
  std::size_t candidates = 0;
  std::vector<std::pair<std::string, double>> top;  // most similar roles, best first
};

struct ModelRank {
  std::string model_id;
  double mean_rank = 0.0;
  std::map<std::string, double> per_role;
};

struct RankTables {
  std::vector<AssignedRoleRank> assigned;
  std::vector<ModelRank> models;  // sorted by mean rank, then model id
  std::vector<std::string> warnings;
};

// 1-based ranks of `scores`, higher score first, ties sharing the mean rank.
std::vector<double> descending_ranks(std::span<const double> scores);

// Throws Error(kMismatch) when the models cover different role sets.
RankTables simulation_rank(std::span<const RoleplayBundle> bundles,
                           std::span<const RealReference> references, const EmbeddingTable& table,
                           bool include_real = true, std::size_t top_k = 3);

// Positive: two sets of the same role. Negative: different roles.
std::vector<PairInstance> real_generated_pairs(const RoleplayBundle& bundle,
                                               std::span<const RealReference> references);
std::vector<PairInstance> generated_generated_pairs(const RoleplayBundle& bundle);

struct Histogram {
  double lower = -1.0;
  double upper = 1.0;
  std::vector<std::size_t> counts;
  std::vector<double> mass;  // counts / class total; all 0 for an empty class
};

struct ScoreDistributions {
  Histogram positive;
  Histogram negative;
};

ScoreDistributions score_distributions(std::span<const ScoredPair> pairs, std::size_t bins = 40);

std::string sim_csv(std::span<const SimReport> reports);
std::string dist_csv(std::span<const DistReport> reports);
std::string rank_csv(const RankTables& tables);
std::string histogram_csv(const ScoreDistributions& dist);
std::string histogram_svg(const ScoreDistributions& dist, std::string_view title);

}  // namespace convsv
