#include <algorithm>
#include <numeric>
#include <optional>

#include "convsv/common/error.hpp"
#include "convsv/roleplay/roleplay.hpp"

namespace convsv {

std::vector<double> descending_ranks(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Positions i..j-1 hold 1-based ranks i+1..j.
    const double mean = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean;
    i = j;
  }
  return ranks;
}

RankTables simulation_rank(std::span<const RoleplayBundle> bundles,
                           std::span<const RealReference> references, const EmbeddingTable& table,
                           bool include_real, std::size_t top_k) {
  RankTables out;
  if (bundles.empty()) throw Error(ErrorKind::kEmpty, "simulation rank: no models");
  for (const auto& b : bundles) {
    if (b.roles != bundles.front().roles) {
      throw Error(ErrorKind::kMismatch, "simulation rank: models '" + bundles.front().model_id +
                                            "' and '" + b.model_id + "' cover different roles");
    }
  }

  // (a) where the assigned role lands among all reference roles.
  for (const auto& b : bundles) {
    for (const auto& role : b.roles) {
      std::vector<std::string> names;
      std::vector<double> scores;
      for (const auto& ref : references) {
        const auto v = mean_cross_cosine(b.generated.at(role), ref.real_sets, table);
        if (!v) continue;
        names.push_back(ref.role_id);
        scores.push_back(100.0 * *v);
      }
      const auto self = std::find(names.begin(), names.end(), role);
      if (self == names.end()) {
        out.warnings.push_back(b.model_id + "/" + role + ": assigned role cannot be scored");
        continue;
      }
      const auto ranks = descending_ranks(scores);
      AssignedRoleRank row;
      row.model_id = b.model_id;
      row.role_id = role;
      row.rank = ranks[static_cast<std::size_t>(self - names.begin())];
      row.candidates = names.size();
      std::vector<std::size_t> order(names.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
      for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
        row.top.emplace_back(names[order[k]], scores[order[k]]);
      }
      out.assigned.push_back(std::move(row));
    }
  }

  // (b) models ranked per role by simulation score, averaged over roles.
  std::vector<SimReport> sims;
  for (const auto& b : bundles) sims.push_back(simulation_score(b, references, table));
  if (include_real) sims.push_back(real_baseline(references, table).sim);

  std::vector<ModelRank> models(sims.size());
  for (std::size_t m = 0; m < sims.size(); ++m) models[m].model_id = sims[m].model_id;
  for (const auto& role : bundles.front().roles) {
    std::vector<double> scores;
    bool complete = true;
    for (const auto& s : sims) {
      auto it = s.per_role.find(role);
      if (it == s.per_role.end()) {
        complete = false;
        break;
      }
      scores.push_back(it->second);
    }
    if (!complete) {
      out.warnings.push_back("role '" + role + "' is missing a score for some model; left out of mean ranks");
      continue;
    }
    const auto ranks = descending_ranks(scores);
    for (std::size_t m = 0; m < sims.size(); ++m) models[m].per_role[role] = ranks[m];
  }
  for (auto& m : models) {
    double sum = 0.0;
    for (const auto& [role, r] : m.per_role) sum += r;
    m.mean_rank = m.per_role.empty() ? 0.0 : sum / static_cast<double>(m.per_role.size());
  }
  std::sort(models.begin(), models.end(), [](const ModelRank& a, const ModelRank& b) {
    return std::tie(a.mean_rank, a.model_id) < std::tie(b.mean_rank, b.model_id);
  });
  out.models = std::move(models);
  return out;
}

}  // namespace convsv
