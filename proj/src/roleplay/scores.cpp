#include <algorithm>
#include <optional>

#include "convsv/common/error.hpp"
#include "convsv/roleplay/roleplay.hpp"

namespace convsv {
namespace {

struct SetRow {
  std::string conversation_id;
  std::string set_id;
  std::span<const double> values;
};

std::vector<SetRow> rows_of(std::span<const UtteranceSet> sets, const EmbeddingTable& table) {
  std::vector<SetRow> rows;
  rows.reserve(sets.size());
  for (const auto& s : sets) rows.push_back({s.conversation_id, s.set_id, table.row(s.set_id)});
  std::sort(rows.begin(), rows.end(), [](const SetRow& a, const SetRow& b) {
    return std::tie(a.conversation_id, a.set_id) < std::tie(b.conversation_id, b.set_id);
  });
  return rows;
}

}  // namespace

std::optional<double> mean_cross_cosine(std::span<const UtteranceSet> generated,
                                        std::span<const UtteranceSet> real,
                                        const EmbeddingTable& table) {
  const auto g = rows_of(generated, table);
  const auto r = rows_of(real, table);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& a : g) {
    for (const auto& b : r) {
      if (a.conversation_id == b.conversation_id) continue;
      sum += cosine(a.values, b.values);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

Vector mean_embedding(std::span<const UtteranceSet> sets, const EmbeddingTable& table) {
  const auto rows = rows_of(sets, table);
  std::vector<double> block;
  block.reserve(rows.size() * table.dim);
  for (const auto& r : rows) block.insert(block.end(), r.values.begin(), r.values.end());
  Vector mean(table.dim);
  mean_of_rows(block, rows.size(), mean);
  return mean;
}

namespace {

const RealReference& reference_for(std::span<const RealReference> refs, const std::string& role) {
  for (const auto& r : refs) {
    if (r.role_id == role) {
      if (r.real_sets.empty()) {
        throw Error(ErrorKind::kEmpty, "role '" + role + "' has an empty reference list");
      }
      return r;
    }
  }
  throw Error(ErrorKind::kMissing, "role '" + role + "' has no real reference");
}

void finish(SimReport& report) {
  report.roles = report.per_role.size();
  double sum = 0.0;
  for (const auto& [role, v] : report.per_role) sum += v;
  report.aggregate = report.roles == 0 ? 0.0 : sum / static_cast<double>(report.roles);
}

}  // namespace

SimReport simulation_score(const RoleplayBundle& bundle, std::span<const RealReference> references,
                           const EmbeddingTable& table) {
  SimReport report;
  report.model_id = bundle.model_id;
  for (const auto& role : bundle.roles) {
    const auto& ref = reference_for(references, role);
    const auto v = mean_cross_cosine(bundle.generated.at(role), ref.real_sets, table);
    if (!v) {
      report.warnings.push_back("role '" + role + "': every real set shares a conversation with the generation; skipped");
      continue;
    }
    report.per_role[role] = 100.0 * *v;
  }
  if (report.per_role.empty()) {
    throw Error(ErrorKind::kEmpty, "simulation score: no role could be scored for '" + bundle.model_id + "'");
  }
  finish(report);
  return report;
}

DistReport distinction_from_embeddings(const std::map<std::string, Vector>& role_embeddings,
                                       const std::set<std::pair<std::string, std::string>>& excluded,
                                       std::string model_id) {
  if (role_embeddings.size() < 2) {
    throw Error(ErrorKind::kValidation, "distinction score needs at least two roles");
  }
  DistReport report;
  report.model_id = std::move(model_id);
  double total = 0.0;
  for (const auto& [r, u] : role_embeddings) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [r2, u2] : role_embeddings) {
      if (r2 == r) continue;
      if (excluded.contains({r, r2})) {
        ++report.excluded_pairs;
        continue;
      }
      sum += 1.0 - cosine(u, u2);
      ++n;
    }
    if (n == 0) {
      throw Error(ErrorKind::kValidation, "distinction score: every comparison of role '" + r + "' is excluded");
    }
    report.per_role[r] = 100.0 * sum / static_cast<double>(n);
    total += report.per_role[r];
  }
  report.aggregate = total / static_cast<double>(report.per_role.size());
  return report;
}

DistReport distinction_score(const RoleplayBundle& bundle, const EmbeddingTable& table) {
  std::map<std::string, Vector> u;
  for (const auto& role : bundle.roles) u[role] = mean_embedding(bundle.generated.at(role), table);
  return distinction_from_embeddings(u, bundle.counterpart_roles(), bundle.model_id);
}

RealBaseline real_baseline(std::span<const RealReference> references, const EmbeddingTable& table) {
  RealBaseline out;
  out.sim.model_id = "Real";
  std::map<std::string, Vector> u;
  for (const auto& ref : references) {
    if (ref.real_sets.empty()) {
      throw Error(ErrorKind::kEmpty, "role '" + ref.role_id + "' has an empty reference list");
    }
    u[ref.role_id] = mean_embedding(ref.real_sets, table);
    const auto v = mean_cross_cosine(ref.real_sets, ref.real_sets, table);
    if (!v) {
      out.sim.warnings.push_back("role '" + ref.role_id + "': fewer than two real sets; left out of Sim(Real)");
      continue;
    }
    out.sim.per_role[ref.role_id] = 100.0 * *v;
  }
  finish(out.sim);
  out.dist = distinction_from_embeddings(u, {}, "Real");
  return out;
}

}  // namespace convsv
