#include <algorithm>
#include <fstream>

#include "convsv/common/error.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/roleplay/roleplay.hpp"

namespace convsv {

std::set<std::pair<std::string, std::string>> RoleplayBundle::counterpart_roles() const {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& [key, partner] : counterpart_map) {
    out.emplace(key.first, partner);
    out.emplace(partner, key.first);
  }
  return out;
}

std::vector<UtteranceSet> RoleplayBundle::all_sets() const {
  std::vector<UtteranceSet> out;
  for (const auto& [role, sets] : generated) out.insert(out.end(), sets.begin(), sets.end());
  return out;
}

std::vector<RoleplayBundle> parse_roleplay_jsonl(std::istream& in) {
  std::map<std::string, RoleplayBundle> by_model;
  for_each_jsonl(in, [&](const Json& rec, std::size_t line) {
    try {
      const auto model = rec.at("model_id").get<std::string>();
      const auto role = rec.at("role_id").get<std::string>();
      const auto conv = rec.at("conversation_id").get<std::string>();
      const auto turns = rec.at("turns").get<std::vector<std::string>>();
      if (model.empty() || role.empty() || conv.empty()) {
        throw Error(ErrorKind::kValidation, "roleplay: empty model_id, role_id or conversation_id", line);
      }
      if (turns.empty()) throw Error(ErrorKind::kValidation, "roleplay: no turns", line);

      auto& bundle = by_model[model];
      bundle.model_id = model;
      auto& sets = bundle.generated[role];
      UtteranceSet set;
      set.set_id = "gen:" + model + ":" + role + ":" + conv;
      set.speaker_id = role;
      set.conversation_id = conv;
      set.source_id = "gen:" + model;
      for (std::size_t i = 0; i < turns.size(); ++i) {
        set.utterance_ids.push_back(set.set_id + ":" + std::to_string(i));
        set.texts.push_back(turns[i]);
        set.turn_indices.push_back(i);
      }
      if (std::any_of(sets.begin(), sets.end(), [&](const auto& s) { return s.set_id == set.set_id; })) {
        throw Error(ErrorKind::kDuplicate, "roleplay: duplicate entry " + set.set_id, line);
      }
      sets.push_back(std::move(set));

      if (auto it = rec.find("counterpart_role_id"); it != rec.end() && !it->is_null()) {
        const auto partner = it->get<std::string>();
        if (partner == role) {
          throw Error(ErrorKind::kValidation, "roleplay: role is its own counterpart", line);
        }
        bundle.counterpart_map[{role, conv}] = partner;
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, std::string("roleplay: ") + e.what(), line);
    }
  });

  std::vector<RoleplayBundle> out;
  for (auto& [model, bundle] : by_model) {
    for (auto& [role, sets] : bundle.generated) {
      bundle.roles.push_back(role);
      std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
        return a.conversation_id < b.conversation_id;
      });
    }
    for (const auto& [key, partner] : bundle.counterpart_map) {
      if (!bundle.generated.contains(partner)) {
        throw Error(ErrorKind::kValidation, "roleplay: model '" + model + "' names counterpart '" +
                                                partner + "' that has no generated turns");
      }
    }
    out.push_back(std::move(bundle));
  }
  return out;
}

std::vector<RoleplayBundle> load_roleplay_bundles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return parse_roleplay_jsonl(in);
}

std::vector<RoleEntry> parse_role_manifest(std::string_view json_text) {
  std::vector<RoleEntry> roles;
  std::set<std::string> seen;
  try {
    const auto doc = Json::parse(json_text);
    for (const auto& r : doc.at("roles")) {
      RoleEntry e{r.at("role_id").get<std::string>(), r.at("speaker_id").get<std::string>()};
      if (!seen.insert(e.role_id).second) {
        throw Error(ErrorKind::kDuplicate, "role manifest: duplicate role '" + e.role_id + "'");
      }
      roles.push_back(std::move(e));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("role manifest: ") + e.what());
  }
  if (roles.empty()) throw Error(ErrorKind::kEmpty, "role manifest: no roles");
  return roles;
}

std::vector<RealReference> build_references(const Corpus& corpus, std::span<const RoleEntry> roles,
                                            const SetExtractionConfig& extraction) {
  const auto sets = extract_utterance_sets(corpus, extraction);
  std::vector<RealReference> refs;
  for (const auto& role : roles) {
    RealReference ref{role.role_id, {}};
    for (const auto& s : sets) {
      if (s.speaker_id == role.speaker_id) ref.real_sets.push_back(s);
    }
    if (ref.real_sets.empty()) {
      throw Error(ErrorKind::kEmpty, "role '" + role.role_id + "': speaker '" + role.speaker_id +
                                         "' has no utterance set in the corpus");
    }
    refs.push_back(std::move(ref));
  }
  return refs;
}

EmbeddingTable encode_roleplay_sets(std::span<const RoleplayBundle> bundles,
                                    std::span<const RealReference> references,
                                    const SetEncoder& encoder) {
  std::vector<UtteranceSet> sets;
  std::set<std::string> ids;
  auto add = [&](const UtteranceSet& s) {
    if (ids.insert(s.set_id).second) sets.push_back(s);
  };
  for (const auto& ref : references) {
    for (const auto& s : ref.real_sets) add(s);
  }
  for (const auto& b : bundles) {
    for (const auto& [role, gen] : b.generated) {
      for (const auto& s : gen) add(s);
    }
  }
  return encoder.encode(sets);
}

}  // namespace convsv
