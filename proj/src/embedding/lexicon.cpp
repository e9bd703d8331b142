#include <algorithm>
#include <cmath>
#include <set>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/common/text.hpp"
#include "convsv/embedding/embedding.hpp"

namespace convsv {

std::vector<std::size_t> CategoryLexicon::match(std::string_view token) const {
  std::vector<std::size_t> out;
  if (auto it = exact.find(std::string(token)); it != exact.end()) {
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  if (!prefix.empty()) {
    std::string key;
    key.reserve(token.size());
    for (char c : token) {
      key.push_back(c);
      if (auto it = prefix.find(key); it != prefix.end()) {
        out.insert(out.end(), it->second.begin(), it->second.end());
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string CategoryLexicon::hash() const {
  OrderedJson doc;
  doc["categories"] = categories;
  OrderedJson entries = OrderedJson::array();
  auto add = [&](const std::string& pattern, const std::vector<std::size_t>& cats) {
    OrderedJson e;
    e["pattern"] = pattern;
    e["categories"] = cats;
    entries.push_back(std::move(e));
  };
  for (const auto& [p, cats] : exact) add(p, cats);
  for (const auto& [p, cats] : prefix) add(p + "*", cats);
  doc["entries"] = std::move(entries);
  return sha256_hex(doc.dump());
}

CategoryLexicon parse_lexicon(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("lexicon: invalid JSON (") + e.what() + ")");
  }

  CategoryLexicon lex;
  std::map<std::string, std::size_t> category_index;
  try {
    for (const auto& c : doc.at("categories")) {
      const auto name = c.get<std::string>();
      if (!category_index.emplace(name, lex.categories.size()).second) {
        throw Error(ErrorKind::kDuplicate, "lexicon: duplicate category '" + name + "'");
      }
      lex.categories.push_back(name);
    }
    if (lex.categories.empty()) {
      throw Error(ErrorKind::kValidation, "lexicon: at least one category is required");
    }

    for (const auto& entry : doc.at("entries")) {
      auto pattern = entry.at("pattern").get<std::string>();
      std::set<std::size_t> cats;
      for (const auto& c : entry.at("categories")) {
        const auto name = c.get<std::string>();
        auto it = category_index.find(name);
        if (it == category_index.end()) {
          throw Error(ErrorKind::kValidation, "lexicon: pattern '" + pattern +
                                                  "' uses undeclared category '" + name + "'");
        }
        cats.insert(it->second);
      }
      if (cats.empty()) {
        throw Error(ErrorKind::kValidation, "lexicon: pattern '" + pattern + "' has no category");
      }

      const auto star = pattern.find('*');
      const bool wildcard = star != std::string::npos;
      if (wildcard && (star != pattern.size() - 1 || star == 0)) {
        throw Error(ErrorKind::kValidation,
                    "lexicon: wildcard must terminate a non-empty pattern: '" + pattern + "'");
      }
      if (wildcard) pattern.pop_back();
      if (pattern.empty() || text::encode_utf8(text::lowercase(text::decode_utf8(pattern))) != pattern) {
        throw Error(ErrorKind::kValidation,
                    "lexicon: pattern must be non-empty lowercase: '" + pattern + "'");
      }

      auto& table = wildcard ? lex.prefix : lex.exact;
      std::vector<std::size_t> cat_list(cats.begin(), cats.end());
      auto [it, inserted] = table.emplace(pattern, cat_list);
      if (!inserted && it->second != cat_list) {
        throw Error(ErrorKind::kDuplicate, "lexicon: pattern '" + pattern +
                                               (wildcard ? "*" : "") +
                                               "' listed with conflicting categories");
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("lexicon: ") + e.what());
  }
  return lex;
}

CategoryLexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(read_file(path));
}

CategoryProfile category_profile(std::span<const std::string> texts,
                                 const CategoryLexicon& lexicon) {
  CategoryProfile profile;
  profile.proportions.assign(lexicon.categories.size(), 0.0);
  std::vector<std::size_t> counts(lexicon.categories.size(), 0);
  for (const auto& t : texts) {
    for (const auto& token : text::tokenize(t)) {
      ++profile.token_count;
      for (std::size_t c : lexicon.match(token)) ++counts[c];
    }
  }
  if (profile.token_count > 0) {
    const auto total = static_cast<double>(profile.token_count);
    for (std::size_t c = 0; c < counts.size(); ++c) {
      profile.proportions[c] = static_cast<double>(counts[c]) / total;
    }
  }
  return profile;
}

double lsm_similarity(const CategoryProfile& a, const CategoryProfile& b, double epsilon) {
  if (a.proportions.size() != b.proportions.size() || a.proportions.empty()) {
    throw Error(ErrorKind::kMismatch, "lsm_similarity: profiles use different lexicons");
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < a.proportions.size(); ++c) {
    const double pa = a.proportions[c];
    const double pb = b.proportions[c];
    sum += 1.0 - std::abs(pa - pb) / (pa + pb + epsilon);
  }
  return sum / static_cast<double>(a.proportions.size());
}

UtteranceVector lexicon_style_vector(std::span<const std::string> texts,
                                     const CategoryLexicon& lexicon, std::string utterance_id) {
  UtteranceVector v;
  v.utterance_id = std::move(utterance_id);
  v.backend_id = "lexicon";
  v.values = category_profile(texts, lexicon).proportions;
  return v;
}

}  // namespace convsv
