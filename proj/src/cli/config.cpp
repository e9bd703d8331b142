#include <algorithm>
#include <cctype>
#include <set>

#include "convsv/cli/cli.hpp"
#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"

extern char** environ;

namespace convsv::cli {
namespace fs = std::filesystem;
namespace {

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) {
    throw Error(ErrorKind::kValidation, "config: '" + std::string(where) + "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorKind::kValidation,
                  "config: unknown key '" + key + "' in '" + std::string(where) + "'");
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

const char* occurrence_name(OccurrenceMode m) {
  return m == OccurrenceMode::kConversations ? "conversations" : "utterances";
}

}  // namespace

RunConfig parse_config(const Json& doc, const fs::path& base_dir) {
  RunConfig c;
  try {
    check_keys(doc, {"seed", "out", "corpus", "filter", "sets", "pairing", "backends", "train", "eval", "roleplay"},
               "top level");
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("out")) c.out = resolve(base_dir, doc.at("out").get<std::string>());

    if (doc.contains("corpus")) {
      for (const auto& in : doc.at("corpus")) {
        if (in.is_string()) {
          c.corpus.push_back({resolve(base_dir, in.get<std::string>()), ""});
          continue;
        }
        check_keys(in, {"path", "source_id"}, "corpus");
        c.corpus.push_back({resolve(base_dir, in.at("path").get<std::string>()), in.value("source_id", "")});
      }
    }

    if (doc.contains("filter")) {
      const auto& f = doc.at("filter");
      if (f.is_null()) {
        c.filter.reset();
      } else {
        check_keys(f, {"min_turns", "min_speaker_occurrences", "occurrence_mode"}, "filter");
        FilterConfig fc;
        fc.min_turns = f.value("min_turns", fc.min_turns);
        fc.min_speaker_occurrences = f.value("min_speaker_occurrences", fc.min_speaker_occurrences);
        const auto mode = f.value("occurrence_mode", std::string("conversations"));
        if (mode == "conversations") {
          fc.occurrence_mode = OccurrenceMode::kConversations;
        } else if (mode == "utterances") {
          fc.occurrence_mode = OccurrenceMode::kUtterances;
        } else {
          throw Error(ErrorKind::kValidation, "config: unknown occurrence_mode '" + mode + "'");
        }
        c.filter = fc;
      }
    }

    if (doc.contains("sets")) {
      const auto& s = doc.at("sets");
      check_keys(s, {"min_len", "max_len", "sample_seed"}, "sets");
      c.extraction.min_len = s.value("min_len", c.extraction.min_len);
      c.extraction.max_len = s.value("max_len", c.extraction.max_len);
      if (s.contains("sample_seed") && !s.at("sample_seed").is_null()) {
        c.extraction.sample_seed = s.at("sample_seed").get<std::uint64_t>();
      }
    }

    if (doc.contains("pairing")) {
      const auto& p = doc.at("pairing");
      check_keys(p, {"unseen_fraction", "dev_fraction", "holdout_fraction", "train_pairs_per_group",
                     "dev_pairs_per_group", "test_pairs_per_group", "levels"},
                 "pairing");
      auto& d = c.dataset;
      d.unseen_fraction = p.value("unseen_fraction", d.unseen_fraction);
      d.dev_fraction = p.value("dev_fraction", d.dev_fraction);
      d.holdout_fraction = p.value("holdout_fraction", d.holdout_fraction);
      d.train_pairs_per_group = p.value("train_pairs_per_group", d.train_pairs_per_group);
      d.dev_pairs_per_group = p.value("dev_pairs_per_group", d.dev_pairs_per_group);
      d.test_pairs_per_group = p.value("test_pairs_per_group", d.test_pairs_per_group);
      if (p.contains("levels")) {
        d.levels.clear();
        for (const auto& l : p.at("levels")) d.levels.push_back(parse_level(l.get<std::string>()));
      }
    }

    if (doc.contains("backends")) {
      c.backends.clear();
      for (const auto& b : doc.at("backends")) {
        BackendSpec spec;
        if (b.is_string()) {
          spec.type = b.get<std::string>();
        } else {
          check_keys(b, {"type", "dim", "n", "path"}, "backends");
          spec.type = b.at("type").get<std::string>();
          spec.dim = b.value("dim", spec.dim);
          spec.n = b.value("n", spec.n);
          if (b.contains("path")) spec.path = resolve(base_dir, b.at("path").get<std::string>());
        }
        c.backends.push_back(std::move(spec));
      }
    }

    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      if (t.is_null()) {
        c.train.reset();
      } else {
        check_keys(t, {"margin", "learning_rate", "epochs", "batch_size", "warmup_fraction", "seed",
                       "clamp_negative_term", "out_dim", "init_noise"},
                   "train");
        c.train = train_config_from_json(t);
      }
    }

    if (doc.contains("eval")) {
      const auto& e = doc.at("eval");
      check_keys(e, {"rounds", "objective", "calibration", "sweep_bounds"}, "eval");
      c.rounds = e.value("rounds", c.rounds);
      if (e.contains("objective")) c.objective = parse_objective(e.at("objective").get<std::string>());
      if (e.contains("calibration")) {
        c.calibration = parse_calibration_mode(e.at("calibration").get<std::string>());
      }
      if (e.contains("sweep_bounds")) c.sweep_bounds = e.at("sweep_bounds").get<std::vector<std::size_t>>();
    }

    if (doc.contains("roleplay") && !doc.at("roleplay").is_null()) {
      const auto& r = doc.at("roleplay");
      check_keys(r, {"bundles", "roles", "bins", "use_trained_head"}, "roleplay");
      RoleplayConfig rc;
      rc.bundles = resolve(base_dir, r.at("bundles").get<std::string>());
      rc.roles = resolve(base_dir, r.at("roles").get<std::string>());
      rc.bins = r.value("bins", rc.bins);
      rc.use_trained_head = r.value("use_trained_head", rc.use_trained_head);
      c.roleplay = rc;
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kValidation, std::string("config: ") + e.what());
  }
  c.dataset.seed = c.seed;
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kValidation, "config: " + what); };
  auto need_file = [&](const fs::path& p, const std::string& what) {
    if (p.empty()) fail(what + " path is empty");
    if (!fs::exists(p)) fail(what + " '" + p.string() + "' does not exist");
  };
  if (corpus.empty()) fail("at least one corpus input is required");
  for (const auto& in : corpus) need_file(in.path, "corpus");
  if (backends.empty()) fail("backend list is empty");
  std::set<std::string> seen;
  for (const auto& b : backends) {
    if (b.type == "hashed-ngram") {
      if (b.dim < 2 || b.n < 1) fail("hashed-ngram needs dim >= 2 and n >= 1");
    } else if (b.type == "lexicon") {
      need_file(b.path, "lexicon");
    } else if (b.type == "external") {
      need_file(b.path, "external embeddings");
    } else {
      fail("unknown backend type '" + b.type + "'");
    }
    if (!seen.insert(b.type + ":" + b.path.string()).second) fail("backend '" + b.type + "' listed twice");
  }
  if (extraction.min_len < 1 || extraction.min_len > extraction.max_len) {
    fail("sets need 1 <= min_len <= max_len");
  }
  const auto& d = dataset;
  for (double f : {d.unseen_fraction, d.dev_fraction, d.holdout_fraction}) {
    if (!(f >= 0.0 && f < 1.0)) fail("pairing fractions must lie in [0, 1)");
  }
  if (!(d.unseen_fraction > 0.0)) fail("unseen_fraction must be positive");
  if (d.levels.empty()) fail("at least one level is required");
  if (d.train_pairs_per_group < 2 || d.dev_pairs_per_group < 2 || d.test_pairs_per_group < 2) {
    fail("pairs per group must be >= 2");
  }
  if (train) train->validate();
  if (rounds < 1) fail("eval.rounds must be >= 1");
  if (sweep_bounds.empty()) fail("eval.sweep_bounds must not be empty");
  for (std::size_t i = 1; i < sweep_bounds.size(); ++i) {
    if (sweep_bounds[i] <= sweep_bounds[i - 1]) fail("eval.sweep_bounds must be strictly increasing");
  }
  if (roleplay) {
    need_file(roleplay->bundles, "roleplay bundles");
    need_file(roleplay->roles, "role manifest");
    if (roleplay->bins < 1) fail("roleplay.bins must be >= 1");
    if (roleplay->use_trained_head && !train) fail("roleplay.use_trained_head needs a train section");
  }
}

Json RunConfig::to_json() const {
  Json doc;
  doc["seed"] = seed;
  doc["out"] = out.string();
  doc["corpus"] = Json::array();
  for (const auto& in : corpus) doc["corpus"].push_back({{"path", in.path.string()}, {"source_id", in.source_id}});
  if (filter) {
    doc["filter"] = {{"min_turns", filter->min_turns},
                     {"min_speaker_occurrences", filter->min_speaker_occurrences},
                     {"occurrence_mode", occurrence_name(filter->occurrence_mode)}};
  } else {
    doc["filter"] = nullptr;
  }
  doc["sets"] = {{"min_len", extraction.min_len}, {"max_len", extraction.max_len}};
  doc["sets"]["sample_seed"] = extraction.sample_seed ? Json(*extraction.sample_seed) : Json(nullptr);
  Json levels = Json::array();
  for (Level l : dataset.levels) levels.push_back(to_string(l));
  doc["pairing"] = {{"unseen_fraction", dataset.unseen_fraction},
                    {"dev_fraction", dataset.dev_fraction},
                    {"holdout_fraction", dataset.holdout_fraction},
                    {"train_pairs_per_group", dataset.train_pairs_per_group},
                    {"dev_pairs_per_group", dataset.dev_pairs_per_group},
                    {"test_pairs_per_group", dataset.test_pairs_per_group},
                    {"levels", levels}};
  doc["backends"] = Json::array();
  for (const auto& b : backends) {
    Json j{{"type", b.type}};
    if (b.type == "hashed-ngram") {
      j["dim"] = b.dim;
      j["n"] = b.n;
    } else {
      j["path"] = b.path.string();
    }
    doc["backends"].push_back(j);
  }
  doc["train"] = train ? Json(train_config_to_json(*train)) : Json(nullptr);
  doc["eval"] = {{"rounds", rounds},
                 {"objective", to_string(objective)},
                 {"calibration", to_string(calibration)},
                 {"sweep_bounds", sweep_bounds}};
  if (roleplay) {
    doc["roleplay"] = {{"bundles", roleplay->bundles.string()},
                       {"roles", roleplay->roles.string()},
                       {"bins", roleplay->bins},
                       {"use_trained_head", roleplay->use_trained_head}};
  } else {
    doc["roleplay"] = nullptr;
  }
  return doc;
}

std::string RunConfig::hash() const {
  auto doc = to_json();
  doc.erase("out");  // where results go does not change what they are
  return sha256_hex(doc.dump());
}

void apply_env_overrides(Json& doc, const std::vector<std::pair<std::string, std::string>>& env) {
  for (const auto& [name, value] : env) {
    constexpr std::string_view kPrefix = "CONVSV_";
    if (!std::string_view(name).starts_with(kPrefix)) continue;
    std::string rest = name.substr(kPrefix.size());
    std::transform(rest.begin(), rest.end(), rest.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (rest.empty()) continue;

    std::vector<std::string> path;
    for (std::size_t pos = 0;;) {
      const auto next = rest.find("__", pos);
      path.push_back(rest.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    Json* node = &doc;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!node->contains(path[i]) || !(*node)[path[i]].is_object()) (*node)[path[i]] = Json::object();
      node = &(*node)[path[i]];
    }
    Json parsed = Json::parse(value, nullptr, false);
    (*node)[path.back()] = parsed.is_discarded() ? Json(value) : parsed;
  }
}

std::vector<std::pair<std::string, std::string>> environment_overrides() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view entry(*e);
    if (!entry.starts_with("CONVSV_")) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace_back(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunConfig load_config(const std::optional<fs::path>& path) {
  Json doc = Json::object();
  fs::path base;
  if (path) {
    const auto text = read_file(*path);
    doc = Json::parse(text, nullptr, false, true);
    if (doc.is_discarded()) throw Error(ErrorKind::kValidation, "config: " + path->string() + " is not valid JSON");
    base = path->parent_path();
  }
  apply_env_overrides(doc, environment_overrides());
  return parse_config(doc, base);
}

std::vector<std::shared_ptr<const Backend>> make_backends(const RunConfig& config, const Corpus* corpus) {
  std::vector<std::shared_ptr<const Backend>> out;
  for (const auto& b : config.backends) {
    if (b.type == "hashed-ngram") {
      out.push_back(std::make_shared<HashedNgramBackend>(b.dim, b.n));
    } else if (b.type == "lexicon") {
      out.push_back(std::make_shared<LexiconBackend>(load_lexicon(b.path)));
    } else if (b.type == "external") {
      auto table = std::make_shared<ExternalEmbeddings>(load_external_embeddings(b.path, corpus));
      if (!table->missing_ids.empty()) {
        throw Error(ErrorKind::kMissing, "external embeddings '" + b.path.string() + "' miss " +
                                             std::to_string(table->missing_ids.size()) +
                                             " utterance(s), first '" + table->missing_ids.front() + "'");
      }
      out.push_back(std::make_shared<ExternalBackend>(std::move(table)));
    } else {
      throw Error(ErrorKind::kValidation, "unknown backend type '" + b.type + "'");
    }
  }
  return out;
}

Json provenance_json(const Provenance& p) {
  return Json{{"stage", p.stage},
              {"config_hash", p.config_hash},
              {"corpus_hash", p.corpus_hash},
              {"seed", p.seed},
              {"stamp", p.stamp}};
}

Provenance parse_provenance(const Json& doc) {
  try {
    return Provenance{doc.at("stage").get<std::string>(), doc.at("config_hash").get<std::string>(),
                      doc.at("corpus_hash").get<std::string>(), doc.at("seed").get<std::uint64_t>(),
                      doc.at("stamp").get<std::string>()};
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("provenance: ") + e.what());
  }
}

std::optional<Provenance> read_provenance(const fs::path& stage_dir) {
  const auto path = stage_dir / "provenance.json";
  if (!fs::exists(path)) return std::nullopt;
  const auto doc = Json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) return std::nullopt;
  return parse_provenance(doc);
}

void write_provenance(const fs::path& stage_dir, const Provenance& p) {
  write_file_atomic(stage_dir / "provenance.json", provenance_json(p).dump(2) + "\n");
}

const char* to_string(StageStatus s) {
  switch (s) {
    case StageStatus::kRan: return "ran";
    case StageStatus::kCached: return "cached";
    case StageStatus::kSkipped: return "skipped";
  }
  return "?";
}

}  // namespace convsv::cli
