#include <sstream>

#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/pairing/pairing.hpp"

namespace convsv {

DatasetBundle bundle_dataset(SplitPlan plan, std::vector<UtteranceSet> sets,
                             std::map<GroupKey, std::vector<PairInstance>> groups) {
  DatasetBundle bundle;
  bundle.plan = std::move(plan);
  bundle.sets = std::move(sets);
  bundle.groups = std::move(groups);

  const SetIndex index(bundle.sets);
  for (const auto& [key, pairs] : bundle.groups) {
    CountsRow row{key.first, key.second};
    std::set<std::string> speakers;
    for (const auto& p : pairs) {
      (p.label == Label::kPositive ? row.positives : row.negatives) += 1;
      speakers.insert(index.at(p.set_a).speaker_id);
      speakers.insert(index.at(p.set_b).speaker_id);
    }
    if (row.positives != row.negatives) {
      throw Error(ErrorKind::kValidation,
                  std::string("group ") + to_string(key.first) + "/" + to_string(key.second) +
                      " is unbalanced (" + std::to_string(row.positives) + " positive, " +
                      std::to_string(row.negatives) + " negative)");
    }
    row.pairs = pairs.size();
    row.speakers = speakers.size();
    bundle.counts.push_back(row);
  }
  return bundle;
}

DatasetBundle build_dataset(std::vector<UtteranceSet> sets, const DatasetConfig& config) {
  SplitPlan plan = split_speakers(sets, config.unseen_fraction, config.seed, config.dev_fraction);
  plan = isolate_conversations(std::move(plan), sets, config.holdout_fraction, config.seed);

  const SetIndex index(sets);
  std::map<GroupKey, std::vector<PairInstance>> groups;
  std::vector<std::string> warnings;
  std::set<PairKey> train_keys;

  auto build_group = [&](Exposure exposure, Level level, std::size_t count,
                         const std::set<PairKey>* exclude) {
    const std::string name = std::string(to_string(exposure)) + "/" + to_string(level);
    std::vector<PairInstance> pairs;
    try {
      auto built = build_pairs(index, plan, level, exposure, config.seed, count, exclude);
      if (built.shortfall) {
        warnings.push_back(name + ": fewer candidates than requested (" +
                           std::to_string(built.positive_candidates) + " positive, " +
                           std::to_string(built.negative_candidates) + " negative)");
      }
      pairs = std::move(built.pairs);
      pairs = balance_pairs(std::move(pairs), derive_seed(config.seed, name));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUnsatisfiable && e.kind() != ErrorKind::kValidation) throw;
      warnings.push_back(name + ": empty group (" + e.what() + ")");
      pairs.clear();
    }
    groups[{exposure, level}] = std::move(pairs);
  };

  for (Level level : config.levels) {
    build_group(Exposure::kTrain, level, config.train_pairs_per_group, nullptr);
    for (const auto& p : groups[{Exposure::kTrain, level}]) {
      train_keys.insert(pair_key(p.set_a, p.set_b));
    }
  }
  for (Level level : config.levels) {
    build_group(Exposure::kDev, level, config.dev_pairs_per_group, nullptr);
  }
  for (Exposure exposure : kTestExposures) {
    for (Level level : config.levels) {
      build_group(exposure, level, config.test_pairs_per_group,
                  exposure == Exposure::kSeenSeen ? &train_keys : nullptr);
    }
  }

  auto bundle = bundle_dataset(std::move(plan), std::move(sets), std::move(groups));
  bundle.warnings = std::move(warnings);
  return bundle;
}

std::string sets_jsonl(std::span<const UtteranceSet> sets) {
  std::string out;
  for (const auto& s : sets) {
    OrderedJson rec;
    rec["set_id"] = s.set_id;
    rec["speaker_id"] = s.speaker_id;
    rec["conversation_id"] = s.conversation_id;
    rec["source_id"] = s.source_id;
    rec["utterance_ids"] = s.utterance_ids;
    rec["texts"] = s.texts;
    rec["turn_indices"] = s.turn_indices;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<UtteranceSet> parse_sets_jsonl(std::string_view data) {
  std::vector<UtteranceSet> sets;
  std::istringstream in{std::string(data)};
  for_each_jsonl(in, [&](const Json& rec, std::size_t line) {
    try {
      UtteranceSet s;
      s.set_id = rec.at("set_id").get<std::string>();
      s.speaker_id = rec.at("speaker_id").get<std::string>();
      s.conversation_id = rec.at("conversation_id").get<std::string>();
      s.source_id = rec.at("source_id").get<std::string>();
      s.utterance_ids = rec.at("utterance_ids").get<std::vector<std::string>>();
      s.texts = rec.at("texts").get<std::vector<std::string>>();
      s.turn_indices = rec.value("turn_indices", std::vector<std::size_t>{});
      if (s.texts.size() != s.utterance_ids.size()) {
        throw Error(ErrorKind::kParse,
                    "line " + std::to_string(line) + ": texts/utterance_ids length mismatch", line);
      }
      sets.push_back(std::move(s));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + e.what(), line);
    }
  });
  return sets;
}

namespace {

OrderedJson sorted_array(const std::set<std::string>& items) {
  return OrderedJson(std::vector<std::string>(items.begin(), items.end()));
}

std::set<std::string> as_set(const Json& arr) {
  auto v = arr.get<std::vector<std::string>>();
  return {v.begin(), v.end()};
}

}  // namespace

BundleFiles serialize_bundle(const DatasetBundle& bundle) {
  BundleFiles files;
  for (const auto& [_, pairs] : bundle.groups) {
    for (const auto& p : pairs) {
      OrderedJson rec;
      rec["pair_id"] = p.pair_id;
      rec["set_a"] = p.set_a;
      rec["set_b"] = p.set_b;
      rec["label"] = to_string(p.label);
      rec["level"] = to_string(p.level);
      rec["exposure"] = to_string(p.exposure);
      files.pairs_jsonl += rec.dump();
      files.pairs_jsonl += '\n';
    }
  }
  files.sets_jsonl = sets_jsonl(bundle.sets);

  OrderedJson plan;
  plan["seed"] = bundle.plan.seed;
  plan["seen_speakers"] = sorted_array(bundle.plan.seen_speakers);
  plan["unseen_speakers"] = sorted_array(bundle.plan.unseen_speakers);
  plan["dev_speakers"] = sorted_array(bundle.plan.dev_speakers);
  plan["train_set_ids"] = sorted_array(bundle.plan.train_set_ids);
  plan["dev_set_ids"] = sorted_array(bundle.plan.dev_set_ids);
  plan["excluded_conversation_ids"] = sorted_array(bundle.plan.excluded_conversation_ids);
  files.plan_json = plan.dump(2) + "\n";

  files.counts_csv = "exposure,level,speakers,pairs,positives,negatives\n";
  for (const auto& row : bundle.counts) {
    files.counts_csv += std::string(to_string(row.exposure)) + "," + to_string(row.level) + "," +
                        std::to_string(row.speakers) + "," + std::to_string(row.pairs) + "," +
                        std::to_string(row.positives) + "," + std::to_string(row.negatives) + "\n";
  }

  Sha256 h;
  h.update(files.pairs_jsonl).update(files.sets_jsonl).update(files.plan_json).update(files.counts_csv);
  files.content_hash = h.hex();
  return files;
}

std::string write_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle) {
  const auto files = serialize_bundle(bundle);
  write_file_atomic(dir / "pairs.jsonl", files.pairs_jsonl);
  write_file_atomic(dir / "sets.jsonl", files.sets_jsonl);
  write_file_atomic(dir / "plan.json", files.plan_json);
  write_file_atomic(dir / "counts.csv", files.counts_csv);
  OrderedJson meta;
  meta["content_hash"] = files.content_hash;
  meta["warnings"] = bundle.warnings;
  write_file_atomic(dir / "bundle.json", meta.dump(2) + "\n");
  return files.content_hash;
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  auto sets = parse_sets_jsonl(read_file(dir / "sets.jsonl"));

  SplitPlan plan;
  try {
    const auto doc = Json::parse(read_file(dir / "plan.json"));
    plan.seed = doc.at("seed").get<std::uint64_t>();
    plan.seen_speakers = as_set(doc.at("seen_speakers"));
    plan.unseen_speakers = as_set(doc.at("unseen_speakers"));
    plan.dev_speakers = as_set(doc.at("dev_speakers"));
    plan.train_set_ids = as_set(doc.at("train_set_ids"));
    plan.dev_set_ids = as_set(doc.at("dev_set_ids"));
    plan.excluded_conversation_ids = as_set(doc.at("excluded_conversation_ids"));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParse, "plan.json: " + std::string(e.what()));
  }

  std::map<GroupKey, std::vector<PairInstance>> groups;
  std::istringstream in(read_file(dir / "pairs.jsonl"));
  for_each_jsonl(in, [&](const Json& rec, std::size_t line) {
    try {
      PairInstance p;
      p.pair_id = rec.at("pair_id").get<std::string>();
      p.set_a = rec.at("set_a").get<std::string>();
      p.set_b = rec.at("set_b").get<std::string>();
      p.label = parse_label(rec.at("label").get<std::string>());
      p.level = parse_level(rec.at("level").get<std::string>());
      p.exposure = parse_exposure(rec.at("exposure").get<std::string>());
      groups[{p.exposure, p.level}].push_back(std::move(p));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, "pairs.jsonl line " + std::to_string(line) + ": " + e.what(),
                  line);
    }
  });

  // Empty groups are not represented in pairs.jsonl; recover them from counts.
  std::istringstream counts(read_file(dir / "counts.csv"));
  std::string row;
  std::getline(counts, row);
  while (std::getline(counts, row)) {
    if (row.empty()) continue;
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    groups.try_emplace({parse_exposure(row.substr(0, c1)),
                        parse_level(row.substr(c1 + 1, c2 - c1 - 1))});
  }

  auto bundle = bundle_dataset(std::move(plan), std::move(sets), std::move(groups));
  if (std::filesystem::exists(dir / "bundle.json")) {
    bundle.warnings =
        Json::parse(read_file(dir / "bundle.json")).value("warnings", std::vector<std::string>{});
  }
  return bundle;
}

}  // namespace convsv
