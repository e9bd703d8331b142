#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <functional>
#include <set>

#include "convsv/cli/cli.hpp"
#include "convsv/common/error.hpp"
#include "convsv/common/hashing.hpp"

namespace convsv::cli {
namespace fs = std::filesystem;

namespace {

class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".convsv.lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      if (errno == EEXIST) {
        throw Error(ErrorKind::kValidation, "run directory " + dir.string() +
                                                " is locked by another pipeline (" + path_.string() + ")");
      }
      throw Error(ErrorKind::kIo, "cannot create " + path_.string() + ": " + std::strerror(errno));
    }
    const auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~RunLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

std::string file_hash(const fs::path& p) { return sha256_hex(read_file(p)); }

std::string stamp_of(std::initializer_list<std::string_view> parts) {
  Sha256 h;
  for (auto p : parts) h.update(p).update("\x1f");
  return h.hex();
}

std::string safe_name(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

struct Context {
  const RunConfig& config;
  std::string config_hash;
  std::string corpus_hash;
  std::vector<StageOutcome> outcomes;

  Provenance provenance(const std::string& stage, const std::string& stamp) const {
    return Provenance{stage, config_hash, corpus_hash, config.seed, stamp};
  }

  // Runs `work` unless the stage directory already holds output for `stamp`.
  // `load` restores in-memory state from a cached directory.
  void stage(const std::string& name, const std::string& stamp, const std::vector<std::string>& outputs,
             const std::function<void(const fs::path&)>& work,
             const std::function<void(const fs::path&)>& load) {
    const fs::path dir = config.out / name;
    const auto prev = read_provenance(dir);
    bool cached = prev && prev->stamp == stamp && prev->config_hash == config_hash && !fs::exists(dir / "STALE");
    for (const auto& o : outputs) cached = cached && fs::exists(dir / o);
    if (cached) {
      try {
        load(dir);
        outcomes.push_back({name, StageStatus::kCached});
        return;
      } catch (const std::exception&) {
        // Unreadable cache: fall through and rebuild.
      }
    }
    try {
      fs::create_directories(dir);
      fs::remove(dir / "provenance.json");
      work(dir);
      write_provenance(dir, provenance(name, stamp));
      fs::remove(dir / "STALE");
    } catch (const std::exception& e) {
      std::error_code ec;
      fs::create_directories(dir, ec);
      write_file_atomic(dir / "STALE", std::string(e.what()) + "\n");
      throw StageError(name, e.what());
    }
    outcomes.push_back({name, StageStatus::kRan});
  }
};

}  // namespace

std::string provenance_line(const Provenance& p) {
  return "provenance: stage=" + p.stage + " config_hash=" + p.config_hash +
         " corpus_hash=" + p.corpus_hash + " seed=" + std::to_string(p.seed);
}

std::vector<StageOutcome> run_pipeline(const RunConfig& config) {
  config.validate();
  RunLock lock(config.out);
  Context ctx{config, config.hash(), "", {}};
  const auto cfg = config.to_json();

  // ingest
  std::string inputs;
  for (const auto& in : config.corpus) inputs += in.path.string() + "|" + in.source_id + "|" + file_hash(in.path) + ";";
  Corpus corpus;
  ctx.stage(
      "corpus", stamp_of({inputs, cfg["filter"].dump()}), {"conversations.jsonl", "manifest.json"},
      [&](const fs::path& dir) {
        std::vector<Corpus> parts;
        for (const auto& in : config.corpus) parts.push_back(ingest_file(in.path, in.source_id).corpus);
        corpus = merge_corpora(std::move(parts));
        if (config.filter) corpus = filter_corpus(corpus, *config.filter);
        write_store(dir, corpus, make_manifest(corpus, config.filter));
        ctx.corpus_hash = content_hash(corpus);
      },
      [&](const fs::path& dir) {
        auto loaded = load_store(dir);
        corpus = std::move(loaded.corpus);
        ctx.corpus_hash = loaded.manifest.content_hash;
      });

  const std::string seed = std::to_string(config.seed);
  const std::string sets_cfg = cfg["sets"].dump();

  // pairs
  DatasetBundle dataset;
  const auto pairs_stamp = stamp_of({ctx.corpus_hash, sets_cfg, cfg["pairing"].dump(), seed});
  ctx.stage(
      "dataset", pairs_stamp, {"pairs.jsonl", "sets.jsonl", "plan.json", "counts.csv", "bundle.json"},
      [&](const fs::path& dir) {
        dataset = build_dataset(extract_utterance_sets(corpus, config.extraction), config.dataset);
        write_bundle(dir, dataset);
      },
      [&](const fs::path& dir) { dataset = load_bundle(dir); });

  // embed
  std::string backend_inputs = cfg["backends"].dump();
  for (const auto& b : config.backends) {
    if (!b.path.empty()) backend_inputs += file_hash(b.path);
  }
  const auto backends = make_backends(config, &corpus);
  EmbeddingTable base;
  const auto embed_stamp = stamp_of({ctx.corpus_hash, sets_cfg, backend_inputs});
  ctx.stage(
      "embeddings", embed_stamp, {"base.jsonl"},
      [&](const fs::path& dir) {
        base = SetEncoder(backends).encode(dataset.sets);
        write_file_atomic(dir / "base.jsonl", table_jsonl(base));
      },
      [&](const fs::path& dir) { base = parse_table_jsonl(read_file(dir / "base.jsonl")); });
  if (base.size() != dataset.sets.size()) {
    throw StageError("embeddings", "embedding table does not cover the dataset's sets");
  }

  // train
  std::optional<TrainedMetric> metric;
  std::string train_stamp = "none";
  if (config.train) {
    train_stamp = stamp_of({pairs_stamp, embed_stamp, cfg["train"].dump()});
    ctx.stage(
        "train", train_stamp, {"head.json"},
        [&](const fs::path& dir) {
          std::vector<PairInstance> train_pairs;
          for (const auto& [key, pairs] : dataset.groups) {
            if (key.first == Exposure::kTrain) train_pairs.insert(train_pairs.end(), pairs.begin(), pairs.end());
          }
          auto tc = *config.train;
          tc.seed = config.seed;
          metric = train_projection(train_pairs, base, tc);
          write_file_atomic(dir / "head.json", head_json(*metric));
        },
        [&](const fs::path& dir) { metric = parse_head_json(read_file(dir / "head.json")); });
  } else {
    ctx.outcomes.push_back({"train", StageStatus::kSkipped});
  }

  // eval (+ utterance-count sweep on round 0)
  const auto eval_stamp = stamp_of({embed_stamp, ctx.corpus_hash, sets_cfg, cfg["pairing"].dump(),
                                    cfg["train"].dump(), cfg["eval"].dump(), seed});
  ctx.stage(
      "eval", eval_stamp, {"report.csv", "report.md", "scores.jsonl", "rounds.csv", "sweep.csv"},
      [&](const fs::path& dir) {
        ExperimentConfig ec;
        ec.extraction = config.extraction;
        ec.dataset = config.dataset;
        ec.train = config.train;
        ec.rounds = config.rounds;
        ec.objective = config.objective;
        ec.calibration = config.calibration;
        ec.seed = config.seed;
        const auto report = multi_round_eval(dataset.sets, base, ec);
        const auto prov = ctx.provenance("eval", eval_stamp);
        write_file_atomic(dir / "report.csv", "# " + provenance_line(prov) + "\n" + report_csv(report));
        write_file_atomic(dir / "report.md", "<!-- " + provenance_line(prov) + " -->\n" + report_markdown(report));
        write_file_atomic(dir / "scores.jsonl", scores_jsonl(report));
        std::string rounds = "# " + provenance_line(prov) + "\n" + "round,seed,exposure,level,auc,acc,f1,threshold,pairs\n";
        for (std::size_t r = 0; r < report.per_round.size(); ++r) {
          for (const auto& [key, cell] : report.per_round[r].cells) {
            rounds += std::to_string(r) + "," + std::to_string(report.per_round[r].seed) + "," +
                      to_string(key.first) + "," + to_string(key.second) + "," + format_double(cell.auc) + "," +
                      format_double(cell.accuracy) + "," + format_double(cell.macro_f1) + "," +
                      format_double(cell.threshold) + "," + std::to_string(cell.pairs) + "\n";
          }
        }
        write_file_atomic(dir / "rounds.csv", rounds);
        std::vector<ScoredPair> test;
        for (const auto& p : report.per_round.front().scores) {
          if (p.exposure != Exposure::kDev) test.push_back(p);
        }
        const auto buckets = utterance_count_sweep(test, config.sweep_bounds);
        write_file_atomic(dir / "sweep.csv", "# " + provenance_line(prov) + "\n" + sweep_csv(buckets));
      },
      [](const fs::path&) {});

  // roleplay
  std::string roleplay_stamp = "none";
  if (config.roleplay) {
    const auto& rc = *config.roleplay;
    roleplay_stamp = stamp_of({ctx.corpus_hash, sets_cfg, backend_inputs, cfg["roleplay"].dump(),
                               file_hash(rc.bundles), file_hash(rc.roles),
                               rc.use_trained_head ? train_stamp : "base"});
    ctx.stage(
        "roleplay", roleplay_stamp, {"sim.csv", "dist.csv", "rank.csv"},
        [&](const fs::path& dir) {
          const auto roles = parse_role_manifest(read_file(rc.roles));
          const auto refs = build_references(corpus, roles, config.extraction);
          const auto bundles = load_roleplay_bundles(rc.bundles);
          if (bundles.empty()) throw Error(ErrorKind::kEmpty, "roleplay: bundle file holds no generations");
          std::optional<ProjectionHead> head;
          if (rc.use_trained_head && metric) head = metric->head;
          const SetEncoder encoder(backends, head);
          const auto table = encode_roleplay_sets(bundles, refs, encoder);

          std::vector<SimReport> sims;
          std::vector<DistReport> dists;
          for (const auto& b : bundles) {
            sims.push_back(simulation_score(b, refs, table));
            dists.push_back(distinction_score(b, table));
          }
          const auto real = real_baseline(refs, table);
          sims.push_back(real.sim);
          dists.push_back(real.dist);
          const auto prov = ctx.provenance("roleplay", roleplay_stamp);
          const auto comment = "# " + provenance_line(prov) + "\n";
          write_file_atomic(dir / "sim.csv", comment + sim_csv(sims));
          write_file_atomic(dir / "dist.csv", comment + dist_csv(dists));
          write_file_atomic(dir / "rank.csv", comment + rank_csv(simulation_rank(bundles, refs, table)));
          for (const auto& b : bundles) {
            const auto name = safe_name(b.model_id);
            const std::pair<std::string, std::vector<PairInstance>> kinds[] = {
                {"real_generated", real_generated_pairs(b, refs)},
                {"generated_generated", generated_generated_pairs(b)}};
            for (const auto& [kind, pairs] : kinds) {
              const auto dist = score_distributions(score_pairs(pairs, table).pairs, rc.bins);
              const auto stem = "hist_" + name + "_" + kind;
              write_file_atomic(dir / (stem + ".csv"), comment + histogram_csv(dist));
              write_file_atomic(dir / (stem + ".svg"), histogram_svg(dist, b.model_id + ": " + kind + " pairs"));
            }
          }
        },
        [](const fs::path&) {});
  } else {
    ctx.outcomes.push_back({"roleplay", StageStatus::kSkipped});
  }

  ctx.stage(
      "report", stamp_of({eval_stamp, roleplay_stamp}), {"report.md"},
      [&](const fs::path& dir) { emit_report(config.out, dir); }, [](const fs::path&) {});
  return ctx.outcomes;
}

}  // namespace convsv::cli
