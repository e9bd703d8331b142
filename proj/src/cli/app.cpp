#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "convsv/cli/cli.hpp"
#include "convsv/common/error.hpp"

namespace convsv::cli {
namespace fs = std::filesystem;
namespace {

// Problems with the invocation itself; exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> config;
  std::optional<fs::path> out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Global seed");
  app->add_option("--config", c.config, "JSON run configuration");
  app->add_option("--out", c.out, "Output path");
}

RunConfig resolve_config(const Common& c) {
  if (c.config && !fs::exists(*c.config)) throw UsageError("config file " + c.config->string() + " does not exist");
  RunConfig config;
  try {
    config = load_config(c.config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (c.seed) {
    config.seed = *c.seed;
    config.dataset.seed = *c.seed;
  }
  if (c.out) config.out = *c.out;
  return config;
}

void require(const fs::path& p, const std::string& what) {
  if (p.empty()) throw UsageError(what + " is required");
  if (!fs::exists(p)) throw UsageError(what + " '" + p.string() + "' does not exist");
}

fs::path out_or(const Common& c, const RunConfig& config, const fs::path& fallback) {
  return c.out ? *c.out : config.out / fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-verification datasets, metrics and role-play scoring"};
  app.require_subcommand(1);
  Common common;

  // ingest
  std::vector<fs::path> inputs;
  std::vector<std::string> sources;
  bool no_filter = false;
  auto* ingest = app.add_subcommand("ingest", "Read conversation JSONL into a corpus store");
  add_common(ingest, common);
  ingest->add_option("--input", inputs, "Conversation JSONL file (repeatable)");
  ingest->add_option("--source", sources, "Source id for the matching --input");
  ingest->add_flag("--no-filter", no_filter, "Skip the turn and speaker-frequency filters");

  fs::path store;
  auto* stats = app.add_subcommand("stats", "Per-source speaker, utterance and conversation counts");
  add_common(stats, common);
  stats->add_option("--store", store, "Corpus store directory")->required();

  auto* split = app.add_subcommand("split", "Partition speakers and hold out conversations");
  add_common(split, common);
  split->add_option("--store", store, "Corpus store directory")->required();

  auto* pairs = app.add_subcommand("pairs", "Build the balanced pair bundle");
  add_common(pairs, common);
  pairs->add_option("--store", store, "Corpus store directory")->required();

  fs::path bundle_dir;
  auto* embed = app.add_subcommand("embed", "Embed every utterance set of a bundle");
  add_common(embed, common);
  embed->add_option("--bundle", bundle_dir, "Pair bundle directory")->required();
  embed->add_option("--store", store, "Corpus store (needed by external backends)");

  fs::path embeddings;
  auto* train = app.add_subcommand("train", "Fit the projection head on Train pairs");
  add_common(train, common);
  train->add_option("--bundle", bundle_dir, "Pair bundle directory")->required();
  train->add_option("--embeddings", embeddings, "Set embedding table (JSONL)")->required();

  std::optional<std::size_t> rounds;
  auto* eval = app.add_subcommand("eval", "Multi-round AUC / accuracy / macro-F1");
  add_common(eval, common);
  eval->add_option("--store", store, "Corpus store directory")->required();
  eval->add_option("--rounds", rounds, "Number of rounds");

  fs::path head_path;
  std::vector<std::size_t> bounds;
  auto* sweep = app.add_subcommand("sweep", "AUC by number of utterances per set");
  add_common(sweep, common);
  sweep->add_option("--bundle", bundle_dir, "Pair bundle directory")->required();
  sweep->add_option("--embeddings", embeddings, "Set embedding table (JSONL)")->required();
  sweep->add_option("--head", head_path, "Trained head (JSON)");
  sweep->add_option("--bounds", bounds, "Bucket lower bounds")->delimiter(',');

  fs::path rp_bundles;
  fs::path rp_roles;
  std::size_t bins = 40;
  auto* roleplay = app.add_subcommand("roleplay", "Role-play Simulation / Distinction scoring");
  roleplay->require_subcommand(1);
  std::vector<CLI::App*> rp_subs;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"sim", "Simulation scores"}, {"dist", "Distinction scores"},
           {"rank", "Simulation rank tables"}, {"hist", "Score histograms"}}) {
    auto* sub = roleplay->add_subcommand(name, help);
    add_common(sub, common);
    sub->add_option("--store", store, "Corpus store with the real references")->required();
    sub->add_option("--bundles", rp_bundles, "Role-play JSONL")->required();
    sub->add_option("--roles", rp_roles, "Role manifest JSON")->required();
    sub->add_option("--head", head_path, "Trained head (JSON)");
    if (name == "hist") sub->add_option("--bins", bins, "Histogram bins");
    rp_subs.push_back(sub);
  }

  std::string mode = "utterances";
  std::string shots = "0";
  std::string pool = "UnseenUnseen";
  std::size_t count = 200;
  auto* annotate = app.add_subcommand("annotate-export", "Questionnaire and prompt bundle for annotators");
  add_common(annotate, common);
  annotate->add_option("--bundle", bundle_dir, "Pair bundle directory")->required();
  annotate->add_option("--store", store, "Corpus store directory")->required();
  annotate->add_option("--mode", mode, "conversation | utterances");
  annotate->add_option("--shots", shots, "0 | cot | 2 | 4 | 6");
  annotate->add_option("--count", count, "Number of items");
  annotate->add_option("--pool", pool, "Exposure to draw items from");

  fs::path run_dir;
  auto* report = app.add_subcommand("report", "Consolidated markdown report of a run directory");
  add_common(report, common);
  report->add_option("--in", run_dir, "Run directory")->required();

  auto* run = app.add_subcommand("run", "Run every configured stage");
  add_common(run, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  // Everything before `work` is validation (exit 1); failures inside it exit 2.
  std::function<void()> work;
  try {
    auto config = resolve_config(common);
    auto load_corpus = [&] {
      require(store, "--store");
      return load_store(store).corpus;
    };

    if (*ingest) {
      if (!inputs.empty()) {
        if (!sources.empty() && sources.size() != inputs.size()) {
          throw UsageError("--source must be given once per --input or not at all");
        }
        config.corpus.clear();
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          config.corpus.push_back({inputs[i], sources.empty() ? "" : sources[i]});
        }
      }
      if (config.corpus.empty()) throw UsageError("no corpus input (use --input or the config's corpus list)");
      for (const auto& in : config.corpus) require(in.path, "--input");
      if (no_filter) config.filter.reset();
      work = [&, config] {
        std::vector<Corpus> parts;
        for (const auto& in : config.corpus) {
          auto r = ingest_file(in.path, in.source_id);
          std::cerr << in.path.string() << ": " << r.corpus.conversations.size() << " conversations, dropped "
                    << r.dropped_empty_utterances << " empty utterance(s), " << r.dropped_empty_conversations
                    << " empty conversation(s)\n";
          parts.push_back(std::move(r.corpus));
        }
        auto corpus = merge_corpora(std::move(parts));
        if (config.filter) corpus = filter_corpus(corpus, *config.filter);
        const auto dir = out_or(common, config, "corpus");
        const auto manifest = make_manifest(corpus, config.filter);
        write_store(dir, corpus, manifest);
        std::cout << dir.string() << " " << manifest.content_hash << "\n";
      };
    } else if (*stats) {
      require(store, "--store");
      work = [&, config] {
        const auto s = corpus_stats(load_store(store).corpus);
        std::ostringstream out;
        out << "source,speakers,utterances,conversations,avg_turns\n";
        auto row = [&](const std::string& name, const SourceStats& st) {
          out << name << "," << st.num_speakers << "," << st.num_utterances << "," << st.num_conversations
              << "," << format_double(st.avg_turns()) << "\n";
        };
        for (const auto& [name, st] : s.per_source) row(name, st);
        row("total", s.total);
        if (common.out) write_file_atomic(*common.out, out.str());
        std::cout << out.str();
      };
    } else if (*split) {
      work = [&, config] {
        const auto sets = extract_utterance_sets(load_corpus(), config.extraction);
        auto plan = split_speakers(sets, config.dataset.unseen_fraction, config.seed, config.dataset.dev_fraction);
        plan = isolate_conversations(std::move(plan), sets, config.dataset.holdout_fraction, config.seed);
        DatasetBundle only_plan;
        only_plan.plan = plan;
        const auto files = serialize_bundle(only_plan);
        const auto path = common.out ? *common.out : config.out / "split" / "plan.json";
        fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
        write_file_atomic(path, files.plan_json);
        std::cout << path.string() << ": " << plan.seen_speakers.size() << " seen, " << plan.unseen_speakers.size()
                  << " unseen, " << plan.dev_speakers.size() << " dev speakers; "
                  << plan.excluded_conversation_ids.size() << " conversations held out\n";
      };
    } else if (*pairs) {
      work = [&, config] {
        const auto dataset = build_dataset(extract_utterance_sets(load_corpus(), config.extraction), config.dataset);
        const auto dir = out_or(common, config, "dataset");
        const auto hash = write_bundle(dir, dataset);
        for (const auto& w : dataset.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << dir.string() << " " << hash << "\n";
      };
    } else if (*embed) {
      require(bundle_dir, "--bundle");
      work = [&, config] {
        const auto dataset = load_bundle(bundle_dir);
        std::optional<Corpus> corpus;
        if (!store.empty()) corpus = load_corpus();
        const SetEncoder encoder(make_backends(config, corpus ? &*corpus : nullptr));
        const auto table = encoder.encode(dataset.sets);
        const auto path = common.out ? *common.out : config.out / "embeddings" / "base.jsonl";
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_file_atomic(path, table_jsonl(table));
        std::cout << path.string() << ": " << table.size() << " sets, dim " << table.dim << "\n";
      };
    } else if (*train) {
      require(bundle_dir, "--bundle");
      require(embeddings, "--embeddings");
      if (!config.train) throw UsageError("the configuration disables training");
      work = [&, config] {
        const auto dataset = load_bundle(bundle_dir);
        const auto base = parse_table_jsonl(read_file(embeddings));
        std::vector<PairInstance> train_pairs;
        for (const auto& [key, group] : dataset.groups) {
          if (key.first == Exposure::kTrain) train_pairs.insert(train_pairs.end(), group.begin(), group.end());
        }
        auto tc = *config.train;
        tc.seed = config.seed;
        const auto metric = train_projection(train_pairs, base, tc);
        const auto path = common.out ? *common.out : config.out / "train" / "head.json";
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_file_atomic(path, head_json(metric));
        std::cout << path.string() << ": " << metric.loss_curve.size() << " steps, final loss "
                  << format_double(metric.loss_curve.back().loss) << "\n";
      };
    } else if (*eval) {
      if (rounds) config.rounds = *rounds;
      if (config.rounds == 0) throw UsageError("--rounds must be >= 1");
      work = [&, config] {
        const auto corpus = load_corpus();
        ExperimentConfig ec;
        ec.extraction = config.extraction;
        ec.dataset = config.dataset;
        ec.train = config.train;
        ec.rounds = config.rounds;
        ec.objective = config.objective;
        ec.calibration = config.calibration;
        ec.seed = config.seed;
        const auto rep = multi_round_eval(corpus, SetEncoder(make_backends(config, &corpus)), ec);
        const auto dir = out_or(common, config, "eval");
        fs::create_directories(dir);
        write_file_atomic(dir / "report.csv", report_csv(rep));
        write_file_atomic(dir / "report.md", report_markdown(rep));
        write_file_atomic(dir / "scores.jsonl", scores_jsonl(rep));
        std::cout << report_markdown(rep);
      };
    } else if (*sweep) {
      require(bundle_dir, "--bundle");
      require(embeddings, "--embeddings");
      if (!head_path.empty()) require(head_path, "--head");
      if (bounds.empty()) bounds = config.sweep_bounds;
      work = [&, config] {
        const auto dataset = load_bundle(bundle_dir);
        const auto base = parse_table_jsonl(read_file(embeddings));
        std::optional<ProjectionHead> head;
        if (!head_path.empty()) head = parse_head_json(read_file(head_path)).head;
        std::vector<ScoredPair> scored;
        for (const auto& [key, group] : dataset.groups) {
          if (key.first == Exposure::kTrain || key.first == Exposure::kDev) continue;
          auto r = score_pairs(group, base, head ? &*head : nullptr);
          scored.insert(scored.end(), r.pairs.begin(), r.pairs.end());
        }
        const auto csv = sweep_csv(utterance_count_sweep(scored, bounds));
        if (common.out) write_file_atomic(*common.out, csv);
        std::cout << csv;
      };
    } else if (*roleplay) {
      require(store, "--store");
      require(rp_bundles, "--bundles");
      require(rp_roles, "--roles");
      if (!head_path.empty()) require(head_path, "--head");
      CLI::App* which = nullptr;
      for (auto* s : rp_subs) {
        if (*s) which = s;
      }
      const std::string sub = which->get_name();
      work = [&, config, sub] {
        const auto corpus = load_corpus();
        const auto refs = build_references(corpus, parse_role_manifest(read_file(rp_roles)), config.extraction);
        const auto bundles = load_roleplay_bundles(rp_bundles);
        if (bundles.empty()) throw Error(ErrorKind::kEmpty, "no generations in " + rp_bundles.string());
        std::optional<ProjectionHead> head;
        if (!head_path.empty()) head = parse_head_json(read_file(head_path)).head;
        const auto table = encode_roleplay_sets(bundles, refs, SetEncoder(make_backends(config, &corpus), head));
        const auto dir = out_or(common, config, "roleplay");
        fs::create_directories(dir);
        std::string text;
        if (sub == "sim") {
          std::vector<SimReport> sims;
          for (const auto& b : bundles) sims.push_back(simulation_score(b, refs, table));
          sims.push_back(real_baseline(refs, table).sim);
          text = sim_csv(sims);
          write_file_atomic(dir / "sim.csv", text);
        } else if (sub == "dist") {
          std::vector<DistReport> dists;
          for (const auto& b : bundles) dists.push_back(distinction_score(b, table));
          dists.push_back(real_baseline(refs, table).dist);
          text = dist_csv(dists);
          write_file_atomic(dir / "dist.csv", text);
        } else if (sub == "rank") {
          text = rank_csv(simulation_rank(bundles, refs, table));
          write_file_atomic(dir / "rank.csv", text);
        } else {
          for (const auto& b : bundles) {
            for (const auto& [kind, ps] : {std::pair{std::string("real_generated"), real_generated_pairs(b, refs)},
                                           std::pair{std::string("generated_generated"), generated_generated_pairs(b)}}) {
              const auto d = score_distributions(score_pairs(ps, table).pairs, bins);
              std::string stem = "hist_";
              for (char ch : b.model_id) stem += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
              stem += "_" + kind;
              write_file_atomic(dir / (stem + ".csv"), histogram_csv(d));
              write_file_atomic(dir / (stem + ".svg"), histogram_svg(d, b.model_id + ": " + kind + " pairs"));
              text += (dir / (stem + ".csv")).string() + "\n";
            }
          }
        }
        std::cout << text;
      };
    } else if (*annotate) {
      require(bundle_dir, "--bundle");
      require(store, "--store");
      AnnotationRequest req;
      try {
        req.mode = parse_annotation_mode(mode);
        req.pool = parse_exposure(pool);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      if (shots != "0" && shots != "cot" && shots != "2" && shots != "4" && shots != "6") {
        throw UsageError("--shots must be one of 0, cot, 2, 4, 6");
      }
      req.shots = shots;
      req.count = count;
      req.seed = config.seed;
      work = [&, config, req] {
        const auto b = export_annotation_bundle(load_bundle(bundle_dir), load_corpus(), req);
        const auto dir = out_or(common, config, "annotation");
        write_annotation_bundle(dir, b);
        std::cout << dir.string() << ": " << b.items.size() << " items\n";
      };
    } else if (*report) {
      require(run_dir, "--in");
      work = [&, config] {
        const auto dir = common.out ? *common.out : run_dir / "report";
        emit_report(run_dir, dir);
        std::cout << (dir / "report.md").string() << "\n";
      };
    } else if (*run) {
      config.validate();
      work = [&, config] {
        for (const auto& o : run_pipeline(config)) std::cout << o.stage << ": " << to_string(o.status) << "\n";
      };
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    work();
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace convsv::cli
