// One line per acceptance criterion: PASS, FAIL or SKIP, with the measured
// quantities and wall time. Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "convsv/cli/cli.hpp"
#include "convsv/common/error.hpp"
#include "convsv/common/jsonl.hpp"
#include "convsv/common/random.hpp"
#include "convsv/embedding/embedding.hpp"
#include "convsv/eval/eval.hpp"
#include "convsv/metric/metric.hpp"
#include "convsv/pairing/pairing.hpp"
#include "convsv/roleplay/roleplay.hpp"
#include "synthetic.hpp"

namespace {

using namespace convsv;

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kPass;
  std::string detail;
};

// Collects failed checks; the first few are reported.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (ok) return;
    ++failed_;
    if (failed_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(std::string summary) const {
    if (failed_ == 0) return {Verdict::kPass, std::move(summary)};
    return {Verdict::kFail, summary + " | " + std::to_string(failed_) + "/" +
                                std::to_string(total_) + " checks failed: " + notes_};
  }

 private:
  std::size_t total_ = 0;
  std::size_t failed_ = 0;
  std::string notes_;
};

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// ---------------------------------------------------------------- pairing

Outcome pairing_validity() {
  testing::ToyCorpusOptions o;
  o.sources = 3;
  o.speakers_per_source = 4;
  o.conversations_per_source = 10;
  o.speakers_per_conversation = 3;
  o.seed = 2;
  const auto corpus = testing::toy_corpus(o);
  auto sets = extract_utterance_sets(corpus);

  DatasetConfig config;
  config.unseen_fraction = 0.25;
  config.dev_fraction = 0.17;
  config.holdout_fraction = 0.2;
  config.train_pairs_per_group = 60;
  config.dev_pairs_per_group = 20;
  config.test_pairs_per_group = 20;
  config.seed = 13;

  Checks checks;
  const auto bundle = build_dataset(sets, config);
  const SetIndex index(bundle.sets);
  std::set<std::string> speakers;
  std::set<std::string> sources;
  for (const auto& s : bundle.sets) {
    speakers.insert(s.speaker_id);
    sources.insert(s.source_id);
  }
  checks.expect(speakers.size() >= 6, "fewer than 6 speakers");
  checks.expect(sources.size() >= 3, "fewer than 3 sources");

  std::size_t total = 0;
  for (const auto& [key, pairs] : bundle.groups) {
    std::size_t positives = 0;
    for (const auto& p : pairs) {
      ++total;
      const auto& a = index.at(p.set_a);
      const auto& b = index.at(p.set_b);
      const bool same = a.speaker_id == b.speaker_id;
      checks.expect(p.exposure == key.first && p.level == key.second, p.pair_id + ": wrong group");
      checks.expect((p.label == Label::kPositive) == same, p.pair_id + ": label");
      if (p.label == Label::kNegative) {
        checks.expect(level_holds(a, b, p.level), p.pair_id + ": level");
      }
      checks.expect(exposure_holds(a, b, bundle.plan, p.exposure), p.pair_id + ": exposure");
      positives += p.label == Label::kPositive;
    }
    checks.expect(2 * positives == pairs.size(),
                  std::string(to_string(key.first)) + "/" + to_string(key.second) + " unbalanced");
  }
  checks.expect(total > 0, "no pairs");

  const auto first = serialize_bundle(bundle);
  const auto second = serialize_bundle(build_dataset(sets, config));
  const bool identical = first.pairs_jsonl == second.pairs_jsonl &&
                         first.sets_jsonl == second.sets_jsonl &&
                         first.plan_json == second.plan_json &&
                         first.counts_csv == second.counts_csv &&
                         first.content_hash == second.content_hash;
  checks.expect(identical, "bundles differ across runs");

  // Same through the written files.
  testing::TempDir a("acc-pairs-a");
  testing::TempDir b("acc-pairs-b");
  write_bundle(a.path(), bundle);
  write_bundle(b.path(), build_dataset(sets, config));
  for (const auto* f : {"pairs.jsonl", "sets.jsonl", "plan.json", "counts.csv", "bundle.json"}) {
    checks.expect(read_file(a.path() / f) == read_file(b.path() / f), std::string(f) + " differs");
  }
  return checks.outcome(std::to_string(total) + " pairs in " + std::to_string(bundle.groups.size()) +
                        " groups, " + std::to_string(speakers.size()) + " speakers, " +
                        std::to_string(sources.size()) + " sources, byte-identical rerun");
}

// ---------------------------------------------------------------- loss

std::pair<Vector, Vector> at_cosine(double c) {
  return {Vector{1.0, 0.0}, Vector{c, std::sqrt(std::max(0.0, 1.0 - c * c))}};
}

double relative_error(const Vector& a, const Vector& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    scale += a[i] * a[i] + b[i] * b[i];
  }
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff) / std::sqrt(scale / 2.0);
}

Outcome loss_gradient_suite() {
  Checks checks;
  const Vector x{0.3, -1.2, 2.0};
  checks.expect(std::abs(contrastive_loss(x, x, true, 0.5) - 0.0) <= 1e-12, "identical positive");
  auto [a, b] = at_cosine(0.5);
  checks.expect(std::abs(contrastive_loss(a, b, true, 0.5) - 0.5) <= 1e-12, "positive at cos 0.5");
  std::tie(a, b) = at_cosine(0.8);
  checks.expect(std::abs(contrastive_loss(a, b, false, 0.5) - 0.3) <= 1e-12, "negative at cos 0.8");
  std::tie(a, b) = at_cosine(-1.0);
  checks.expect(std::abs(contrastive_loss(a, b, false, 0.5) - 0.0) <= 1e-12, "negative at cos -1");

  Rng rng(2024);
  std::size_t checked = 0;
  double worst = 0.0;
  for (int draw = 0; checked < 200 && draw < 400; ++draw) {
    const std::size_t in = 2 + rng.below(10);
    const std::size_t out = 2 + rng.below(10);
    ProjectionHead head = ProjectionHead::identity(in);
    head.out_dim = out;
    head.weight.assign(in * out, 0.0);
    for (auto& w : head.weight) w = rng.normal();
    Vector u(in);
    Vector v(in);
    for (auto& t : u) t = rng.normal();
    for (auto& t : v) t = rng.normal();
    const bool positive = rng.below(2) == 1;
    const bool clamp = rng.below(4) != 0;
    const double margin = 0.1 + 1.5 * rng.uniform();
    // Central differences straddling the hinge kink are not a derivative.
    const double dist = 1.0 - cosine(head.apply(u), head.apply(v));
    if (!positive && clamp && std::abs(margin - dist) < 1e-3) continue;
    const auto analytic = loss_gradient(u, v, positive, margin, head, clamp);
    const auto numeric = testing::finite_difference_gradient(head, u, v, positive, margin, clamp);
    const double err = relative_error(analytic, numeric);
    worst = std::max(worst, err);
    checks.expect(err < 1e-4, "draw " + std::to_string(draw) + " rel err " + fmt(err, 8));
    ++checked;
  }
  checks.expect(checked >= 100, "only " + std::to_string(checked) + " draws checked");
  return checks.outcome("hand values to 1e-12, " + std::to_string(checked) +
                        " gradient draws, worst rel err " + fmt(worst, 9));
}

// ---------------------------------------------------------------- AUC

Outcome auc_oracle() {
  Checks checks;
  Rng rng(777);
  std::size_t with_ties = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Vector pos(1 + rng.below(200));
    Vector neg(1 + rng.below(200));
    const bool tied = trial % 2 == 0;
    const std::uint64_t levels = 2 + rng.below(20);
    for (auto& s : pos) s = tied ? static_cast<double>(rng.below(levels)) / 8.0 : rng.normal(0.3);
    for (auto& s : neg) s = tied ? static_cast<double>(rng.below(levels)) / 8.0 : rng.normal();
    // Cross-class ties in the untied half too.
    if (!tied && !neg.empty()) pos[0] = neg[0];
    with_ties += tied;
    const double auc = compute_auc(pos, neg);
    checks.expect(auc == testing::brute_force_auc(pos, neg), "trial " + std::to_string(trial));

    auto map = [](Vector v, double (*f)(double)) {
      for (auto& s : v) s = f(s);
      return v;
    };
    const auto affine = +[](double s) { return 3.0 * s - 2.0; };
    const auto expo = +[](double s) { return std::exp(s); };
    const auto negate = +[](double s) { return -s; };
    checks.expect(std::abs(compute_auc(map(pos, affine), map(neg, affine)) - auc) <= 1e-12,
                  "affine transform, trial " + std::to_string(trial));
    checks.expect(std::abs(compute_auc(map(pos, expo), map(neg, expo)) - auc) <= 1e-12,
                  "exp transform, trial " + std::to_string(trial));
    checks.expect(std::abs(compute_auc(neg, pos) - (1.0 - auc)) <= 1e-12,
                  "label reversal, trial " + std::to_string(trial));
    checks.expect(std::abs(compute_auc(map(pos, negate), map(neg, negate)) - (1.0 - auc)) <= 1e-12,
                  "score reversal, trial " + std::to_string(trial));
  }
  return checks.outcome("1000 score sets (" + std::to_string(with_ties) +
                        " heavily tied) equal brute force; transforms and reversal hold");
}

// ---------------------------------------------------------------- separability

double heldout_auc(std::span<const PairInstance> pairs, const EmbeddingTable& table) {
  return compute_auc(score_pairs(pairs, table).pairs);
}

Outcome synthetic_separability() {
  Checks checks;
  std::string summary;
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    // 8 speaker-bearing dimensions next to 8 high-variance shared ones.
    const auto data = testing::gaussian_clusters(6, 40, 16, 8, 2.5, seed);
    std::vector<UtteranceSet> train_sets;
    std::vector<UtteranceSet> heldout_sets;
    for (std::size_t i = 0; i < data.sets.size(); ++i) {
      (i % 40 < 20 ? train_sets : heldout_sets).push_back(data.sets[i]);
    }
    const auto train_pairs = testing::random_pairs(train_sets, 400, seed, Exposure::kTrain);
    const auto test_pairs = testing::random_pairs(heldout_sets, 200, seed + 1, Exposure::kSeenSeen);

    TrainConfig tc;
    tc.seed = seed;
    tc.learning_rate = 0.5;
    tc.epochs = 100;
    tc.batch_size = 32;
    tc.margin = 0.5;
    const auto trained = train_projection(train_pairs, data.table, tc);
    const double base = heldout_auc(test_pairs, data.table);
    const double tuned = heldout_auc(test_pairs, project_table(data.table, trained.head));
    checks.expect(tuned > 0.95, "seed " + std::to_string(seed) + " trained AUC " + fmt(tuned));
    checks.expect(tuned >= base + 0.05, "seed " + std::to_string(seed) + " gain " + fmt(tuned - base));
    summary += (summary.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) +
               ": identity " + fmt(base) + " -> trained " + fmt(tuned);
  }
  return checks.outcome(summary);
}

// ---------------------------------------------------------------- mixing

Outcome mixed_features_identity() {
  Checks checks;
  Rng rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t backends = 2 + rng.below(3);
    std::vector<SetEmbedding> x;
    std::vector<SetEmbedding> y;
    double mean = 0.0;
    for (std::size_t k = 0; k < backends; ++k) {
      const std::size_t dim = 1 + rng.below(12);
      Vector u(dim);
      Vector v(dim);
      for (auto& t : u) t = rng.normal();
      for (auto& t : v) t = rng.normal();
      const double nu = l2_norm(u);
      const double nv = l2_norm(v);
      for (auto& t : u) t /= nu;
      for (auto& t : v) t /= nv;
      mean += cosine(u, v);
      const std::string id = "b" + std::to_string(k);
      x.push_back({"x", id, u, 1});
      y.push_back({"y", id, v, 1});
    }
    mean /= static_cast<double>(backends);
    const double mixed = cosine(mix_embeddings(x).values, mix_embeddings(y).values);
    worst = std::max(worst, std::abs(mixed - mean));
    checks.expect(std::abs(mixed - mean) <= 1e-9, "trial " + std::to_string(trial));
  }
  return checks.outcome("1000 pairs over 2-4 backends, max |mixed - mean| " + std::to_string(worst));
}

// ---------------------------------------------------------------- role-play

std::string gen_line(const std::string& model, const std::string& role, const std::string& conv,
                     const std::string& counterpart = {}) {
  OrderedJson rec;
  rec["model_id"] = model;
  rec["role_id"] = role;
  rec["conversation_id"] = conv;
  if (!counterpart.empty()) rec["counterpart_role_id"] = counterpart;
  rec["turns"] = std::vector<std::string>(5, "line of " + role);
  return rec.dump() + "\n";
}

std::string gen_id(const std::string& model, const std::string& role, const std::string& conv) {
  return "gen:" + model + ":" + role + ":" + conv;
}

std::vector<RoleplayBundle> parse_bundles(const std::string& data) {
  std::istringstream in(data);
  return parse_roleplay_jsonl(in);
}

UtteranceSet real_set(const std::string& role, const std::string& conv) {
  UtteranceSet s;
  s.set_id = "real:" + role + ":" + conv;
  s.speaker_id = role;
  s.conversation_id = conv;
  s.source_id = "S";
  s.utterance_ids = {s.set_id + ":0"};
  s.texts = {"x"};
  return s;
}

Outcome roleplay_suite() {
  Checks checks;

  // A model whose generations reproduce the reference embeddings.
  Rng rng(9);
  EmbeddingTable table;
  table.backend_id = "synthetic";
  table.dim = 8;
  std::vector<RealReference> refs;
  std::string copy_data;
  for (std::string role : {"A", "B", "C", "D"}) {
    RealReference ref{role, {}};
    Vector center(8);
    for (auto& t : center) t = rng.normal();
    for (int k = 0; k < 4; ++k) {
      const std::string conv = role + "-c" + std::to_string(k);
      ref.real_sets.push_back(real_set(role, conv));
      Vector v = center;
      for (auto& t : v) t += 0.4 * rng.normal();
      table.add(ref.real_sets.back().set_id, v, 5);
      table.add(gen_id("copy", role, conv), v, 5);
      copy_data += gen_line("copy", role, conv);
    }
    refs.push_back(std::move(ref));
  }
  const auto copy = parse_bundles(copy_data).at(0);
  const auto sim = simulation_score(copy, refs, table);
  const auto real = real_baseline(refs, table);
  for (const auto& [role, v] : real.sim.per_role) {
    checks.expect(sim.per_role.at(role) == v, "Sim(copy) != Sim(Real) for " + role);
  }
  checks.expect(sim.aggregate == real.sim.aggregate, "aggregate Sim differs");

  // Every role shares one embedding.
  EmbeddingTable same;
  same.backend_id = "synthetic";
  same.dim = 3;
  std::string same_data;
  for (std::string role : {"A", "B", "C"}) {
    for (int k = 0; k < 2; ++k) {
      const std::string conv = "s" + role + std::to_string(k);
      same.add(gen_id("same", role, conv), Vector{0.2, -0.7, 1.1}, 5);
      same_data += gen_line("same", role, conv);
    }
  }
  const auto same_dist = distinction_score(parse_bundles(same_data).at(0), same);
  checks.expect(same_dist.aggregate == 0.0, "identical embeddings Dist " + fmt(same_dist.aggregate));

  // Two roles on orthogonal axes.
  EmbeddingTable ortho;
  ortho.backend_id = "synthetic";
  ortho.dim = 2;
  ortho.add(gen_id("orth", "A", "o1"), Vector{1.0, 0.0}, 5);
  ortho.add(gen_id("orth", "B", "o2"), Vector{0.0, 2.0}, 5);
  const auto ortho_dist =
      distinction_score(parse_bundles(gen_line("orth", "A", "o1") + gen_line("orth", "B", "o2")).at(0), ortho);
  checks.expect(std::abs(ortho_dist.aggregate - 100.0) <= 1e-12, "orthogonal Dist " + fmt(ortho_dist.aggregate));

  // Counterpart exclusion: A and B self-chat; C is alone.
  std::map<std::string, Vector> u{{"A", Vector{1.0, 0.0}}, {"B", Vector{1.0, 0.0}}, {"C", Vector{0.0, 1.0}}};
  const auto open = distinction_from_embeddings(u, {});
  const auto excl = distinction_from_embeddings(u, {{"A", "B"}, {"B", "A"}});
  // Without exclusion A sees B (0) and C (100); with it only C.
  checks.expect(std::abs(open.per_role.at("A") - 50.0) <= 1e-12, "Dist_A without exclusion");
  checks.expect(std::abs(excl.per_role.at("A") - 100.0) <= 1e-12, "Dist_A with exclusion");
  checks.expect(std::abs(excl.per_role.at("C") - 100.0) <= 1e-12, "Dist_C with exclusion");
  checks.expect(excl.excluded_pairs == 2, "excluded pair count");
  checks.expect(open.excluded_pairs == 0, "empty map excluded pairs");

  // Through a bundle: the counterpart map drives the exclusion.
  EmbeddingTable chat;
  chat.backend_id = "synthetic";
  chat.dim = 2;
  chat.add(gen_id("m", "A", "x"), Vector{1.0, 0.0}, 5);
  chat.add(gen_id("m", "B", "x"), Vector{1.0, 0.0}, 5);
  chat.add(gen_id("m", "C", "y"), Vector{0.0, 1.0}, 5);
  const auto with_map = distinction_score(
      parse_bundles(gen_line("m", "A", "x", "B") + gen_line("m", "B", "x", "A") + gen_line("m", "C", "y")).at(0),
      chat);
  const auto without_map = distinction_score(
      parse_bundles(gen_line("m", "A", "x") + gen_line("m", "B", "x") + gen_line("m", "C", "y")).at(0), chat);
  checks.expect(with_map.per_role == excl.per_role, "bundle counterpart map disagrees with explicit exclusion");
  checks.expect(without_map.per_role == open.per_role, "empty counterpart map is not a no-op");

  return checks.outcome("Sim(copy)=Sim(Real) " + fmt(real.sim.aggregate) + ", Dist(same)=0, Dist(orth)=100, "
                        "exclusion 50->100 with 2 ordered pairs skipped");
}

// ---------------------------------------------------------------- LSM

CategoryProfile single(double p) { return CategoryProfile{Vector{p}, 10}; }

Outcome lsm_suite() {
  Checks checks;
  const double eps = 1e-9;
  // The hand cases are worked with epsilon -> 0.
  const double limit = 1e-15;
  checks.expect(std::abs(lsm_similarity(single(0.1), single(0.3), limit) - 0.5) <= 1e-9, "0.1 vs 0.3");
  checks.expect(std::abs(lsm_similarity(single(0.1), single(0.0), limit) - 0.0) <= 1e-9, "0.1 vs 0.0");
  Rng rng(404);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t cats = 1 + rng.below(10);
    CategoryProfile a{Vector(cats), 20};
    CategoryProfile b{Vector(cats), 20};
    for (std::size_t c = 0; c < cats; ++c) {
      a.proportions[c] = rng.uniform() < 0.25 ? 0.0 : rng.uniform();
      b.proportions[c] = rng.uniform() < 0.25 ? 0.0 : rng.uniform();
    }
    const double ab = lsm_similarity(a, b, eps);
    checks.expect(ab == lsm_similarity(b, a, eps), "asymmetric, trial " + std::to_string(trial));
    checks.expect(ab >= 0.0 && ab <= 1.0, "out of range, trial " + std::to_string(trial));
    checks.expect(lsm_similarity(a, a, eps) >= 1.0 - 10 * eps, "identity, trial " + std::to_string(trial));
  }
  return checks.outcome("hand cases 0.5 / 0.0, 2000 random profiles symmetric, in [0,1], identity holds");
}

// ---------------------------------------------------------------- released assets

// CONVSV_RELEASED_ASSETS names a run configuration whose corpus and roleplay
// sections point at the released dataset and role-play bundles.
Outcome released_asset_run() {
  const char* env = std::getenv("CONVSV_RELEASED_ASSETS");
  if (env == nullptr || *env == '\0') return {Verdict::kSkip, "CONVSV_RELEASED_ASSETS not set"};
  const auto config = cli::load_config(std::filesystem::path(env));
  config.validate();
  if (!config.roleplay) return {Verdict::kFail, "configuration has no roleplay section"};

  std::vector<Corpus> parts;
  for (const auto& in : config.corpus) parts.push_back(ingest_file(in.path, in.source_id).corpus);
  auto corpus = merge_corpora(std::move(parts));
  if (config.filter) corpus = filter_corpus(corpus, *config.filter);
  const auto refs = build_references(corpus, parse_role_manifest(read_file(config.roleplay->roles)),
                                     config.extraction);
  const auto bundles = load_roleplay_bundles(config.roleplay->bundles);
  const auto table = encode_roleplay_sets(bundles, refs, SetEncoder(cli::make_backends(config, &corpus)));

  const auto real = real_baseline(refs, table);
  std::vector<SimReport> sims;
  std::vector<DistReport> dists;
  for (const auto& b : bundles) {
    sims.push_back(simulation_score(b, refs, table));
    dists.push_back(distinction_score(b, table));
  }
  sims.push_back(real.sim);
  dists.push_back(real.dist);
  std::cout << sim_csv(sims) << dist_csv(dists);

  Checks checks;
  for (std::size_t m = 0; m + 1 < sims.size(); ++m) {
    checks.expect(real.sim.aggregate > sims[m].aggregate,
                  "Sim(Real) " + fmt(real.sim.aggregate, 2) + " <= Sim(" + sims[m].model_id + ") " +
                      fmt(sims[m].aggregate, 2));
  }
  return checks.outcome(std::to_string(bundles.size()) + " models; Real Sim " + fmt(real.sim.aggregate, 2) +
                        " Dist " + fmt(real.dist.aggregate, 2) + " (reference values not gated)");
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"pairing-validity", pairing_validity},
      {"loss-gradient", loss_gradient_suite},
      {"auc-oracle", auc_oracle},
      {"synthetic-separability", synthetic_separability},
      {"mixed-features-identity", mixed_features_identity},
      {"roleplay-metrics", roleplay_suite},
      {"lsm", lsm_suite},
      {"released-assets", released_asset_run},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::kFail, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
    failures += o.verdict == Verdict::kFail;
    std::printf("%s %-24s %7.2fs  %s\n", tag, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
