#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convsv/common/jsonl.hpp"
#include "convsv/corpus/corpus.hpp"
#include "convsv/eval/eval.hpp"
#include "convsv/metric/metric.hpp"
#include "convsv/pairing/pairing.hpp"
#include "convsv/roleplay/roleplay.hpp"

namespace convsv::cli {

struct CorpusInput {
  std::filesystem::path path;
  std::string source_id;  // empty: taken from each record
};

struct BackendSpec {
  std::string type;  // "hashed-ngram" | "lexicon" | "external"
  std::size_t dim = 1024;
  std::size_t n = 3;
  std::filesystem::path path;  // lexicon or external embeddings file
};

struct RoleplayConfig {
  std::filesystem::path bundles;
  std::filesystem::path roles;
  std::size_t bins = 40;
  bool use_trained_head = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::vector<CorpusInput> corpus;
  std::filesystem::path out = "convsv-out";
  std::optional<FilterConfig> filter = FilterConfig{};
  SetExtractionConfig extraction;
  DatasetConfig dataset;
  std::vector<BackendSpec> backends{BackendSpec{"hashed-ngram", 1024, 3, {}}};
  std::optional<TrainConfig> train = TrainConfig{};
  std::size_t rounds = 3;
  ThresholdObjective objective = ThresholdObjective::kAccuracy;
  CalibrationMode calibration = CalibrationMode::kPerCell;
  std::vector<std::size_t> sweep_bounds{5, 10, 15, 20};
  std::optional<RoleplayConfig> roleplay;

  // Throws Error(kValidation) for broken invariants and missing paths.
  void validate() const;
  // Canonical form; the hash of its dump identifies the configuration.
  Json to_json() const;
  std::string hash() const;
};

// Relative paths inside the document resolve against `base_dir`.
RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir = {});

// Applies CONVSV_<A>__<B>=value overrides to the matching nested key
// (lower-cased; "__" separates levels). Values that parse as JSON are used as
// such, anything else as a string.
void apply_env_overrides(Json& doc, const std::vector<std::pair<std::string, std::string>>& env);
std::vector<std::pair<std::string, std::string>> environment_overrides();

// File (if any) + environment.
RunConfig load_config(const std::optional<std::filesystem::path>& path);

std::vector<std::shared_ptr<const Backend>> make_backends(const RunConfig& config,
                                                          const Corpus* corpus = nullptr);

// Provenance carried by every stage directory.
struct Provenance {
  std::string stage;
  std::string config_hash;
  std::string corpus_hash;
  std::uint64_t seed = 0;
  std::string stamp;  // hash of everything the stage output depends on
};

// "provenance: stage=... config_hash=... corpus_hash=... seed=..."; CSV and
// markdown outputs carry it as their first (comment) line.
std::string provenance_line(const Provenance& p);
Json provenance_json(const Provenance& p);
Provenance parse_provenance(const Json& doc);
std::optional<Provenance> read_provenance(const std::filesystem::path& stage_dir);
void write_provenance(const std::filesystem::path& stage_dir, const Provenance& p);

enum class StageStatus { kRan, kCached, kSkipped };
const char* to_string(StageStatus s);

struct StageOutcome {
  std::string stage;
  StageStatus status = StageStatus::kRan;
};

// Thrown by run_pipeline for a failure inside a stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// ingest -> pairs -> embed -> train -> eval -> sweep -> roleplay -> report.
// A stage whose stamp matches the one on disk is reported as cached. A failing
// stage leaves a STALE marker in its directory.
std::vector<StageOutcome> run_pipeline(const RunConfig& config);

enum class AnnotationMode { kConversation, kUtterances };
AnnotationMode parse_annotation_mode(std::string_view s);
const char* to_string(AnnotationMode m);

struct AnnotationRequest {
  AnnotationMode mode = AnnotationMode::kUtterances;
  std::size_t count = 200;
  std::string shots = "0";  // "0", "cot", "2", "4" or "6"
  std::uint64_t seed = 0;
  Exposure pool = Exposure::kUnseenUnseen;
};

struct AnnotationItem {
  std::string item_id;
  std::string pair_id;
  Label label = Label::kNegative;
  std::string questionnaire;
  Json prompt;  // {"system", "messages": [{"role", "content"}]}
  std::vector<std::string> demo_pair_ids;
};

struct AnnotationBundle {
  AnnotationRequest request;
  std::vector<AnnotationItem> items;
};

// Items are sampled from the `pool` exposure; demonstrations come from Train,
// label-balanced, and never share a set with any evaluated item.
AnnotationBundle export_annotation_bundle(const DatasetBundle& dataset, const Corpus& corpus,
                                          const AnnotationRequest& request);

// items.jsonl, questionnaire.md, answer_key.jsonl, manifest.json.
void write_annotation_bundle(const std::filesystem::path& dir, const AnnotationBundle& bundle);

// Consolidates the eval and roleplay stage outputs found under `run_dir`
// into report.md. Throws Error(kMismatch) when their provenance disagrees and
// Error(kMissing) when neither is present.
std::string emit_report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

// Entry point of the `convsv` tool. Returns 0, 1 (validation) or 2 (stage).
int main(int argc, char** argv);

}  // namespace convsv::cli
