#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "subtyper/cluster.hpp"
#include "subtyper/cohort.hpp"
#include "subtyper/config.hpp"
#include "subtyper/embed.hpp"
#include "subtyper/manifest.hpp"
#include "subtyper/subtype.hpp"
#include "subtyper/synthetic.hpp"
#include "subtyper/transitions.hpp"

namespace subtyper {

struct StageError : Error {
  std::string stage;
  StageError(std::string stage_, const std::string& what)
      : Error("stage '" + stage_ + "' failed: " + what), stage(std::move(stage_)) {}
};

struct MissingArtifact : Error {
  std::string file;
  explicit MissingArtifact(std::string f)
      : Error("missing artifact '" + f + "'"), file(std::move(f)) {}
};

namespace artifact {
inline constexpr const char* kCohort = "cohort.csv";
inline constexpr const char* kGroundTruth = "ground_truth.json";
inline constexpr const char* kImputedCohort = "cohort_imputed.csv";
inline constexpr const char* kMissingness = "missingness.json";
inline constexpr const char* kEmbedding = "embedding.csv";
inline constexpr const char* kEmbeddingMeta = "embedding_meta.json";
inline constexpr const char* kAssignments = "assignments.csv";
inline constexpr const char* kGap = "gap.json";
inline constexpr const char* kSubtypes = "subtypes.json";
inline constexpr const char* kViolin = "violin_data.csv";
inline constexpr const char* kComposition = "composition.csv";
inline constexpr const char* kTransitions = "transitions.csv";
inline constexpr const char* kMatrix = "matrix.csv";
inline constexpr const char* kGraph = "progression_graph.json";
inline constexpr const char* kComorbidity = "comorbidity.csv";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kReportTxt = "report.txt";
inline constexpr const char* kReportJson = "report.json";
}  // namespace artifact

// Fully resolved run parameters; see README for the config-file schema.
struct PipelineConfig {
  std::uint64_t master_seed = 0;
  int threads = 1;
  std::string out_dir = "run";
  std::string input_csv;          // empty means the generate stage provides it
  bool generate_enabled = false;
  GeneratorConfig generator;

  std::vector<Feature> impute_features;  // defaults to all twelve
  double warn_threshold = 0.05;

  EmbeddingConfig embed;
  std::string embed_features = "components";  // components | cognitive | all
  bool standardize = false;

  int k_min = 1;
  int k_max = 20;
  int gap_references = 20;
  GapReferenceMode gap_mode = GapReferenceMode::kBoundingBox;
  int restarts = 10;
  std::optional<int> manual_k;
  std::string cluster_space = "embedded";  // embedded | raw

  double purity = 0.9;
  int long_threshold_days = kDefaultLongFollowupDays;
  CdrLevel graph_source = CdrLevel::kVeryMild;
  CdrLevel graph_target = CdrLevel::kMild;
  std::int64_t graph_min_weight = 4;
  int comorbidity_top = 5;
  bool comorbidity_per_patient = false;
};

struct PipelineOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<int> k;
  std::optional<std::string> cluster_space;
};

// Consumes every key in cfg; unknown keys raise ConfigError.
PipelineConfig resolve_pipeline_config(Config& cfg, const PipelineOverrides& overrides = {});

// The complete key = value image of a resolved config; feeding it back
// through Config::parse + resolve_pipeline_config reproduces the run.
std::map<std::string, std::string> effective_config(const PipelineConfig& cfg);

// Numeric matrix over the named features; rows follow cohort order. All
// selected cells must be present (run imputation first).
Eigen::MatrixXd feature_matrix(const Cohort& cohort, const std::vector<Feature>& features,
                               bool standardize);
std::vector<std::string> visit_ids(const Cohort& cohort);

// Clusters in display order: grouping severity order, ascending id within.
std::vector<int> severity_cluster_order(const SubtypeGrouping& grouping);

// Stage entry points. Each reads its inputs from cfg.out_dir (or
// cfg.input_csv), writes its artifacts there, and can re-run standalone.
void run_generate(const PipelineConfig& cfg);
void run_ingest(const PipelineConfig& cfg);
void run_embed(const PipelineConfig& cfg);
void run_cluster(const PipelineConfig& cfg);
void run_characterize(const PipelineConfig& cfg);
void run_transitions(const PipelineConfig& cfg);
void run_comorbidity(const PipelineConfig& cfg);

// All stages in order plus manifest.json; wraps failures in StageError.
RunManifest run_pipeline(const PipelineConfig& cfg);

struct ReportResult {
  std::string text;
  std::string json;
};

// Renders the run summary from the artifacts in run_dir; throws
// MissingArtifact for absent required files.
ReportResult build_report(const std::string& run_dir);
void write_report(const std::string& run_dir);  // report.txt + report.json

// Artifact readers shared by stages, the report and the tests.
std::pair<std::vector<std::string>, Eigen::MatrixXd> read_embedding_csv(
    const std::string& path);
Assignments read_assignments_csv(const std::string& path);

struct SubtypesArtifact {
  double purity = 0.9;
  std::vector<SubtypeProfile> profiles;
  SubtypeGrouping grouping;
};
SubtypesArtifact read_subtypes_json(const std::string& path);
std::string subtypes_to_json(const SubtypesArtifact& art);

}  // namespace subtyper
