#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "subtyper/cohort.hpp"

namespace subtyper {

struct InvalidConfig : Error {
  std::string field;
  InvalidConfig(std::string field_, const std::string& why)
      : Error("invalid config: " + field_ + ": " + why), field(std::move(field_)) {}
};

// One planted subtype: the component-median vector visits are jittered
// around, the dominant global CDR level(s), and the cohort share.
struct PlantedSubtype {
  std::string name;
  std::array<CdrLevel, kNumComponents> component_medians{};
  std::vector<CdrLevel> cdr_levels;   // 1 (homogeneous) or 2 (composite), ascending
  std::vector<double> cdr_weights;    // optional; defaults to equal
  double weight = 1.0;
};

struct GeneratorConfig {
  int patients = 0;
  int visits_min = 1;
  int visits_max = 5;
  double visits_mean = 1.5;
  double followup_mean_days = 200.0;
  double followup_sd_days = 60.0;
  double jitter_prob = 0.1;  // per component: move one ordinal step
  std::vector<PlantedSubtype> subtypes;
  // Planted group-to-group propensities, rows normalized at use. Groups are
  // the subtype CDR-signature classes in planted_grouping() order. Empty
  // means "stay in the same group".
  std::vector<std::vector<double>> propensity;
  // code -> per-CDR-level probability that a visit carries the code.
  std::map<std::string, std::array<double, kNumCdrLevels>> diagnosis_prevalence;
  std::map<std::string, double> missing_rate;  // feature name -> rate in [0, 0.5]
  std::uint64_t seed = 0;
  Date start_min = Date(2012, 6, 1);
  Date start_max = Date(2016, 1, 1);
};

struct GroundTruth {
  std::vector<std::string> subtype_names;
  std::map<std::string, int> visit_subtype;     // visit_id -> planted subtype index
  std::vector<std::vector<int>> groups;         // planted grouping of subtype indices
  std::vector<std::vector<double>> propensity;  // normalized rows
  std::string to_json() const;
};

struct GeneratedCohort {
  Cohort cohort;
  GroundTruth truth;
};

// Throws InvalidConfig naming the offending field.
void validate_config(const GeneratorConfig& config);

// Groups subtype indices by identical CDR level signature, ordered by the
// signature's expected mean level; matches what group_subtypes discovers on
// the generated data.
std::vector<std::vector<int>> planted_grouping(const std::vector<PlantedSubtype>& subtypes);

// Deterministic for a fixed (config, seed). Per patient: an initial subtype
// drawn by share, later visits following the group propensities; components
// are the subtype medians with one-step ordinal jitter; cognitive scores and
// diagnoses are drawn by severity; missingness is masked in last. Ground
// truth labels are returned separately and never written into the cohort.
GeneratedCohort generate_cohort(const GeneratorConfig& config);

}  // namespace subtyper
