#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "subtyper/date.hpp"
#include "subtyper/error.hpp"

namespace subtyper {

// Five-point ordinal severity scale: 0, 0.5, 1, 2, 3. Stored symbolically so
// off-scale values (1.5, ...) are unrepresentable; numeric() is the view used
// for distances and means.
enum class CdrLevel : std::uint8_t {
  kNormal = 0,    // 0
  kVeryMild = 1,  // 0.5
  kMild = 2,      // 1
  kModerate = 3,  // 2
  kSevere = 4,    // 3
};

inline constexpr int kNumCdrLevels = 5;
inline constexpr std::array<double, kNumCdrLevels> kCdrNumeric{0.0, 0.5, 1.0, 2.0, 3.0};

inline int level_index(CdrLevel l) { return int(l); }
CdrLevel level_from_index(int idx);  // throws Error when idx outside [0,5)
inline double cdr_numeric(CdrLevel l) { return kCdrNumeric[level_index(l)]; }

// Accepts the canonical tokens 0, 0.5, 1, 2, 3 (also 0.0/1.0/2.0/3.0).
std::optional<CdrLevel> parse_cdr_level(const std::string& token);
std::string cdr_token(CdrLevel l);  // canonical token, "0.5" not "0.50"

// Total severity order 0 < 0.5 < 1 < 2 < 3.
inline std::strong_ordering severity_compare(CdrLevel a, CdrLevel b) {
  return level_index(a) <=> level_index(b);
}

inline constexpr int kNumComponents = 6;

// The six CDR domain scores. Optional until imputation has run.
struct CdrComponents {
  std::optional<CdrLevel> memory;
  std::optional<CdrLevel> orientation;
  std::optional<CdrLevel> judgment_problem_solving;
  std::optional<CdrLevel> community_affairs;
  std::optional<CdrLevel> home_hobbies;
  std::optional<CdrLevel> personal_care;

  std::optional<CdrLevel>& at(int i);
  const std::optional<CdrLevel>& at(int i) const;
  bool complete() const;

  bool operator==(const CdrComponents&) const = default;
};

extern const std::array<std::string, kNumComponents> kComponentNames;

// Instrument batteries; each value optional with a fixed valid range.
struct CognitiveScores {
  std::optional<int> mmse;              // 0..30
  std::optional<int> boston_naming;     // 0..15
  std::optional<int> short_blessed;     // 0..28
  std::optional<int> verbal_fluency;    // >= 0
  std::optional<int> word_list_recall;  // >= 0
  std::optional<int> word_list_memory;  // >= 0

  std::optional<int>& at(int i);
  const std::optional<int>& at(int i) const;

  bool operator==(const CognitiveScores&) const = default;
};

inline constexpr int kNumCognitive = 6;
extern const std::array<std::string, kNumCognitive> kCognitiveNames;

// Valid closed range for a cognitive score; max < 0 means unbounded above.
struct ScoreRange {
  int min;
  int max;
};
ScoreRange cognitive_range(int i);

// All twelve imputable feature columns, CDR components first.
enum class Feature : int {
  kMemory = 0,
  kOrientation,
  kJudgment,
  kCommunity,
  kHomeHobbies,
  kPersonalCare,
  kMmse,
  kBostonNaming,
  kShortBlessed,
  kVerbalFluency,
  kWordListRecall,
  kWordListMemory,
};
inline constexpr int kNumFeatures = 12;

const std::string& feature_name(Feature f);
std::optional<Feature> feature_from_name(const std::string& name);
inline bool is_ordinal_feature(Feature f) { return int(f) < kNumComponents; }
std::vector<Feature> all_features();
std::vector<Feature> component_features();
std::vector<Feature> cognitive_features();

// One clinic encounter.
struct Visit {
  std::string visit_id;
  std::string patient_id;
  Date visit_date;
  CdrLevel global_cdr = CdrLevel::kNormal;
  CdrComponents components;
  CognitiveScores cognitive;
  std::vector<std::string> diagnoses;  // sorted, unique, opaque codes

  bool operator==(const Visit&) const = default;
};

// Immutable collection of visits with per-patient date-ordered access.
// Indexes are built once at construction; all accessors are const and safe
// to share across threads.
class Cohort {
 public:
  Cohort() = default;
  Cohort(std::vector<Visit> visits, std::string provenance);

  const std::vector<Visit>& visits() const { return visits_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t size() const { return visits_.size(); }

  // First visit with this id, or nullptr.
  const Visit* find_visit(const std::string& visit_id) const;

  // Patient ids in sorted order.
  const std::vector<std::string>& patient_ids() const { return patient_order_; }

  // Indices into visits() for one patient, sorted by date (ties keep input
  // order; duplicate dates are reported by validate_cohort).
  const std::vector<std::size_t>& visits_of(const std::string& patient_id) const;

  bool operator==(const Cohort& o) const {
    return visits_ == o.visits_ && provenance_ == o.provenance_;
  }

 private:
  std::vector<Visit> visits_;
  std::string provenance_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_patient_;
  std::vector<std::string> patient_order_;
};

struct Violation {
  std::string visit_id;
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Checks type invariants over a constructed cohort: valid cognitive ranges,
// unique visit ids, unique (patient, date) pairs. Violations are data, not
// exceptions; the cohort is never mutated.
ValidationReport validate_cohort(const Cohort& cohort);

// Feature cell access shared by ingestion, embedding and the generator.
std::optional<double> feature_value(const Visit& v, Feature f);
void set_feature_value(Visit& v, Feature f, std::optional<double> value);

}  // namespace subtyper
