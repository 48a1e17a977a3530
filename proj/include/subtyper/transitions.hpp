#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "subtyper/cohort.hpp"
#include "subtyper/subtype.hpp"

namespace subtyper {

struct DuplicateDate : Error {
  std::string patient_id;
  DuplicateDate(std::string pid, const Date& date)
      : Error("patient '" + pid + "' has two visits on " + date.to_string() +
              "; transition order is ambiguous"),
        patient_id(std::move(pid)) {}
};

enum class TransitionClass { kProgression, kStable, kRegression };

const std::string& transition_class_name(TransitionClass c);

inline constexpr int kDefaultLongFollowupDays = 365;

// One consecutive visit pair of one patient.
struct TransitionRecord {
  std::string patient_id;
  std::string source_visit, target_visit;
  Date source_date, target_date;
  int source_cluster = 0, target_cluster = 0;
  int source_group = 0, target_group = 0;
  std::int64_t interval_days = 0;
  TransitionClass cls = TransitionClass::kStable;
  bool stage_skip = false;
  bool long_followup = false;
};

struct TransitionClassification {
  TransitionClass cls;
  bool stage_skip;
  bool long_followup;
};

// Class follows the groups' severity order index; stage_skip fires on a
// progression that jumps over another group whose dominant CDR lies strictly
// between the source's and target's dominant levels. Mixed groups carry no
// dominant level and never trigger a skip.
TransitionClassification classify_transition(int source_group, int target_group,
                                             const SubtypeGrouping& grouping,
                                             std::int64_t interval_days,
                                             int long_threshold_days = kDefaultLongFollowupDays);

// Per patient, one record per consecutive visit pair in date order.
// Single-visit patients are censored. Output sorted by (patient, source
// date). Throws DuplicateDate when a patient has two visits on one day.
std::vector<TransitionRecord> extract_transitions(
    const Cohort& cohort, const Assignments& assignments, const SubtypeGrouping& grouping,
    int long_threshold_days = kDefaultLongFollowupDays);

struct TransitionMatrix {
  std::vector<std::string> labels;              // group ids, row = source
  std::vector<std::vector<std::int64_t>> counts;

  std::int64_t total() const;
  std::int64_t at(const std::string& from, const std::string& to) const;
};

TransitionMatrix transition_matrix(const std::vector<TransitionRecord>& records,
                                   const SubtypeGrouping& grouping);

// Matrix CSV: header "start/end,<labels...>" then one row per source group.
void write_matrix_csv(const TransitionMatrix& m, std::ostream& out);
TransitionMatrix read_matrix_csv(std::istream& in);

struct GraphNode {
  int cluster = 0;
  CdrLevel level;  // which end of the filter this node serves
  std::string role;  // "source", "target" or "both"
};

struct GraphEdge {
  int source_cluster = 0;
  int target_cluster = 0;
  std::int64_t weight = 0;
};

struct ProgressionGraph {
  CdrLevel source_cdr, target_cdr;
  std::int64_t min_weight = 0;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;  // weight >= min_weight, sorted by (src, dst)
};

// Subtype-level transition graph restricted to visits at source_cdr on the
// source side and target_cdr on the target side; composite subtypes count
// only their visits at the relevant level. Edges below min_weight drop out.
ProgressionGraph progression_graph(const Cohort& cohort,
                                   const std::vector<TransitionRecord>& records,
                                   const Assignments& assignments,
                                   const std::vector<SubtypeProfile>& profiles,
                                   CdrLevel source_cdr, CdrLevel target_cdr,
                                   std::int64_t min_weight);

void write_transitions_csv(const std::vector<TransitionRecord>& records, std::ostream& out);

}  // namespace subtyper
