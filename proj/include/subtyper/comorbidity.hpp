#pragma once

#include <map>
#include <string>
#include <vector>

#include "subtyper/cohort.hpp"
#include "subtyper/subtype.hpp"

namespace subtyper {

struct UnknownDiagnosis : Error {
  std::string code;
  explicit UnknownDiagnosis(std::string c)
      : Error("diagnosis code '" + c + "' never occurs in the cohort"), code(std::move(c)) {}
};

struct DiagnosisCount {
  std::string code;
  long long count = 0;  // visits mentioning the code
};

// Diagnoses ranked by the number of visits mentioning them, descending; ties
// break lexicographically by code.
std::vector<DiagnosisCount> top_diagnoses(const Cohort& cohort, int n);

struct ComorbidityProfile {
  std::vector<DiagnosisCount> top;  // cohort-wide totals for the requested codes
  // One entry per cluster, in the caller's severity order.
  std::vector<int> cluster_order;
  std::map<int, std::map<std::string, long long>> per_cluster;
  bool per_patient = false;
};

// Visit counts per cluster for each listed diagnosis. With per_patient, each
// patient counts once per (cluster, code) regardless of repeat visits.
// Throws UnknownDiagnosis for codes absent from the whole cohort.
ComorbidityProfile comorbidity_profile(const Cohort& cohort, const Assignments& assignments,
                                       const std::vector<std::string>& codes,
                                       const std::vector<int>& cluster_order,
                                       bool per_patient = false);

}  // namespace subtyper
