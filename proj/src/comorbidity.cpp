#include "subtyper/comorbidity.hpp"

#include <algorithm>
#include <set>

namespace subtyper {

std::vector<DiagnosisCount> top_diagnoses(const Cohort& cohort, int n) {
  if (n < 1) throw Error("n must be >= 1");
  std::map<std::string, long long> counts;
  for (const Visit& v : cohort.visits())
    for (const std::string& code : v.diagnoses) ++counts[code];  // codes are unique per visit

  std::vector<DiagnosisCount> out;
  out.reserve(counts.size());
  for (const auto& [code, c] : counts) out.push_back({code, c});
  std::sort(out.begin(), out.end(), [](const DiagnosisCount& a, const DiagnosisCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.code < b.code;
  });
  if (int(out.size()) > n) out.resize(std::size_t(n));
  return out;
}

ComorbidityProfile comorbidity_profile(const Cohort& cohort, const Assignments& assignments,
                                       const std::vector<std::string>& codes,
                                       const std::vector<int>& cluster_order,
                                       bool per_patient) {
  std::set<std::string> wanted(codes.begin(), codes.end());
  std::map<std::string, long long> totals;
  for (const auto& c : wanted) totals[c] = 0;

  ComorbidityProfile profile;
  profile.cluster_order = cluster_order;
  profile.per_patient = per_patient;
  for (int c : cluster_order)
    for (const auto& code : wanted) profile.per_cluster[c][code] = 0;

  std::set<std::tuple<std::string, int, std::string>> seen;  // patient, cluster, code
  for (const Visit& v : cohort.visits()) {
    auto it = assignments.find(v.visit_id);
    if (it == assignments.end())
      throw Error("visit '" + v.visit_id + "' has no cluster assignment");
    for (const std::string& code : v.diagnoses) {
      if (!wanted.count(code)) continue;
      if (per_patient && !seen.insert({v.patient_id, it->second, code}).second) continue;
      ++totals[code];
      ++profile.per_cluster[it->second][code];
    }
  }

  for (const auto& code : codes) {
    if (totals[code] == 0) throw UnknownDiagnosis(code);
    profile.top.push_back({code, totals[code]});
  }
  return profile;
}

}  // namespace subtyper
