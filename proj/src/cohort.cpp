#include "subtyper/cohort.hpp"

#include <algorithm>
#include <cmath>

namespace subtyper {

CdrLevel level_from_index(int idx) {
  if (idx < 0 || idx >= kNumCdrLevels) throw Error("CDR level index out of range");
  return CdrLevel(idx);
}

std::optional<CdrLevel> parse_cdr_level(const std::string& token) {
  if (token == "0" || token == "0.0") return CdrLevel::kNormal;
  if (token == "0.5" || token == ".5") return CdrLevel::kVeryMild;
  if (token == "1" || token == "1.0") return CdrLevel::kMild;
  if (token == "2" || token == "2.0") return CdrLevel::kModerate;
  if (token == "3" || token == "3.0") return CdrLevel::kSevere;
  return std::nullopt;
}

std::string cdr_token(CdrLevel l) {
  static const std::array<std::string, kNumCdrLevels> tok{"0", "0.5", "1", "2", "3"};
  return tok[level_index(l)];
}

const std::array<std::string, kNumComponents> kComponentNames{
    "memory",      "orientation",   "judgment",
    "community",   "home_hobbies",  "personal_care"};

const std::array<std::string, kNumCognitive> kCognitiveNames{
    "mmse",           "boston_naming",    "short_blessed",
    "verbal_fluency", "word_list_recall", "word_list_memory"};

std::optional<CdrLevel>& CdrComponents::at(int i) {
  switch (i) {
    case 0: return memory;
    case 1: return orientation;
    case 2: return judgment_problem_solving;
    case 3: return community_affairs;
    case 4: return home_hobbies;
    default: return personal_care;
  }
}

const std::optional<CdrLevel>& CdrComponents::at(int i) const {
  return const_cast<CdrComponents*>(this)->at(i);
}

bool CdrComponents::complete() const {
  for (int i = 0; i < kNumComponents; ++i)
    if (!at(i).has_value()) return false;
  return true;
}

std::optional<int>& CognitiveScores::at(int i) {
  switch (i) {
    case 0: return mmse;
    case 1: return boston_naming;
    case 2: return short_blessed;
    case 3: return verbal_fluency;
    case 4: return word_list_recall;
    default: return word_list_memory;
  }
}

const std::optional<int>& CognitiveScores::at(int i) const {
  return const_cast<CognitiveScores*>(this)->at(i);
}

ScoreRange cognitive_range(int i) {
  static const std::array<ScoreRange, kNumCognitive> ranges{
      ScoreRange{0, 30}, ScoreRange{0, 15}, ScoreRange{0, 28},
      ScoreRange{0, -1}, ScoreRange{0, -1}, ScoreRange{0, -1}};
  return ranges[i];
}

const std::string& feature_name(Feature f) {
  const int i = int(f);
  return i < kNumComponents ? kComponentNames[i] : kCognitiveNames[i - kNumComponents];
}

std::optional<Feature> feature_from_name(const std::string& name) {
  for (int i = 0; i < kNumFeatures; ++i)
    if (feature_name(Feature(i)) == name) return Feature(i);
  return std::nullopt;
}

std::vector<Feature> all_features() {
  std::vector<Feature> out;
  for (int i = 0; i < kNumFeatures; ++i) out.push_back(Feature(i));
  return out;
}

std::vector<Feature> component_features() {
  std::vector<Feature> out;
  for (int i = 0; i < kNumComponents; ++i) out.push_back(Feature(i));
  return out;
}

std::vector<Feature> cognitive_features() {
  std::vector<Feature> out;
  for (int i = kNumComponents; i < kNumFeatures; ++i) out.push_back(Feature(i));
  return out;
}

Cohort::Cohort(std::vector<Visit> visits, std::string provenance)
    : visits_(std::move(visits)), provenance_(std::move(provenance)) {
  for (std::size_t i = 0; i < visits_.size(); ++i) {
    by_id_.emplace(visits_[i].visit_id, i);  // first occurrence wins
    by_patient_[visits_[i].patient_id].push_back(i);
  }
  patient_order_.reserve(by_patient_.size());
  for (auto& [pid, idxs] : by_patient_) {
    std::stable_sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      return visits_[a].visit_date < visits_[b].visit_date;
    });
    patient_order_.push_back(pid);
  }
  std::sort(patient_order_.begin(), patient_order_.end());
}

const Visit* Cohort::find_visit(const std::string& visit_id) const {
  auto it = by_id_.find(visit_id);
  return it == by_id_.end() ? nullptr : &visits_[it->second];
}

const std::vector<std::size_t>& Cohort::visits_of(const std::string& patient_id) const {
  static const std::vector<std::size_t> empty;
  auto it = by_patient_.find(patient_id);
  return it == by_patient_.end() ? empty : it->second;
}

ValidationReport validate_cohort(const Cohort& cohort) {
  ValidationReport report;
  auto add = [&](const std::string& vid, const char* rule, std::string detail) {
    report.violations.push_back({vid, rule, std::move(detail)});
  };

  std::unordered_map<std::string, int> id_seen;
  std::unordered_map<std::string, std::string> pair_seen;  // patient|date -> visit_id
  for (const Visit& v : cohort.visits()) {
    if (v.visit_id.empty()) add(v.visit_id, "visit_id_nonempty", "empty visit id");
    if (v.patient_id.empty()) add(v.visit_id, "patient_id_nonempty", "empty patient id");

    if (++id_seen[v.visit_id] == 2)
      add(v.visit_id, "visit_id_unique", "visit id occurs more than once");

    const std::string key = v.patient_id + "|" + v.visit_date.to_string();
    auto [it, fresh] = pair_seen.emplace(key, v.visit_id);
    if (!fresh)
      add(v.visit_id, "patient_date_unique",
          "same patient and date as visit " + it->second);

    for (int i = 0; i < kNumCognitive; ++i) {
      const auto& val = v.cognitive.at(i);
      if (!val) continue;
      const ScoreRange r = cognitive_range(i);
      if (*val < r.min || (r.max >= 0 && *val > r.max))
        add(v.visit_id, "cognitive_range",
            kCognitiveNames[i] + "=" + std::to_string(*val) + " outside instrument range");
    }
  }
  return report;
}

std::optional<double> feature_value(const Visit& v, Feature f) {
  const int i = int(f);
  if (i < kNumComponents) {
    const auto& lvl = v.components.at(i);
    if (!lvl) return std::nullopt;
    return cdr_numeric(*lvl);
  }
  const auto& val = v.cognitive.at(i - kNumComponents);
  if (!val) return std::nullopt;
  return double(*val);
}

void set_feature_value(Visit& v, Feature f, std::optional<double> value) {
  const int i = int(f);
  if (i < kNumComponents) {
    if (!value) {
      v.components.at(i) = std::nullopt;
      return;
    }
    for (int li = 0; li < kNumCdrLevels; ++li) {
      if (kCdrNumeric[li] == *value) {
        v.components.at(i) = CdrLevel(li);
        return;
      }
    }
    throw Error("value " + std::to_string(*value) + " is not a CDR level");
  }
  if (!value)
    v.cognitive.at(i - kNumComponents) = std::nullopt;
  else
    v.cognitive.at(i - kNumComponents) = int(std::llround(*value));
}

}  // namespace subtyper
