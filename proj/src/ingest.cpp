#include "subtyper/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace subtyper {

const std::string kCohortCsvHeader =
    "visit_id,patient_id,visit_date,global_cdr,memory,orientation,judgment,community,"
    "home_hobbies,personal_care,mmse,boston_naming,short_blessed,verbal_fluency,"
    "word_list_recall,word_list_memory,diagnoses";

namespace {

constexpr int kNumColumns = 17;

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<CdrLevel> parse_level_cell(const std::string& cell, int line,
                                         const std::string& field, bool required) {
  if (cell.empty()) {
    if (required) throw MalformedRow(line, field, "value required");
    return std::nullopt;
  }
  auto lvl = parse_cdr_level(cell);
  if (!lvl) throw MalformedRow(line, field, "'" + cell + "' is not a CDR level");
  return lvl;
}

std::optional<int> parse_int_cell(const std::string& cell, int line, const std::string& field) {
  if (cell.empty()) return std::nullopt;
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(cell, &pos);
  } catch (const std::exception&) {
    throw MalformedRow(line, field, "'" + cell + "' is not an integer");
  }
  if (pos != cell.size()) throw MalformedRow(line, field, "'" + cell + "' is not an integer");
  const int fi = int(*feature_from_name(field)) - kNumComponents;
  const ScoreRange r = cognitive_range(fi);
  if (v < r.min || (r.max >= 0 && v > r.max))
    throw MalformedRow(line, field, "'" + cell + "' outside instrument range");
  return v;
}

}  // namespace

Cohort parse_cohort_stream(std::istream& in, const std::string& provenance) {
  std::string line;
  if (!std::getline(in, line)) throw MalformedRow(1, "header", "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCohortCsvHeader)
    throw MalformedRow(1, "header", "header does not match the canonical cohort schema");

  std::vector<Visit> visits;
  std::unordered_set<std::string> seen_ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto cells = split(line, ',');
    if (int(cells.size()) != kNumColumns)
      throw MalformedRow(lineno, "row",
                         "expected " + std::to_string(kNumColumns) + " columns, got " +
                             std::to_string(cells.size()));

    Visit v;
    v.visit_id = cells[0];
    v.patient_id = cells[1];
    if (v.visit_id.empty()) throw MalformedRow(lineno, "visit_id", "value required");
    if (v.patient_id.empty()) throw MalformedRow(lineno, "patient_id", "value required");
    if (!seen_ids.insert(v.visit_id).second) throw DuplicateVisitId(v.visit_id, lineno);

    auto date = Date::parse(cells[2]);
    if (!date)
      throw MalformedRow(lineno, "visit_date", "'" + cells[2] + "' is not YYYY-MM-DD");
    v.visit_date = *date;

    v.global_cdr = *parse_level_cell(cells[3], lineno, "global_cdr", /*required=*/true);
    for (int i = 0; i < kNumComponents; ++i)
      v.components.at(i) = parse_level_cell(cells[4 + i], lineno, kComponentNames[i], false);
    for (int i = 0; i < kNumCognitive; ++i)
      v.cognitive.at(i) = parse_int_cell(cells[10 + i], lineno, kCognitiveNames[i]);

    if (!cells[16].empty()) {
      for (auto& code : split(cells[16], ';')) {
        if (code.empty())
          throw MalformedRow(lineno, "diagnoses", "empty diagnosis code");
        v.diagnoses.push_back(code);
      }
      std::sort(v.diagnoses.begin(), v.diagnoses.end());
      v.diagnoses.erase(std::unique(v.diagnoses.begin(), v.diagnoses.end()),
                        v.diagnoses.end());
    }
    visits.push_back(std::move(v));
  }
  return Cohort(std::move(visits), provenance);
}

Cohort parse_cohort(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "no such file or unreadable");
  return parse_cohort_stream(in, path);
}

void write_cohort_stream(const Cohort& cohort, std::ostream& out) {
  out << kCohortCsvHeader << "\n";
  for (const Visit& v : cohort.visits()) {
    out << v.visit_id << ',' << v.patient_id << ',' << v.visit_date.to_string() << ','
        << cdr_token(v.global_cdr);
    for (int i = 0; i < kNumComponents; ++i) {
      out << ',';
      if (v.components.at(i)) out << cdr_token(*v.components.at(i));
    }
    for (int i = 0; i < kNumCognitive; ++i) {
      out << ',';
      if (v.cognitive.at(i)) out << *v.cognitive.at(i);
    }
    out << ',';
    for (std::size_t d = 0; d < v.diagnoses.size(); ++d) {
      if (d) out << ';';
      out << v.diagnoses[d];
    }
    out << "\n";
  }
}

void write_cohort(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError(path, "cannot write");
  write_cohort_stream(cohort, out);
}

double lower_median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[(xs.size() - 1) / 2];
}

ImputeResult median_impute(const Cohort& cohort, const std::vector<Feature>& features,
                           double warn_threshold) {
  MissingnessSummary summary;
  summary.total_visits = (long long)cohort.size();
  summary.warn_threshold = warn_threshold;

  std::vector<Visit> visits = cohort.visits();
  for (Feature f : features) {
    std::vector<double> present;
    long long missing = 0;
    for (const Visit& v : visits) {
      auto val = feature_value(v, f);
      if (val)
        present.push_back(*val);
      else
        ++missing;
    }
    if (present.empty()) throw AllMissingColumn(feature_name(f));
    const double median = lower_median(std::move(present));

    if (missing > 0)
      for (Visit& v : visits)
        if (!feature_value(v, f)) set_feature_value(v, f, median);

    FeatureMissingness fm;
    fm.missing = missing;
    fm.rate = visits.empty() ? 0.0 : double(missing) / double(visits.size());
    summary.by_feature[feature_name(f)] = fm;
    if (fm.rate > warn_threshold) summary.warnings.push_back(feature_name(f));
  }
  return ImputeResult{Cohort(std::move(visits), cohort.provenance()), std::move(summary)};
}

std::string MissingnessSummary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, fm] : by_feature)
    j[name] = {{"missing", fm.missing}, {"rate", fm.rate}};
  return j.dump(2);
}

}  // namespace subtyper
