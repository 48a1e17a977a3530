#include <doctest.h>

#include <map>

#include "helpers.hpp"
#include "subtyper/comorbidity.hpp"
#include "subtyper/rng.hpp"
#include "subtyper/synthetic.hpp"

using namespace subtyper;

namespace {

Cohort cohort_with_diagnoses(const std::vector<std::vector<std::string>>& per_visit) {
  std::vector<Visit> visits;
  for (std::size_t i = 0; i < per_visit.size(); ++i) {
    auto v = testutil::make_visit("V" + std::to_string(i), "P" + std::to_string(i),
                                  Date(2015, 1, 1).plus_days(std::int64_t(i)));
    v.diagnoses = per_visit[i];
    std::sort(v.diagnoses.begin(), v.diagnoses.end());
    visits.push_back(v);
  }
  return Cohort(visits, "t");
}

}  // namespace

TEST_CASE("top_diagnoses ranks the five most frequent codes") {
  std::vector<std::vector<std::string>> rows;
  const std::vector<std::pair<std::string, int>> spec{
      {"AD", 30}, {"DEPRESSION", 25}, {"MEMORY_LOSS", 20}, {"PARKINSON", 15},
      {"SLEEP_APNEA", 10}, {"RARE_1", 3}, {"RARE_2", 1}};
  std::size_t slot = 0;
  std::map<std::string, int> left;
  for (const auto& [code, n] : spec) left[code] = n;
  for (int round = 0; round < 30; ++round) {
    std::vector<std::string> row;
    for (auto& [code, n] : left)
      if (n > 0) {
        row.push_back(code);
        --n;
      }
    if (!row.empty()) rows.push_back(row);
    ++slot;
  }
  const auto cohort = cohort_with_diagnoses(rows);
  const auto top = top_diagnoses(cohort, 5);
  REQUIRE(top.size() == 5);
  CHECK(top[0].code == "AD");
  CHECK(top[0].count == 30);
  CHECK(top[1].code == "DEPRESSION");
  CHECK(top[2].code == "MEMORY_LOSS");
  CHECK(top[3].code == "PARKINSON");
  CHECK(top[4].code == "SLEEP_APNEA");
}

TEST_CASE("top_diagnoses: empty cohort and ties") {
  CHECK(top_diagnoses(cohort_with_diagnoses({}), 5).empty());
  CHECK_THROWS_AS(top_diagnoses(cohort_with_diagnoses({}), 0), Error);

  // Equal counts break lexicographically.
  const auto cohort = cohort_with_diagnoses({{"B", "A"}, {"A", "B"}});
  const auto top = top_diagnoses(cohort, 2);
  CHECK(top[0].code == "A");
  CHECK(top[1].code == "B");
}

TEST_CASE("top_diagnoses matches a brute-force recount on random cohorts") {
  Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<std::string>> rows;
    const int n = 30 + int(rng.below(50));
    const std::vector<std::string> codes{"A", "B", "C", "D", "E", "F"};
    std::map<std::string, long long> oracle;
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> row;
      for (const auto& c : codes)
        if (rng.bernoulli(0.3)) {
          row.push_back(c);
          ++oracle[c];
        }
      rows.push_back(row);
    }
    const auto top = top_diagnoses(cohort_with_diagnoses(rows), int(codes.size()));
    for (const auto& t : top) CHECK(t.count == oracle[t.code]);
    for (std::size_t i = 1; i < top.size(); ++i)
      CHECK((top[i - 1].count > top[i].count ||
             (top[i - 1].count == top[i].count && top[i - 1].code < top[i].code)));
  }
}

TEST_CASE("comorbidity profile: single cluster equals cohort-wide counts") {
  const auto cohort = cohort_with_diagnoses({{"AD"}, {"AD", "DEPRESSION"}, {"DEPRESSION"}});
  Assignments assignments;
  for (const auto& v : cohort.visits()) assignments[v.visit_id] = 0;
  const auto profile =
      comorbidity_profile(cohort, assignments, {"AD", "DEPRESSION"}, {0});
  CHECK(profile.per_cluster.at(0).at("AD") == 2);
  CHECK(profile.per_cluster.at(0).at("DEPRESSION") == 2);
  CHECK(profile.top[0].count == 2);
}

TEST_CASE("per-cluster counts sum to the cohort-wide count") {
  Rng rng(11);
  std::vector<std::vector<std::string>> rows;
  Assignments assignments;
  const int n = 80;
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> row;
    if (rng.bernoulli(0.4)) row.push_back("AD");
    if (rng.bernoulli(0.2)) row.push_back("PARKINSON");
    rows.push_back(row);
  }
  const auto cohort = cohort_with_diagnoses(rows);
  for (const auto& v : cohort.visits())
    assignments[v.visit_id] = int(rng.below(4));
  const auto profile =
      comorbidity_profile(cohort, assignments, {"AD", "PARKINSON"}, {0, 1, 2, 3});

  for (const auto& code : {"AD", "PARKINSON"}) {
    long long total = 0;
    for (int c = 0; c < 4; ++c) total += profile.per_cluster.at(c).at(code);
    long long oracle = 0;
    for (const auto& row : rows)
      for (const auto& x : row)
        if (x == code) ++oracle;
    CHECK(total == oracle);
  }
}

TEST_CASE("unknown codes are rejected") {
  const auto cohort = cohort_with_diagnoses({{"AD"}});
  Assignments assignments{{"V0", 0}};
  CHECK_THROWS_AS(comorbidity_profile(cohort, assignments, {"NOT_A_CODE"}, {0}),
                  UnknownDiagnosis);
}

TEST_CASE("per-patient mode counts each patient once per cluster and code") {
  // One patient with three AD visits in the same cluster.
  std::vector<Visit> visits;
  for (int i = 0; i < 3; ++i) {
    auto v = testutil::make_visit("V" + std::to_string(i), "P0",
                                  Date(2015, 1, 1).plus_days(i * 100));
    v.diagnoses = {"AD"};
    visits.push_back(v);
  }
  const Cohort cohort(visits, "t");
  Assignments assignments;
  for (const auto& v : visits) assignments[v.visit_id] = 0;

  const auto by_visit = comorbidity_profile(cohort, assignments, {"AD"}, {0}, false);
  CHECK(by_visit.per_cluster.at(0).at("AD") == 3);
  const auto by_patient = comorbidity_profile(cohort, assignments, {"AD"}, {0}, true);
  CHECK(by_patient.per_cluster.at(0).at("AD") == 1);
}

TEST_CASE("planted severity gradient shows up in the per-group AD share") {
  // AD prevalence rises with CDR in the generator; the profile must reflect it.
  GeneratorConfig cfg;
  cfg.patients = 400;
  cfg.visits_min = 1;
  cfg.visits_max = 2;
  cfg.visits_mean = 1.4;
  cfg.seed = 21;
  PlantedSubtype mild;
  mild.name = "MILD";
  mild.component_medians.fill(CdrLevel::kVeryMild);
  mild.cdr_levels = {CdrLevel::kVeryMild};
  PlantedSubtype severe;
  severe.name = "SEVERE";
  severe.component_medians.fill(CdrLevel::kModerate);
  severe.cdr_levels = {CdrLevel::kModerate};
  cfg.subtypes = {mild, severe};
  cfg.diagnosis_prevalence["AD"] = {0.02, 0.10, 0.35, 0.60, 0.75};
  cfg.diagnosis_prevalence["DEPRESSION"] = {0.2, 0.25, 0.2, 0.15, 0.1};

  const auto gen = generate_cohort(cfg);
  Assignments assignments;
  for (const auto& v : gen.cohort.visits())
    assignments[v.visit_id] = gen.truth.visit_subtype.at(v.visit_id);
  const auto profile =
      comorbidity_profile(gen.cohort, assignments, {"AD"}, {0, 1});

  std::map<int, long long> visits_per_cluster;
  for (const auto& [vid, c] : assignments) ++visits_per_cluster[c];
  const double share_mild =
      double(profile.per_cluster.at(0).at("AD")) / double(visits_per_cluster[0]);
  const double share_severe =
      double(profile.per_cluster.at(1).at("AD")) / double(visits_per_cluster[1]);
  CHECK(share_severe > share_mild);
}
