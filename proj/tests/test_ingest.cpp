#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "helpers.hpp"
#include "subtyper/ingest.hpp"
#include "subtyper/rng.hpp"
#include "subtyper/synthetic.hpp"

using namespace subtyper;

namespace {

std::string row(const std::string& vid, const std::string& pid, const std::string& date,
                const std::string& cdr, const std::string& memory = "0.5") {
  return vid + "," + pid + "," + date + "," + cdr + "," + memory +
         ",0.5,0.5,0,0,0,23,14,10,12,2,13,AD\n";
}

}  // namespace

TEST_CASE("parse_cohort: three well formed rows") {
  std::istringstream in(kCohortCsvHeader + "\n" + row("V1", "P1", "2015-01-01", "0.5") +
                        row("V2", "P1", "2015-07-04", "1") +
                        row("V3", "P2", "2015-03-01", "0"));
  const Cohort c = parse_cohort_stream(in, "t");
  REQUIRE(c.size() == 3);
  CHECK(c.visits()[0].visit_id == "V1");
  CHECK(c.visits()[1].global_cdr == CdrLevel::kMild);
  CHECK(c.visits()[2].diagnoses == std::vector<std::string>{"AD"});
}

TEST_CASE("parse_cohort rejects memory=1.5 naming line and field") {
  std::istringstream in(kCohortCsvHeader + "\n" + row("V1", "P1", "2015-01-01", "0.5") +
                        row("V2", "P1", "2015-02-01", "0.5", "1.5"));
  try {
    parse_cohort_stream(in, "t");
    FAIL("expected MalformedRow");
  } catch (const MalformedRow& e) {
    CHECK(e.line == 3);
    CHECK(e.field == "memory");
  }
}

TEST_CASE("parse_cohort rejects bad dates, bad column counts, out-of-range scores") {
  SUBCASE("date") {
    std::istringstream in(kCohortCsvHeader + "\n" + row("V1", "P1", "2015-13-01", "0.5"));
    CHECK_THROWS_AS(parse_cohort_stream(in, "t"), MalformedRow);
  }
  SUBCASE("columns") {
    std::istringstream in(kCohortCsvHeader + "\nV1,P1,2015-01-01,0.5\n");
    CHECK_THROWS_AS(parse_cohort_stream(in, "t"), MalformedRow);
  }
  SUBCASE("mmse out of range") {
    std::istringstream in(kCohortCsvHeader +
                          "\nV1,P1,2015-01-01,0.5,0.5,0.5,0.5,0,0,0,31,14,10,12,2,13,\n");
    CHECK_THROWS_AS(parse_cohort_stream(in, "t"), MalformedRow);
  }
  SUBCASE("header mismatch") {
    std::istringstream in(std::string("visit,oops\nV1\n"));
    CHECK_THROWS_AS(parse_cohort_stream(in, "t"), MalformedRow);
  }
}

TEST_CASE("parse_cohort rejects duplicate visit ids") {
  std::istringstream in(kCohortCsvHeader + "\n" + row("V1", "P1", "2015-01-01", "0.5") +
                        row("V1", "P2", "2015-02-01", "0.5"));
  try {
    parse_cohort_stream(in, "t");
    FAIL("expected DuplicateVisitId");
  } catch (const DuplicateVisitId& e) {
    CHECK(e.id == "V1");
    CHECK(e.line == 3);
  }
}

TEST_CASE("generator csv re-serializes byte-identically") {
  GeneratorConfig cfg;
  cfg.patients = 500;  // roughly 1000 visits at visits_mean 2
  cfg.visits_min = 1;
  cfg.visits_max = 4;
  cfg.visits_mean = 2.0;
  cfg.seed = 11;
  cfg.missing_rate["mmse"] = 0.05;
  cfg.missing_rate["memory"] = 0.03;
  PlantedSubtype st;
  st.name = "A";
  st.component_medians.fill(CdrLevel::kVeryMild);
  st.cdr_levels = {CdrLevel::kVeryMild};
  cfg.subtypes.push_back(st);
  cfg.diagnosis_prevalence["AD"] = {0.05, 0.1, 0.3, 0.5, 0.6};

  const auto gen = generate_cohort(cfg);
  std::ostringstream first;
  write_cohort_stream(gen.cohort, first);
  std::istringstream in(first.str());
  const Cohort parsed = parse_cohort_stream(in, "synthetic");
  CHECK(parsed == gen.cohort);
  std::ostringstream second;
  write_cohort_stream(parsed, second);
  CHECK(first.str() == second.str());
}

TEST_CASE("median_impute fills the documented mmse example") {
  // Column [19, 23, 27, missing]: the missing cell takes the median 23.
  std::vector<Visit> visits;
  const int scores[3] = {19, 23, 27};
  for (int i = 0; i < 4; ++i) {
    auto v = testutil::make_visit("V" + std::to_string(i), "P" + std::to_string(i),
                                  Date(2015, 1, 1).plus_days(i));
    if (i < 3) v.cognitive.mmse = scores[i];
    visits.push_back(v);
  }
  const auto res = median_impute(Cohort(visits, "t"), {Feature::kMmse});
  CHECK(res.cohort.visits()[3].cognitive.mmse == 23);
  CHECK(res.summary.by_feature.at("mmse").missing == 1);
  CHECK(res.summary.by_feature.at("mmse").rate == doctest::Approx(0.25));
}

TEST_CASE("median_impute leaves a complete cohort unchanged with an all-zero summary") {
  std::vector<Visit> visits{testutil::make_visit("V1", "P1", Date(2015, 1, 1)),
                            testutil::make_visit("V2", "P2", Date(2015, 1, 2))};
  for (auto& v : visits)
    for (int i = 0; i < kNumCognitive; ++i) v.cognitive.at(i) = 5;
  const Cohort cohort(visits, "t");
  const auto res = median_impute(cohort, all_features());
  CHECK(res.cohort == cohort);
  for (const auto& [_, fm] : res.summary.by_feature) CHECK(fm.missing == 0);
  CHECK(res.summary.warnings.empty());
}

TEST_CASE("even-count ordinal median takes the lower middle") {
  // Column [0, 0.5, 1, 2]: candidates 0.5 and 1, lower-middle gives 0.5.
  const CdrLevel levels[4] = {CdrLevel::kNormal, CdrLevel::kVeryMild, CdrLevel::kMild,
                              CdrLevel::kModerate};
  std::vector<Visit> visits;
  for (int i = 0; i < 5; ++i) {
    auto v = testutil::make_visit("V" + std::to_string(i), "P" + std::to_string(i),
                                  Date(2015, 1, 1).plus_days(i));
    if (i < 4)
      v.components.memory = levels[i];
    else
      v.components.memory = std::nullopt;
    visits.push_back(v);
  }
  const auto res = median_impute(Cohort(visits, "t"), {Feature::kMemory});
  CHECK(res.cohort.visits()[4].components.memory == CdrLevel::kVeryMild);
}

TEST_CASE("median_impute throws AllMissingColumn") {
  auto v = testutil::make_visit("V1", "P1", Date(2015, 1, 1));
  v.cognitive.mmse = std::nullopt;
  try {
    median_impute(Cohort({v}, "t"), {Feature::kMmse});
    FAIL("expected AllMissingColumn");
  } catch (const AllMissingColumn& e) {
    CHECK(e.feature == "mmse");
  }
}

TEST_CASE("missingness above the warn threshold is flagged but does not abort") {
  std::vector<Visit> visits;
  for (int i = 0; i < 10; ++i) {
    auto v = testutil::make_visit("V" + std::to_string(i), "P" + std::to_string(i),
                                  Date(2015, 1, 1).plus_days(i));
    v.cognitive.mmse = i < 9 ? std::optional<int>(20) : std::nullopt;
    visits.push_back(v);
  }
  const auto res = median_impute(Cohort(visits, "t"), {Feature::kMmse}, 0.05);
  REQUIRE(res.summary.warnings.size() == 1);
  CHECK(res.summary.warnings[0] == "mmse");
  CHECK(res.summary.by_feature.at("mmse").rate == doctest::Approx(0.1));
}

TEST_CASE("imputation properties: idempotence, untouched cells, valid levels") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Visit> visits;
    const int n = 10 + int(rng.below(30));
    for (int i = 0; i < n; ++i) {
      auto v = testutil::make_visit("V" + std::to_string(i), "P" + std::to_string(i),
                                    Date(2015, 1, 1).plus_days(i),
                                    CdrLevel(int(rng.below(kNumCdrLevels))));
      for (int c = 0; c < kNumComponents; ++c)
        v.components.at(c) = CdrLevel(int(rng.below(kNumCdrLevels)));
      for (int c = 0; c < kNumCognitive; ++c) v.cognitive.at(c) = int(rng.below(10));
      visits.push_back(v);
    }
    // Random missingness mask, but keep at least one value per column.
    for (int c = 0; c < kNumFeatures; ++c)
      for (int i = 1; i < n; ++i)
        if (rng.bernoulli(0.3)) set_feature_value(visits[std::size_t(i)], Feature(c), std::nullopt);
    const Cohort cohort(visits, "t");

    const auto once = median_impute(cohort, all_features());
    const auto twice = median_impute(once.cohort, all_features());
    CHECK(once.cohort == twice.cohort);
    for (const auto& [_, fm] : twice.summary.by_feature) CHECK(fm.missing == 0);

    for (int i = 0; i < n; ++i)
      for (int c = 0; c < kNumFeatures; ++c) {
        const auto before = feature_value(cohort.visits()[std::size_t(i)], Feature(c));
        const auto after = feature_value(once.cohort.visits()[std::size_t(i)], Feature(c));
        REQUIRE(after.has_value());  // every cell filled
        if (before) CHECK(*after == *before);
      }
    // Ordinal cells hold real levels by construction of the storage type;
    // completeness is the part worth asserting.
    for (const auto& v : once.cohort.visits()) CHECK(v.components.complete());
  }
}

TEST_CASE("lower_median matches a sort-and-pick oracle on random columns") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + int(rng.below(25));
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back(double(rng.below(6)));
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    CHECK(lower_median(xs) == sorted[(sorted.size() - 1) / 2]);
  }
}
