#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "subtyper/cohort.hpp"
#include "subtyper/ingest.hpp"
#include "subtyper/rng.hpp"
#include "subtyper/synthetic.hpp"

using namespace subtyper;

TEST_CASE("cdr level parsing accepts exactly the five levels") {
  CHECK(parse_cdr_level("0") == CdrLevel::kNormal);
  CHECK(parse_cdr_level("0.5") == CdrLevel::kVeryMild);
  CHECK(parse_cdr_level("1") == CdrLevel::kMild);
  CHECK(parse_cdr_level("2") == CdrLevel::kModerate);
  CHECK(parse_cdr_level("3") == CdrLevel::kSevere);
  CHECK_FALSE(parse_cdr_level("1.5").has_value());
  CHECK_FALSE(parse_cdr_level("2.5").has_value());
  CHECK_FALSE(parse_cdr_level("4").has_value());
  CHECK_FALSE(parse_cdr_level("-1").has_value());
  CHECK_FALSE(parse_cdr_level("").has_value());
}

TEST_CASE("numeric view maps 0 0.5 1 2 3") {
  CHECK(cdr_numeric(CdrLevel::kNormal) == 0.0);
  CHECK(cdr_numeric(CdrLevel::kVeryMild) == 0.5);
  CHECK(cdr_numeric(CdrLevel::kMild) == 1.0);
  CHECK(cdr_numeric(CdrLevel::kModerate) == 2.0);
  CHECK(cdr_numeric(CdrLevel::kSevere) == 3.0);
}

TEST_CASE("severity_compare on the documented pairs") {
  CHECK(severity_compare(CdrLevel::kVeryMild, CdrLevel::kMild) == std::strong_ordering::less);
  CHECK(severity_compare(CdrLevel::kModerate, CdrLevel::kModerate) ==
        std::strong_ordering::equal);
  CHECK(severity_compare(CdrLevel::kSevere, CdrLevel::kNormal) ==
        std::strong_ordering::greater);
}

TEST_CASE("severity_compare is a total order over all 125 triples") {
  for (int a = 0; a < kNumCdrLevels; ++a)
    for (int b = 0; b < kNumCdrLevels; ++b) {
      const auto ab = severity_compare(CdrLevel(a), CdrLevel(b));
      const auto ba = severity_compare(CdrLevel(b), CdrLevel(a));
      // Antisymmetry.
      if (ab == std::strong_ordering::less) CHECK(ba == std::strong_ordering::greater);
      if (ab == std::strong_ordering::equal) CHECK(ba == std::strong_ordering::equal);
      for (int c = 0; c < kNumCdrLevels; ++c) {
        const auto bc = severity_compare(CdrLevel(b), CdrLevel(c));
        const auto ac = severity_compare(CdrLevel(a), CdrLevel(c));
        // Transitivity.
        if (ab != std::strong_ordering::greater && bc != std::strong_ordering::greater)
          CHECK(ac != std::strong_ordering::greater);
      }
    }
}

TEST_CASE("validate_cohort: single well-formed visit gives an empty report") {
  Cohort cohort({testutil::make_visit("V1", "P1", Date(2015, 1, 1))}, "test");
  CHECK(validate_cohort(cohort).ok());
}

TEST_CASE("validate_cohort flags duplicate (patient, date) pairs") {
  Cohort cohort({testutil::make_visit("V1", "P1", Date(2015, 1, 1)),
                 testutil::make_visit("V2", "P1", Date(2015, 1, 1))},
                "test");
  const auto report = validate_cohort(cohort);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].rule == "patient_date_unique");
  CHECK(report.violations[0].visit_id == "V2");
}

TEST_CASE("validate_cohort flags duplicate visit ids and bad cognitive ranges") {
  auto v1 = testutil::make_visit("V1", "P1", Date(2015, 1, 1));
  auto v2 = testutil::make_visit("V1", "P2", Date(2015, 2, 1));
  v2.cognitive.mmse = 31;  // above instrument maximum
  Cohort cohort({v1, v2}, "test");
  const auto report = validate_cohort(cohort);
  REQUIRE(report.violations.size() == 2);
  CHECK(report.violations[0].rule == "visit_id_unique");
  CHECK(report.violations[1].rule == "cognitive_range");
}

TEST_CASE("paper-scale synthetic cohort validates clean") {
  GeneratorConfig cfg;
  cfg.patients = 1845;
  cfg.visits_min = 1;
  cfg.visits_max = 6;
  cfg.visits_mean = 1.48;  // targets roughly 2737 visits
  cfg.seed = 7;
  PlantedSubtype st;
  st.name = "A";
  st.component_medians = {CdrLevel::kVeryMild, CdrLevel::kVeryMild, CdrLevel::kVeryMild,
                          CdrLevel::kNormal, CdrLevel::kNormal, CdrLevel::kNormal};
  st.cdr_levels = {CdrLevel::kVeryMild};
  cfg.subtypes.push_back(st);
  st.name = "B";
  st.component_medians = {CdrLevel::kMild, CdrLevel::kMild, CdrLevel::kMild,
                          CdrLevel::kMild, CdrLevel::kVeryMild, CdrLevel::kVeryMild};
  st.cdr_levels = {CdrLevel::kMild};
  cfg.subtypes.push_back(st);

  const auto gen = generate_cohort(cfg);
  CHECK(gen.cohort.size() > 2000);
  CHECK(validate_cohort(gen.cohort).ok());
}

TEST_CASE("visits_of returns strictly increasing dates") {
  Cohort cohort({testutil::make_visit("V2", "P1", Date(2016, 5, 1)),
                 testutil::make_visit("V1", "P1", Date(2015, 1, 1)),
                 testutil::make_visit("V3", "P1", Date(2015, 7, 4))},
                "test");
  const auto& idxs = cohort.visits_of("P1");
  REQUIRE(idxs.size() == 3);
  CHECK(cohort.visits()[idxs[0]].visit_id == "V1");
  CHECK(cohort.visits()[idxs[1]].visit_id == "V3");
  CHECK(cohort.visits()[idxs[2]].visit_id == "V2");
}

TEST_CASE("cohort round-trips through the canonical csv") {
  auto v1 = testutil::make_visit("V1", "P1", Date(2015, 1, 1), CdrLevel::kVeryMild);
  v1.cognitive.mmse = 23;
  v1.cognitive.boston_naming = 14;
  v1.diagnoses = {"AD", "SLEEP_APNEA"};
  auto v2 = testutil::make_visit("V2", "P1", Date(2015, 7, 4), CdrLevel::kMild);
  v2.components.memory = std::nullopt;  // pre-imputation missingness
  auto v3 = testutil::make_visit("V3", "P2", Date(2016, 2, 29), CdrLevel::kSevere);
  Cohort original({v1, v2, v3}, "roundtrip");

  std::ostringstream out;
  write_cohort_stream(original, out);
  std::istringstream in(out.str());
  const Cohort parsed = parse_cohort_stream(in, "roundtrip");
  CHECK(parsed == original);
}

TEST_CASE("random cohorts round-trip through the canonical csv") {
  Rng rng(606);
  const std::vector<std::string> codes{"AD", "DEPRESSION", "MEMORY_LOSS", "X9.1"};
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Visit> visits;
    const int n = 1 + int(rng.below(40));
    for (int i = 0; i < n; ++i) {
      Visit v;
      v.visit_id = "V" + std::to_string(trial) + "_" + std::to_string(i);
      v.patient_id = "P" + std::to_string(int(rng.below(10)));
      v.visit_date = Date(2012, 6, 1).plus_days(std::int64_t(rng.below(2000)));
      v.global_cdr = CdrLevel(int(rng.below(kNumCdrLevels)));
      for (int c = 0; c < kNumComponents; ++c)
        if (!rng.bernoulli(0.2)) v.components.at(c) = CdrLevel(int(rng.below(kNumCdrLevels)));
      for (int c = 0; c < kNumCognitive; ++c) {
        if (rng.bernoulli(0.3)) continue;
        const ScoreRange r = cognitive_range(c);
        const int hi = r.max >= 0 ? r.max : 40;
        v.cognitive.at(c) = r.min + int(rng.below(std::uint64_t(hi - r.min + 1)));
      }
      for (const auto& code : codes)
        if (rng.bernoulli(0.25)) v.diagnoses.push_back(code);
      visits.push_back(std::move(v));
    }
    const Cohort original(visits, "prop");
    std::ostringstream out;
    write_cohort_stream(original, out);
    std::istringstream in(out.str());
    CHECK(parse_cohort_stream(in, "prop") == original);
  }
}

TEST_CASE("date arithmetic uses whole civil days") {
  CHECK(Date(2015, 7, 4) - Date(2015, 1, 1) == 184);
  CHECK(Date(2015, 1, 1).plus_days(184) == Date(2015, 7, 4));
  CHECK_FALSE(Date::parse("2015-02-30").has_value());
  CHECK_FALSE(Date::parse("2015/01/01").has_value());
  CHECK(Date::parse("2016-02-29").has_value());  // leap day
}
