#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "subtyper/cohort.hpp"

namespace subtyper {

struct MalformedRow : Error {
  int line;          // 1-based, header is line 1
  std::string field;
  MalformedRow(int line_, std::string field_, const std::string& reason)
      : Error("line " + std::to_string(line_) + ", field '" + field_ + "': " + reason),
        line(line_),
        field(std::move(field_)) {}
};

struct DuplicateVisitId : Error {
  std::string id;
  int line;
  DuplicateVisitId(std::string id_, int line_)
      : Error("duplicate visit id '" + id_ + "' at line " + std::to_string(line_)),
        id(std::move(id_)),
        line(line_) {}
};

struct AllMissingColumn : Error {
  std::string feature;
  explicit AllMissingColumn(std::string f)
      : Error("column '" + f + "' has no values to take a median of"), feature(std::move(f)) {}
};

// Canonical cohort CSV header.
extern const std::string kCohortCsvHeader;

// Strict parse of the canonical cohort CSV. Aborts on the first bad row with
// MalformedRow / DuplicateVisitId; file order is preserved.
Cohort parse_cohort(const std::string& path);
Cohort parse_cohort_stream(std::istream& in, const std::string& provenance);

void write_cohort(const Cohort& cohort, const std::string& path);
void write_cohort_stream(const Cohort& cohort, std::ostream& out);

struct FeatureMissingness {
  long long missing = 0;
  double rate = 0.0;
};

struct MissingnessSummary {
  long long total_visits = 0;
  std::map<std::string, FeatureMissingness> by_feature;  // keyed by feature name
  double warn_threshold = 0.05;
  std::vector<std::string> warnings;  // features above the threshold

  std::string to_json() const;
};

struct ImputeResult {
  Cohort cohort;
  MissingnessSummary summary;
};

// Column-wise median imputation over all visits. Even-count medians take the
// lower of the two middle order statistics, so ordinal columns always impute
// a legal level and integer columns stay integral. Non-missing cells are
// never touched. Throws AllMissingColumn when a named column is entirely
// missing.
ImputeResult median_impute(const Cohort& cohort, const std::vector<Feature>& features,
                           double warn_threshold = 0.05);

// Lower-middle median of a sorted copy of xs; xs must be non-empty.
double lower_median(std::vector<double> xs);

}  // namespace subtyper
