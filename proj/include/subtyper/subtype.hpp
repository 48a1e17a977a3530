#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "subtyper/cohort.hpp"

namespace subtyper {

struct InsufficientSubtypes : Error {
  InsufficientSubtypes(CdrLevel level, int found)
      : Error("need >= 2 subtypes homogeneous at CDR " + cdr_token(level) + ", found " +
              std::to_string(found)) {}
};

// visit_id -> cluster index.
using Assignments = std::map<std::string, int>;

enum class HomogeneityKind { kHomogeneous, kComposite, kMixed };

struct Homogeneity {
  HomogeneityKind kind = HomogeneityKind::kMixed;
  std::vector<CdrLevel> levels;  // 1 (homogeneous) or 2 (composite), ascending

  std::string label() const;  // "0.5 Homogenous", "0.5/1 Composite", "Mixed"
  bool operator==(const Homogeneity&) const = default;
};

struct ComponentDistribution {
  std::array<long long, kNumCdrLevels> level_counts{};
  CdrLevel median = CdrLevel::kNormal;
  CdrLevel q1 = CdrLevel::kNormal;  // Tukey hinges with the lower-middle rule
  CdrLevel q3 = CdrLevel::kNormal;
};

struct SubtypeProfile {
  int cluster = 0;
  long long visit_count = 0;
  std::array<long long, kNumCdrLevels> cdr_histogram{};  // by global CDR level index
  Homogeneity homogeneity;
  std::array<ComponentDistribution, kNumComponents> components;
  double mean_cdr = 0.0;  // mean numeric global CDR
};

struct SubtypeGroup {
  std::string id;     // "G0", "G1", ...
  std::string label;  // homogeneity signature label
  Homogeneity signature;
  std::vector<int> clusters;  // ascending cluster ids
  double mean_cdr = 0.0;      // visit-weighted
};

struct SubtypeGrouping {
  std::vector<SubtypeGroup> groups;  // ordered by non-decreasing mean CDR

  // Group index for a cluster id; throws UnknownGroup.
  int group_of(int cluster) const;
  std::vector<std::string> labels_short() const;  // G0..Gm
};

struct UnknownGroup : Error {
  explicit UnknownGroup(int cluster)
      : Error("cluster " + std::to_string(cluster) + " belongs to no group") {}
  explicit UnknownGroup(const std::string& what) : Error(what) {}
};

// Per-cluster CDR composition and component-score distributions. Imputed
// components are required (complete visits). Profiles come back sorted by
// cluster id; homogeneity is classified at the given purity.
std::vector<SubtypeProfile> profile_subtypes(const Cohort& cohort,
                                             const Assignments& assignments,
                                             double purity = 0.9);

// homogeneous(L) when one level covers >= purity of visits, composite(L1,L2)
// when the top two jointly do, mixed otherwise.
Homogeneity classify_homogeneity(const SubtypeProfile& profile, double purity = 0.9);

struct ComponentSpread {
  std::string component;
  std::map<int, double> medians_by_cluster;  // numeric medians
  double range = 0.0;                        // max - min of the medians
  double variance = 0.0;                     // population variance of the medians
};

struct InterSubtypeVariability {
  CdrLevel level;
  std::vector<int> clusters;  // the homogeneous subtypes compared
  std::array<ComponentSpread, kNumComponents> components;
};

// Spread of each component's subtype medians across the subtypes homogeneous
// at `level`. Throws InsufficientSubtypes when fewer than two qualify.
InterSubtypeVariability inter_subtype_variability(const std::vector<SubtypeProfile>& profiles,
                                                  CdrLevel level);

struct IntraSubtypeVariability {
  int cluster = 0;
  std::array<CdrLevel, kNumComponents> medians{};
  double range = 0.0;                 // numeric max - min of the six medians
  std::vector<std::string> intact;    // components with median 0
  std::vector<std::string> impaired;  // components with median > 0
};

IntraSubtypeVariability intra_subtype_variability(const SubtypeProfile& profile);

// Partitions subtypes by homogeneity signature and orders groups by
// non-decreasing mean global CDR (ties by smallest cluster id).
SubtypeGrouping group_subtypes(const std::vector<SubtypeProfile>& profiles);

}  // namespace subtyper
