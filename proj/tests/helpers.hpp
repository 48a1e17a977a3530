#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subtyper/cohort.hpp"
#include "subtyper/rng.hpp"
#include "subtyper/subtype.hpp"
#include "subtyper/transitions.hpp"

namespace testutil {

// Scratch directory under the system temp root, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = base / ("subtyper_" + tag + "_" + std::to_string(rd()) + "_" +
                    std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// A minimal complete visit; components and global CDR all at `level`.
inline subtyper::Visit make_visit(const std::string& vid, const std::string& pid,
                                  const subtyper::Date& date,
                                  subtyper::CdrLevel level = subtyper::CdrLevel::kVeryMild) {
  subtyper::Visit v;
  v.visit_id = vid;
  v.patient_id = pid;
  v.visit_date = date;
  v.global_cdr = level;
  for (int i = 0; i < subtyper::kNumComponents; ++i) v.components.at(i) = level;
  return v;
}

// Isotropic Gaussian blobs with the given centers; labels follow center index.
inline std::pair<Eigen::MatrixXd, std::vector<int>> gaussian_blobs(
    const std::vector<std::pair<double, double>>& centers, int per_blob, double sd,
    std::uint64_t seed) {
  const int n = int(centers.size()) * per_blob;
  Eigen::MatrixXd x(n, 2);
  std::vector<int> labels;
  subtyper::Rng rng(seed);
  int row = 0;
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (int i = 0; i < per_blob; ++i, ++row) {
      x(row, 0) = rng.normal(centers[c].first, sd);
      x(row, 1) = rng.normal(centers[c].second, sd);
      labels.push_back(int(c));
    }
  return {x, labels};
}

// Expands a group-level transition count matrix into a cohort + assignments
// whose pipeline-discovered grouping reproduces the intended groups. Each
// count becomes one two-visit patient; composite groups alternate their two
// CDR levels per subtype so classification lands on composite.
struct MatrixFixture {
  subtyper::Cohort cohort;
  subtyper::Assignments assignments;
};

struct FixtureGroupSpec {
  std::vector<int> clusters;                 // subtype ids in this group
  std::vector<subtyper::CdrLevel> levels;    // 1 or 2 dominant levels
};

inline MatrixFixture expand_matrix_fixture(
    const std::vector<FixtureGroupSpec>& groups,
    const std::vector<std::vector<long long>>& counts, int interval_days = 184) {
  using namespace subtyper;
  std::vector<Visit> visits;
  Assignments assignments;
  std::vector<std::size_t> next_subtype(groups.size(), 0);
  std::map<int, std::size_t> next_level;  // per cluster, alternating level pick

  long long patient = 0, visit = 0;
  auto emit = [&](std::size_t group, const std::string& vid, const std::string& pid,
                  const Date& date) {
    const FixtureGroupSpec& spec = groups[group];
    const int cluster = spec.clusters[next_subtype[group] % spec.clusters.size()];
    ++next_subtype[group];
    const CdrLevel level = spec.levels[next_level[cluster] % spec.levels.size()];
    ++next_level[cluster];
    visits.push_back(make_visit(vid, pid, date, level));
    assignments[vid] = cluster;
  };

  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j = 0; j < counts[i].size(); ++j)
      for (long long c = 0; c < counts[i][j]; ++c) {
        char pid[32], vid0[32], vid1[32];
        std::snprintf(pid, sizeof pid, "PT%06lld", patient++);
        std::snprintf(vid0, sizeof vid0, "VX%06lld", visit++);
        std::snprintf(vid1, sizeof vid1, "VX%06lld", visit++);
        const Date start(2015, 1, 1);
        emit(i, vid0, pid, start);
        emit(j, vid1, pid, start.plus_days(interval_days));
      }
  return {Cohort(std::move(visits), "fixture"), std::move(assignments)};
}

// The six-group fixture layout used by the transition tests: 16 subtypes in
// severity-ordered signature groups (composite 0/0.5, homogeneous 0.5,
// composite 0.5/1, homogeneous 1, composite 1/2, composite 2/3).
inline std::vector<FixtureGroupSpec> sixteen_subtype_groups() {
  using subtyper::CdrLevel;
  return {
      {{3}, {CdrLevel::kNormal, CdrLevel::kVeryMild}},
      {{1, 6, 7, 9, 13, 14}, {CdrLevel::kVeryMild}},
      {{10, 15, 16}, {CdrLevel::kVeryMild, CdrLevel::kMild}},
      {{8, 11}, {CdrLevel::kMild}},
      {{2, 4}, {CdrLevel::kMild, CdrLevel::kModerate}},
      {{5, 12}, {CdrLevel::kModerate, CdrLevel::kSevere}},
  };
}

}  // namespace testutil
