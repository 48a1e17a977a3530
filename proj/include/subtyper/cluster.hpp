#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subtyper/error.hpp"

namespace subtyper {

struct KExceedsN : Error {
  KExceedsN(int k, int n)
      : Error("k=" + std::to_string(k) + " exceeds point count n=" + std::to_string(n)) {}
};

struct DegenerateData : Error {
  explicit DegenerateData(const std::string& why) : Error("degenerate data: " + why) {}
};

// Fitted k-means model over an n x d point matrix. Assignments are row
// indexed; callers zip them with visit ids. Invariant: no empty clusters,
// and inertia equals the recomputed within-cluster sum of squares.
struct KmeansModel {
  int k = 0;
  Eigen::MatrixXd centroids;    // k x d
  std::vector<int> labels;      // size n, values in [0, k)
  double inertia = 0.0;         // W_k
  int restarts_used = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_trace;  // per accepted Lloyd iteration of the best restart
};

struct KmeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  std::uint64_t seed = 0;
  bool track_inertia = false;  // record the per-iteration W trace of the winning restart
};

// Best-of-restarts Lloyd's algorithm with k-means++ seeding. Convergence is
// unchanged assignments or max_iterations; empty clusters are repaired by
// moving in the point farthest from its current centroid. Deterministic for
// a fixed seed. Throws KExceedsN.
KmeansModel kmeans_fit(const Eigen::MatrixXd& points, int k, const KmeansOptions& opts);

// Pooled within-cluster sum of squared distances to assigned centroids.
double within_dispersion(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                         const Eigen::MatrixXd& centroids);

// Same quantity from cluster means recomputed off the labels alone.
double within_dispersion(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k);

enum class GapReferenceMode { kBoundingBox, kPcaAligned };

struct GapEntry {
  int k = 0;
  double gap = 0.0;         // mean_b log W*_kb - log W_k
  double log_w = 0.0;       // observed log W_k
  double ref_log_w = 0.0;   // mean_b log W*_kb
  double s_k = 0.0;         // sd_k * sqrt(1 + 1/B)
};

struct KCandidate {
  int k = 0;
  double jump = 0.0;  // Gap(k) - Gap(k-1)
};

struct GapResult {
  std::vector<GapEntry> entries;  // ascending k
  int b_references = 0;
  std::uint64_t seed = 0;
  GapReferenceMode mode = GapReferenceMode::kBoundingBox;
  std::vector<KCandidate> candidates;   // jump outliers, score descending
  std::optional<int> one_se_k;          // smallest k with Gap(k) >= Gap(k+1) - s_{k+1}

  const GapEntry& at_k(int k) const;
};

// Tibshirani gap statistic over k in [k_lo, k_hi]. References are uniform
// draws over the data's bounding box (optionally in the PCA-rotated frame).
// Each (k, b) reference task owns a seed-derived stream, so results do not
// depend on execution order; `threads` only adds workers.
GapResult gap_statistic(const Eigen::MatrixXd& points, int k_lo, int k_hi, int b_references,
                        GapReferenceMode mode, int restarts, std::uint64_t seed,
                        int threads = 1);

// First-difference outlier ranking of Gap(k): every k whose jump exceeds the
// mean jump by at least one sample standard deviation, best first. Requires
// gaps over >= 3 consecutive k.
std::vector<KCandidate> rank_k_candidates(const GapResult& gaps);

}  // namespace subtyper
