#include "subtyper/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "subtyper/parallel.hpp"
#include "subtyper/rng.hpp"

namespace subtyper {

namespace {

double sq_dist(const Eigen::MatrixXd& pts, Eigen::Index i, const Eigen::MatrixXd& c,
               Eigen::Index r) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const double d = pts(i, j) - c(r, j);
    s += d * d;
  }
  return s;
}

// k-means++ seeding. Ties and duplicate-point corner cases resolve to the
// lowest index so the choice is deterministic.
Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& pts, int k, Rng& rng) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd centroids(k, pts.cols());
  std::vector<double> d2(std::size_t(n), 0.0);

  Eigen::Index first = Eigen::Index(rng.below(std::uint64_t(n)));
  centroids.row(0) = pts.row(first);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = sq_dist(pts, i, centroids, 0);
      for (int r = 1; r < c; ++r) best = std::min(best, sq_dist(pts, i, centroids, r));
      d2[std::size_t(i)] = best;
      total += best;
    }
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[std::size_t(i)];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = Eigen::Index(rng.below(std::uint64_t(n)));  // all points coincide
    }
    centroids.row(c) = pts.row(chosen);
  }
  return centroids;
}

struct LloydOutcome {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  std::vector<double> trace;
};

LloydOutcome lloyd(const Eigen::MatrixXd& pts, Eigen::MatrixXd centroids, int k,
                   int max_iterations, bool track) {
  const Eigen::Index n = pts.rows();
  const Eigen::Index d = pts.cols();
  std::vector<int> labels(std::size_t(n), 0);
  LloydOutcome out;

  std::vector<double> cx(static_cast<std::size_t>(k)), cy(static_cast<std::size_t>(k));
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    if (d == 2) {
      // Hot path for embedded points and gap references.
      for (int r = 0; r < k; ++r) {
        cx[std::size_t(r)] = centroids(r, 0);
        cy[std::size_t(r)] = centroids(r, 1);
      }
      const double* px = pts.col(0).data();
      const double* py = pts.col(1).data();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = px[i], yy = py[i];
        int best = 0;
        double bestd = (x - cx[0]) * (x - cx[0]) + (yy - cy[0]) * (yy - cy[0]);
        for (int r = 1; r < k; ++r) {
          const double dx = x - cx[std::size_t(r)];
          const double dy = yy - cy[std::size_t(r)];
          const double dd = dx * dx + dy * dy;
          if (dd < bestd) {
            bestd = dd;
            best = r;
          }
        }
        if (labels[std::size_t(i)] != best) {
          labels[std::size_t(i)] = best;
          changed = true;
        }
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double bestd = sq_dist(pts, i, centroids, 0);
        for (int r = 1; r < k; ++r) {
          const double dd = sq_dist(pts, i, centroids, r);
          if (dd < bestd) {
            bestd = dd;
            best = r;
          }
        }
        if (labels[std::size_t(i)] != best) {
          labels[std::size_t(i)] = best;
          changed = true;
        }
      }
    }

    // Repair empty clusters with the point farthest from its centroid.
    std::vector<Eigen::Index> count(std::size_t(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) ++count[std::size_t(labels[std::size_t(i)])];
    for (int r = 0; r < k; ++r) {
      if (count[std::size_t(r)] > 0) continue;
      Eigen::Index far = -1;
      double fard = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int li = labels[std::size_t(i)];
        if (count[std::size_t(li)] <= 1) continue;  // do not empty another cluster
        const double dd = sq_dist(pts, i, centroids, li);
        if (dd > fard) {
          fard = dd;
          far = i;
        }
      }
      if (far >= 0) {
        --count[std::size_t(labels[std::size_t(far)])];
        labels[std::size_t(far)] = r;
        ++count[std::size_t(r)];
        changed = true;
      }
    }

    // Means update.
    centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centroids.row(labels[std::size_t(i)]) += pts.row(i);
    for (int r = 0; r < k; ++r)
      if (count[std::size_t(r)] > 0) centroids.row(r) /= double(count[std::size_t(r)]);

    if (track) {
      double w = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) w += sq_dist(pts, i, centroids, labels[std::size_t(i)]);
      out.trace.push_back(w);
    }
    if (!changed) break;
  }

  double w = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) w += sq_dist(pts, i, centroids, labels[std::size_t(i)]);
  out.labels = std::move(labels);
  out.centroids = std::move(centroids);
  out.inertia = w;
  return out;
}

}  // namespace

KmeansModel kmeans_fit(const Eigen::MatrixXd& points, int k, const KmeansOptions& opts) {
  const int n = int(points.rows());
  if (k < 1) throw Error("k must be positive");
  if (k > n) throw KExceedsN(k, n);
  if (!points.allFinite()) throw Error("points must be finite");
  const int restarts = std::max(1, opts.restarts);

  KmeansModel best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(mix_seed(opts.seed, std::uint64_t(r)));
    LloydOutcome run = lloyd(points, kmeanspp_seed(points, k, rng), k,
                             opts.max_iterations, opts.track_inertia);
    if (run.inertia < best.inertia) {
      best.k = k;
      best.centroids = std::move(run.centroids);
      best.labels = std::move(run.labels);
      best.inertia = run.inertia;
      best.inertia_trace = std::move(run.trace);
    }
  }
  best.restarts_used = restarts;
  best.seed = opts.seed;
  return best;
}

double within_dispersion(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                         const Eigen::MatrixXd& centroids) {
  double w = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    w += sq_dist(points, i, centroids, labels[std::size_t(i)]);
  return w;
}

double within_dispersion(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<Eigen::Index> count(std::size_t(k), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    means.row(labels[std::size_t(i)]) += points.row(i);
    ++count[std::size_t(labels[std::size_t(i)])];
  }
  for (int r = 0; r < k; ++r)
    if (count[std::size_t(r)] > 0) means.row(r) /= double(count[std::size_t(r)]);
  return within_dispersion(points, labels, means);
}

const GapEntry& GapResult::at_k(int k) const {
  for (const auto& e : entries)
    if (e.k == k) return e;
  throw Error("no gap entry for k=" + std::to_string(k));
}

namespace {

struct ReferenceBox {
  Eigen::VectorXd lo, hi;          // per-dimension bounds in the sampling frame
  Eigen::MatrixXd rotation;        // identity for bounding-box mode
  Eigen::VectorXd center;
  bool rotated = false;
};

ReferenceBox make_reference_box(const Eigen::MatrixXd& pts, GapReferenceMode mode) {
  ReferenceBox box;
  const Eigen::Index d = pts.cols();
  box.center = pts.colwise().mean();
  if (mode == GapReferenceMode::kPcaAligned) {
    Eigen::MatrixXd centered = pts.rowwise() - box.center.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / double(pts.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    box.rotation = es.eigenvectors();
    Eigen::MatrixXd rot = centered * box.rotation;
    box.lo = rot.colwise().minCoeff();
    box.hi = rot.colwise().maxCoeff();
    box.rotated = true;
  } else {
    box.lo = pts.colwise().minCoeff();
    box.hi = pts.colwise().maxCoeff();
    box.rotation = Eigen::MatrixXd::Identity(d, d);
  }
  double volume = 1.0;
  for (Eigen::Index j = 0; j < d; ++j) volume *= box.hi(j) - box.lo(j);
  if (volume <= 0.0) throw DegenerateData("zero-volume reference bounding box");
  return box;
}

Eigen::MatrixXd sample_reference(const ReferenceBox& box, Eigen::Index n, Rng& rng) {
  const Eigen::Index d = box.lo.size();
  Eigen::MatrixXd z(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = rng.uniform(box.lo(j), box.hi(j));
  if (box.rotated) {
    z = z * box.rotation.transpose();
    z.rowwise() += box.center.transpose();
  }
  return z;
}

double safe_log_w(double w) {
  if (w <= 0.0)
    throw DegenerateData("within-cluster dispersion is zero; k reaches the distinct points");
  return std::log(w);
}

}  // namespace

GapResult gap_statistic(const Eigen::MatrixXd& points, int k_lo, int k_hi, int b_references,
                        GapReferenceMode mode, int restarts, std::uint64_t seed, int threads) {
  const int n = int(points.rows());
  if (k_lo < 1 || k_hi < k_lo || k_hi > n) throw Error("invalid k range");
  if (b_references < 10) throw Error("B must be >= 10");

  const ReferenceBox box = make_reference_box(points, mode);
  const int nk = k_hi - k_lo + 1;

  GapResult result;
  result.b_references = b_references;
  result.seed = seed;
  result.mode = mode;
  result.entries.resize(std::size_t(nk));

  // Observed dispersions.
  std::vector<double> log_w(static_cast<std::size_t>(nk));
  parallel_for(std::size_t(nk), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      const int k = k_lo + int(t);
      KmeansOptions opts;
      opts.restarts = restarts;
      opts.seed = mix_seed(seed, fnv1a64("observed") ^ std::uint64_t(k));
      log_w[t] = safe_log_w(kmeans_fit(points, k, opts).inertia);
    }
  });

  // Reference dispersions: one independent stream per (k, b) task.
  std::vector<double> ref_log_w(std::size_t(nk) * std::size_t(b_references));
  parallel_for(ref_log_w.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      const int ki = int(t / std::size_t(b_references));
      const int b = int(t % std::size_t(b_references));
      const int k = k_lo + ki;
      const std::uint64_t task_seed =
          mix_seed(seed, (std::uint64_t(k) << 32) | std::uint64_t(b));
      Rng rng(task_seed);
      Eigen::MatrixXd z = sample_reference(box, points.rows(), rng);
      KmeansOptions opts;
      opts.restarts = restarts;
      opts.seed = mix_seed(task_seed, fnv1a64("fit"));
      ref_log_w[t] = safe_log_w(kmeans_fit(z, k, opts).inertia);
    }
  });

  for (int ki = 0; ki < nk; ++ki) {
    double mean = 0.0;
    for (int b = 0; b < b_references; ++b)
      mean += ref_log_w[std::size_t(ki) * std::size_t(b_references) + std::size_t(b)];
    mean /= double(b_references);
    double var = 0.0;
    for (int b = 0; b < b_references; ++b) {
      const double d =
          ref_log_w[std::size_t(ki) * std::size_t(b_references) + std::size_t(b)] - mean;
      var += d * d;
    }
    var /= double(b_references);

    GapEntry& e = result.entries[std::size_t(ki)];
    e.k = k_lo + ki;
    e.log_w = log_w[std::size_t(ki)];
    e.ref_log_w = mean;
    e.gap = mean - e.log_w;
    e.s_k = std::sqrt(var) * std::sqrt(1.0 + 1.0 / double(b_references));
  }

  // One-standard-error rule: smallest k with Gap(k) >= Gap(k+1) - s_{k+1}.
  for (int ki = 0; ki + 1 < nk; ++ki) {
    const GapEntry& cur = result.entries[std::size_t(ki)];
    const GapEntry& nxt = result.entries[std::size_t(ki) + 1];
    if (cur.gap >= nxt.gap - nxt.s_k) {
      result.one_se_k = cur.k;
      break;
    }
  }
  if (!result.one_se_k && nk > 0) result.one_se_k = result.entries.back().k;

  if (nk >= 3) result.candidates = rank_k_candidates(result);
  return result;
}

std::vector<KCandidate> rank_k_candidates(const GapResult& gaps) {
  const auto& e = gaps.entries;
  if (e.size() < 3) throw Error("need gap values for >= 3 consecutive k");

  std::vector<KCandidate> jumps;
  for (std::size_t i = 1; i < e.size(); ++i)
    jumps.push_back({e[i].k, e[i].gap - e[i - 1].gap});

  double mean = 0.0;
  for (const auto& j : jumps) mean += j.jump;
  mean /= double(jumps.size());
  double var = 0.0;
  for (const auto& j : jumps) var += (j.jump - mean) * (j.jump - mean);
  var /= double(jumps.size() - 1);  // sample variance
  const double sd = std::sqrt(var);

  std::vector<KCandidate> out;
  for (const auto& j : jumps)
    if (sd > 0.0 && j.jump >= mean + sd) out.push_back(j);
  std::sort(out.begin(), out.end(), [](const KCandidate& a, const KCandidate& b) {
    if (a.jump != b.jump) return a.jump > b.jump;
    return a.k < b.k;
  });
  return out;
}

}  // namespace subtyper
