#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subtyper/error.hpp"

namespace subtyper {

struct PerplexityTooLarge : Error {
  PerplexityTooLarge(double perplexity, int n)
      : Error("perplexity " + std::to_string(perplexity) + " too large for n=" +
              std::to_string(n) + " (needs perplexity <= (n-1)/3)") {}
};

struct DegenerateRow : Error {
  int row;
  explicit DegenerateRow(int row_)
      : Error("row " + std::to_string(row_) +
              " is equidistant from all others; entropy search is unbounded"),
        row(row_) {}
};

struct NumericalDivergence : Error {
  int iteration;
  explicit NumericalDivergence(int iter)
      : Error("embedding diverged to non-finite coordinates at iteration " +
              std::to_string(iter)),
        iteration(iter) {}
};

// Symmetrized joint affinities with the per-point Gaussian bandwidths that
// produced them. P is n x n, symmetric, zero diagonal, total sum 1.
struct AffinityMatrix {
  Eigen::MatrixXd joint;
  Eigen::VectorXd sigmas;
  double perplexity = 0.0;
};

struct EmbeddingConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration_factor = 12.0;
  int early_exaggeration_iters = 250;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  int momentum_switch_iter = 250;
  std::uint64_t seed = 0;
  bool audit_q_sums = false;  // track worst |1 - sum Q| across iterations
};

struct EmbeddedPoint {
  std::string visit_id;
  double y1 = 0.0;
  double y2 = 0.0;
};

struct EmbedResult {
  std::vector<EmbeddedPoint> points;  // input order
  double kl_initial = 0.0;            // KL(P||Q) at the Gaussian init, plain P
  double kl_final = 0.0;
  double q_sum_max_dev = 0.0;         // only meaningful when audit_q_sums
};

// One row of the conditional Gaussian distribution whose entropy matches
// log(perplexity): probabilities over the other points, the inverse-width
// beta = 1/(2 sigma^2), and the achieved entropy in nats.
struct GaussianRow {
  std::vector<double> probs;
  double beta = 0.0;
  double entropy = 0.0;
};

// Bandwidth search for a single point given its squared distances to the
// others. Bracketing plus bisection, <= 64 refinement steps, tolerance 1e-5
// on log-perplexity. Throws DegenerateRow(-1) when all distances are equal
// and the target entropy is therefore unreachable.
GaussianRow conditional_row(const std::vector<double>& sq_dists, double perplexity);

// Pairwise conditional affinities symmetrized to P = (P_c + P_c^T) / (2n).
// Requires n >= 4 and perplexity <= (n-1)/3.
AffinityMatrix compute_affinities(const Eigen::MatrixXd& x, double perplexity,
                                  int threads = 1);

// Dense helpers shared with the tests.
Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& m);
Eigen::MatrixXd student_t_joint(const Eigen::MatrixXd& y);  // normalized Q, zero diagonal
double tsne_kl(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y);
// Gradient of KL(exaggeration * P || Q) with respect to y.
Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y,
                              double exaggeration = 1.0, int threads = 1);

// Rows that are exact duplicates of another row get a deterministic jitter of
// magnitude 1e-6 keyed by their id, so the bandwidth search stays bounded.
Eigen::MatrixXd jitter_duplicate_rows(const Eigen::MatrixXd& x,
                                      const std::vector<std::string>& ids,
                                      std::uint64_t seed, double magnitude = 1e-6);

// Exact O(n^2) t-SNE to 2-D. Deterministic for fixed (x, ids, config.seed);
// internally canonicalized by sorting ids, so permuting input rows permutes
// the outputs bit-identically. Initial coordinates are N(0, 1e-4) streams
// keyed by (seed, visit id). Throws NumericalDivergence when coordinates
// leave the finite range.
EmbedResult tsne_embed(const Eigen::MatrixXd& x, const std::vector<std::string>& ids,
                       const EmbeddingConfig& config, int threads = 1);

}  // namespace subtyper
