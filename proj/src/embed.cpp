#include "subtyper/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>

#include "subtyper/parallel.hpp"
#include "subtyper/rng.hpp"

namespace subtyper {

namespace {

constexpr double kEntropyTol = 1e-5;
constexpr int kSearchIters = 64;

// Entropy (nats) and probabilities of p_j ~ exp(-beta * d_j), shifted by the
// smallest distance for stability at large beta.
double row_entropy(const std::vector<double>& d, double beta, std::vector<double>& probs) {
  const double dmin = *std::min_element(d.begin(), d.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    probs[j] = std::exp(-beta * (d[j] - dmin));
    sum += probs[j];
  }
  double h = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    probs[j] /= sum;
    if (probs[j] > 0.0) h -= probs[j] * std::log(probs[j]);
  }
  return h;
}

}  // namespace

GaussianRow conditional_row(const std::vector<double>& sq_dists, double perplexity) {
  const std::size_t m = sq_dists.size();
  if (m < 2) throw Error("conditional_row needs at least 2 neighbors");
  const double target = std::log(perplexity);

  const auto [mn, mx] = std::minmax_element(sq_dists.begin(), sq_dists.end());
  const double spread = *mx - *mn;
  if (spread <= 1e-300 * std::max(1.0, *mx)) {
    // Equidistant row: entropy is log(m) for every beta.
    if (std::abs(std::log(double(m)) - target) > 1e-3) throw DegenerateRow(-1);
    GaussianRow out;
    out.probs.assign(m, 1.0 / double(m));
    out.beta = 1.0;
    out.entropy = std::log(double(m));
    return out;
  }

  GaussianRow out;
  out.probs.resize(m);
  double beta = 1.0;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double h = row_entropy(sq_dists, beta, out.probs);

  for (int it = 0; it < kSearchIters && std::abs(h - target) > kEntropyTol; ++it) {
    if (h > target) {  // too flat: tighten
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
    } else {
      hi = beta;
      beta = lo > 0.0 ? 0.5 * (lo + hi) : beta * 0.5;
    }
    h = row_entropy(sq_dists, beta, out.probs);
  }
  out.beta = beta;
  out.entropy = h;
  return out;
}

Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double t = m(i, c) - m(j, c);
        s += t * t;
      }
      d(i, j) = s;
      d(j, i) = s;
    }
  }
  return d;
}

AffinityMatrix compute_affinities(const Eigen::MatrixXd& x, double perplexity, int threads) {
  const int n = int(x.rows());
  if (n < 4) throw Error("need at least 4 points, got " + std::to_string(n));
  if (!x.allFinite()) throw Error("input rows must be finite");
  if (perplexity <= 0.0) throw Error("perplexity must be positive");
  if (perplexity > (double(n) - 1.0) / 3.0) throw PerplexityTooLarge(perplexity, n);

  const Eigen::MatrixXd d = pairwise_sq_dists(x);

  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd sigmas(n);
  parallel_for(std::size_t(n), threads, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> row(std::size_t(n) - 1);
    for (std::size_t i = lo; i < hi; ++i) {
      std::size_t w = 0;
      for (int j = 0; j < n; ++j)
        if (j != int(i)) row[w++] = d(Eigen::Index(i), j);
      GaussianRow g;
      try {
        g = conditional_row(row, perplexity);
      } catch (const DegenerateRow&) {
        throw DegenerateRow(int(i));
      }
      w = 0;
      for (int j = 0; j < n; ++j)
        if (j != int(i)) cond(Eigen::Index(i), j) = g.probs[w++];
      sigmas(Eigen::Index(i)) = std::sqrt(1.0 / (2.0 * g.beta));
    }
  });

  AffinityMatrix out;
  out.joint = (cond + cond.transpose()) / (2.0 * double(n));
  out.sigmas = std::move(sigmas);
  out.perplexity = perplexity;
  return out;
}

Eigen::MatrixXd student_t_joint(const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows();
  Eigen::MatrixXd q(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    q(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        const double t = y(i, c) - y(j, c);
        s += t * t;
      }
      const double w = 1.0 / (1.0 + s);
      q(i, j) = w;
      q(j, i) = w;
      total += 2.0 * w;
    }
  }
  q /= total;
  return q;
}

double tsne_kl(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd q = student_t_joint(y);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i == j) continue;
      const double pij = p(i, j);
      if (pij > 0.0) kl += pij * std::log(pij / std::max(q(i, j), 1e-300));
    }
  return kl;
}

namespace {

// Flat row-major scratch for the O(n^2) descent loop. The 2-D coordinates
// are interleaved (x0, y0, x1, y1, ...) so the inner loops stay sequential.
struct TsneScratch {
  int n = 0;
  std::vector<double> w;         // n*n Student-t weights, zero diagonal
  std::vector<double> row_sums;  // n

  explicit TsneScratch(int n_)
      : n(n_), w(std::size_t(n_) * std::size_t(n_), 0.0), row_sums(std::size_t(n_), 0.0) {}
};

// Fills the weight matrix (upper triangle computed, mirrored) and returns the
// total. Per-row partials merge in row order, so the result does not depend
// on the thread count.
double student_t_weights_flat(const std::vector<double>& y, TsneScratch& s, int threads) {
  const int n = s.n;
  parallel_for(std::size_t(n), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double yx = y[2 * i];
      const double yy = y[2 * i + 1];
      double* row = s.w.data() + i * std::size_t(n);
      row[i] = 0.0;
      for (std::size_t j = i + 1; j < std::size_t(n); ++j) {
        const double dx = yx - y[2 * j];
        const double dy = yy - y[2 * j + 1];
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        row[j] = v;
        s.w[j * std::size_t(n) + i] = v;
      }
    }
  });
  parallel_for(std::size_t(n), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* row = s.w.data() + i * std::size_t(n);
      double rs = 0.0;
      for (std::size_t j = 0; j < std::size_t(n); ++j) rs += row[j];
      s.row_sums[i] = rs;
    }
  });
  double total = 0.0;
  for (double rs : s.row_sums) total += rs;
  return total;
}

// grad holds d(KL)/dy in the same interleaved layout; p is flat row-major.
void tsne_gradient_flat(const std::vector<double>& p, const std::vector<double>& y,
                        double exaggeration, TsneScratch& s, std::vector<double>& grad,
                        int threads) {
  const int n = s.n;
  const double total = student_t_weights_flat(y, s, threads);
  const double inv_total = 1.0 / total;
  parallel_for(std::size_t(n), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double yx = y[2 * i];
      const double yy = y[2 * i + 1];
      const double* wrow = s.w.data() + i * std::size_t(n);
      const double* prow = p.data() + i * std::size_t(n);
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < std::size_t(n); ++j) {
        const double wij = wrow[j];
        const double coeff = 4.0 * (exaggeration * prow[j] - wij * inv_total) * wij;
        gx += coeff * (yx - y[2 * j]);
        gy += coeff * (yy - y[2 * j + 1]);
      }
      grad[2 * i] = gx;
      grad[2 * i + 1] = gy;
    }
  });
}

}  // namespace

Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y,
                              double exaggeration, int threads) {
  const int n = int(y.rows());
  std::vector<double> pf(std::size_t(n) * std::size_t(n));
  std::vector<double> yf(2 * std::size_t(n));
  for (int i = 0; i < n; ++i) {
    yf[2 * std::size_t(i)] = y(i, 0);
    yf[2 * std::size_t(i) + 1] = y(i, 1);
    for (int j = 0; j < n; ++j) pf[std::size_t(i) * std::size_t(n) + std::size_t(j)] = p(i, j);
  }
  TsneScratch scratch(n);
  std::vector<double> grad(2 * std::size_t(n));
  tsne_gradient_flat(pf, yf, exaggeration, scratch, grad, threads);
  Eigen::MatrixXd out(n, 2);
  for (int i = 0; i < n; ++i) {
    out(i, 0) = grad[2 * std::size_t(i)];
    out(i, 1) = grad[2 * std::size_t(i) + 1];
  }
  return out;
}

Eigen::MatrixXd jitter_duplicate_rows(const Eigen::MatrixXd& x,
                                      const std::vector<std::string>& ids,
                                      std::uint64_t seed, double magnitude) {
  const Eigen::Index n = x.rows();
  std::map<std::string, int> groups;  // byte image of the row -> count
  std::vector<std::string> keys(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::string key(std::size_t(x.cols()) * sizeof(double), '\0');
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double v = x(i, c);
      std::memcpy(key.data() + std::size_t(c) * sizeof(double), &v, sizeof(double));
    }
    keys[std::size_t(i)] = key;
    ++groups[key];
  }

  Eigen::MatrixXd out = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (groups[keys[std::size_t(i)]] < 2) continue;
    Rng rng(mix_seed(seed, fnv1a64(ids[std::size_t(i)])));
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      out(i, c) += rng.uniform(-magnitude, magnitude);
  }
  return out;
}

EmbedResult tsne_embed(const Eigen::MatrixXd& x, const std::vector<std::string>& ids,
                       const EmbeddingConfig& config, int threads) {
  const int n = int(x.rows());
  if (int(ids.size()) != n) throw Error("ids must match the number of rows");
  if (config.iterations <= 0 || config.learning_rate <= 0.0)
    throw Error("invalid embedding config");

  // Canonical processing order: sorted by id. Output is mapped back to the
  // input order at the end, which makes the embedding invariant to row
  // permutations of (x, ids).
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return ids[std::size_t(a)] < ids[std::size_t(b)]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (ids[std::size_t(order[i - 1])] == ids[std::size_t(order[i])])
      throw Error("duplicate visit id '" + ids[std::size_t(order[i])] + "'");

  Eigen::MatrixXd xs(n, x.cols());
  std::vector<std::string> ids_sorted(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    xs.row(i) = x.row(order[std::size_t(i)]);
    ids_sorted[std::size_t(i)] = ids[std::size_t(order[std::size_t(i)])];
  }

  xs = jitter_duplicate_rows(xs, ids_sorted, mix_seed(config.seed, fnv1a64("jitter")));
  const AffinityMatrix aff = compute_affinities(xs, config.perplexity, threads);
  const Eigen::MatrixXd& p = aff.joint;

  std::vector<double> pf(std::size_t(n) * std::size_t(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pf[std::size_t(i) * std::size_t(n) + std::size_t(j)] = p(i, j);

  // Gaussian init keyed by (seed, visit id), sd 1e-4.
  const std::uint64_t init_salt = mix_seed(config.seed, fnv1a64("init"));
  std::vector<double> y(2 * std::size_t(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(init_salt, fnv1a64(ids_sorted[std::size_t(i)])));
    y[2 * std::size_t(i)] = rng.normal(0.0, 1e-4);
    y[2 * std::size_t(i) + 1] = rng.normal(0.0, 1e-4);
  }
  auto to_eigen = [n](const std::vector<double>& flat) {
    Eigen::MatrixXd m(n, 2);
    for (int i = 0; i < n; ++i) {
      m(i, 0) = flat[2 * std::size_t(i)];
      m(i, 1) = flat[2 * std::size_t(i) + 1];
    }
    return m;
  };

  EmbedResult result;
  result.kl_initial = tsne_kl(p, to_eigen(y));

  TsneScratch scratch(n);
  std::vector<double> velocity(2 * std::size_t(n), 0.0);
  std::vector<double> gains(2 * std::size_t(n), 1.0);
  std::vector<double> grad(2 * std::size_t(n), 0.0);
  for (int iter = 0; iter < config.iterations; ++iter) {
    const double alpha =
        iter < config.early_exaggeration_iters ? config.early_exaggeration_factor : 1.0;
    const double momentum = iter < config.momentum_switch_iter ? config.momentum_initial
                                                               : config.momentum_final;
    tsne_gradient_flat(pf, y, alpha, scratch, grad, threads);

    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < 2 * std::size_t(n); ++i) {
      // Standard adaptive per-parameter gains: grow when the gradient keeps
      // pointing along the velocity, shrink on sign flips.
      const bool same_dir = (grad[i] > 0.0) == (velocity[i] > 0.0);
      gains[i] = same_dir ? gains[i] * 0.8 : gains[i] + 0.2;
      if (gains[i] < 0.01) gains[i] = 0.01;
      velocity[i] = momentum * velocity[i] - config.learning_rate * gains[i] * grad[i];
      y[i] += velocity[i];
      if (i % 2 == 0)
        mean_x += y[i];
      else
        mean_y += y[i];
    }
    mean_x /= double(n);
    mean_y /= double(n);

    // Re-center; keeps coordinates bounded without changing pairwise structure.
    bool finite = std::isfinite(mean_x) && std::isfinite(mean_y);
    for (std::size_t i = 0; i < std::size_t(n); ++i) {
      y[2 * i] -= mean_x;
      y[2 * i + 1] -= mean_y;
      finite = finite && std::isfinite(y[2 * i]) && std::isfinite(y[2 * i + 1]);
    }
    if (!finite) throw NumericalDivergence(iter);

    if (config.audit_q_sums) {
      const double total = student_t_weights_flat(y, scratch, threads);
      double s = 0.0;
      for (double v : scratch.w) s += v / total;
      result.q_sum_max_dev = std::max(result.q_sum_max_dev, std::abs(1.0 - s));
    }
  }
  result.kl_final = tsne_kl(p, to_eigen(y));

  result.points.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    EmbeddedPoint pt;
    pt.visit_id = ids_sorted[std::size_t(i)];
    pt.y1 = y[2 * std::size_t(i)];
    pt.y2 = y[2 * std::size_t(i) + 1];
    result.points[std::size_t(order[std::size_t(i)])] = std::move(pt);
  }
  return result;
}

}  // namespace subtyper
