#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "subtyper/cluster.hpp"
#include "subtyper/embed.hpp"
#include "subtyper/metrics.hpp"
#include "subtyper/parallel.hpp"
#include "subtyper/rng.hpp"

using namespace subtyper;

namespace {

std::vector<std::string> make_ids(int n, const std::string& prefix = "V") {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(1000 + i));
  return ids;
}

double row_perplexity_from_sigma(const Eigen::MatrixXd& x, int row, double sigma) {
  const double beta = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> p;
  double sum = 0.0;
  for (int j = 0; j < x.rows(); ++j) {
    if (j == row) continue;
    const double d = (x.row(row) - x.row(j)).squaredNorm();
    p.push_back(std::exp(-beta * d));
    sum += p.back();
  }
  double h = 0.0;
  for (double v : p) {
    v /= sum;
    if (v > 0) h -= v * std::log(v);
  }
  return std::exp(h);
}

}  // namespace

TEST_CASE("compute_affinities rejects tiny inputs and oversized perplexity") {
  Eigen::MatrixXd two(2, 2);
  two << 0, 0, 1, 1;
  CHECK_THROWS_AS(compute_affinities(two, 0.5), Error);

  Eigen::MatrixXd ten = Eigen::MatrixXd::Random(10, 3);
  CHECK_THROWS_AS(compute_affinities(ten, 4.0), PerplexityTooLarge);  // limit is 3
  CHECK_NOTHROW(compute_affinities(ten, 3.0));
}

TEST_CASE("square corners at perplexity 1: nearest-neighbor pairs carry equal mass") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto aff = compute_affinities(x, 1.0);
  const auto& p = aff.joint;

  CHECK((p - p.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.minCoeff() >= 0.0);

  // The 8 ordered nearest-neighbor pairs (side length 1) share one value.
  const double nn = p(0, 1);
  CHECK(p(0, 2) == doctest::Approx(nn).epsilon(1e-12));
  CHECK(p(1, 3) == doctest::Approx(nn).epsilon(1e-12));
  CHECK(p(2, 3) == doctest::Approx(nn).epsilon(1e-12));
  CHECK(p(0, 3) < nn);  // the diagonal pair is farther
}

TEST_CASE("collinear 0,1,10 at perplexity 1: conditional mass collapses onto the neighbor") {
  // Row primitive, checked against an independent scalar search over sigma.
  const std::vector<double> d{1.0, 100.0};  // squared distances from x=0
  const auto row = conditional_row(d, 1.0);
  CHECK(row.probs[0] > 0.99);

  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 10;
  double lo = 1e-3, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (row_perplexity_from_sigma(x, 0, mid) > 1.0)
      hi = mid;
    else
      lo = mid;
  }
  const double sigma_oracle = 0.5 * (lo + hi);
  const double beta_oracle = 1.0 / (2.0 * sigma_oracle * sigma_oracle);
  const double p_oracle =
      std::exp(-beta_oracle * 1.0) / (std::exp(-beta_oracle * 1.0) + std::exp(-beta_oracle * 100.0));
  CHECK(p_oracle > 0.99);
  CHECK(row.probs[0] == doctest::Approx(p_oracle).epsilon(1e-3));
}

TEST_CASE("achieved row perplexities match the target within 1e-3") {
  Rng rng(4);
  Eigen::MatrixXd x(40, 5);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(-2, 2);
  const double perplexity = 10.0;
  const auto aff = compute_affinities(x, perplexity, default_threads());
  for (int i = 0; i < x.rows(); ++i) {
    const double achieved = row_perplexity_from_sigma(x, i, aff.sigmas(i));
    CHECK(std::abs(achieved - perplexity) < 1e-3);
  }
  CHECK(aff.joint.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("equidistant rows raise DegenerateRow when the target is unreachable") {
  // Equilateral-ish: 4 identical rows, no jitter applied.
  Eigen::MatrixXd x(5, 2);
  x << 0, 0, 0, 0, 0, 0, 0, 0, 9, 9;
  CHECK_THROWS_AS(compute_affinities(x, 1.0), DegenerateRow);
}

TEST_CASE("duplicate jitter separates identical rows deterministically") {
  Eigen::MatrixXd x(4, 3);
  x << 1, 1, 1, 1, 1, 1, 2, 2, 2, 3, 3, 3;
  const auto ids = make_ids(4);
  const auto a = jitter_duplicate_rows(x, ids, 5);
  const auto b = jitter_duplicate_rows(x, ids, 5);
  CHECK(a == b);
  CHECK((a.row(0) - a.row(1)).norm() > 0.0);
  CHECK((a.row(0) - a.row(1)).norm() < 1e-5);
  CHECK(a.row(2) == x.row(2));  // unique rows untouched
  CHECK(a.row(3) == x.row(3));

  const auto c = jitter_duplicate_rows(x, ids, 6);
  CHECK((a.row(0) - c.row(0)).norm() > 0.0);  // seed-keyed
}

TEST_CASE("tsne gradient matches central finite differences") {
  Rng rng(12);
  for (int n : {6, 9, 12}) {
    Eigen::MatrixXd x(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-1, 1);
    const auto aff = compute_affinities(x, 1.5);
    Eigen::MatrixXd y(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) y(i, j) = rng.uniform(-0.5, 0.5);

    const Eigen::MatrixXd analytic = tsne_gradient(aff.joint, y);
    const double step = 1e-5;
    double max_rel = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) {
        Eigen::MatrixXd lo = y, hi = y;
        lo(i, j) -= step;
        hi(i, j) += step;
        const double numeric = (tsne_kl(aff.joint, hi) - tsne_kl(aff.joint, lo)) / (2 * step);
        const double denom = std::max({std::abs(numeric), std::abs(analytic(i, j)), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic(i, j)) / denom);
      }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("student-t joint distribution sums to one") {
  Rng rng(21);
  Eigen::MatrixXd y(30, 2);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 2; ++j) y(i, j) = rng.uniform(-3, 3);
  const Eigen::MatrixXd q = student_t_joint(y);
  double total = 0.0;
  for (int i = 0; i < q.rows(); ++i)
    for (int j = 0; j < q.cols(); ++j) total += q(i, j);
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK(q.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical rows embed without structure") {
  Eigen::MatrixXd x(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = 1.0;
  EmbeddingConfig cfg;
  cfg.perplexity = 5.0 / 3.0;
  cfg.iterations = 1000;
  cfg.learning_rate = 20;  // gentler rate for a 6-point instance
  cfg.seed = 3;
  const auto res = tsne_embed(x, make_ids(6), cfg);
  CHECK(res.kl_final < 0.2);

  double dmin = 1e300, dmax = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      const double dx = res.points[std::size_t(i)].y1 - res.points[std::size_t(j)].y1;
      const double dy = res.points[std::size_t(i)].y2 - res.points[std::size_t(j)].y2;
      const double d = std::sqrt(dx * dx + dy * dy);
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
  CHECK(dmax / dmin <= 10.0);  // pairwise distances within one order of magnitude
}

TEST_CASE("two well separated blobs stay separable in the embedding") {
  auto [x, labels] = testutil::gaussian_blobs({{0, 0}, {20, 0}}, 50, 1.0, 33);
  EmbeddingConfig cfg;
  cfg.perplexity = 15;
  cfg.seed = 42;
  const auto res = tsne_embed(x, make_ids(100), cfg, default_threads());

  Eigen::MatrixXd y(100, 2);
  for (int i = 0; i < 100; ++i) {
    y(i, 0) = res.points[std::size_t(i)].y1;
    y(i, 1) = res.points[std::size_t(i)].y2;
  }
  KmeansOptions opts;
  opts.restarts = 10;
  opts.seed = 7;
  const auto model = kmeans_fit(y, 2, opts);
  CHECK(adjusted_rand_index(model.labels, labels) == doctest::Approx(1.0));
  CHECK(res.kl_final < res.kl_initial);
}

TEST_CASE("kl decreases from the initial configuration on structured input") {
  auto [x, _] = testutil::gaussian_blobs({{0, 0}, {8, 8}, {16, 0}}, 20, 1.0, 71);
  EmbeddingConfig cfg;
  cfg.perplexity = 10;
  cfg.iterations = 400;
  cfg.seed = 5;
  cfg.audit_q_sums = true;
  const auto res = tsne_embed(x, make_ids(60), cfg);
  CHECK(res.kl_final < res.kl_initial);
  CHECK(res.q_sum_max_dev < 1e-9);
}

TEST_CASE("embedding is bit-identical for a fixed seed and permutation-equivariant") {
  auto [x, _] = testutil::gaussian_blobs({{0, 0}, {10, 10}}, 15, 1.0, 14);
  const auto ids = make_ids(30);
  EmbeddingConfig cfg;
  cfg.perplexity = 5;
  cfg.iterations = 150;
  cfg.early_exaggeration_iters = 50;
  cfg.momentum_switch_iter = 50;
  cfg.seed = 1001;

  const auto a = tsne_embed(x, ids, cfg);
  const auto b = tsne_embed(x, ids, cfg, 4);  // thread count must not matter
  for (int i = 0; i < 30; ++i) {
    CHECK(a.points[std::size_t(i)].y1 == b.points[std::size_t(i)].y1);
    CHECK(a.points[std::size_t(i)].y2 == b.points[std::size_t(i)].y2);
  }

  // Reverse the row order; outputs must follow their ids bit-identically.
  Eigen::MatrixXd xr(30, x.cols());
  std::vector<std::string> idsr;
  for (int i = 0; i < 30; ++i) {
    xr.row(i) = x.row(29 - i);
    idsr.push_back(ids[std::size_t(29 - i)]);
  }
  const auto c = tsne_embed(xr, idsr, cfg);
  for (int i = 0; i < 30; ++i) {
    CHECK(c.points[std::size_t(i)].visit_id == a.points[std::size_t(29 - i)].visit_id);
    CHECK(c.points[std::size_t(i)].y1 == a.points[std::size_t(29 - i)].y1);
    CHECK(c.points[std::size_t(i)].y2 == a.points[std::size_t(29 - i)].y2);
  }

  EmbeddingConfig other = cfg;
  other.seed = 1002;
  const auto d = tsne_embed(x, ids, other);
  CHECK(d.points[0].y1 != a.points[0].y1);
}

TEST_CASE("a runaway learning rate reports NumericalDivergence with the iteration") {
  auto [x, _] = testutil::gaussian_blobs({{0, 0}, {5, 5}}, 10, 1.0, 2);
  EmbeddingConfig cfg;
  cfg.perplexity = 4;
  cfg.iterations = 200;
  cfg.learning_rate = 1e305;  // first update overflows the pairwise distances
  cfg.seed = 3;
  try {
    tsne_embed(x, make_ids(20), cfg);
    FAIL("expected NumericalDivergence");
  } catch (const NumericalDivergence& e) {
    CHECK(e.iteration >= 0);
    CHECK(e.iteration < 200);
  }
}
