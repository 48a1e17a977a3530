#include "subtyper/metrics.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>

namespace subtyper {

namespace {
double comb2(std::int64_t n) { return 0.5 * double(n) * double(n - 1); }
}  // namespace

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("label vectors differ in length");
  const std::int64_t n = std::int64_t(a.size());
  if (n < 2) return 1.0;

  std::map<std::pair<int, int>, std::int64_t> joint;
  std::map<int, std::int64_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }

  double sum_joint = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, c] : joint) sum_joint += comb2(c);
  for (const auto& [_, c] : rows) sum_rows += comb2(c);
  for (const auto& [_, c] : cols) sum_cols += comb2(c);

  const double expected = sum_rows * sum_cols / comb2(n);
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;  // both partitions trivial
  return (sum_joint - expected) / (maximum - expected);
}

}  // namespace subtyper
