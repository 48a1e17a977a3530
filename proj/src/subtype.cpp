#include "subtyper/subtype.hpp"

#include <algorithm>
#include <cmath>

namespace subtyper {

std::string Homogeneity::label() const {
  if (kind == HomogeneityKind::kMixed) return "Mixed";
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += "/";
    out += cdr_token(levels[i]);
  }
  out += kind == HomogeneityKind::kHomogeneous ? " Homogenous" : " Composite";
  return out;
}

namespace {

// Order statistic at sorted position `pos` of a level-count histogram.
CdrLevel histogram_order_stat(const std::array<long long, kNumCdrLevels>& counts,
                              long long pos) {
  long long acc = 0;
  for (int li = 0; li < kNumCdrLevels; ++li) {
    acc += counts[std::size_t(li)];
    if (pos < acc) return CdrLevel(li);
  }
  return CdrLevel::kSevere;
}

// Lower-middle median of m values: sorted index (m-1)/2.
CdrLevel histogram_median(const std::array<long long, kNumCdrLevels>& counts, long long m) {
  return histogram_order_stat(counts, (m - 1) / 2);
}

}  // namespace

std::vector<SubtypeProfile> profile_subtypes(const Cohort& cohort,
                                             const Assignments& assignments, double purity) {
  std::map<int, SubtypeProfile> by_cluster;
  for (const Visit& v : cohort.visits()) {
    auto it = assignments.find(v.visit_id);
    if (it == assignments.end())
      throw Error("visit '" + v.visit_id + "' has no cluster assignment");
    SubtypeProfile& p = by_cluster[it->second];
    p.cluster = it->second;
    ++p.visit_count;
    ++p.cdr_histogram[std::size_t(level_index(v.global_cdr))];
    p.mean_cdr += cdr_numeric(v.global_cdr);
    if (!v.components.complete())
      throw Error("visit '" + v.visit_id + "' has missing components; impute first");
    for (int c = 0; c < kNumComponents; ++c)
      ++p.components[std::size_t(c)]
            .level_counts[std::size_t(level_index(*v.components.at(c)))];
  }

  std::vector<SubtypeProfile> out;
  out.reserve(by_cluster.size());
  for (auto& [cluster, p] : by_cluster) {
    p.mean_cdr /= double(p.visit_count);
    for (int c = 0; c < kNumComponents; ++c) {
      ComponentDistribution& dist = p.components[std::size_t(c)];
      const long long m = p.visit_count;
      dist.median = histogram_median(dist.level_counts, m);
      // Tukey hinges: lower-middle medians of the lower and upper halves.
      const long long half = m / 2;
      if (half > 0) {
        dist.q1 = histogram_order_stat(dist.level_counts, (half - 1) / 2);
        dist.q3 = histogram_order_stat(dist.level_counts, m - half + (half - 1) / 2);
      } else {
        dist.q1 = dist.median;
        dist.q3 = dist.median;
      }
    }
    p.homogeneity = classify_homogeneity(p, purity);
    out.push_back(std::move(p));
  }
  return out;  // std::map iteration is already ascending by cluster id
}

Homogeneity classify_homogeneity(const SubtypeProfile& profile, double purity) {
  if (profile.visit_count <= 0) throw Error("empty profile");
  std::array<int, kNumCdrLevels> idx{0, 1, 2, 3, 4};
  // Most frequent first; ties prefer the lower level.
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const long long ca = profile.cdr_histogram[std::size_t(a)];
    const long long cb = profile.cdr_histogram[std::size_t(b)];
    if (ca != cb) return ca > cb;
    return a < b;
  });
  const double total = double(profile.visit_count);
  const double top1 = double(profile.cdr_histogram[std::size_t(idx[0])]);
  const double top2 = top1 + double(profile.cdr_histogram[std::size_t(idx[1])]);

  Homogeneity h;
  if (top1 / total >= purity) {
    h.kind = HomogeneityKind::kHomogeneous;
    h.levels = {CdrLevel(idx[0])};
  } else if (top2 / total >= purity) {
    h.kind = HomogeneityKind::kComposite;
    h.levels = {CdrLevel(std::min(idx[0], idx[1])), CdrLevel(std::max(idx[0], idx[1]))};
  } else {
    h.kind = HomogeneityKind::kMixed;
    h.levels.clear();
  }
  return h;
}

InterSubtypeVariability inter_subtype_variability(const std::vector<SubtypeProfile>& profiles,
                                                  CdrLevel level) {
  InterSubtypeVariability out;
  out.level = level;
  for (const auto& p : profiles)
    if (p.homogeneity.kind == HomogeneityKind::kHomogeneous &&
        p.homogeneity.levels.front() == level)
      out.clusters.push_back(p.cluster);
  if (out.clusters.size() < 2) throw InsufficientSubtypes(level, int(out.clusters.size()));

  for (int c = 0; c < kNumComponents; ++c) {
    ComponentSpread& spread = out.components[std::size_t(c)];
    spread.component = kComponentNames[std::size_t(c)];
    double lo = 1e9, hi = -1e9, mean = 0.0;
    for (const auto& p : profiles) {
      if (std::find(out.clusters.begin(), out.clusters.end(), p.cluster) ==
          out.clusters.end())
        continue;
      const double med = cdr_numeric(p.components[std::size_t(c)].median);
      spread.medians_by_cluster[p.cluster] = med;
      lo = std::min(lo, med);
      hi = std::max(hi, med);
      mean += med;
    }
    mean /= double(out.clusters.size());
    double var = 0.0;
    for (const auto& [_, med] : spread.medians_by_cluster) var += (med - mean) * (med - mean);
    spread.variance = var / double(out.clusters.size());
    spread.range = hi - lo;
  }
  return out;
}

IntraSubtypeVariability intra_subtype_variability(const SubtypeProfile& profile) {
  if (profile.visit_count <= 0) throw Error("empty profile");
  IntraSubtypeVariability out;
  out.cluster = profile.cluster;
  double lo = 1e9, hi = -1e9;
  for (int c = 0; c < kNumComponents; ++c) {
    const CdrLevel med = profile.components[std::size_t(c)].median;
    out.medians[std::size_t(c)] = med;
    const double v = cdr_numeric(med);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    if (med == CdrLevel::kNormal)
      out.intact.push_back(kComponentNames[std::size_t(c)]);
    else
      out.impaired.push_back(kComponentNames[std::size_t(c)]);
  }
  out.range = hi - lo;
  return out;
}

int SubtypeGrouping::group_of(int cluster) const {
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (std::find(groups[g].clusters.begin(), groups[g].clusters.end(), cluster) !=
        groups[g].clusters.end())
      return int(g);
  throw UnknownGroup(cluster);
}

std::vector<std::string> SubtypeGrouping::labels_short() const {
  std::vector<std::string> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g.id);
  return out;
}

SubtypeGrouping group_subtypes(const std::vector<SubtypeProfile>& profiles) {
  if (profiles.empty()) throw Error("no profiles to group");

  // Signature key: kind + level set. All mixed subtypes share one group.
  std::map<std::string, SubtypeGroup> by_sig;
  std::map<std::string, long long> sig_visits;
  std::map<std::string, double> sig_cdr_sum;
  for (const auto& p : profiles) {
    const std::string key = p.homogeneity.label();
    SubtypeGroup& g = by_sig[key];
    g.signature = p.homogeneity;
    g.label = key;
    g.clusters.push_back(p.cluster);
    sig_visits[key] += p.visit_count;
    sig_cdr_sum[key] += p.mean_cdr * double(p.visit_count);
  }

  SubtypeGrouping out;
  for (auto& [key, g] : by_sig) {
    std::sort(g.clusters.begin(), g.clusters.end());
    g.mean_cdr = sig_cdr_sum[key] / double(sig_visits[key]);
    out.groups.push_back(std::move(g));
  }
  std::sort(out.groups.begin(), out.groups.end(),
            [](const SubtypeGroup& a, const SubtypeGroup& b) {
              if (a.mean_cdr != b.mean_cdr) return a.mean_cdr < b.mean_cdr;
              return a.clusters.front() < b.clusters.front();
            });
  for (std::size_t g = 0; g < out.groups.size(); ++g)
    out.groups[g].id = "G" + std::to_string(g);
  return out;
}

}  // namespace subtyper
