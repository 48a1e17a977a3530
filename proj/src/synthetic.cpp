#include "subtyper/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "subtyper/rng.hpp"

namespace subtyper {

namespace {

// Severity-indexed score calibration: median-ish level and noise sd per
// instrument, clamped to the instrument range afterwards.
struct ScoreModel {
  std::array<double, kNumCdrLevels> base;
  double sd;
};

const std::array<ScoreModel, kNumCognitive> kScoreModels{{
    {{29, 25, 21, 15, 8}, 2.0},    // mmse
    {{15, 14, 12, 9, 5}, 1.5},     // boston_naming
    {{1, 6, 12, 18, 24}, 2.5},     // short_blessed
    {{18, 13, 10, 7, 4}, 2.5},     // verbal_fluency
    {{6, 3, 2, 1, 0}, 1.0},        // word_list_recall
    {{18, 14, 11, 7, 4}, 2.5},     // word_list_memory
}};

int sample_categorical(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return int(i);
  }
  return int(weights.size()) - 1;
}

CdrLevel jitter_level(CdrLevel l, Rng& rng) {
  const int idx = level_index(l);
  int step = rng.bernoulli(0.5) ? 1 : -1;
  if (idx + step < 0 || idx + step >= kNumCdrLevels) step = -step;  // reflect at the ends
  return level_from_index(idx + step);
}

}  // namespace

void validate_config(const GeneratorConfig& c) {
  if (c.patients < 0) throw InvalidConfig("patients", "must be >= 0");
  if (c.visits_min < 1) throw InvalidConfig("visits_min", "must be >= 1");
  if (c.visits_max < c.visits_min) throw InvalidConfig("visits_max", "must be >= visits_min");
  if (c.visits_mean < double(c.visits_min) || c.visits_mean > double(c.visits_max))
    throw InvalidConfig("visits_mean", "must lie within [visits_min, visits_max]");
  if (c.followup_mean_days <= 0) throw InvalidConfig("followup_mean_days", "must be > 0");
  if (c.followup_sd_days < 0) throw InvalidConfig("followup_sd_days", "must be >= 0");
  if (c.jitter_prob < 0.0 || c.jitter_prob > 0.5)
    throw InvalidConfig("jitter_prob", "must be in [0, 0.5]");
  if (c.patients > 0 && c.subtypes.empty())
    throw InvalidConfig("subtypes", "at least one planted subtype required");
  if (!(c.start_min <= c.start_max))
    throw InvalidConfig("start_min", "must not come after start_max");

  double weight_sum = 0.0;
  for (std::size_t s = 0; s < c.subtypes.size(); ++s) {
    const auto& st = c.subtypes[s];
    const std::string where = "subtypes[" + std::to_string(s) + "]";
    if (st.weight < 0) throw InvalidConfig(where + ".weight", "must be >= 0");
    weight_sum += st.weight;
    if (st.cdr_levels.empty() || st.cdr_levels.size() > 2)
      throw InvalidConfig(where + ".cdr_levels", "need 1 or 2 dominant levels");
    if (!st.cdr_weights.empty() && st.cdr_weights.size() != st.cdr_levels.size())
      throw InvalidConfig(where + ".cdr_weights", "size must match cdr_levels");
    for (double w : st.cdr_weights)
      if (w < 0) throw InvalidConfig(where + ".cdr_weights", "must be >= 0");
  }
  if (!c.subtypes.empty() && weight_sum <= 0.0)
    throw InvalidConfig("subtypes", "weights must not all be zero");

  if (!c.propensity.empty()) {
    const std::size_t m = planted_grouping(c.subtypes).size();
    if (c.propensity.size() != m)
      throw InvalidConfig("propensity", "need one row per planted group (" +
                                            std::to_string(m) + ")");
    for (std::size_t i = 0; i < m; ++i) {
      if (c.propensity[i].size() != m)
        throw InvalidConfig("propensity[" + std::to_string(i) + "]", "row length mismatch");
      double row = 0.0;
      for (double p : c.propensity[i]) {
        if (p < 0)
          throw InvalidConfig("propensity[" + std::to_string(i) + "]", "must be >= 0");
        row += p;
      }
      if (row <= 0.0)
        throw InvalidConfig("propensity[" + std::to_string(i) + "]",
                            "row must be normalizable");
    }
  }
  for (const auto& [code, rates] : c.diagnosis_prevalence)
    for (double r : rates)
      if (r < 0.0 || r > 1.0)
        throw InvalidConfig("diagnosis_prevalence." + code, "rates must be in [0, 1]");
  for (const auto& [name, rate] : c.missing_rate) {
    if (!feature_from_name(name))
      throw InvalidConfig("missing_rate." + name, "unknown feature");
    if (rate < 0.0 || rate > 0.5)
      throw InvalidConfig("missing_rate." + name, "must be in [0, 0.5]");
  }
}

std::vector<std::vector<int>> planted_grouping(const std::vector<PlantedSubtype>& subtypes) {
  // Signature = the sorted level-index set.
  std::map<std::vector<int>, std::vector<int>> by_sig;
  for (std::size_t s = 0; s < subtypes.size(); ++s) {
    std::vector<int> sig;
    for (CdrLevel l : subtypes[s].cdr_levels) sig.push_back(level_index(l));
    std::sort(sig.begin(), sig.end());
    by_sig[sig].push_back(int(s));
  }

  struct GroupTmp {
    double mean = 0.0;
    std::vector<int> members;
  };
  std::vector<GroupTmp> groups;
  for (auto& [sig, members] : by_sig) {
    GroupTmp g;
    g.members = members;
    for (int v : sig) g.mean += kCdrNumeric[std::size_t(v)];
    g.mean /= double(sig.size());
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(), [](const GroupTmp& a, const GroupTmp& b) {
    if (a.mean != b.mean) return a.mean < b.mean;
    return a.members.front() < b.members.front();
  });

  std::vector<std::vector<int>> out;
  out.reserve(groups.size());
  for (auto& g : groups) out.push_back(std::move(g.members));
  return out;
}

GeneratedCohort generate_cohort(const GeneratorConfig& config) {
  validate_config(config);

  const auto groups = planted_grouping(config.subtypes);
  std::vector<int> group_of_subtype(config.subtypes.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int s : groups[g]) group_of_subtype[std::size_t(s)] = int(g);

  // Normalized propensity (defaults to "stay in the same group").
  std::vector<std::vector<double>> propensity = config.propensity;
  if (propensity.empty()) {
    propensity.assign(groups.size(), std::vector<double>(groups.size(), 0.0));
    for (std::size_t g = 0; g < groups.size(); ++g) propensity[g][g] = 1.0;
  }
  for (auto& row : propensity) {
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& p : row) p /= sum;
  }

  std::vector<double> subtype_weights;
  for (const auto& st : config.subtypes) subtype_weights.push_back(st.weight);
  std::vector<std::vector<double>> weights_in_group(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int s : groups[g]) weights_in_group[g].push_back(config.subtypes[std::size_t(s)].weight);

  GroundTruth truth;
  for (const auto& st : config.subtypes) truth.subtype_names.push_back(st.name);
  truth.groups = groups;
  truth.propensity = propensity;

  const std::uint64_t patient_salt = derive_seed(config.seed, "patient");
  const std::int64_t start_span = config.start_max - config.start_min;

  std::vector<Visit> visits;
  long long visit_counter = 0;
  for (int p = 0; p < config.patients; ++p) {
    Rng rng(mix_seed(patient_salt, std::uint64_t(p)));
    char pid[16];
    std::snprintf(pid, sizeof pid, "P%05d", p);

    int nvisits = config.visits_min + rng.poisson(config.visits_mean - double(config.visits_min));
    nvisits = std::clamp(nvisits, config.visits_min, config.visits_max);

    int subtype = sample_categorical(rng, subtype_weights);
    Date date = config.start_min.plus_days(std::int64_t(rng.below(std::uint64_t(start_span + 1))));

    for (int v = 0; v < nvisits; ++v) {
      const PlantedSubtype& st = config.subtypes[std::size_t(subtype)];
      Visit visit;
      char vid[24];
      std::snprintf(vid, sizeof vid, "V%06lld", visit_counter++);
      visit.visit_id = vid;
      visit.patient_id = pid;
      visit.visit_date = date;

      std::vector<double> level_weights =
          st.cdr_weights.empty() ? std::vector<double>(st.cdr_levels.size(), 1.0)
                                 : st.cdr_weights;
      visit.global_cdr = st.cdr_levels[std::size_t(sample_categorical(rng, level_weights))];

      for (int c = 0; c < kNumComponents; ++c) {
        CdrLevel lvl = st.component_medians[std::size_t(c)];
        if (config.jitter_prob > 0.0 && rng.bernoulli(config.jitter_prob))
          lvl = jitter_level(lvl, rng);
        visit.components.at(c) = lvl;
      }

      const int li = level_index(visit.global_cdr);
      for (int c = 0; c < kNumCognitive; ++c) {
        const ScoreModel& m = kScoreModels[std::size_t(c)];
        int score = int(std::llround(rng.normal(m.base[std::size_t(li)], m.sd)));
        const ScoreRange r = cognitive_range(c);
        score = std::max(score, r.min);
        if (r.max >= 0) score = std::min(score, r.max);
        visit.cognitive.at(c) = score;
      }

      for (const auto& [code, rates] : config.diagnosis_prevalence)
        if (rng.bernoulli(rates[std::size_t(li)])) visit.diagnoses.push_back(code);
      std::sort(visit.diagnoses.begin(), visit.diagnoses.end());

      truth.visit_subtype[visit.visit_id] = subtype;
      visits.push_back(std::move(visit));

      if (v + 1 < nvisits) {
        const int g = group_of_subtype[std::size_t(subtype)];
        const int g_next = sample_categorical(rng, propensity[std::size_t(g)]);
        const int within = sample_categorical(rng, weights_in_group[std::size_t(g_next)]);
        subtype = groups[std::size_t(g_next)][std::size_t(within)];
        const double gap = rng.normal(config.followup_mean_days, config.followup_sd_days);
        date = date.plus_days(std::max<std::int64_t>(1, std::llround(gap)));
      }
    }
  }

  // Missingness last, one stream per feature over the emitted visit order.
  for (const auto& [name, rate] : config.missing_rate) {
    if (rate <= 0.0) continue;
    const Feature f = *feature_from_name(name);
    Rng rng(derive_seed(config.seed, "missing:" + name));
    for (Visit& v : visits)
      if (rng.bernoulli(rate)) set_feature_value(v, f, std::nullopt);
  }

  GeneratedCohort out{Cohort(std::move(visits), "synthetic"), std::move(truth)};
  return out;
}

std::string GroundTruth::to_json() const {
  nlohmann::json j;
  j["subtypes"] = subtype_names;
  j["groups"] = groups;
  j["propensity"] = propensity;
  nlohmann::json vs = nlohmann::json::object();
  for (const auto& [vid, s] : visit_subtype) vs[vid] = s;
  j["visit_subtype"] = vs;
  return j.dump(2);
}

}  // namespace subtyper
