#include "subtyper/transitions.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace subtyper {

const std::string& transition_class_name(TransitionClass c) {
  static const std::string names[3] = {"progression", "stable", "regression"};
  return names[int(c)];
}

TransitionClassification classify_transition(int source_group, int target_group,
                                             const SubtypeGrouping& grouping,
                                             std::int64_t interval_days,
                                             int long_threshold_days) {
  const int m = int(grouping.groups.size());
  if (source_group < 0 || source_group >= m)
    throw UnknownGroup("source group index " + std::to_string(source_group) + " out of range");
  if (target_group < 0 || target_group >= m)
    throw UnknownGroup("target group index " + std::to_string(target_group) + " out of range");

  TransitionClassification out{};
  if (target_group > source_group)
    out.cls = TransitionClass::kProgression;
  else if (target_group < source_group)
    out.cls = TransitionClass::kRegression;
  else
    out.cls = TransitionClass::kStable;

  out.stage_skip = false;
  if (out.cls == TransitionClass::kProgression) {
    const auto& src_levels = grouping.groups[std::size_t(source_group)].signature.levels;
    const auto& tgt_levels = grouping.groups[std::size_t(target_group)].signature.levels;
    if (!src_levels.empty() && !tgt_levels.empty()) {
      const int src_max = level_index(src_levels.back());
      const int tgt_min = level_index(tgt_levels.front());
      for (int g = 0; g < m && !out.stage_skip; ++g) {
        if (g == source_group || g == target_group) continue;
        for (CdrLevel l : grouping.groups[std::size_t(g)].signature.levels)
          if (level_index(l) > src_max && level_index(l) < tgt_min) {
            out.stage_skip = true;
            break;
          }
      }
    }
  }
  out.long_followup = interval_days > long_threshold_days;
  return out;
}

std::vector<TransitionRecord> extract_transitions(const Cohort& cohort,
                                                  const Assignments& assignments,
                                                  const SubtypeGrouping& grouping,
                                                  int long_threshold_days) {
  auto cluster_of = [&](const Visit& v) {
    auto it = assignments.find(v.visit_id);
    if (it == assignments.end())
      throw Error("visit '" + v.visit_id + "' has no cluster assignment");
    return it->second;
  };

  std::vector<TransitionRecord> records;
  for (const std::string& pid : cohort.patient_ids()) {
    const auto& idxs = cohort.visits_of(pid);
    for (std::size_t i = 1; i < idxs.size(); ++i) {
      const Visit& a = cohort.visits()[idxs[i - 1]];
      const Visit& b = cohort.visits()[idxs[i]];
      if (a.visit_date == b.visit_date) throw DuplicateDate(pid, a.visit_date);

      TransitionRecord r;
      r.patient_id = pid;
      r.source_visit = a.visit_id;
      r.target_visit = b.visit_id;
      r.source_date = a.visit_date;
      r.target_date = b.visit_date;
      r.source_cluster = cluster_of(a);
      r.target_cluster = cluster_of(b);
      r.source_group = grouping.group_of(r.source_cluster);
      r.target_group = grouping.group_of(r.target_cluster);
      r.interval_days = b.visit_date - a.visit_date;
      const auto cls =
          classify_transition(r.source_group, r.target_group, grouping, r.interval_days,
                              long_threshold_days);
      r.cls = cls.cls;
      r.stage_skip = cls.stage_skip;
      r.long_followup = cls.long_followup;
      records.push_back(std::move(r));
    }
  }
  // patient_ids() is sorted and per-patient visits are date-ordered, so the
  // records already come out sorted by (patient, source date).
  return records;
}

std::int64_t TransitionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (std::int64_t c : row) t += c;
  return t;
}

std::int64_t TransitionMatrix::at(const std::string& from, const std::string& to) const {
  auto idx = [&](const std::string& l) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == l) return i;
    throw Error("no matrix row/column labeled '" + l + "'");
  };
  return counts[idx(from)][idx(to)];
}

TransitionMatrix transition_matrix(const std::vector<TransitionRecord>& records,
                                   const SubtypeGrouping& grouping) {
  TransitionMatrix m;
  m.labels = grouping.labels_short();
  const std::size_t g = m.labels.size();
  m.counts.assign(g, std::vector<std::int64_t>(g, 0));
  for (const auto& r : records) {
    if (r.source_group < 0 || std::size_t(r.source_group) >= g ||
        r.target_group < 0 || std::size_t(r.target_group) >= g)
      throw UnknownGroup("record references group outside the grouping");
    ++m.counts[std::size_t(r.source_group)][std::size_t(r.target_group)];
  }
  return m;
}

void write_matrix_csv(const TransitionMatrix& m, std::ostream& out) {
  out << "start/end";
  for (const auto& l : m.labels) out << ',' << l;
  out << "\n";
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out << m.labels[i];
    for (std::size_t j = 0; j < m.labels.size(); ++j) out << ',' << m.counts[i][j];
    out << "\n";
  }
}

TransitionMatrix read_matrix_csv(std::istream& in) {
  TransitionMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty matrix csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream head(line);
  std::string cell;
  std::getline(head, cell, ',');  // "start/end"
  while (std::getline(head, cell, ',')) m.labels.push_back(cell);

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::getline(row, cell, ',');  // row label
    std::vector<std::int64_t> counts;
    while (std::getline(row, cell, ',')) counts.push_back(std::stoll(cell));
    if (counts.size() != m.labels.size()) throw Error("ragged matrix csv");
    m.counts.push_back(std::move(counts));
  }
  if (m.counts.size() != m.labels.size()) throw Error("matrix csv not square");
  return m;
}

ProgressionGraph progression_graph(const Cohort& cohort,
                                   const std::vector<TransitionRecord>& records,
                                   const Assignments& assignments,
                                   const std::vector<SubtypeProfile>& profiles,
                                   CdrLevel source_cdr, CdrLevel target_cdr,
                                   std::int64_t min_weight) {
  (void)assignments;
  ProgressionGraph g;
  g.source_cdr = source_cdr;
  g.target_cdr = target_cdr;
  g.min_weight = min_weight;

  for (const auto& p : profiles) {
    const bool has_src = p.cdr_histogram[std::size_t(level_index(source_cdr))] > 0;
    const bool has_tgt = p.cdr_histogram[std::size_t(level_index(target_cdr))] > 0;
    if (!has_src && !has_tgt) continue;
    GraphNode node;
    node.cluster = p.cluster;
    node.level = has_src ? source_cdr : target_cdr;
    node.role = has_src && has_tgt ? "both" : (has_src ? "source" : "target");
    g.nodes.push_back(node);
  }

  std::map<std::pair<int, int>, std::int64_t> weights;
  for (const auto& r : records) {
    const Visit* src = cohort.find_visit(r.source_visit);
    const Visit* tgt = cohort.find_visit(r.target_visit);
    if (!src || !tgt) throw Error("transition record references unknown visit");
    if (src->global_cdr != source_cdr || tgt->global_cdr != target_cdr) continue;
    ++weights[{r.source_cluster, r.target_cluster}];
  }
  for (const auto& [edge, w] : weights)
    if (w >= min_weight) g.edges.push_back({edge.first, edge.second, w});
  return g;
}

void write_transitions_csv(const std::vector<TransitionRecord>& records, std::ostream& out) {
  out << "patient_id,source_visit,target_visit,source_date,target_date,source_cluster,"
         "target_cluster,source_group,target_group,interval_days,class,stage_skip,"
         "long_followup\n";
  for (const auto& r : records) {
    out << r.patient_id << ',' << r.source_visit << ',' << r.target_visit << ','
        << r.source_date.to_string() << ',' << r.target_date.to_string() << ','
        << r.source_cluster << ',' << r.target_cluster << ",G" << r.source_group << ",G"
        << r.target_group << ',' << r.interval_days << ','
        << transition_class_name(r.cls) << ',' << (r.stage_skip ? "true" : "false") << ','
        << (r.long_followup ? "true" : "false") << "\n";
  }
}

}  // namespace subtyper
