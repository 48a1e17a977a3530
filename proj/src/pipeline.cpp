#include "subtyper/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "subtyper/comorbidity.hpp"
#include "subtyper/ingest.hpp"
#include "subtyper/parallel.hpp"
#include "subtyper/rng.hpp"
#include "subtyper/version.hpp"

namespace subtyper {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const char* file) {
  return (fs::path(dir) / file).string();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError(path, "cannot write");
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "no such file or unreadable");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void require_artifact(const std::string& path) {
  if (!fs::exists(path)) throw MissingArtifact(path);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CdrLevel parse_level_or_throw(const std::string& key, const std::string& token) {
  auto lvl = parse_cdr_level(token);
  if (!lvl) throw ConfigError(key + ": '" + token + "' is not a CDR level");
  return *lvl;
}

GeneratorConfig resolve_generator(Config& cfg, std::uint64_t master_seed) {
  GeneratorConfig g;
  g.patients = int(cfg.get_int("generate.patients", 0));
  g.visits_min = int(cfg.get_int("generate.visits_min", g.visits_min));
  g.visits_max = int(cfg.get_int("generate.visits_max", g.visits_max));
  g.visits_mean = cfg.get_double("generate.visits_mean", g.visits_mean);
  g.followup_mean_days = cfg.get_double("generate.followup_mean_days", g.followup_mean_days);
  g.followup_sd_days = cfg.get_double("generate.followup_sd_days", g.followup_sd_days);
  g.jitter_prob = cfg.get_double("generate.jitter_prob", g.jitter_prob);
  g.seed = derive_seed(master_seed, "generate");
  if (auto v = cfg.get("generate.start_min")) {
    auto d = Date::parse(*v);
    if (!d) throw ConfigError("generate.start_min: bad date '" + *v + "'");
    g.start_min = *d;
  }
  if (auto v = cfg.get("generate.start_max")) {
    auto d = Date::parse(*v);
    if (!d) throw ConfigError("generate.start_max: bad date '" + *v + "'");
    g.start_max = *d;
  }

  // Subtype blocks, keyed by name in lexicographic order.
  std::set<std::string> names;
  for (const auto& key : cfg.keys_with_prefix("generate.subtype.")) {
    const std::string rest = key.substr(std::string("generate.subtype.").size());
    const std::size_t dot = rest.find('.');
    if (dot == std::string::npos) throw ConfigError(key + ": expected subtype.<name>.<field>");
    names.insert(rest.substr(0, dot));
  }
  for (const auto& name : names) {
    const std::string base = "generate.subtype." + name + ".";
    PlantedSubtype st;
    st.name = name;
    const auto comp = cfg.get_list(base + "components");
    if (comp.size() != std::size_t(kNumComponents))
      throw ConfigError(base + "components: need exactly 6 levels");
    for (int i = 0; i < kNumComponents; ++i)
      st.component_medians[std::size_t(i)] =
          parse_level_or_throw(base + "components", comp[std::size_t(i)]);
    for (const auto& tok : cfg.get_list(base + "cdr"))
      st.cdr_levels.push_back(parse_level_or_throw(base + "cdr", tok));
    std::sort(st.cdr_levels.begin(), st.cdr_levels.end(),
              [](CdrLevel a, CdrLevel b) { return level_index(a) < level_index(b); });
    st.cdr_weights = cfg.get_double_list(base + "cdr_weights");
    st.weight = cfg.get_double(base + "weight", 1.0);
    g.subtypes.push_back(std::move(st));
  }

  for (std::size_t row = 0;; ++row) {
    const std::string key = "generate.propensity." + std::to_string(row);
    if (!cfg.has(key)) break;
    g.propensity.push_back(cfg.get_double_list(key));
  }

  for (const auto& key : cfg.keys_with_prefix("generate.diagnosis.")) {
    const std::string code = key.substr(std::string("generate.diagnosis.").size());
    const auto rates = cfg.get_double_list(key);
    if (rates.size() != std::size_t(kNumCdrLevels))
      throw ConfigError(key + ": need 5 per-level rates");
    std::array<double, kNumCdrLevels> arr{};
    std::copy(rates.begin(), rates.end(), arr.begin());
    g.diagnosis_prevalence[code] = arr;
  }

  for (const auto& key : cfg.keys_with_prefix("generate.missing.")) {
    const std::string feat = key.substr(std::string("generate.missing.").size());
    g.missing_rate[feat] = cfg.get_double(key, 0.0);
  }
  return g;
}

std::vector<Feature> resolve_feature_list(Config& cfg, const std::string& key,
                                          const std::string& fallback) {
  const std::string spec = cfg.get_string(key, fallback);
  if (spec == "all") return all_features();
  if (spec == "components") return component_features();
  if (spec == "cognitive") return cognitive_features();
  std::vector<Feature> out;
  std::stringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    auto f = feature_from_name(cell);
    if (!f) throw ConfigError(key + ": unknown feature '" + cell + "'");
    out.push_back(*f);
  }
  if (out.empty()) throw ConfigError(key + ": empty feature list");
  return out;
}

}  // namespace

PipelineConfig resolve_pipeline_config(Config& cfg, const PipelineOverrides& overrides) {
  PipelineConfig p;
  p.master_seed = cfg.get_u64("seed", 0);
  if (overrides.seed) p.master_seed = *overrides.seed;
  p.threads = int(cfg.get_int("threads", default_threads()));
  if (overrides.threads) p.threads = *overrides.threads;
  if (p.threads < 1) throw ConfigError("threads: must be >= 1");
  p.out_dir = cfg.get_string("out", "run");
  if (overrides.out_dir) p.out_dir = *overrides.out_dir;
  p.input_csv = cfg.get_string("input", "");

  p.generator = resolve_generator(cfg, p.master_seed);
  p.generate_enabled = p.generator.patients > 0 && p.input_csv.empty();

  p.impute_features = resolve_feature_list(cfg, "ingest.impute", "all");
  p.warn_threshold = cfg.get_double("ingest.warn_threshold", 0.05);

  p.embed.perplexity = cfg.get_double("embed.perplexity", 30.0);
  p.embed.iterations = int(cfg.get_int("embed.iterations", 1000));
  p.embed.early_exaggeration_factor = cfg.get_double("embed.exaggeration", 12.0);
  p.embed.early_exaggeration_iters = int(cfg.get_int("embed.exaggeration_iters", 250));
  p.embed.learning_rate = cfg.get_double("embed.learning_rate", 200.0);
  p.embed.momentum_initial = cfg.get_double("embed.momentum_initial", 0.5);
  p.embed.momentum_final = cfg.get_double("embed.momentum_final", 0.8);
  p.embed.momentum_switch_iter = int(cfg.get_int("embed.momentum_switch_iter", 250));
  p.embed.seed = derive_seed(p.master_seed, "embed");
  p.embed_features = cfg.get_string("embed.features", "components");
  if (p.embed_features != "components" && p.embed_features != "cognitive" &&
      p.embed_features != "all")
    throw ConfigError("embed.features: expected components|cognitive|all");
  p.standardize = cfg.get_bool("embed.standardize", false);

  p.k_min = int(cfg.get_int("cluster.k_min", 1));
  p.k_max = int(cfg.get_int("cluster.k_max", 20));
  p.gap_references = int(cfg.get_int("cluster.gap_references", 20));
  const std::string mode = cfg.get_string("cluster.reference_mode", "bounding_box");
  if (mode == "bounding_box")
    p.gap_mode = GapReferenceMode::kBoundingBox;
  else if (mode == "pca_aligned")
    p.gap_mode = GapReferenceMode::kPcaAligned;
  else
    throw ConfigError("cluster.reference_mode: expected bounding_box|pca_aligned");
  p.restarts = int(cfg.get_int("cluster.restarts", 10));
  if (auto v = cfg.get_int("cluster.k", -1); v > 0) p.manual_k = int(v);
  if (overrides.k) p.manual_k = *overrides.k;
  p.cluster_space = cfg.get_string("cluster.space", "embedded");
  if (overrides.cluster_space) p.cluster_space = *overrides.cluster_space;
  if (p.cluster_space != "embedded" && p.cluster_space != "raw")
    throw ConfigError("cluster.space: expected embedded|raw");

  p.purity = cfg.get_double("subtype.purity", 0.9);
  if (p.purity <= 0.5 || p.purity > 1.0)
    throw ConfigError("subtype.purity: must be in (0.5, 1]");

  p.long_threshold_days = int(cfg.get_int("transitions.long_threshold_days", 365));
  p.graph_source = parse_level_or_throw("graph.source_cdr",
                                        cfg.get_string("graph.source_cdr", "0.5"));
  p.graph_target =
      parse_level_or_throw("graph.target_cdr", cfg.get_string("graph.target_cdr", "1"));
  p.graph_min_weight = cfg.get_int("graph.min_weight", 4);
  p.comorbidity_top = int(cfg.get_int("comorbidity.top", 5));
  p.comorbidity_per_patient = cfg.get_bool("comorbidity.per_patient", false);

  cfg.require_all_consumed();
  return p;
}

std::map<std::string, std::string> effective_config(const PipelineConfig& cfg) {
  std::map<std::string, std::string> m;
  auto put = [&m](const std::string& key, const std::string& value) { m[key] = value; };
  auto put_d = [&put](const std::string& key, double v) { put(key, fmt_double(v)); };
  auto put_i = [&put](const std::string& key, long long v) { put(key, std::to_string(v)); };

  put("seed", std::to_string(cfg.master_seed));
  put_i("threads", cfg.threads);
  put("out", cfg.out_dir);
  if (!cfg.input_csv.empty()) put("input", cfg.input_csv);

  const GeneratorConfig& g = cfg.generator;
  put_i("generate.patients", g.patients);
  put_i("generate.visits_min", g.visits_min);
  put_i("generate.visits_max", g.visits_max);
  put_d("generate.visits_mean", g.visits_mean);
  put_d("generate.followup_mean_days", g.followup_mean_days);
  put_d("generate.followup_sd_days", g.followup_sd_days);
  put_d("generate.jitter_prob", g.jitter_prob);
  put("generate.start_min", g.start_min.to_string());
  put("generate.start_max", g.start_max.to_string());
  auto join_levels = [](const auto& levels) {
    std::string out;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (i) out += ",";
      out += cdr_token(levels[i]);
    }
    return out;
  };
  auto join_doubles = [](const auto& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out += ",";
      out += fmt_double(xs[i]);
    }
    return out;
  };
  for (const auto& st : g.subtypes) {
    const std::string base = "generate.subtype." + st.name + ".";
    put(base + "components",
        join_levels(std::vector<CdrLevel>(st.component_medians.begin(),
                                          st.component_medians.end())));
    put(base + "cdr", join_levels(st.cdr_levels));
    if (!st.cdr_weights.empty()) put(base + "cdr_weights", join_doubles(st.cdr_weights));
    put_d(base + "weight", st.weight);
  }
  for (std::size_t r = 0; r < g.propensity.size(); ++r)
    put("generate.propensity." + std::to_string(r), join_doubles(g.propensity[r]));
  for (const auto& [code, rates] : g.diagnosis_prevalence)
    put("generate.diagnosis." + code,
        join_doubles(std::vector<double>(rates.begin(), rates.end())));
  for (const auto& [feature, rate] : g.missing_rate)
    put_d("generate.missing." + feature, rate);

  std::string impute;
  for (std::size_t i = 0; i < cfg.impute_features.size(); ++i) {
    if (i) impute += ",";
    impute += feature_name(cfg.impute_features[i]);
  }
  put("ingest.impute", impute);
  put_d("ingest.warn_threshold", cfg.warn_threshold);

  put_d("embed.perplexity", cfg.embed.perplexity);
  put_i("embed.iterations", cfg.embed.iterations);
  put_d("embed.exaggeration", cfg.embed.early_exaggeration_factor);
  put_i("embed.exaggeration_iters", cfg.embed.early_exaggeration_iters);
  put_d("embed.learning_rate", cfg.embed.learning_rate);
  put_d("embed.momentum_initial", cfg.embed.momentum_initial);
  put_d("embed.momentum_final", cfg.embed.momentum_final);
  put_i("embed.momentum_switch_iter", cfg.embed.momentum_switch_iter);
  put("embed.features", cfg.embed_features);
  put("embed.standardize", cfg.standardize ? "true" : "false");

  put_i("cluster.k_min", cfg.k_min);
  put_i("cluster.k_max", cfg.k_max);
  put_i("cluster.gap_references", cfg.gap_references);
  put("cluster.reference_mode",
      cfg.gap_mode == GapReferenceMode::kBoundingBox ? "bounding_box" : "pca_aligned");
  put_i("cluster.restarts", cfg.restarts);
  if (cfg.manual_k) put_i("cluster.k", *cfg.manual_k);
  put("cluster.space", cfg.cluster_space);

  put_d("subtype.purity", cfg.purity);
  put_i("transitions.long_threshold_days", cfg.long_threshold_days);
  put("graph.source_cdr", cdr_token(cfg.graph_source));
  put("graph.target_cdr", cdr_token(cfg.graph_target));
  put_i("graph.min_weight", cfg.graph_min_weight);
  put_i("comorbidity.top", cfg.comorbidity_top);
  put("comorbidity.per_patient", cfg.comorbidity_per_patient ? "true" : "false");
  return m;
}

Eigen::MatrixXd feature_matrix(const Cohort& cohort, const std::vector<Feature>& features,
                               bool standardize) {
  Eigen::MatrixXd x(Eigen::Index(cohort.size()), Eigen::Index(features.size()));
  for (std::size_t i = 0; i < cohort.size(); ++i)
    for (std::size_t j = 0; j < features.size(); ++j) {
      auto v = feature_value(cohort.visits()[i], features[j]);
      if (!v)
        throw Error("visit '" + cohort.visits()[i].visit_id + "' is missing feature '" +
                    feature_name(features[j]) + "'; run imputation first");
      x(Eigen::Index(i), Eigen::Index(j)) = *v;
    }
  if (standardize) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double mean = x.col(j).mean();
      const double var = (x.col(j).array() - mean).square().sum() / double(x.rows());
      const double sd = std::sqrt(var);
      if (sd > 0.0)
        x.col(j) = (x.col(j).array() - mean) / sd;
      else
        x.col(j).setZero();
    }
  }
  return x;
}

std::vector<std::string> visit_ids(const Cohort& cohort) {
  std::vector<std::string> ids;
  ids.reserve(cohort.size());
  for (const Visit& v : cohort.visits()) ids.push_back(v.visit_id);
  return ids;
}

std::vector<int> severity_cluster_order(const SubtypeGrouping& grouping) {
  std::vector<int> order;
  for (const auto& g : grouping.groups)
    for (int c : g.clusters) order.push_back(c);
  return order;
}

void run_generate(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  GeneratedCohort gen = generate_cohort(cfg.generator);
  write_cohort(gen.cohort, join(cfg.out_dir, artifact::kCohort));
  write_text_file(join(cfg.out_dir, artifact::kGroundTruth), gen.truth.to_json() + "\n");
}

void run_ingest(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const std::string source =
      cfg.input_csv.empty() ? join(cfg.out_dir, artifact::kCohort) : cfg.input_csv;
  Cohort cohort = parse_cohort(source);

  const ValidationReport report = validate_cohort(cohort);
  if (!report.ok()) {
    std::string msg = "cohort fails validation:";
    for (std::size_t i = 0; i < report.violations.size() && i < 5; ++i)
      msg += " [" + report.violations[i].rule + " @ " + report.violations[i].visit_id + "]";
    throw Error(msg);
  }

  ImputeResult imputed = median_impute(cohort, cfg.impute_features, cfg.warn_threshold);
  for (const auto& feature : imputed.summary.warnings)
    std::fprintf(stderr, "warning: feature '%s' exceeds the %.0f%% missingness threshold\n",
                 feature.c_str(), cfg.warn_threshold * 100.0);
  write_cohort(imputed.cohort, join(cfg.out_dir, artifact::kImputedCohort));
  write_text_file(join(cfg.out_dir, artifact::kMissingness), imputed.summary.to_json() + "\n");
}

void run_embed(const PipelineConfig& cfg) {
  const std::string source = join(cfg.out_dir, artifact::kImputedCohort);
  require_artifact(source);
  Cohort cohort = parse_cohort(source);

  std::vector<Feature> feats = cfg.embed_features == "components" ? component_features()
                               : cfg.embed_features == "cognitive"
                                   ? cognitive_features()
                                   : all_features();
  const Eigen::MatrixXd x = feature_matrix(cohort, feats, cfg.standardize);
  const EmbedResult res = tsne_embed(x, visit_ids(cohort), cfg.embed, cfg.threads);

  std::ostringstream csv;
  csv << "visit_id,y1,y2\n";
  for (const auto& pt : res.points)
    csv << pt.visit_id << ',' << fmt_double(pt.y1) << ',' << fmt_double(pt.y2) << "\n";
  write_text_file(join(cfg.out_dir, artifact::kEmbedding), csv.str());

  json meta;
  meta["perplexity"] = cfg.embed.perplexity;
  meta["iterations"] = cfg.embed.iterations;
  meta["early_exaggeration_factor"] = cfg.embed.early_exaggeration_factor;
  meta["early_exaggeration_iters"] = cfg.embed.early_exaggeration_iters;
  meta["learning_rate"] = cfg.embed.learning_rate;
  meta["momentum_initial"] = cfg.embed.momentum_initial;
  meta["momentum_final"] = cfg.embed.momentum_final;
  meta["momentum_switch_iter"] = cfg.embed.momentum_switch_iter;
  meta["seed"] = cfg.embed.seed;
  meta["features"] = cfg.embed_features;
  meta["standardize"] = cfg.standardize;
  meta["kl_initial"] = res.kl_initial;
  meta["kl_final"] = res.kl_final;
  write_text_file(join(cfg.out_dir, artifact::kEmbeddingMeta), meta.dump(2) + "\n");
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> read_embedding_csv(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "no such file or unreadable");
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty embedding csv");
  std::vector<std::string> ids;
  std::vector<std::array<double, 2>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, a, b;
    if (!std::getline(ss, id, ',') || !std::getline(ss, a, ',') || !std::getline(ss, b, ','))
      throw Error(path + ": bad embedding row '" + line + "'");
    ids.push_back(id);
    rows.push_back({std::stod(a), std::stod(b)});
  }
  Eigen::MatrixXd y(Eigen::Index(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(Eigen::Index(i), 0) = rows[i][0];
    y(Eigen::Index(i), 1) = rows[i][1];
  }
  return {std::move(ids), std::move(y)};
}

Assignments read_assignments_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "no such file or unreadable");
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty assignments csv");
  Assignments out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw Error(path + ": bad assignment row '" + line + "'");
    out[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
  }
  return out;
}

void run_cluster(const PipelineConfig& cfg) {
  std::vector<std::string> ids;
  Eigen::MatrixXd points;
  if (cfg.cluster_space == "embedded") {
    const std::string source = join(cfg.out_dir, artifact::kEmbedding);
    require_artifact(source);
    std::tie(ids, points) = read_embedding_csv(source);
  } else {
    const std::string source = join(cfg.out_dir, artifact::kImputedCohort);
    require_artifact(source);
    Cohort cohort = parse_cohort(source);
    ids = visit_ids(cohort);
    points = feature_matrix(cohort, component_features(), /*standardize=*/false);
  }

  const std::uint64_t gap_seed = derive_seed(cfg.master_seed, "cluster:gap");
  const int k_max = std::min(cfg.k_max, int(points.rows()));
  GapResult gap = gap_statistic(points, cfg.k_min, k_max, cfg.gap_references, cfg.gap_mode,
                                cfg.restarts, gap_seed, cfg.threads);

  int chosen_k;
  std::string provenance;
  if (cfg.manual_k) {
    chosen_k = *cfg.manual_k;
    provenance = "manual";
  } else if (gap.one_se_k) {
    chosen_k = *gap.one_se_k;
    provenance = "auto_one_se";
  } else {
    throw Error("no K selected; pass --k or widen the k range");
  }

  KmeansOptions opts;
  opts.restarts = cfg.restarts;
  opts.seed = derive_seed(cfg.master_seed, "cluster:kmeans");
  KmeansModel model = kmeans_fit(points, chosen_k, opts);

  std::ostringstream csv;
  csv << "visit_id,cluster\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    csv << ids[i] << ',' << model.labels[i] << "\n";
  write_text_file(join(cfg.out_dir, artifact::kAssignments), csv.str());

  json j;
  j["seed"] = gap.seed;
  j["kmeans_seed"] = opts.seed;
  j["b_references"] = gap.b_references;
  j["reference_mode"] =
      gap.mode == GapReferenceMode::kBoundingBox ? "bounding_box" : "pca_aligned";
  j["space"] = cfg.cluster_space;
  json entries = json::array();
  for (const auto& e : gap.entries)
    entries.push_back({{"k", e.k},
                       {"gap", e.gap},
                       {"log_w", e.log_w},
                       {"ref_log_w", e.ref_log_w},
                       {"s_k", e.s_k}});
  j["entries"] = entries;
  json cands = json::array();
  for (const auto& c : gap.candidates) cands.push_back({{"k", c.k}, {"jump", c.jump}});
  j["candidates"] = cands;
  if (gap.one_se_k) j["one_se_k"] = *gap.one_se_k;
  j["chosen_k"] = chosen_k;
  j["chosen_k_provenance"] = provenance;
  j["inertia"] = model.inertia;
  write_text_file(join(cfg.out_dir, artifact::kGap), j.dump(2) + "\n");
}

namespace {

json homogeneity_to_json(const Homogeneity& h) {
  json j;
  j["kind"] = h.kind == HomogeneityKind::kHomogeneous ? "homogeneous"
              : h.kind == HomogeneityKind::kComposite ? "composite"
                                                      : "mixed";
  json levels = json::array();
  for (CdrLevel l : h.levels) levels.push_back(cdr_token(l));
  j["levels"] = levels;
  j["label"] = h.label();
  return j;
}

Homogeneity homogeneity_from_json(const json& j) {
  Homogeneity h;
  const std::string kind = j.at("kind");
  h.kind = kind == "homogeneous" ? HomogeneityKind::kHomogeneous
           : kind == "composite" ? HomogeneityKind::kComposite
                                 : HomogeneityKind::kMixed;
  for (const auto& tok : j.at("levels"))
    h.levels.push_back(*parse_cdr_level(tok.get<std::string>()));
  return h;
}

json histogram_to_json(const std::array<long long, kNumCdrLevels>& counts) {
  json j = json::object();
  for (int li = 0; li < kNumCdrLevels; ++li)
    if (counts[std::size_t(li)] > 0) j[cdr_token(CdrLevel(li))] = counts[std::size_t(li)];
  return j;
}

std::array<long long, kNumCdrLevels> histogram_from_json(const json& j) {
  std::array<long long, kNumCdrLevels> counts{};
  for (auto it = j.begin(); it != j.end(); ++it)
    counts[std::size_t(level_index(*parse_cdr_level(it.key())))] =
        it.value().get<long long>();
  return counts;
}

}  // namespace

std::string subtypes_to_json(const SubtypesArtifact& art) {
  json j;
  j["purity"] = art.purity;
  json profiles = json::array();
  for (const auto& p : art.profiles) {
    json pj;
    pj["cluster"] = p.cluster;
    pj["visits"] = p.visit_count;
    pj["mean_cdr"] = p.mean_cdr;
    pj["cdr_histogram"] = histogram_to_json(p.cdr_histogram);
    pj["homogeneity"] = homogeneity_to_json(p.homogeneity);
    json comps = json::object();
    for (int c = 0; c < kNumComponents; ++c) {
      const auto& dist = p.components[std::size_t(c)];
      comps[kComponentNames[std::size_t(c)]] = {
          {"counts", histogram_to_json(dist.level_counts)},
          {"median", cdr_token(dist.median)},
          {"q1", cdr_token(dist.q1)},
          {"q3", cdr_token(dist.q3)}};
    }
    pj["components"] = comps;
    profiles.push_back(pj);
  }
  j["profiles"] = profiles;

  json groups = json::array();
  for (const auto& g : art.grouping.groups) {
    json gj;
    gj["id"] = g.id;
    gj["label"] = g.label;
    gj["signature"] = homogeneity_to_json(g.signature);
    gj["clusters"] = g.clusters;
    gj["mean_cdr"] = g.mean_cdr;
    groups.push_back(gj);
  }
  j["grouping"] = groups;
  return j.dump(2);
}

SubtypesArtifact read_subtypes_json(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  SubtypesArtifact art;
  art.purity = j.at("purity");
  for (const auto& pj : j.at("profiles")) {
    SubtypeProfile p;
    p.cluster = pj.at("cluster");
    p.visit_count = pj.at("visits");
    p.mean_cdr = pj.at("mean_cdr");
    p.cdr_histogram = histogram_from_json(pj.at("cdr_histogram"));
    p.homogeneity = homogeneity_from_json(pj.at("homogeneity"));
    for (int c = 0; c < kNumComponents; ++c) {
      const json& cj = pj.at("components").at(kComponentNames[std::size_t(c)]);
      ComponentDistribution dist;
      dist.level_counts = histogram_from_json(cj.at("counts"));
      dist.median = *parse_cdr_level(cj.at("median").get<std::string>());
      dist.q1 = *parse_cdr_level(cj.at("q1").get<std::string>());
      dist.q3 = *parse_cdr_level(cj.at("q3").get<std::string>());
      p.components[std::size_t(c)] = dist;
    }
    art.profiles.push_back(std::move(p));
  }
  for (const auto& gj : j.at("grouping")) {
    SubtypeGroup g;
    g.id = gj.at("id");
    g.label = gj.at("label");
    g.signature = homogeneity_from_json(gj.at("signature"));
    g.clusters = gj.at("clusters").get<std::vector<int>>();
    g.mean_cdr = gj.at("mean_cdr");
    art.grouping.groups.push_back(std::move(g));
  }
  return art;
}

void run_characterize(const PipelineConfig& cfg) {
  const std::string cohort_path = join(cfg.out_dir, artifact::kImputedCohort);
  const std::string assign_path = join(cfg.out_dir, artifact::kAssignments);
  require_artifact(cohort_path);
  require_artifact(assign_path);
  Cohort cohort = parse_cohort(cohort_path);
  const Assignments assignments = read_assignments_csv(assign_path);

  SubtypesArtifact art;
  art.purity = cfg.purity;
  art.profiles = profile_subtypes(cohort, assignments, cfg.purity);
  if (!art.profiles.empty()) art.grouping = group_subtypes(art.profiles);
  write_text_file(join(cfg.out_dir, artifact::kSubtypes), subtypes_to_json(art) + "\n");

  const std::vector<int> order = severity_cluster_order(art.grouping);
  auto find_profile = [&](int cluster) -> const SubtypeProfile& {
    for (const auto& p : art.profiles)
      if (p.cluster == cluster) return p;
    throw Error("no profile for cluster " + std::to_string(cluster));
  };

  std::ostringstream violin;
  violin << "cluster,component,level,count\n";
  for (int c : order) {
    const SubtypeProfile& p = find_profile(c);
    for (int comp = 0; comp < kNumComponents; ++comp)
      for (int li = 0; li < kNumCdrLevels; ++li) {
        const long long n = p.components[std::size_t(comp)].level_counts[std::size_t(li)];
        if (n > 0)
          violin << c << ',' << kComponentNames[std::size_t(comp)] << ','
                 << cdr_token(CdrLevel(li)) << ',' << n << "\n";
      }
  }
  write_text_file(join(cfg.out_dir, artifact::kViolin), violin.str());

  std::ostringstream comp;
  comp << "cluster,cdr_level,count\n";
  for (int c : order) {
    const SubtypeProfile& p = find_profile(c);
    for (int li = 0; li < kNumCdrLevels; ++li)
      if (p.cdr_histogram[std::size_t(li)] > 0)
        comp << c << ',' << cdr_token(CdrLevel(li)) << ','
             << p.cdr_histogram[std::size_t(li)] << "\n";
  }
  write_text_file(join(cfg.out_dir, artifact::kComposition), comp.str());
}

void run_transitions(const PipelineConfig& cfg) {
  const std::string cohort_path = join(cfg.out_dir, artifact::kImputedCohort);
  const std::string assign_path = join(cfg.out_dir, artifact::kAssignments);
  const std::string subtypes_path = join(cfg.out_dir, artifact::kSubtypes);
  require_artifact(cohort_path);
  require_artifact(assign_path);
  require_artifact(subtypes_path);

  Cohort cohort = parse_cohort(cohort_path);
  const Assignments assignments = read_assignments_csv(assign_path);
  const SubtypesArtifact art = read_subtypes_json(subtypes_path);

  const auto records =
      extract_transitions(cohort, assignments, art.grouping, cfg.long_threshold_days);

  std::ostringstream csv;
  write_transitions_csv(records, csv);
  write_text_file(join(cfg.out_dir, artifact::kTransitions), csv.str());

  const TransitionMatrix matrix = transition_matrix(records, art.grouping);
  std::ostringstream mcsv;
  write_matrix_csv(matrix, mcsv);
  write_text_file(join(cfg.out_dir, artifact::kMatrix), mcsv.str());

  const ProgressionGraph graph =
      progression_graph(cohort, records, assignments, art.profiles, cfg.graph_source,
                        cfg.graph_target, cfg.graph_min_weight);
  json gj;
  gj["source_cdr"] = cdr_token(graph.source_cdr);
  gj["target_cdr"] = cdr_token(graph.target_cdr);
  gj["min_weight"] = graph.min_weight;
  json nodes = json::array();
  for (const auto& n : graph.nodes)
    nodes.push_back(
        {{"cluster", n.cluster}, {"level", cdr_token(n.level)}, {"role", n.role}});
  gj["nodes"] = nodes;
  json edges = json::array();
  for (const auto& e : graph.edges)
    edges.push_back(
        {{"source", e.source_cluster}, {"target", e.target_cluster}, {"weight", e.weight}});
  gj["edges"] = edges;
  write_text_file(join(cfg.out_dir, artifact::kGraph), gj.dump(2) + "\n");
}

void run_comorbidity(const PipelineConfig& cfg) {
  const std::string cohort_path = join(cfg.out_dir, artifact::kImputedCohort);
  const std::string assign_path = join(cfg.out_dir, artifact::kAssignments);
  const std::string subtypes_path = join(cfg.out_dir, artifact::kSubtypes);
  require_artifact(cohort_path);
  require_artifact(assign_path);
  require_artifact(subtypes_path);

  Cohort cohort = parse_cohort(cohort_path);
  const Assignments assignments = read_assignments_csv(assign_path);
  const SubtypesArtifact art = read_subtypes_json(subtypes_path);

  const auto top = top_diagnoses(cohort, cfg.comorbidity_top);
  std::ostringstream csv;
  csv << "cluster,diagnosis,count\n";
  if (!top.empty()) {
    std::vector<std::string> codes;
    for (const auto& t : top) codes.push_back(t.code);
    const ComorbidityProfile profile =
        comorbidity_profile(cohort, assignments, codes, severity_cluster_order(art.grouping),
                            cfg.comorbidity_per_patient);
    for (int c : profile.cluster_order)
      for (const auto& t : top)
        csv << c << ',' << t.code << ',' << profile.per_cluster.at(c).at(t.code) << "\n";
  }
  write_text_file(join(cfg.out_dir, artifact::kComorbidity), csv.str());
}

RunManifest run_pipeline(const PipelineConfig& cfg) {
  RunManifest manifest;
  manifest.version = kVersion;
  manifest.master_seed = cfg.master_seed;
  manifest.created_utc = utc_now_iso8601();
  manifest.config = effective_config(cfg);

  fs::create_directories(cfg.out_dir);
  if (!cfg.input_csv.empty()) {
    if (!fs::exists(cfg.input_csv)) throw FileError(cfg.input_csv, "input file not found");
    manifest.inputs[cfg.input_csv] = digest_file(cfg.input_csv);
  } else if (!cfg.generate_enabled) {
    throw ConfigError("no input file and no generator configured");
  }

  struct Stage {
    const char* name;
    void (*fn)(const PipelineConfig&);
    std::vector<const char*> outputs;
  };
  std::vector<Stage> stages;
  if (cfg.generate_enabled)
    stages.push_back({"generate", &run_generate, {artifact::kCohort, artifact::kGroundTruth}});
  stages.push_back({"ingest", &run_ingest, {artifact::kImputedCohort, artifact::kMissingness}});
  stages.push_back({"embed", &run_embed, {artifact::kEmbedding, artifact::kEmbeddingMeta}});
  stages.push_back({"cluster", &run_cluster, {artifact::kAssignments, artifact::kGap}});
  stages.push_back({"characterize", &run_characterize,
                    {artifact::kSubtypes, artifact::kViolin, artifact::kComposition}});
  stages.push_back({"transitions", &run_transitions,
                    {artifact::kTransitions, artifact::kMatrix, artifact::kGraph}});
  stages.push_back({"comorbidity", &run_comorbidity, {artifact::kComorbidity}});

  for (const auto& stage : stages) {
    try {
      stage.fn(cfg);
    } catch (const std::exception& e) {
      throw StageError(stage.name, e.what());
    }
    StageRecord rec;
    rec.name = stage.name;
    rec.seed = derive_seed(cfg.master_seed, stage.name);
    if (std::string(stage.name) == "embed") {
      rec.config["perplexity"] = fmt_double(cfg.embed.perplexity);
      rec.config["iterations"] = std::to_string(cfg.embed.iterations);
      rec.config["learning_rate"] = fmt_double(cfg.embed.learning_rate);
      rec.config["features"] = cfg.embed_features;
    } else if (std::string(stage.name) == "cluster") {
      rec.config["k_min"] = std::to_string(cfg.k_min);
      rec.config["k_max"] = std::to_string(cfg.k_max);
      rec.config["gap_references"] = std::to_string(cfg.gap_references);
      rec.config["restarts"] = std::to_string(cfg.restarts);
      rec.config["space"] = cfg.cluster_space;
    } else if (std::string(stage.name) == "generate") {
      rec.config["patients"] = std::to_string(cfg.generator.patients);
      rec.config["subtypes"] = std::to_string(cfg.generator.subtypes.size());
      rec.config["jitter_prob"] = fmt_double(cfg.generator.jitter_prob);
    } else if (std::string(stage.name) == "ingest") {
      rec.config["warn_threshold"] = fmt_double(cfg.warn_threshold);
      rec.config["features"] = std::to_string(cfg.impute_features.size());
    } else if (std::string(stage.name) == "transitions") {
      rec.config["long_threshold_days"] = std::to_string(cfg.long_threshold_days);
      rec.config["graph_min_weight"] = std::to_string(cfg.graph_min_weight);
    } else if (std::string(stage.name) == "comorbidity") {
      rec.config["top"] = std::to_string(cfg.comorbidity_top);
      rec.config["per_patient"] = cfg.comorbidity_per_patient ? "true" : "false";
    } else if (std::string(stage.name) == "characterize") {
      rec.config["purity"] = fmt_double(cfg.purity);
    }
    for (const char* out : stage.outputs)
      rec.outputs[out] = digest_file(join(cfg.out_dir, out));
    manifest.stages.push_back(std::move(rec));
  }

  // Chosen K from the cluster artifact.
  {
    const json gap = json::parse(read_text_file(join(cfg.out_dir, artifact::kGap)));
    manifest.chosen_k = gap.at("chosen_k").get<int>();
    manifest.chosen_k_provenance = gap.at("chosen_k_provenance").get<std::string>();
  }

  write_text_file(join(cfg.out_dir, artifact::kManifest), manifest.to_json() + "\n");
  write_report(cfg.out_dir);
  return manifest;
}

namespace {

long long count_transition_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "no such file or unreadable");
  std::string line;
  long long rows = -1;  // header
  while (std::getline(in, line))
    if (!line.empty() && line != "\r") ++rows;
  return std::max(0LL, rows);
}

}  // namespace

ReportResult build_report(const std::string& run_dir) {
  const std::string gap_path = join(run_dir, artifact::kGap);
  const std::string subtypes_path = join(run_dir, artifact::kSubtypes);
  const std::string transitions_path = join(run_dir, artifact::kTransitions);
  const std::string matrix_path = join(run_dir, artifact::kMatrix);
  const std::string graph_path = join(run_dir, artifact::kGraph);
  const std::string comorbidity_path = join(run_dir, artifact::kComorbidity);
  for (const auto& p : {gap_path, subtypes_path, transitions_path, matrix_path, graph_path,
                        comorbidity_path})
    require_artifact(p);

  std::ostringstream text;
  json out;
  const SubtypesArtifact art = read_subtypes_json(subtypes_path);
  long long total_visits = 0;
  for (const auto& p : art.profiles) total_visits += p.visit_count;

  // K selection.
  {
    const json gap = json::parse(read_text_file(gap_path));
    text << "== K selection ==\n";
    text << "candidates (gap-jump rule):";
    if (gap.at("candidates").empty()) text << " none";
    for (const auto& c : gap.at("candidates"))
      text << "  k=" << c.at("k").get<int>() << " (jump " << c.at("jump").get<double>()
           << ")";
    text << "\n";
    if (gap.contains("one_se_k"))
      text << "one-standard-error rule: k=" << gap.at("one_se_k").get<int>() << "\n";
    text << "chosen K: " << gap.at("chosen_k").get<int>() << " ("
         << gap.at("chosen_k_provenance").get<std::string>() << ")\n\n";
    out["k_selection"] = gap;
  }

  // Subtype composition + variability.
  {
    text << "== Subtype composition ==\n";
    text << "cluster  visits  mean_cdr  class\n";
    for (int c : severity_cluster_order(art.grouping)) {
      for (const auto& p : art.profiles)
        if (p.cluster == c) {
          char line[128];
          std::snprintf(line, sizeof line, "C%-7d %-7lld %-9.3f %s\n", p.cluster,
                        p.visit_count, p.mean_cdr, p.homogeneity.label().c_str());
          text << line;
        }
    }
    text << "\n== Groups ==\n";
    for (const auto& g : art.grouping.groups) {
      text << g.id << " (" << g.label << "): ";
      for (std::size_t i = 0; i < g.clusters.size(); ++i)
        text << (i ? ", " : "") << "C" << g.clusters[i];
      char buf[32];
      std::snprintf(buf, sizeof buf, "  mean CDR %.3f", g.mean_cdr);
      text << buf << "\n";
    }

    text << "\n== Inter-subtype variability ==\n";
    bool any_inter = false;
    for (int li = 0; li < kNumCdrLevels; ++li) {
      try {
        const auto inter = inter_subtype_variability(art.profiles, CdrLevel(li));
        any_inter = true;
        text << "homogeneous CDR " << cdr_token(CdrLevel(li)) << " subtypes:";
        for (int c : inter.clusters) text << " C" << c;
        text << "\n";
        for (const auto& spread : inter.components) {
          char buf[96];
          std::snprintf(buf, sizeof buf, "  %-18s range %.1f  variance %.3f\n",
                        spread.component.c_str(), spread.range, spread.variance);
          text << buf;
        }
      } catch (const InsufficientSubtypes&) {
        continue;
      }
    }
    if (!any_inter) text << "(no CDR level has two homogeneous subtypes)\n";

    text << "\n== Intra-subtype variability ==\n";
    for (const auto& p : art.profiles) {
      const auto intra = intra_subtype_variability(p);
      text << "C" << p.cluster << ": medians";
      for (int c = 0; c < kNumComponents; ++c)
        text << ' ' << cdr_token(intra.medians[std::size_t(c)]);
      char buf[64];
      std::snprintf(buf, sizeof buf, "  range %.1f  intact %d/6\n", intra.range,
                    int(intra.intact.size()));
      text << buf;
    }
    out["subtypes"] = json::parse(subtypes_to_json(art));
  }

  // Transition matrix with cross-check.
  {
    std::ifstream min(matrix_path, std::ios::binary);
    const TransitionMatrix matrix = read_matrix_csv(min);
    text << "\n== Group transition matrix ==\n";
    text << "start/end";
    for (const auto& l : matrix.labels) text << '\t' << l;
    text << "\n";
    for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
      text << matrix.labels[i];
      for (std::size_t j = 0; j < matrix.labels.size(); ++j)
        text << '\t' << matrix.counts[i][j];
      text << "\n";
    }
    const long long rows = count_transition_rows(transitions_path);
    text << "matrix total " << matrix.total() << ", transition records " << rows << ": "
         << (matrix.total() == rows ? "OK" : "MISMATCH") << "\n";
    json mj;
    mj["labels"] = matrix.labels;
    mj["counts"] = matrix.counts;
    mj["total"] = matrix.total();
    mj["record_rows"] = rows;
    mj["consistent"] = matrix.total() == rows;
    out["transition_matrix"] = mj;
  }

  // Progression graph.
  {
    const json graph = json::parse(read_text_file(graph_path));
    text << "\n== Progression graph (CDR " << graph.at("source_cdr").get<std::string>()
         << " -> " << graph.at("target_cdr").get<std::string>() << ", min weight "
         << graph.at("min_weight").get<std::int64_t>() << ") ==\n";
    if (graph.at("edges").empty()) text << "(no edges at this threshold)\n";
    for (const auto& e : graph.at("edges"))
      text << "C" << e.at("source").get<int>() << " -> C" << e.at("target").get<int>()
           << "  weight " << e.at("weight").get<std::int64_t>() << "\n";
    out["progression_graph"] = graph;
  }

  // Comorbidity.
  {
    text << "\n== Comorbidity (visits per cluster) ==\n";
    std::ifstream in(comorbidity_path, std::ios::binary);
    std::string line;
    std::getline(in, line);  // header
    json rows = json::array();
    std::map<std::string, long long> code_totals;
    bool any = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      any = true;
      std::stringstream ss(line);
      std::string cluster, code, count;
      std::getline(ss, cluster, ',');
      std::getline(ss, code, ',');
      std::getline(ss, count, ',');
      text << "C" << cluster << "  " << code << "  " << count << "\n";
      code_totals[code] += std::stoll(count);
      rows.push_back({{"cluster", std::stoi(cluster)},
                      {"diagnosis", code},
                      {"count", std::stoll(count)}});
    }
    if (!any) text << "(no diagnoses recorded)\n";
    json totals = json::array();
    if (any && total_visits > 0) {
      text << "cohort-wide (count / rate over " << total_visits << " visits):\n";
      for (const auto& [code, n] : code_totals) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "  %-24s %-7lld %.3f\n", code.c_str(), n,
                      double(n) / double(total_visits));
        text << buf;
        totals.push_back(
            {{"diagnosis", code}, {"count", n}, {"rate", double(n) / double(total_visits)}});
      }
    }
    out["comorbidity"] = rows;
    out["comorbidity_totals"] = totals;
  }

  ReportResult res;
  res.text = text.str();
  res.json = out.dump(2);
  return res;
}

void write_report(const std::string& run_dir) {
  const ReportResult res = build_report(run_dir);
  write_text_file(join(run_dir, artifact::kReportTxt), res.text);
  write_text_file(join(run_dir, artifact::kReportJson), res.json + "\n");
}

}  // namespace subtyper
