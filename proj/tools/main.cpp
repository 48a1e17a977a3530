#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "subtyper/config.hpp"
#include "subtyper/pipeline.hpp"
#include "subtyper/version.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<int> k;
  std::optional<std::string> cluster_space;
  std::optional<std::string> input;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "key = value config file");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&opts](std::uint64_t v) { opts.seed = v; }, "master RNG seed");
  cmd->add_option_function<std::string>(
      "--out", [&opts](const std::string& v) { opts.out_dir = v; }, "run directory");
  cmd->add_option_function<int>(
      "--threads", [&opts](int v) { opts.threads = v; }, "worker thread cap");
  cmd->add_option_function<int>(
      "--k", [&opts](int v) { opts.k = v; }, "manual K override");
  cmd->add_option_function<std::string>(
             "--cluster-space", [&opts](const std::string& v) { opts.cluster_space = v; },
             "embedded|raw")
      ->check(CLI::IsMember({"embedded", "raw"}));
  cmd->add_option_function<std::string>(
      "--input", [&opts](const std::string& v) { opts.input = v; },
      "cohort CSV (overrides config input)");
}

subtyper::PipelineConfig resolve(const CommonOpts& opts) {
  subtyper::Config cfg = opts.config_path.empty()
                             ? subtyper::Config{}
                             : subtyper::Config::load(opts.config_path);
  subtyper::PipelineOverrides o;
  o.seed = opts.seed;
  o.out_dir = opts.out_dir;
  o.threads = opts.threads;
  o.k = opts.k;
  o.cluster_space = opts.cluster_space;
  subtyper::PipelineConfig p = subtyper::resolve_pipeline_config(cfg, o);
  if (opts.input) p.input_csv = *opts.input;
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subtyper: subtyping and progression analysis for longitudinal CDR visits"};
  app.set_version_flag("--version", subtyper::kVersion);
  app.require_subcommand(1);

  CommonOpts opts;
  std::string report_dir = "run";

  CLI::App* c_generate = app.add_subcommand("generate", "synthesize a cohort with ground truth");
  CLI::App* c_ingest = app.add_subcommand("ingest", "validate and impute a cohort CSV");
  CLI::App* c_embed = app.add_subcommand("embed", "t-SNE embedding of the imputed cohort");
  CLI::App* c_cluster = app.add_subcommand("cluster", "gap-statistic K scan plus k-means fit");
  CLI::App* c_char = app.add_subcommand("characterize", "subtype profiles and grouping");
  CLI::App* c_trans = app.add_subcommand("transitions", "per-patient transitions and matrix");
  CLI::App* c_como = app.add_subcommand("comorbidity", "top diagnoses per subtype");
  CLI::App* c_report = app.add_subcommand("report", "render the run summary");
  CLI::App* c_run = app.add_subcommand("run", "all stages end to end");
  for (CLI::App* c : {c_generate, c_ingest, c_embed, c_cluster, c_char, c_trans, c_como, c_run})
    add_common(c, opts);
  c_report->add_option("dir", report_dir, "run directory")->required(false);
  c_report->add_option("--out", report_dir, "run directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_report->parsed()) {
      const auto res = subtyper::build_report(report_dir);
      std::cout << res.text;
      subtyper::write_report(report_dir);
      return 0;
    }
    const subtyper::PipelineConfig cfg = resolve(opts);
    if (c_generate->parsed()) subtyper::run_generate(cfg);
    if (c_ingest->parsed()) subtyper::run_ingest(cfg);
    if (c_embed->parsed()) subtyper::run_embed(cfg);
    if (c_cluster->parsed()) subtyper::run_cluster(cfg);
    if (c_char->parsed()) subtyper::run_characterize(cfg);
    if (c_trans->parsed()) subtyper::run_transitions(cfg);
    if (c_como->parsed()) subtyper::run_comorbidity(cfg);
    if (c_run->parsed()) {
      subtyper::run_pipeline(cfg);
      std::cout << "run complete: " << cfg.out_dir << "\n";
    }
    return 0;
  } catch (const subtyper::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const subtyper::FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const subtyper::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
