#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace subtyper {

// Content digest of a file: "fnv1a64:<16 hex digits>". Strong enough for the
// double-run reproducibility comparison the manifest exists for.
std::string digest_file(const std::string& path);
std::string digest_bytes(const std::string& bytes);

struct StageRecord {
  std::string name;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;   // effective parameters
  std::map<std::string, std::string> outputs;  // file name -> digest
};

struct RunManifest {
  std::string tool = "subtyper";
  std::string version;
  std::uint64_t master_seed = 0;
  std::string created_utc;  // informational; differs between runs by design
  // Complete effective configuration, key = value, parseable back into an
  // identical run. The manifest alone suffices to reproduce the pipeline.
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> inputs;  // path -> digest
  std::vector<StageRecord> stages;
  std::optional<int> chosen_k;
  std::string chosen_k_provenance;  // "manual" or "auto_one_se"

  std::string to_json() const;
};

std::string utc_now_iso8601();

}  // namespace subtyper
