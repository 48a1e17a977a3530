#include "subtyper/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "subtyper/error.hpp"
#include "subtyper/rng.hpp"

namespace subtyper {

std::string digest_bytes(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                (unsigned long long)fnv1a64(bytes));
  return buf;
}

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "cannot digest");
  std::stringstream buf;
  buf << in.rdbuf();
  return digest_bytes(buf.str());
}

std::string utc_now_iso8601() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["tool"] = tool;
  j["version"] = version;
  j["master_seed"] = master_seed;
  j["created_utc"] = created_utc;
  j["config"] = config;
  j["inputs"] = inputs;
  nlohmann::json stages_json = nlohmann::json::array();
  for (const auto& s : stages) {
    nlohmann::json sj;
    sj["name"] = s.name;
    sj["seed"] = s.seed;
    sj["config"] = s.config;
    sj["outputs"] = s.outputs;
    stages_json.push_back(sj);
  }
  j["stages"] = stages_json;
  if (chosen_k) {
    j["chosen_k"] = *chosen_k;
    j["chosen_k_provenance"] = chosen_k_provenance;
  }
  return j.dump(2);
}

}  // namespace subtyper
