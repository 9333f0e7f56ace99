#ifndef BMCA_PIPELINE_HPP
#define BMCA_PIPELINE_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bmca/backend.hpp"
#include "bmca/gateway.hpp"
#include "bmca/knowledge.hpp"
#include "bmca/refinement.hpp"
#include "bmca/source_index.hpp"
#include "bmca/validation.hpp"

#include "json.hpp"

namespace bmca::pipeline {

struct PipelineConfig {
  std::string target_dir;
  std::vector<std::string> sources;  // explicit file list, overrides target_dir
  int unwind = 4;
  int timeout_s = 120;
  validation::ThreatModel threat_model = validation::ThreatModel::security;
  bool strict_dsl = true;
  bool real_source_include = false;  // harnesses include the source file verbatim
  bool enable_realism = false;
  bool enable_dynamic = false;
  bool dual_source = false;
  int parallelism = 1;
  int refinement_budget = 3;
  std::string store_path;
  std::string adapter_c;     // external tool name, empty = none
  std::string adapter_rust;
  std::string mock_fixtures;  // JSON with "gateway" and "adapter" arrays
  std::string entry_manifest_path;
  std::string report_dir;
  std::string work_dir = "/tmp";
  std::string timestamp;  // injected so reports are byte-reproducible

  bool valid(std::string& reason) const;
};

struct CleanRecord {
  std::string function;
  int spec_version = 1;
  std::string effective_config;
};

struct RunReport {
  bool fatal = false;
  std::string fatal_reason;
  std::vector<validation::Finding> findings;  // non-spurious, tier-major order
  std::vector<validation::Finding> suppressed;  // spurious, artifacts only
  std::vector<CleanRecord> verified_clean;
  std::vector<std::pair<std::string, std::string>> inconclusive;  // fn, reason
  std::vector<std::pair<std::string, std::string>> skipped;       // fn, reason
  std::vector<std::string> flagged_disagreements;
  std::vector<std::string> refinement_log;  // JSON lines
  std::vector<std::string> budget_exhausted;
  std::vector<std::string> warnings;
  std::map<std::string, int> tier_counts;
  std::map<std::string, int> classification_counts;
  std::map<std::string, std::string> harness_texts;  // per function, artifacts
  std::map<std::string, std::string> raw_outputs;
  std::map<std::string, FunctionSpec> final_specs;
};

// Phase order: index -> summary -> spec generation (topdown) -> flag
// pre-pass -> BMC (bottomup, parallel within layer) -> dedup -> validation
// -> refinement loop -> persist -> report. Single-function failures never
// abort the run.
RunReport run_pipeline(const PipelineConfig& config,
                       std::shared_ptr<gateway::Proposer> proposer,
                       std::shared_ptr<backend::BackendAdapter> adapter_c,
                       std::shared_ptr<backend::BackendAdapter> adapter_rust);

nlohmann::json report_json(const RunReport& report, const PipelineConfig& config);
std::string report_table(const RunReport& report);

// Writes report.json, report.txt and per-finding artifact directories.
bool emit_report(const RunReport& report, const PipelineConfig& config);

struct MockFixtures {
  std::shared_ptr<gateway::ScriptedProposer> proposer;
  std::shared_ptr<backend::MockAdapter> adapter;
};

std::optional<MockFixtures> load_mock_fixtures(const std::string& path);

}  // namespace bmca::pipeline

#endif
