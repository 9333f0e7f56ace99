#ifndef BMCA_VALIDATION_HPP
#define BMCA_VALIDATION_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bmca/backend.hpp"
#include "bmca/dedup.hpp"
#include "bmca/gateway.hpp"
#include "bmca/knowledge.hpp"
#include "bmca/source_index.hpp"

namespace bmca::validation {

// Total order: dynamic > system_entry > bmc. Tiers only ever upgrade.
enum class EvidenceTier {
  confirmed_bmc = 0,
  confirmed_system_entry = 1,
  confirmed_dynamic = 2,
};

const char* tier_name(EvidenceTier t);
EvidenceTier max_tier(EvidenceTier a, EvidenceTier b);

enum class ReachKind { system_entry, halted_at, unknown };

struct ReachResult {
  ReachKind kind = ReachKind::unknown;
  std::string caller;  // set for halted_at
  std::vector<std::string> hop_chain;
};

enum class Feasibility { survives, refuted, skipped };
const char* feasibility_name(Feasibility f);

enum class DynamicKind { signal, no_signal, not_compilable, skipped };

struct DynamicResult {
  DynamicKind kind = DynamicKind::skipped;
  std::string signal_name;  // SIGSEGV / SIGABRT / SIGFPE / SIGILL
  std::string detail;
};

const char* dynamic_kind_name(DynamicKind k);

enum class Realism { realistic, unrealistic };
enum class RealismConfidence { committed, folded_uncertain };
enum class Classification { real_bug, latent, spurious };
enum class ThreatModel { security, safety, functional };

const char* realism_name(Realism r);
const char* classification_name(Classification c);
const char* threat_model_name(ThreatModel m);
std::optional<ThreatModel> threat_model_from_name(const std::string& name);

struct Finding {
  dedup::WitnessClass cls;
  EvidenceTier tier = EvidenceTier::confirmed_bmc;
  ReachResult reach;
  Feasibility feasibility = Feasibility::skipped;
  DynamicResult dynamic;
  Realism realism = Realism::unrealistic;
  RealismConfidence realism_confidence = RealismConfidence::committed;
  std::optional<std::string> detector_id;
  Classification classification = Classification::spurious;
  std::map<std::string, std::string> artifacts;  // label -> path
};

// Walks caller chains asking the gateway for per-hop supply feasibility.
// Entry-manifest members and no-caller functions short-circuit to
// system_entry; an infeasible hop halts at that caller.
ReachResult stage1_reachability(const dedup::WitnessClass& cls,
                                const index::CodebaseIndex& idx,
                                gateway::AgentGateway& gw);

// Re-runs BMC with real callee bodies inlined and the witness pinned.
// Inconclusive stays survives; an unavailable body skips the stage.
Feasibility stage2_callee_feasibility(const dedup::WitnessClass& cls,
                                      const index::CodebaseIndex& idx,
                                      const FunctionSpec& spec,
                                      backend::BackendAdapter& adapter,
                                      const backend::BackendConfig& config);

// Compiles a concrete-value host harness and reports any of SIGSEGV,
// SIGABRT, SIGFPE, SIGILL raised while replaying the witness.
DynamicResult stage3_dynamic_replay(const dedup::WitnessClass& cls,
                                    const index::CodebaseIndex& idx,
                                    const std::string& work_dir);

bool host_compiler_available();

struct RealismOutcome {
  Realism realism = Realism::unrealistic;
  RealismConfidence confidence = RealismConfidence::committed;
  std::optional<std::string> detector_id;
};

// Detectors run first and settle the verdict without a gateway call;
// otherwise the gateway audits and uncommitted verdicts fold to
// unrealistic with the confidence flag preserving the distinction.
RealismOutcome stage4_realism(const dedup::WitnessClass& cls,
                              const std::vector<knowledge::DetectorRule>& rules,
                              gateway::AgentGateway& gw,
                              const std::string& context);

// Threat-model gate. Unrealistic is always spurious; functional-clause
// violations are real_bug under every model.
Classification classify(const Finding& finding, ThreatModel model);

enum class OverflowFilter { retain, spurious };

// Checked evaluation of the spec over the witness values; overflow inside
// the spec arithmetic itself (not the program) marks the witness spurious.
OverflowFilter spec_overflow_filter(const backend::Witness& witness,
                                    const dsl::ExprPtr& spec_expr);

EvidenceTier tier_after_stage1(EvidenceTier current, const ReachResult& reach);
EvidenceTier tier_after_stage3(EvidenceTier current, const DynamicResult& dyn);

}  // namespace bmca::validation

#endif
