#ifndef BMCA_KNOWLEDGE_HPP
#define BMCA_KNOWLEDGE_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bmca/backend.hpp"
#include "bmca/function_spec.hpp"

#include "json.hpp"

namespace bmca::knowledge {

struct SpecStoreEntry {
  FunctionSpec spec;
  std::map<std::string, dsl::ExprPtr> learned_contracts;
  std::string last_run;
  std::string source_digest;  // body content hash, staleness key
  bool stale = false;
  nlohmann::json extra = nlohmann::json::object();  // unknown fields, opaque
};

// Declarative witness matcher; evaluable with no gateway involvement. A rule
// with no constraints never matches.
struct DetectorRule {
  std::string id;
  std::string description;
  std::optional<std::string> property_type;   // matches property_type_name
  std::vector<std::string> trace_contains;    // all substrings must appear
  bool requires_null_assignment = false;      // some assignment is NULL/0
};

struct ProjectInvariant {
  dsl::ExprPtr expr;
  std::set<std::string> learned_by;
  bool promoted = false;
};

struct KnowledgeStore {
  int schema_version = 1;
  int promotion_threshold = 3;
  std::map<std::string, SpecStoreEntry> entries;
  std::vector<DetectorRule> detectors;  // built-ins first, then file rules
  std::vector<ProjectInvariant> invariants;
  std::map<std::string, std::set<backend::CheckFlag>> flag_cache;  // by digest
  nlohmann::json extra = nlohmann::json::object();
  std::vector<std::string> warnings;
};

std::vector<DetectorRule> builtin_detectors();

// Missing path -> empty store; corrupt file -> fresh store with a warning.
KnowledgeStore load_store(const std::string& path);
bool persist_store(const KnowledgeStore& store, const std::string& path);

// First matching detector in registration order.
std::optional<std::string> match_detector(const std::vector<DetectorRule>& rules,
                                          const backend::Witness& witness);

// Returns the promotion status after recording; promotion is monotone.
bool learn_invariant(KnowledgeStore& store, const dsl::ExprPtr& expr,
                     const std::string& function);

std::vector<dsl::ExprPtr> promoted_invariants(const KnowledgeStore& store);

// Flags entries whose recorded digest no longer matches the current body.
void mark_stale(KnowledgeStore& store,
                const std::map<std::string, std::string>& current_digests);

}  // namespace bmca::knowledge

#endif
