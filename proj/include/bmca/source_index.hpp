#ifndef BMCA_SOURCE_INDEX_HPP
#define BMCA_SOURCE_INDEX_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace bmca::index {

enum class SourceLanguage { c, rust };

struct FunctionRecord {
  std::string name;
  SourceLanguage source_language = SourceLanguage::c;
  std::string file_path;
  int start_line = 0;
  int end_line = 0;
  std::string body_text;  // full definition, signature included
  std::vector<std::pair<std::string, std::string>> params;  // (name, type text)
  std::string return_type_text;
  bool is_public = false;
  std::set<std::string> callees;  // direct calls by identifier
};

struct CallGraph {
  std::set<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;  // caller -> callee
  std::set<std::string> entry_set;  // no in-edges from in-index callers

  std::vector<std::string> callers_of(const std::string& callee) const;
  std::vector<std::string> callees_of(const std::string& caller) const;
};

struct CodebaseIndex {
  std::map<std::string, FunctionRecord> functions;
  CallGraph graph;
  std::set<std::string> externals;       // called but not defined in-index
  std::set<std::string> entry_manifest;  // table/function-pointer registered
  std::vector<std::string> diagnostics;  // skipped definitions, parse notes
};

struct IndexError {
  std::string reason;
};

struct IndexResult {
  CodebaseIndex index;
  std::optional<IndexError> error;
  bool ok() const { return !error.has_value(); }
};

IndexResult index_sources(const std::vector<std::string>& paths,
                          std::optional<SourceLanguage> language_filter = {});

// Pre-built call-graph import:
// {"functions":[{"name","file","public","callees":[...]}]}
IndexResult import_call_graph(const std::string& json_text);

// JSON list of function names treated as system entries.
std::optional<std::set<std::string>> load_entry_manifest(const std::string& path);

// Recomputes edges, externals and entry_set from the function records.
void rebuild_graph(CodebaseIndex& idx);

struct DomainSummary {
  std::string type_digest;
  std::string signature_digest;
  std::optional<std::string> external_notes;  // digest of supplied material
  std::string text;                           // budgeted rendering
};

DomainSummary build_domain_summary(const CodebaseIndex& idx,
                                   const std::optional<std::string>& external = {},
                                   size_t char_budget = 8000);

struct SccDag {
  std::vector<std::vector<std::string>> components;  // sorted member lists
  std::vector<std::pair<int, int>> component_edges;  // caller comp -> callee comp
  std::vector<std::vector<int>> layers_topdown;      // no-caller components first
  std::vector<std::vector<int>> layers_bottomup;     // leaf components first
};

// Kosaraju condensation; deterministic for a given graph.
SccDag condense_sccs(const CallGraph& graph);

enum class Direction { topdown, bottomup };

std::vector<std::vector<std::string>> layer_schedule(const SccDag& dag,
                                                     Direction direction);

// Least fixed point of callee expansion from root, root included.
std::optional<std::set<std::string>> transitive_callee_closure(
    const CodebaseIndex& idx, const std::string& root);

}  // namespace bmca::index

#endif
