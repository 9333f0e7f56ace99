#ifndef BMCA_REFINEMENT_HPP
#define BMCA_REFINEMENT_HPP

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bmca/function_spec.hpp"
#include "bmca/gateway.hpp"
#include "bmca/source_index.hpp"
#include "bmca/validation.hpp"

namespace bmca::refinement {

enum class RefinementKind { verifier_level, caller_side, callee_contract };

const char* refinement_kind_name(RefinementKind k);

struct Refinement {
  RefinementKind kind = RefinementKind::caller_side;
  std::string target;           // function the delta applies to
  dsl::ExprPtr payload_expr;    // spec kinds
  std::string config_key;       // verifier_level
  std::string config_value;
  std::string origin_witness;   // "<function>/<property_id>"
  std::string rationale;
};

struct QueueItem {
  std::string function;
  std::string reason;
  int iteration = 1;
};

// FIFO with a per-function iteration budget; exhaustion is recorded, never
// silently dropped.
class RecheckQueue {
 public:
  explicit RecheckQueue(int budget = 3) : budget_(budget) {}

  bool enqueue(const std::string& function, const std::string& reason);
  std::optional<QueueItem> pop();
  bool empty() const { return items_.empty(); }
  int budget() const { return budget_; }
  const std::vector<std::string>& exhausted() const { return exhausted_; }
  int iterations(const std::string& function) const;

 private:
  int budget_;
  std::deque<QueueItem> items_;
  std::map<std::string, int> counts_;
  std::vector<std::string> exhausted_;
};

// Payload grammar: "caller_side: EXPR" | "callee_contract NAME: EXPR" |
// "verifier_level: key=value". Unparseable proposals are retried through the
// gateway, then dropped.
std::optional<Refinement> parse_refinement_payload(const std::string& payload);

std::optional<Refinement> propose(const validation::Finding& finding,
                                  gateway::AgentGateway& gw,
                                  const std::string& context);

// Literal-argument tuples observed at call sites of `target`; symbolic
// arguments contribute no entries.
struct CallSiteTuple {
  std::string caller;
  std::map<std::string, long long> args;  // parameter name -> literal
};

std::vector<CallSiteTuple> collect_call_site_tuples(
    const index::CodebaseIndex& idx, const std::string& target);

// Literal `return N;` values observed in the target body.
std::vector<long long> collect_return_observations(
    const index::CodebaseIndex& idx, const std::string& target);

struct GuardEvidence {
  std::vector<CallSiteTuple> call_sites;
  std::vector<long long> return_observations;
  std::set<backend::CheckFlag> active_flags;
};

struct GuardResult {
  bool accepted = false;
  std::string reason;
};

// Rejects refinements that could mask real bugs: caller_side conjuncts any
// recorded tuple falsifies, callee contracts any recorded return violates,
// and verifier deltas that disable an active check.
GuardResult guard(const Refinement& r, const GuardEvidence& evidence);

// Best-effort integer evaluation of a conjunct over a literal environment;
// nullopt when the expression leaves the evaluable fragment.
std::optional<bool> eval_conjunct(const dsl::ExprPtr& expr,
                                  const std::map<std::string, long long>& env);

struct ApplyResult {
  bool queued = false;
  std::vector<std::string> requeued;  // target plus fan-out
};

ApplyResult apply(const Refinement& r, std::map<std::string, FunctionSpec>& specs,
                  const index::CodebaseIndex& idx, RecheckQueue& queue);

// Append-only JSON-lines refinement log entry.
std::string log_line(const Refinement& r, const std::string& verdict);

}  // namespace bmca::refinement

#endif
