#ifndef BMCA_GATEWAY_HPP
#define BMCA_GATEWAY_HPP

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "bmca/function_spec.hpp"

namespace bmca::gateway {

// Every semantic-judgment task flows through this single choke point, so the
// pipeline runs hermetically against a scripted proposer in tests.
enum class RequestKind {
  spec_draft,
  flag_select,
  classify_witness,
  realism_audit,
  refine_propose,
};

const char* kind_name(RequestKind k);

enum class SpecMode { caller_intent, implementation };

struct ProposerRequest {
  RequestKind kind;
  std::string function;
  std::string context_bundle;
  std::optional<SpecMode> mode;
};

struct ProposerResponse {
  std::string payload;
  int attempt = 1;
  std::string proposer_id;
};

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::string id() const = 0;
  // nullopt = proposer failure for this attempt
  virtual std::optional<std::string> propose(const ProposerRequest& req,
                                             int attempt) = 0;
};

// Replays payloads from a JSON fixture: an array of
// {"kind","function","attempt","payload"[,"mode"]}. `attempt` counts calls
// per (kind, mode, function) across the whole run; attempt 0 matches any.
class ScriptedProposer : public Proposer {
 public:
  static std::shared_ptr<ScriptedProposer> from_json(const std::string& json_text);
  std::string id() const override { return "scripted"; }
  std::optional<std::string> propose(const ProposerRequest& req,
                                     int attempt) override;

 private:
  std::map<std::string, std::map<int, std::string>> entries_;
  std::map<std::string, int> call_counts_;
  std::mutex mu_;
};

struct TranscriptEntry {
  RequestKind kind;
  std::string function;
  int attempt = 0;
  std::string payload;
  bool accepted = false;
  std::string proposer_id;
};

struct Transcript {
  std::vector<TranscriptEntry> entries;
};

struct SubmitOutcome {
  std::optional<ProposerResponse> response;
  std::string error;  // set when no acceptable response exists
  bool ok() const { return response.has_value(); }
};

using Validator = std::function<bool(const std::string&)>;

class AgentGateway {
 public:
  explicit AgentGateway(std::shared_ptr<Proposer> proposer, int retry_limit = 3);

  // First validator-accepted response within the retry limit; on exhaustion
  // the per-kind conservative fallback (all flags off / unrealistic /
  // infeasible). Kinds without a fallback report an error.
  SubmitOutcome submit(const ProposerRequest& req, const Validator& validator);

  Transcript snapshot_transcript() const;
  int retry_limit() const { return retry_limit_; }

 private:
  std::shared_ptr<Proposer> proposer_;
  int retry_limit_;
  mutable std::mutex mu_;
  Transcript transcript_;
};

// Conservative pole of each decision; never invents a bug, never enables a
// check, never accepts realism.
std::optional<std::string> fallback_payload(RequestKind kind);

// "pre: EXPR\npost: EXPR[\nfunctional: EXPR][\ncallee NAME: EXPR]*"
std::optional<FunctionSpec> parse_spec_payload(
    const std::string& payload,
    const std::vector<std::string>* known_idents = nullptr);

struct DualSourceResult {
  FunctionSpec spec;
  bool flagged = false;
  bool failed = false;  // neither draft parseable
};

DualSourceResult dual_source_spec(AgentGateway& gw, const std::string& fn,
                                  const std::string& ctx,
                                  const std::vector<std::string>* known_idents =
                                      nullptr);

}  // namespace bmca::gateway

#endif
