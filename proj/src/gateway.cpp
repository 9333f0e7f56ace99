#include "bmca/gateway.hpp"

#include <sstream>

#include "json.hpp"

namespace bmca::gateway {

const char* kind_name(RequestKind k) {
  switch (k) {
    case RequestKind::spec_draft: return "spec_draft";
    case RequestKind::flag_select: return "flag_select";
    case RequestKind::classify_witness: return "classify_witness";
    case RequestKind::realism_audit: return "realism_audit";
    case RequestKind::refine_propose: return "refine_propose";
  }
  return "?";
}

namespace {

std::string script_key(RequestKind kind, const std::optional<SpecMode>& mode,
                       const std::string& function) {
  std::string k = kind_name(kind);
  if (mode)
    k += mode == SpecMode::caller_intent ? ".caller_intent" : ".implementation";
  return k + "/" + function;
}

}  // namespace

std::shared_ptr<ScriptedProposer> ScriptedProposer::from_json(
    const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_array()) return nullptr;
  auto p = std::make_shared<ScriptedProposer>();
  for (const auto& e : j) {
    std::string kind = e.value("kind", "");
    std::string mode = e.value("mode", "");
    std::string fn = e.value("function", "");
    int attempt = e.value("attempt", 0);
    std::string key = kind;
    if (!mode.empty()) key += "." + mode;
    key += "/" + fn;
    p->entries_[key][attempt] = e.value("payload", "");
  }
  return p;
}

std::optional<std::string> ScriptedProposer::propose(const ProposerRequest& req,
                                                     int /*attempt*/) {
  std::lock_guard<std::mutex> lock(mu_);
  std::string key = script_key(req.kind, req.mode, req.function);
  int n = ++call_counts_[key];
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  auto jt = it->second.find(n);
  if (jt != it->second.end()) return jt->second;
  jt = it->second.find(0);  // wildcard
  if (jt != it->second.end()) return jt->second;
  return std::nullopt;
}

std::optional<std::string> fallback_payload(RequestKind kind) {
  switch (kind) {
    case RequestKind::flag_select: return "none";
    case RequestKind::realism_audit: return "unrealistic";
    case RequestKind::classify_witness: return "infeasible";
    default: return std::nullopt;
  }
}

AgentGateway::AgentGateway(std::shared_ptr<Proposer> proposer, int retry_limit)
    : proposer_(std::move(proposer)), retry_limit_(retry_limit) {}

SubmitOutcome AgentGateway::submit(const ProposerRequest& req,
                                   const Validator& validator) {
  if (!proposer_) return {std::nullopt, "no proposer registered"};
  for (int attempt = 1; attempt <= retry_limit_; ++attempt) {
    auto payload = proposer_->propose(req, attempt);
    bool accepted = payload && validator(*payload);
    {
      std::lock_guard<std::mutex> lock(mu_);
      transcript_.entries.push_back({req.kind, req.function, attempt,
                                     payload.value_or(""), accepted,
                                     proposer_->id()});
    }
    if (accepted) return {ProposerResponse{*payload, attempt, proposer_->id()}, ""};
  }
  auto fb = fallback_payload(req.kind);
  if (fb) {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.entries.push_back(
        {req.kind, req.function, retry_limit_ + 1, *fb, true, "fallback"});
    return {ProposerResponse{*fb, retry_limit_ + 1, "fallback"}, ""};
  }
  return {std::nullopt,
          std::string(kind_name(req.kind)) + " exhausted retries for '" +
              req.function + "'"};
}

Transcript AgentGateway::snapshot_transcript() const {
  std::lock_guard<std::mutex> lock(mu_);
  return transcript_;
}

std::optional<FunctionSpec> parse_spec_payload(
    const std::string& payload, const std::vector<std::string>* known_idents) {
  FunctionSpec spec;
  std::istringstream in(payload);
  std::string line;
  bool have_pre = false, have_post = false;
  while (std::getline(in, line)) {
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    auto after = [&](const std::string& prefix) -> std::optional<std::string> {
      if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
      return std::nullopt;
    };
    if (auto rest = after("pre:")) {
      auto r = dsl::parse_spec(*rest, known_idents);
      if (!r.ok()) return std::nullopt;
      spec.pre = r.expr;
      have_pre = true;
    } else if (auto rest2 = after("post:")) {
      auto r = dsl::parse_spec(*rest2, known_idents);
      if (!r.ok()) return std::nullopt;
      spec.post = r.expr;
      have_post = true;
    } else if (auto rest3 = after("functional:")) {
      auto r = dsl::parse_spec(*rest3, known_idents);
      if (!r.ok()) return std::nullopt;
      spec.functional_spec = r.expr;
    } else if (line.rfind("callee ", 0) == 0) {
      size_t colon = line.find(':', 7);
      if (colon == std::string::npos) return std::nullopt;
      std::string name = line.substr(7, colon - 7);
      size_t na = name.find_last_not_of(" \t");
      name = name.substr(0, na + 1);
      // contracts constrain `result`; parameter resolution is the callee's
      auto r = dsl::parse_spec(line.substr(colon + 1), nullptr);
      if (!r.ok()) return std::nullopt;
      spec.callee_contracts[name] = r.expr;
    } else {
      return std::nullopt;  // prose or unknown directive
    }
  }
  if (!have_pre || !have_post) return std::nullopt;
  return spec;
}

DualSourceResult dual_source_spec(AgentGateway& gw, const std::string& fn,
                                  const std::string& ctx,
                                  const std::vector<std::string>* known_idents) {
  auto validator = [&](const std::string& p) {
    return parse_spec_payload(p, known_idents).has_value();
  };
  ProposerRequest caller_req{RequestKind::spec_draft, fn, ctx,
                             SpecMode::caller_intent};
  ProposerRequest impl_req{RequestKind::spec_draft, fn, ctx,
                           SpecMode::implementation};
  auto caller = gw.submit(caller_req, validator);
  auto impl = gw.submit(impl_req, validator);

  DualSourceResult out;
  if (!caller.ok() && !impl.ok()) {
    out.failed = true;
    return out;
  }
  if (caller.ok() && !impl.ok()) {
    out.spec = *parse_spec_payload(caller.response->payload, known_idents);
    out.spec.provenance = SpecProvenance::caller_intent;
    out.flagged = true;  // single surviving source
  } else if (!caller.ok() && impl.ok()) {
    out.spec = *parse_spec_payload(impl.response->payload, known_idents);
    out.spec.provenance = SpecProvenance::implementation;
    out.flagged = true;
  } else {
    auto cs = *parse_spec_payload(caller.response->payload, known_idents);
    auto is = *parse_spec_payload(impl.response->payload, known_idents);
    bool same = dsl::equal(cs.pre, is.pre) && dsl::equal(cs.post, is.post) &&
                dsl::equal(cs.functional_spec, is.functional_spec);
    if (same) {
      out.spec = is;
      out.spec.provenance = SpecProvenance::merged;
      out.flagged = false;
    } else {
      // disagreement: adopt the implementation draft and flag for review
      out.spec = is;
      out.spec.provenance = SpecProvenance::implementation;
      out.flagged = true;
    }
  }
  out.spec.function = fn;
  return out;
}

}  // namespace bmca::gateway
