#include "bmca/refinement.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <regex>
#include <sstream>

#include "json.hpp"

namespace bmca::refinement {

const char* refinement_kind_name(RefinementKind k) {
  switch (k) {
    case RefinementKind::verifier_level: return "verifier_level";
    case RefinementKind::caller_side: return "caller_side";
    case RefinementKind::callee_contract: return "callee_contract";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Recheck queue

bool RecheckQueue::enqueue(const std::string& function,
                           const std::string& reason) {
  int& n = counts_[function];
  if (n >= budget_) {
    exhausted_.push_back(function);
    return false;
  }
  ++n;
  items_.push_back({function, reason, n});
  return true;
}

std::optional<QueueItem> RecheckQueue::pop() {
  if (items_.empty()) return std::nullopt;
  QueueItem item = items_.front();
  items_.pop_front();
  return item;
}

int RecheckQueue::iterations(const std::string& function) const {
  auto it = counts_.find(function);
  return it == counts_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// Proposal parsing

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::optional<Refinement> parse_refinement_payload(const std::string& payload) {
  std::string p = trim(payload);
  Refinement r;
  if (p.rfind("caller_side:", 0) == 0) {
    auto parsed = dsl::parse_spec(p.substr(12));
    if (!parsed.ok()) return std::nullopt;
    r.kind = RefinementKind::caller_side;
    r.payload_expr = parsed.expr;
    return r;
  }
  if (p.rfind("callee_contract ", 0) == 0) {
    size_t colon = p.find(':', 16);
    if (colon == std::string::npos) return std::nullopt;
    std::string name = trim(p.substr(16, colon - 16));
    if (name.empty()) return std::nullopt;
    auto parsed = dsl::parse_spec(p.substr(colon + 1));
    if (!parsed.ok()) return std::nullopt;
    r.kind = RefinementKind::callee_contract;
    r.target = name;
    r.payload_expr = parsed.expr;
    return r;
  }
  if (p.rfind("verifier_level:", 0) == 0) {
    std::string rest = trim(p.substr(15));
    size_t eq = rest.find('=');
    if (eq == std::string::npos) return std::nullopt;
    r.kind = RefinementKind::verifier_level;
    r.config_key = trim(rest.substr(0, eq));
    r.config_value = trim(rest.substr(eq + 1));
    if (r.config_key.empty() || r.config_value.empty()) return std::nullopt;
    return r;
  }
  return std::nullopt;
}

std::optional<Refinement> propose(const validation::Finding& finding,
                                  gateway::AgentGateway& gw,
                                  const std::string& context) {
  gateway::ProposerRequest req{gateway::RequestKind::refine_propose,
                               finding.cls.function, context, std::nullopt};
  auto outcome = gw.submit(req, [](const std::string& p) {
    return parse_refinement_payload(p).has_value();
  });
  if (!outcome.ok()) return std::nullopt;  // recorded unresolved by the caller
  auto r = parse_refinement_payload(outcome.response->payload);
  if (!r) return std::nullopt;
  if (r->kind != RefinementKind::callee_contract)
    r->target = finding.cls.function;
  r->origin_witness =
      finding.cls.function + "/" + finding.cls.representative.property_id;
  return r;
}

// ---------------------------------------------------------------------------
// Guard evidence collection

namespace {

std::optional<long long> int_literal(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  size_t i = t[0] == '-' ? 1 : 0;
  if (i == t.size()) return std::nullopt;
  for (size_t k = i; k < t.size(); ++k)
    if (!std::isdigit(static_cast<unsigned char>(t[k]))) return std::nullopt;
  errno = 0;
  long long v = std::strtoll(t.c_str(), nullptr, 10);
  if (errno != 0) return std::nullopt;
  return v;
}

std::vector<std::string> split_args(const std::string& text) {
  std::vector<std::string> args;
  std::string cur;
  int depth = 0;
  for (char c : text) {
    if (c == '(' || c == '[') ++depth;
    else if (c == ')' || c == ']') --depth;
    if (c == ',' && depth == 0) {
      args.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !args.empty()) args.push_back(cur);
  return args;
}

}  // namespace

std::vector<CallSiteTuple> collect_call_site_tuples(
    const index::CodebaseIndex& idx, const std::string& target) {
  std::vector<CallSiteTuple> tuples;
  auto tgt = idx.functions.find(target);
  if (tgt == idx.functions.end()) return tuples;
  const auto& params = tgt->second.params;
  for (const auto& [caller, rec] : idx.functions) {
    if (caller == target) continue;
    const std::string& body = rec.body_text;
    size_t pos = 0;
    while ((pos = body.find(target, pos)) != std::string::npos) {
      size_t start = pos;
      pos += target.size();
      if (start > 0) {
        char prev = body[start - 1];
        if (std::isalnum(static_cast<unsigned char>(prev)) || prev == '_' ||
            prev == '.' || prev == '>')
          continue;
      }
      size_t open = body.find_first_not_of(" \t", pos);
      if (open == std::string::npos || body[open] != '(') continue;
      int depth = 1;
      size_t close = open + 1;
      while (close < body.size() && depth > 0) {
        if (body[close] == '(') ++depth;
        else if (body[close] == ')') --depth;
        ++close;
      }
      if (depth != 0) break;
      auto args = split_args(body.substr(open + 1, close - open - 2));
      CallSiteTuple tuple;
      tuple.caller = caller;
      for (size_t i = 0; i < args.size() && i < params.size(); ++i)
        if (auto v = int_literal(args[i])) tuple.args[params[i].first] = *v;
      if (!tuple.args.empty()) tuples.push_back(std::move(tuple));
    }
  }
  return tuples;
}

std::vector<long long> collect_return_observations(
    const index::CodebaseIndex& idx, const std::string& target) {
  std::vector<long long> values;
  auto it = idx.functions.find(target);
  if (it == idx.functions.end()) return values;
  static const std::regex ret_re(R"(\breturn\s+(-?\d+)\s*;)");
  const std::string& body = it->second.body_text;
  for (auto m = std::sregex_iterator(body.begin(), body.end(), ret_re);
       m != std::sregex_iterator(); ++m)
    if (auto v = int_literal((*m)[1].str())) values.push_back(*v);
  return values;
}

// ---------------------------------------------------------------------------
// Conjunct evaluation over literal environments

namespace {

std::optional<long long> eval_ll(const dsl::ExprPtr& e,
                                 const std::map<std::string, long long>& env) {
  if (!e) return std::nullopt;
  using dsl::NodeKind;
  switch (e->kind) {
    case NodeKind::IntConst: {
      errno = 0;
      long long v = std::strtoll(e->text.c_str(), nullptr, 10);
      if (errno != 0) return std::nullopt;
      return v;
    }
    case NodeKind::NamedConst:
      if (e->text == "true") return 1;
      if (e->text == "false") return 0;
      return std::nullopt;  // MAX_UNSIGNED exceeds the signed fragment
    case NodeKind::Ident: {
      auto it = env.find(e->text);
      if (it == env.end()) return std::nullopt;  // symbolic: no evidence
      return it->second;
    }
    case NodeKind::Result: {
      auto it = env.find("result");
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case NodeKind::Field: {
      auto it = env.find(dsl::pretty(e));
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case NodeKind::Neg: {
      auto v = eval_ll(e->kids[0], env);
      if (!v) return std::nullopt;
      return -*v;
    }
    case NodeKind::Arith: {
      auto a = eval_ll(e->kids[0], env);
      auto b = eval_ll(e->kids[1], env);
      if (!a || !b) return std::nullopt;
      if (e->text == "+") return *a + *b;
      if (e->text == "-") return *a - *b;
      if (e->text == "*") return *a * *b;
      if (*b == 0) return std::nullopt;
      return e->text == "/" ? *a / *b : *a % *b;
    }
    case NodeKind::Compare: {
      auto a = eval_ll(e->kids[0], env);
      auto b = eval_ll(e->kids[1], env);
      if (!a || !b) return std::nullopt;
      if (e->text == "==") return *a == *b;
      if (e->text == "!=") return *a != *b;
      if (e->text == "<") return *a < *b;
      if (e->text == "<=") return *a <= *b;
      if (e->text == ">") return *a > *b;
      return *a >= *b;
    }
    case NodeKind::And: {
      auto a = eval_ll(e->kids[0], env);
      auto b = eval_ll(e->kids[1], env);
      if (!a || !b) return std::nullopt;
      return (*a != 0 && *b != 0) ? 1 : 0;
    }
    case NodeKind::Or: {
      auto a = eval_ll(e->kids[0], env);
      auto b = eval_ll(e->kids[1], env);
      if (!a || !b) return std::nullopt;
      return (*a != 0 || *b != 0) ? 1 : 0;
    }
    case NodeKind::Implies: {
      auto a = eval_ll(e->kids[0], env);
      auto b = eval_ll(e->kids[1], env);
      if (!a || !b) return std::nullopt;
      return (*a == 0 || *b != 0) ? 1 : 0;
    }
    case NodeKind::Not: {
      auto a = eval_ll(e->kids[0], env);
      if (!a) return std::nullopt;
      return *a == 0 ? 1 : 0;
    }
    default:
      return std::nullopt;  // memory predicates carry no literal evidence
  }
}

const std::set<std::string> kDisableValues = {"off", "false", "0", "disable",
                                              "disabled", "none"};

}  // namespace

std::optional<bool> eval_conjunct(const dsl::ExprPtr& expr,
                                  const std::map<std::string, long long>& env) {
  auto v = eval_ll(expr, env);
  if (!v) return std::nullopt;
  return *v != 0;
}

GuardResult guard(const Refinement& r, const GuardEvidence& evidence) {
  switch (r.kind) {
    case RefinementKind::caller_side:
      for (const auto& tuple : evidence.call_sites) {
        auto v = eval_conjunct(r.payload_expr, tuple.args);
        if (v && !*v)
          return {false, "recorded call site in '" + tuple.caller +
                             "' violates the proposed precondition"};
      }
      return {true, ""};
    case RefinementKind::callee_contract:
      for (long long obs : evidence.return_observations) {
        auto v = eval_conjunct(r.payload_expr, {{"result", obs}});
        if (v && !*v)
          return {false, "recorded return value " + std::to_string(obs) +
                             " violates the proposed contract"};
      }
      return {true, ""};
    case RefinementKind::verifier_level: {
      auto flag = backend::flag_from_name(r.config_key);
      if (flag && evidence.active_flags.count(*flag) &&
          kDisableValues.count(r.config_value))
        return {false, "refinement disables the active check flag '" +
                           r.config_key + "'"};
      return {true, ""};
    }
  }
  return {false, "unknown refinement kind"};
}

ApplyResult apply(const Refinement& r, std::map<std::string, FunctionSpec>& specs,
                  const index::CodebaseIndex& idx, RecheckQueue& queue) {
  ApplyResult res;
  auto bump = [&](FunctionSpec& spec) {
    spec.version += 1;
    spec.provenance = SpecProvenance::refined;
  };
  switch (r.kind) {
    case RefinementKind::verifier_level:
      break;  // config delta only; spec text unchanged
    case RefinementKind::caller_side: {
      FunctionSpec& spec = specs[r.target];
      if (spec.function.empty()) spec.function = r.target;
      spec.pre = spec.pre ? dsl::make_expr(dsl::NodeKind::And, "",
                                           {spec.pre, r.payload_expr})
                          : r.payload_expr;
      bump(spec);
      break;
    }
    case RefinementKind::callee_contract: {
      FunctionSpec& spec = specs[r.target];
      if (spec.function.empty()) spec.function = r.target;
      spec.post = spec.post ? dsl::make_expr(dsl::NodeKind::And, "",
                                             {spec.post, r.payload_expr})
                            : r.payload_expr;
      bump(spec);
      break;
    }
  }
  res.queued = queue.enqueue(r.target, refinement_kind_name(r.kind));
  if (res.queued) res.requeued.push_back(r.target);
  if (r.kind == RefinementKind::callee_contract) {
    auto callers = idx.graph.callers_of(r.target);
    std::sort(callers.begin(), callers.end());
    for (const auto& caller : callers)
      if (queue.enqueue(caller, "callee contract refined: " + r.target))
        res.requeued.push_back(caller);
  }
  return res;
}

std::string log_line(const Refinement& r, const std::string& verdict) {
  nlohmann::json j;
  j["kind"] = refinement_kind_name(r.kind);
  j["target"] = r.target;
  if (r.payload_expr) j["payload"] = dsl::pretty(r.payload_expr);
  else j["payload"] = r.config_key + "=" + r.config_value;
  j["verdict"] = verdict;
  j["origin"] = r.origin_witness;
  return j.dump();
}

}  // namespace bmca::refinement
