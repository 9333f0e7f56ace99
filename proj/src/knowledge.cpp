#include "bmca/knowledge.hpp"

#include <algorithm>

#include "bmca/util.hpp"

namespace bmca::knowledge {

namespace {

const std::set<std::string> kKnownEntryKeys = {
    "pre",       "post",        "functional",      "provenance",
    "version",   "callee_contracts", "learned_contracts", "last_run",
    "source_digest"};

const std::set<std::string> kKnownTopKeys = {
    "schema_version", "promotion_threshold", "functions",
    "detectors",      "invariants",          "flag_cache"};

std::optional<SpecProvenance> provenance_from_name(const std::string& s) {
  if (s == "caller_intent") return SpecProvenance::caller_intent;
  if (s == "implementation") return SpecProvenance::implementation;
  if (s == "merged") return SpecProvenance::merged;
  if (s == "refined") return SpecProvenance::refined;
  return std::nullopt;
}

dsl::ExprPtr parse_or_null(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) return nullptr;
  auto r = dsl::parse_spec(j[key].get<std::string>());
  return r.expr;
}

bool null_like(const std::string& v) {
  return v == "NULL" || v == "0" || v == "((void *)0)" || v == "((void*)0)" ||
         v == "0x0" || v == "null";
}

}  // namespace

std::vector<DetectorRule> builtin_detectors() {
  std::vector<DetectorRule> rules;
  rules.push_back({"library-init-global-null",
                   "global initialized by a library-init routine modeled NULL",
                   std::nullopt,
                   {"library-init"},
                   true});
  rules.push_back({"framework-managed-pointer-null",
                   "framework-managed pointer the harness left NULL",
                   std::nullopt,
                   {"framework-managed"},
                   true});
  rules.push_back({"null-guard-contradiction",
                   "witness contradicts an explicit null guard on the path",
                   std::nullopt,
                   {"null-guard-contradiction"},
                   false});
  rules.push_back({"path-divergent-unwind",
                   "unwind property fires on a path the witness does not take",
                   std::string("unwind"),
                   {"path-divergent"},
                   false});
  rules.push_back({"tagged-union-stub-disconnect",
                   "stub return breaks a tagged-union discriminant invariant",
                   std::nullopt,
                   {"stub-disconnect"},
                   false});
  return rules;
}

std::optional<std::string> match_detector(const std::vector<DetectorRule>& rules,
                                          const backend::Witness& witness) {
  for (const auto& r : rules) {
    bool constrained = r.property_type.has_value() || !r.trace_contains.empty() ||
                       r.requires_null_assignment;
    if (!constrained) continue;
    if (r.property_type &&
        *r.property_type != backend::property_type_name(witness.property_type))
      continue;
    bool ok = true;
    for (const auto& s : r.trace_contains)
      if (witness.trace_text.find(s) == std::string::npos) {
        ok = false;
        break;
      }
    if (!ok) continue;
    if (r.requires_null_assignment) {
      bool any_null = false;
      for (const auto& [name, value] : witness.assignments)
        if (null_like(value)) {
          any_null = true;
          break;
        }
      if (!any_null) continue;
    }
    return r.id;
  }
  return std::nullopt;
}

bool learn_invariant(KnowledgeStore& store, const dsl::ExprPtr& expr,
                     const std::string& function) {
  if (!expr) return false;
  for (auto& inv : store.invariants) {
    if (dsl::equal(inv.expr, expr)) {
      inv.learned_by.insert(function);
      if (static_cast<int>(inv.learned_by.size()) >= store.promotion_threshold)
        inv.promoted = true;  // monotone: never cleared within a run
      return inv.promoted;
    }
  }
  ProjectInvariant inv;
  inv.expr = expr;
  inv.learned_by.insert(function);
  inv.promoted =
      static_cast<int>(inv.learned_by.size()) >= store.promotion_threshold;
  store.invariants.push_back(std::move(inv));
  return store.invariants.back().promoted;
}

std::vector<dsl::ExprPtr> promoted_invariants(const KnowledgeStore& store) {
  std::vector<dsl::ExprPtr> out;
  for (const auto& inv : store.invariants)
    if (inv.promoted) out.push_back(inv.expr);
  return out;
}

void mark_stale(KnowledgeStore& store,
                const std::map<std::string, std::string>& current_digests) {
  for (auto& [fn, entry] : store.entries) {
    auto it = current_digests.find(fn);
    entry.stale = it == current_digests.end() || it->second != entry.source_digest;
  }
}

KnowledgeStore load_store(const std::string& path) {
  KnowledgeStore store;
  store.detectors = builtin_detectors();
  auto text = read_file(path);
  if (!text) return store;  // missing path: empty store
  nlohmann::json j = nlohmann::json::parse(*text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    store.warnings.push_back("spec store at '" + path +
                             "' is corrupt; starting fresh");
    return store;
  }
  store.schema_version = j.value("schema_version", 1);
  store.promotion_threshold = j.value("promotion_threshold", 3);
  if (j.contains("functions") && j["functions"].is_object()) {
    for (auto& [fn, e] : j["functions"].items()) {
      if (!e.is_object()) continue;
      SpecStoreEntry entry;
      entry.spec.function = fn;
      entry.spec.pre = parse_or_null(e, "pre");
      entry.spec.post = parse_or_null(e, "post");
      entry.spec.functional_spec = parse_or_null(e, "functional");
      if (auto p = provenance_from_name(e.value("provenance", "")))
        entry.spec.provenance = *p;
      entry.spec.version = e.value("version", 1);
      if (e.contains("callee_contracts") && e["callee_contracts"].is_object())
        for (auto& [name, expr] : e["callee_contracts"].items())
          if (expr.is_string()) {
            auto r = dsl::parse_spec(expr.get<std::string>());
            if (r.ok()) entry.spec.callee_contracts[name] = r.expr;
          }
      if (e.contains("learned_contracts") && e["learned_contracts"].is_object())
        for (auto& [name, expr] : e["learned_contracts"].items())
          if (expr.is_string()) {
            auto r = dsl::parse_spec(expr.get<std::string>());
            if (r.ok()) entry.learned_contracts[name] = r.expr;
          }
      entry.last_run = e.value("last_run", "");
      entry.source_digest = e.value("source_digest", "");
      for (auto& [key, value] : e.items())
        if (!kKnownEntryKeys.count(key)) entry.extra[key] = value;
      store.entries[fn] = std::move(entry);
    }
  }
  if (j.contains("detectors") && j["detectors"].is_array()) {
    for (const auto& d : j["detectors"]) {
      if (!d.is_object()) continue;
      DetectorRule r;
      r.id = d.value("id", "");
      r.description = d.value("description", "");
      if (d.contains("property_type") && d["property_type"].is_string())
        r.property_type = d["property_type"].get<std::string>();
      if (d.contains("trace_contains") && d["trace_contains"].is_array())
        for (const auto& s : d["trace_contains"])
          if (s.is_string()) r.trace_contains.push_back(s.get<std::string>());
      r.requires_null_assignment = d.value("requires_null_assignment", false);
      if (r.id.empty()) continue;
      bool builtin = std::any_of(store.detectors.begin(), store.detectors.end(),
                                 [&](const DetectorRule& b) { return b.id == r.id; });
      if (!builtin) store.detectors.push_back(std::move(r));
    }
  }
  if (j.contains("invariants") && j["invariants"].is_array()) {
    for (const auto& i : j["invariants"]) {
      if (!i.is_object() || !i.contains("expr") || !i["expr"].is_string()) continue;
      auto r = dsl::parse_spec(i["expr"].get<std::string>());
      if (!r.ok()) continue;
      ProjectInvariant inv;
      inv.expr = r.expr;
      if (i.contains("learned_by") && i["learned_by"].is_array())
        for (const auto& f : i["learned_by"])
          if (f.is_string()) inv.learned_by.insert(f.get<std::string>());
      inv.promoted = i.value("promoted", false) ||
                     static_cast<int>(inv.learned_by.size()) >=
                         store.promotion_threshold;
      store.invariants.push_back(std::move(inv));
    }
  }
  if (j.contains("flag_cache") && j["flag_cache"].is_object()) {
    for (auto& [digest, flags] : j["flag_cache"].items()) {
      if (!flags.is_array()) continue;
      std::set<backend::CheckFlag> set;
      for (const auto& f : flags)
        if (f.is_string())
          if (auto cf = backend::flag_from_name(f.get<std::string>()))
            set.insert(*cf);
      store.flag_cache[digest] = std::move(set);
    }
  }
  for (auto& [key, value] : j.items())
    if (!kKnownTopKeys.count(key)) store.extra[key] = value;
  return store;
}

bool persist_store(const KnowledgeStore& store, const std::string& path) {
  nlohmann::json j = store.extra.is_object() ? store.extra
                                             : nlohmann::json::object();
  j["schema_version"] = store.schema_version;
  j["promotion_threshold"] = store.promotion_threshold;
  nlohmann::json fns = nlohmann::json::object();
  for (const auto& [fn, entry] : store.entries) {
    nlohmann::json e = entry.extra.is_object() ? entry.extra
                                               : nlohmann::json::object();
    if (entry.spec.pre) e["pre"] = dsl::pretty(entry.spec.pre);
    if (entry.spec.post) e["post"] = dsl::pretty(entry.spec.post);
    if (entry.spec.functional_spec)
      e["functional"] = dsl::pretty(entry.spec.functional_spec);
    e["provenance"] = provenance_name(entry.spec.provenance);
    e["version"] = entry.spec.version;
    nlohmann::json contracts = nlohmann::json::object();
    for (const auto& [name, expr] : entry.spec.callee_contracts)
      if (expr) contracts[name] = dsl::pretty(expr);
    e["callee_contracts"] = contracts;
    nlohmann::json learned = nlohmann::json::object();
    for (const auto& [name, expr] : entry.learned_contracts)
      if (expr) learned[name] = dsl::pretty(expr);
    e["learned_contracts"] = learned;
    e["last_run"] = entry.last_run;
    e["source_digest"] = entry.source_digest;
    fns[fn] = std::move(e);
  }
  j["functions"] = std::move(fns);
  nlohmann::json detectors = nlohmann::json::array();
  auto builtins = builtin_detectors();
  for (const auto& r : store.detectors) {
    bool builtin = std::any_of(builtins.begin(), builtins.end(),
                               [&](const DetectorRule& b) { return b.id == r.id; });
    if (builtin) continue;  // built-ins are code, not data
    nlohmann::json d;
    d["id"] = r.id;
    d["description"] = r.description;
    if (r.property_type) d["property_type"] = *r.property_type;
    d["trace_contains"] = r.trace_contains;
    d["requires_null_assignment"] = r.requires_null_assignment;
    detectors.push_back(std::move(d));
  }
  j["detectors"] = std::move(detectors);
  nlohmann::json invariants = nlohmann::json::array();
  for (const auto& inv : store.invariants) {
    nlohmann::json i;
    i["expr"] = dsl::pretty(inv.expr);
    i["learned_by"] = inv.learned_by;
    i["promoted"] = inv.promoted;
    invariants.push_back(std::move(i));
  }
  j["invariants"] = std::move(invariants);
  nlohmann::json cache = nlohmann::json::object();
  for (const auto& [digest, flags] : store.flag_cache) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : flags) arr.push_back(backend::flag_name(f));
    cache[digest] = std::move(arr);
  }
  j["flag_cache"] = std::move(cache);
  return write_file(path, j.dump(2) + "\n");
}

}  // namespace bmca::knowledge
