#include "bmca/validation.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <climits>
#include <csignal>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "bmca/util.hpp"

namespace bmca::validation {

const char* tier_name(EvidenceTier t) {
  switch (t) {
    case EvidenceTier::confirmed_bmc: return "confirmed_bmc";
    case EvidenceTier::confirmed_system_entry: return "confirmed_system_entry";
    case EvidenceTier::confirmed_dynamic: return "confirmed_dynamic";
  }
  return "?";
}

EvidenceTier max_tier(EvidenceTier a, EvidenceTier b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

const char* feasibility_name(Feasibility f) {
  switch (f) {
    case Feasibility::survives: return "survives";
    case Feasibility::refuted: return "refuted";
    case Feasibility::skipped: return "skipped";
  }
  return "?";
}

const char* dynamic_kind_name(DynamicKind k) {
  switch (k) {
    case DynamicKind::signal: return "signal";
    case DynamicKind::no_signal: return "no_signal";
    case DynamicKind::not_compilable: return "not_compilable";
    case DynamicKind::skipped: return "skipped";
  }
  return "?";
}

const char* realism_name(Realism r) {
  return r == Realism::realistic ? "realistic" : "unrealistic";
}

const char* classification_name(Classification c) {
  switch (c) {
    case Classification::real_bug: return "real_bug";
    case Classification::latent: return "latent";
    case Classification::spurious: return "spurious";
  }
  return "?";
}

const char* threat_model_name(ThreatModel m) {
  switch (m) {
    case ThreatModel::security: return "security";
    case ThreatModel::safety: return "safety";
    case ThreatModel::functional: return "functional";
  }
  return "?";
}

std::optional<ThreatModel> threat_model_from_name(const std::string& name) {
  if (name == "security") return ThreatModel::security;
  if (name == "safety") return ThreatModel::safety;
  if (name == "functional") return ThreatModel::functional;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Stage 1: reachability

namespace {

std::string witness_summary(const backend::Witness& w) {
  std::ostringstream out;
  out << w.property_id;
  for (const auto& [name, value] : w.assignments)
    out << " " << name << "=" << value;
  return out.str();
}

bool hop_feasible(gateway::AgentGateway& gw, const std::string& caller,
                  const std::string& callee, const backend::Witness& w) {
  gateway::ProposerRequest req{gateway::RequestKind::classify_witness, caller,
                               "hop " + caller + " -> " + callee + " : " +
                                   witness_summary(w),
                               std::nullopt};
  auto outcome = gw.submit(req, [](const std::string& p) {
    return p == "feasible" || p == "infeasible";
  });
  return outcome.ok() && outcome.response->payload == "feasible";
}

}  // namespace

ReachResult stage1_reachability(const dedup::WitnessClass& cls,
                                const index::CodebaseIndex& idx,
                                gateway::AgentGateway& gw) {
  ReachResult res;
  const std::string& fn = cls.function;
  res.hop_chain.push_back(fn);
  if (idx.entry_manifest.count(fn)) {
    res.kind = ReachKind::system_entry;
    return res;
  }
  std::set<std::string> visited;
  std::string first_infeasible;
  // depth-first upward walk; any feasible chain to an entry suffices
  std::function<bool(const std::string&)> ascend = [&](const std::string& cur) {
    if (!visited.insert(cur).second) return false;
    if (idx.entry_manifest.count(cur)) return true;
    auto callers = idx.graph.callers_of(cur);
    std::sort(callers.begin(), callers.end());
    if (callers.empty()) return true;  // system-entry boundary
    for (const auto& caller : callers) {
      if (hop_feasible(gw, caller, cur, cls.representative)) {
        res.hop_chain.push_back(caller);
        if (ascend(caller)) return true;
        res.hop_chain.pop_back();
      } else if (first_infeasible.empty()) {
        first_infeasible = caller;
      }
    }
    return false;
  };
  if (ascend(fn)) {
    res.kind = ReachKind::system_entry;
  } else if (!first_infeasible.empty()) {
    res.kind = ReachKind::halted_at;
    res.caller = first_infeasible;
  } else {
    res.kind = ReachKind::unknown;  // cyclic caller set, no verdicts
  }
  return res;
}

// ---------------------------------------------------------------------------
// Stage 2: callee feasibility

Feasibility stage2_callee_feasibility(const dedup::WitnessClass& cls,
                                      const index::CodebaseIndex& idx,
                                      const FunctionSpec& spec,
                                      backend::BackendAdapter& adapter,
                                      const backend::BackendConfig& config) {
  auto fn_it = idx.functions.find(cls.function);
  if (fn_it == idx.functions.end()) return Feasibility::skipped;
  const auto& fn = fn_it->second;
  if (fn.callees.empty()) return Feasibility::survives;  // leaf: no stubs used
  auto closure = index::transitive_callee_closure(idx, cls.function);
  if (!closure) return Feasibility::skipped;
  for (const auto& name : *closure) {
    auto it = idx.functions.find(name);
    if (it == idx.functions.end()) return Feasibility::skipped;
    for (const auto& callee : it->second.callees)
      if (!idx.functions.count(callee))
        return Feasibility::skipped;  // callee body unavailable
  }

  auto synth = backend::synthesize_harness(fn, spec, {}, {}, {}, {});
  if (!synth.ok()) return Feasibility::skipped;
  backend::Harness h = synth.harness;

  // real bodies instead of stubs: callees first, the target last
  std::ostringstream prefix;
  for (const auto& name : *closure) {
    if (name == cls.function) continue;
    auto it = idx.functions.find(name);
    if (it == idx.functions.end()) return Feasibility::skipped;
    prefix << it->second.body_text << "\n\n";
  }
  prefix << fn.body_text;
  h.source_prefix = prefix.str();

  std::set<std::string> params;
  for (const auto& [pname, ptype] : fn.params) params.insert(pname);
  bool c = h.dialect == dsl::Dialect::c_backend;
  for (const auto& [name, value] : cls.representative.assignments) {
    if (!params.count(name)) continue;  // only top-level inputs are pinnable
    h.pin_assumes.push_back(
        c ? "__CPROVER_assume(" + name + " == " + value + ");"
          : "kani::assume(" + name + " == " + value + ");");
  }

  auto outcome = backend::run(h, config, adapter);
  switch (outcome.verdict) {
    case backend::Verdict::verified_clean: return Feasibility::refuted;
    case backend::Verdict::counterexample: return Feasibility::survives;
    case backend::Verdict::inconclusive: return Feasibility::survives;
  }
  return Feasibility::survives;
}

// ---------------------------------------------------------------------------
// Stage 3: dynamic replay

bool host_compiler_available() {
  static int cached = -1;
  if (cached < 0)
    cached = std::system("command -v gcc >/dev/null 2>&1") == 0 ? 1 : 0;
  return cached == 1;
}

namespace {

bool null_value(const std::string& v) {
  return v.empty() || v == "NULL" || v == "0" || v == "((void *)0)" ||
         v == "((void*)0)" || v == "null";
}

bool digits_only(const std::string& v) {
  if (v.empty()) return false;
  return std::all_of(v.begin(), v.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

std::string signal_name_of(int sig) {
  switch (sig) {
    case SIGSEGV: return "SIGSEGV";
    case SIGABRT: return "SIGABRT";
    case SIGFPE: return "SIGFPE";
    case SIGILL: return "SIGILL";
  }
  return "";
}

}  // namespace

DynamicResult stage3_dynamic_replay(const dedup::WitnessClass& cls,
                                    const index::CodebaseIndex& idx,
                                    const std::string& work_dir) {
  DynamicResult res;
  if (!host_compiler_available()) {
    res.kind = DynamicKind::skipped;
    res.detail = "no host compiler";
    return res;
  }
  auto fn_it = idx.functions.find(cls.function);
  if (fn_it == idx.functions.end()) {
    res.kind = DynamicKind::skipped;
    res.detail = "function record unavailable";
    return res;
  }
  const auto& fn = fn_it->second;
  if (fn.source_language != index::SourceLanguage::c) {
    res.kind = DynamicKind::skipped;
    res.detail = "dynamic replay is C-only";
    return res;
  }
  auto source = read_file(fn.file_path);
  if (!source) {
    res.kind = DynamicKind::skipped;
    res.detail = "source file unreadable";
    return res;
  }

  std::ostringstream h;
  h << "#include <signal.h>\n#include <stdlib.h>\n#include <string.h>\n"
    << "#include <unistd.h>\n#include <stdint.h>\n#include <stddef.h>\n\n"
    << *source << "\n\n"
    << "static void bmca_trap(int sig) { _exit(100 + sig); }\n\n"
    << "int main(void) {\n"
    << "    signal(SIGSEGV, bmca_trap);\n"
    << "    signal(SIGABRT, bmca_trap);\n"
    << "    signal(SIGFPE, bmca_trap);\n"
    << "    signal(SIGILL, bmca_trap);\n";
  std::vector<std::string> args;
  const auto& asg = cls.representative.assignments;
  for (const auto& [pname, ptype] : fn.params) {
    auto it = asg.find(pname);
    std::string value = it == asg.end() ? "" : it->second;
    if (ptype.find('*') != std::string::npos) {
      if (null_value(value)) {
        h << "    " << ptype << (ptype.back() == '*' ? "" : " ") << pname
          << " = (" << ptype << ")0;\n";
      } else {
        h << "    " << ptype << (ptype.back() == '*' ? "" : " ") << pname
          << " = (" << ptype << ")calloc(1, 256);\n";
      }
    } else {
      std::string lit = digits_only(value) ? value + "ULL" : "0";
      h << "    " << ptype << " " << pname << " = (" << ptype << ")" << lit
        << ";\n";
    }
    args.push_back(pname);
  }
  h << "    " << fn.name << "(";
  for (size_t i = 0; i < args.size(); ++i) h << (i ? ", " : "") << args[i];
  h << ");\n    return 0;\n}\n";

  std::string base = work_dir + "/replay_" + fn.name;
  std::string src = base + ".c";
  std::string bin = base + ".bin";
  std::string log = base + ".log";
  if (!write_file(src, h.str())) {
    res.kind = DynamicKind::skipped;
    res.detail = "work dir unwritable";
    return res;
  }
  std::string compile =
      "gcc -w -o " + bin + " " + src + " > " + log + " 2>&1";
  if (std::system(compile.c_str()) != 0) {
    res.kind = DynamicKind::not_compilable;
    res.detail = read_file(log).value_or("");
    return res;
  }
  int rc = std::system(("timeout -k 2 10 " + bin + " >/dev/null 2>&1").c_str());
  int sig = 0;
  if (rc >= 0) {
    if ((rc & 0x7f) != 0 && (rc & 0x7f) != 0x7f) {
      sig = rc & 0x7f;  // child terminated by signal
    } else {
      int code = (rc >> 8) & 0xff;
      if (code > 100 && code <= 100 + 64) sig = code - 100;  // handler exit
    }
  }
  std::string name = signal_name_of(sig);
  if (!name.empty()) {
    res.kind = DynamicKind::signal;
    res.signal_name = name;
  } else {
    res.kind = DynamicKind::no_signal;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Stage 4: realism

RealismOutcome stage4_realism(const dedup::WitnessClass& cls,
                              const std::vector<knowledge::DetectorRule>& rules,
                              gateway::AgentGateway& gw,
                              const std::string& context) {
  RealismOutcome out;
  if (auto id = knowledge::match_detector(rules, cls.representative)) {
    out.realism = Realism::unrealistic;
    out.confidence = RealismConfidence::committed;
    out.detector_id = id;
    return out;
  }
  gateway::ProposerRequest req{gateway::RequestKind::realism_audit, cls.function,
                               context + " : " +
                                   witness_summary(cls.representative),
                               std::nullopt};
  auto outcome = gw.submit(req, [](const std::string& p) {
    return p == "realistic" || p == "unrealistic" || p == "uncertain";
  });
  std::string verdict = outcome.ok() ? outcome.response->payload : "unrealistic";
  if (verdict == "realistic") {
    out.realism = Realism::realistic;
    out.confidence = RealismConfidence::committed;
  } else if (verdict == "uncertain") {
    out.realism = Realism::unrealistic;
    out.confidence = RealismConfidence::folded_uncertain;
  } else {
    out.realism = Realism::unrealistic;
    out.confidence = RealismConfidence::committed;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

Classification classify(const Finding& finding, ThreatModel model) {
  if (finding.realism == Realism::unrealistic) return Classification::spurious;
  if (finding.cls.property_type == backend::PropertyType::functional)
    return Classification::real_bug;  // holds regardless of caller
  switch (model) {
    case ThreatModel::security:
      return finding.reach.kind == ReachKind::system_entry
                 ? Classification::real_bug
                 : Classification::latent;
    case ThreatModel::safety:
    case ThreatModel::functional:
      return Classification::latent;  // no current trigger state assumed
  }
  return Classification::latent;
}

// ---------------------------------------------------------------------------
// Spec-overflow filter

namespace {

struct EvalState {
  bool overflow = false;
  bool unevaluable = false;
};

std::optional<unsigned long long> eval_u64(const dsl::ExprPtr& e,
                                           const backend::Witness& w,
                                           EvalState& st) {
  if (!e) {
    st.unevaluable = true;
    return std::nullopt;
  }
  auto lookup = [&](const std::string& name) -> std::optional<unsigned long long> {
    auto it = w.assignments.find(name);
    if (it == w.assignments.end() || !digits_only(it->second)) {
      st.unevaluable = true;
      return std::nullopt;
    }
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (errno != 0 || (end && *end)) {
      st.unevaluable = true;
      return std::nullopt;
    }
    return v;
  };
  using dsl::NodeKind;
  switch (e->kind) {
    case NodeKind::IntConst: {
      errno = 0;
      unsigned long long v = std::strtoull(e->text.c_str(), nullptr, 10);
      if (errno != 0) {
        st.unevaluable = true;
        return std::nullopt;
      }
      return v;
    }
    case NodeKind::NamedConst:
      if (e->text == "MAX_UNSIGNED") return ULLONG_MAX;
      if (e->text == "true") return 1;
      if (e->text == "false") return 0;
      st.unevaluable = true;
      return std::nullopt;
    case NodeKind::Ident:
      return lookup(e->text);
    case NodeKind::Field:
    case NodeKind::Result:
      return lookup(dsl::pretty(e));
    case NodeKind::Neg: {
      auto v = eval_u64(e->kids[0], w, st);
      if (!v) return std::nullopt;
      if (*v != 0) st.overflow = true;  // unsigned negate wraps
      return 0ULL - *v;
    }
    case NodeKind::Arith: {
      auto a = eval_u64(e->kids[0], w, st);
      auto b = eval_u64(e->kids[1], w, st);
      if (!a || !b) return std::nullopt;
      unsigned long long r = 0;
      if (e->text == "+") {
        if (__builtin_add_overflow(*a, *b, &r)) st.overflow = true;
        return r;
      }
      if (e->text == "-") {
        if (__builtin_sub_overflow(*a, *b, &r)) st.overflow = true;
        return r;
      }
      if (e->text == "*") {
        if (__builtin_mul_overflow(*a, *b, &r)) st.overflow = true;
        return r;
      }
      if (*b == 0) {
        st.unevaluable = true;
        return std::nullopt;
      }
      return e->text == "/" ? *a / *b : *a % *b;
    }
    case NodeKind::Compare: {
      auto a = eval_u64(e->kids[0], w, st);
      auto b = eval_u64(e->kids[1], w, st);
      if (!a || !b) return std::nullopt;
      if (e->text == "==") return *a == *b;
      if (e->text == "!=") return *a != *b;
      if (e->text == "<") return *a < *b;
      if (e->text == "<=") return *a <= *b;
      if (e->text == ">") return *a > *b;
      return *a >= *b;
    }
    case NodeKind::And: {
      // no short-circuit: the filter inspects all spec arithmetic
      auto a = eval_u64(e->kids[0], w, st);
      auto b = eval_u64(e->kids[1], w, st);
      if (!a || !b) return std::nullopt;
      return (*a != 0 && *b != 0) ? 1 : 0;
    }
    case NodeKind::Or: {
      auto a = eval_u64(e->kids[0], w, st);
      auto b = eval_u64(e->kids[1], w, st);
      if (!a || !b) return std::nullopt;
      return (*a != 0 || *b != 0) ? 1 : 0;
    }
    case NodeKind::Implies: {
      auto a = eval_u64(e->kids[0], w, st);
      auto b = eval_u64(e->kids[1], w, st);
      if (!a || !b) return std::nullopt;
      return (*a == 0 || *b != 0) ? 1 : 0;
    }
    case NodeKind::Not: {
      auto a = eval_u64(e->kids[0], w, st);
      if (!a) return std::nullopt;
      return *a == 0 ? 1 : 0;
    }
    default:
      st.unevaluable = true;  // memory predicates and old() are non-numeric
      return std::nullopt;
  }
}

}  // namespace

OverflowFilter spec_overflow_filter(const backend::Witness& witness,
                                    const dsl::ExprPtr& spec_expr) {
  if (!spec_expr) return OverflowFilter::retain;
  EvalState st;
  eval_u64(spec_expr, witness, st);
  return st.overflow ? OverflowFilter::spurious : OverflowFilter::retain;
}

EvidenceTier tier_after_stage1(EvidenceTier current, const ReachResult& reach) {
  if (reach.kind == ReachKind::system_entry)
    return max_tier(current, EvidenceTier::confirmed_system_entry);
  return current;
}

EvidenceTier tier_after_stage3(EvidenceTier current, const DynamicResult& dyn) {
  if (dyn.kind == DynamicKind::signal)
    return max_tier(current, EvidenceTier::confirmed_dynamic);
  return current;
}

}  // namespace bmca::validation
