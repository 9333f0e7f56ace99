#include "bmca/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <sstream>

#include "bmca/util.hpp"
#include "json.hpp"

namespace bmca::backend {

bool flag_valid_for(CheckFlag flag, dsl::Dialect dialect) {
  switch (flag) {
    case CheckFlag::unsigned_overflow:
    case CheckFlag::signed_overflow:
    case CheckFlag::conversion:
    case CheckFlag::pointer_overflow:
      return dialect == dsl::Dialect::c_backend;
    case CheckFlag::overflow_checks:
    case CheckFlag::unwind_strategy:
      return dialect == dsl::Dialect::rust_backend;
  }
  return false;
}

std::string flag_cli(CheckFlag flag) {
  switch (flag) {
    case CheckFlag::unsigned_overflow: return "--unsigned-overflow-check";
    case CheckFlag::signed_overflow: return "--signed-overflow-check";
    case CheckFlag::conversion: return "--conversion-check";
    case CheckFlag::pointer_overflow: return "--pointer-overflow-check";
    case CheckFlag::overflow_checks: return "--overflow-checks";
    case CheckFlag::unwind_strategy: return "--unwind-strategy";
  }
  return "";
}

std::string flag_name(CheckFlag flag) {
  switch (flag) {
    case CheckFlag::unsigned_overflow: return "unsigned_overflow";
    case CheckFlag::signed_overflow: return "signed_overflow";
    case CheckFlag::conversion: return "conversion";
    case CheckFlag::pointer_overflow: return "pointer_overflow";
    case CheckFlag::overflow_checks: return "overflow_checks";
    case CheckFlag::unwind_strategy: return "unwind_strategy";
  }
  return "?";
}

std::optional<CheckFlag> flag_from_name(const std::string& name) {
  static const std::map<std::string, CheckFlag> table = {
      {"unsigned_overflow", CheckFlag::unsigned_overflow},
      {"signed_overflow", CheckFlag::signed_overflow},
      {"conversion", CheckFlag::conversion},
      {"pointer_overflow", CheckFlag::pointer_overflow},
      {"overflow_checks", CheckFlag::overflow_checks},
      {"unwind_strategy", CheckFlag::unwind_strategy},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

const char* property_type_name(PropertyType t) {
  switch (t) {
    case PropertyType::precondition: return "precondition";
    case PropertyType::postcondition: return "postcondition";
    case PropertyType::overflow: return "overflow";
    case PropertyType::bounds: return "bounds";
    case PropertyType::unwind: return "unwind";
    case PropertyType::pointer: return "pointer";
    case PropertyType::conversion: return "conversion";
    case PropertyType::functional: return "functional";
  }
  return "?";
}

PropertyType property_type_of(const std::string& property_id) {
  auto has = [&](const char* s) {
    return property_id.find(s) != std::string::npos;
  };
  if (has("unwind")) return PropertyType::unwind;
  if (has("overflow")) return PropertyType::overflow;
  if (has("functional")) return PropertyType::functional;
  if (has("precondition")) return PropertyType::precondition;
  if (has("bounds") || has("array")) return PropertyType::bounds;
  if (has("pointer") || has("dereference")) return PropertyType::pointer;
  if (has("conversion")) return PropertyType::conversion;
  return PropertyType::postcondition;  // postcondition / main.assertion.N
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::verified_clean: return "verified_clean";
    case Verdict::counterexample: return "counterexample";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Harness rendering

namespace {

std::string sanitize(const std::string& type) {
  std::string out;
  for (char c : type) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "int" : out;
}

bool is_pointer_type(const std::string& type) {
  return type.find('*') != std::string::npos;
}

const std::set<std::string> kRustPrimitives = {
    "u8", "u16", "u32", "u64", "u128", "usize", "i8", "i16", "i32",
    "i64", "i128", "isize", "bool", "char", "f32", "f64"};

// "&[T]" / "Vec<T>" / "[T; N]" -> T, empty when not a sequence type
std::string rust_sequence_elem(const std::string& type) {
  if (type.rfind("&[", 0) == 0 && type.back() == ']')
    return type.substr(2, type.size() - 3);
  if (type.rfind("Vec<", 0) == 0 && type.back() == '>')
    return type.substr(4, type.size() - 5);
  if (type.rfind("[", 0) == 0 && type.back() == ']') {
    std::string inner = type.substr(1, type.size() - 2);
    size_t semi = inner.find(';');
    return semi == std::string::npos ? inner : inner.substr(0, semi);
  }
  return "";
}

std::string trim_copy(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\n\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\n\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string Harness::text() const {
  std::ostringstream out;
  bool c = dialect == dsl::Dialect::c_backend;
  if (c) {
    out << "/* verification harness: " << function << " */\n";
    out << "#include <stdlib.h>\n#include <stdint.h>\n#include <stddef.h>\n";
    out << "#include <limits.h>\n\n";
  } else {
    out << "// verification harness: " << function << "\n\n";
  }
  if (!source_prefix.empty()) out << source_prefix << "\n\n";
  for (const auto& [name, stub] : callee_stubs) out << stub << "\n\n";
  std::string ind;
  if (c) {
    out << "int main(void) {\n";
    ind = "    ";
  } else {
    out << "#[kani::proof]\nfn check_" << function << "() {\n";
    ind = "    ";
  }
  auto section = [&](const char* banner, const std::vector<std::string>& lines) {
    if (lines.empty()) return;
    out << ind << (c ? "/* " : "// ") << banner << (c ? " */" : "") << "\n";
    for (const auto& l : lines) out << ind << l << "\n";
  };
  section("pre-state bindings", prelude_bindings);
  section("nondeterministic inputs", nondet_init);
  section("project invariants", invariant_assumes);
  section("precondition", assumes.assume_lines);
  section("witness pinning", pin_assumes);
  out << ind << call_stmt << "\n";
  section("postcondition", asserts.assert_lines);
  if (c) out << ind << "return 0;\n";
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Stub generation

StubResult stub_for(const std::string& callee, const dsl::ExprPtr& contract,
                    dsl::Dialect dialect, const std::string& return_type,
                    const std::string& params_text) {
  StubResult res;
  if (!contract) {
    res.error = "missing contract for callee '" + callee + "'";
    return res;
  }
  if (dsl::contains_old(contract)) {
    res.error = "contract for '" + callee + "' references pre-state";
    return res;
  }
  std::ostringstream out;
  bool c = dialect == dsl::Dialect::c_backend;
  std::string ret = trim_copy(return_type);
  bool has_ret = !ret.empty() && ret != "void" && ret != "()";
  if (c) {
    out << "/* stub: " << callee << ", return constrained by callee contract */\n";
    out << (has_ret ? ret : std::string("void")) << " " << callee << "("
        << params_text << ") {\n";
    if (has_ret) {
      out << "    " << ret << " result = nondet_" << sanitize(ret) << "();\n";
      if (!dsl::is_trivially_true(contract))
        out << "    __CPROVER_assume("
            << dsl::emit_condition(contract, dialect) << ");\n";
      out << "    return result;\n";
    }
    out << "}";
  } else {
    out << "// stub: " << callee << ", return constrained by callee contract\n";
    out << "fn " << callee << "(" << (params_text == "void" ? "" : params_text)
        << ")";
    if (has_ret) out << " -> " << ret;
    out << " {\n";
    if (has_ret) {
      out << "    let result: " << ret << " = kani::any();\n";
      if (!dsl::is_trivially_true(contract))
        out << "    kani::assume(" << dsl::emit_condition(contract, dialect)
            << ");\n";
      out << "    result\n";
    }
    out << "}";
  }
  res.text = out.str();
  return res;
}

// ---------------------------------------------------------------------------
// Harness synthesis

SynthesisResult synthesize_harness(
    const index::FunctionRecord& fn, const FunctionSpec& spec,
    const std::map<std::string, index::FunctionRecord>& stub_callees,
    const std::map<std::string, dsl::ExprPtr>& contracts,
    const std::vector<dsl::ExprPtr>& invariants, const std::set<CheckFlag>& flags,
    bool real_source_include) {
  SynthesisResult res;
  Harness& h = res.harness;
  h.function = fn.name;
  h.dialect = fn.source_language == index::SourceLanguage::rust
                  ? dsl::Dialect::rust_backend
                  : dsl::Dialect::c_backend;
  h.flags = flags;
  bool c = h.dialect == dsl::Dialect::c_backend;

  if (real_source_include)
    h.source_prefix = c ? "#include \"" + fn.file_path + "\""
                        : "include!(\"" + fn.file_path + "\");";
  else
    h.source_prefix = fn.body_text;

  for (const auto& [callee, rec] : stub_callees) {
    auto it = contracts.find(callee);
    if (it == contracts.end()) {
      res.error = "no contract for stubbed callee '" + callee + "'";
      return res;
    }
    std::string params_text = "void";
    if (!rec.params.empty() || !c) {
      std::string p;
      for (size_t i = 0; i < rec.params.size(); ++i) {
        if (i) p += ", ";
        if (c) p += rec.params[i].second + " " + rec.params[i].first;
        else p += rec.params[i].first + ": " + rec.params[i].second;
      }
      params_text = p;
    }
    auto stub = stub_for(callee, it->second, h.dialect,
                         rec.return_type_text.empty() ? (c ? "int" : "")
                                                      : rec.return_type_text,
                         params_text);
    if (!stub.ok()) {
      res.error = stub.error;
      return res;
    }
    h.callee_stubs[callee] = stub.text;
    if (c && !rec.return_type_text.empty() && rec.return_type_text != "void")
      h.nondet_init.push_back(rec.return_type_text + " nondet_" +
                              sanitize(rec.return_type_text) + "(void);");
  }

  // postcondition (functional clause merged) with old() lifted out
  dsl::ExprPtr post = spec.effective_post();
  auto lifted = dsl::lift_old(post);
  for (const auto& [name, expr] : lifted.bindings) {
    if (c)
      h.prelude_bindings.push_back("__typeof__((" +
                                   dsl::emit_condition(expr, h.dialect) + ")) " +
                                   name + " = (" +
                                   dsl::emit_condition(expr, h.dialect) + ");");
    else
      h.prelude_bindings.push_back("let " + name + " = (" +
                                   dsl::emit_condition(expr, h.dialect) + ");");
  }

  // nondeterministic inputs; pointers get one level of symbolic allocation
  // plus null, unsupported sequence element types fall back to an empty Vec
  std::vector<std::string> args;
  std::set<std::string> decls;
  for (const auto& [pname, ptype] : fn.params) {
    if (c) {
      if (is_pointer_type(ptype)) {
        std::string base = ptype.substr(0, ptype.find('*'));
        base = trim_copy(base);
        if (base.empty() || base == "void" || base == "const void") base = "char";
        decls.insert("int nondet_bool(void);");
        h.nondet_init.push_back(ptype + (ptype.back() == '*' ? "" : " ") + pname +
                                " = (" + ptype + ")malloc(sizeof(" + base +
                                "));");
        h.nondet_init.push_back("if (nondet_bool()) " + pname + " = (" + ptype +
                                ")0;");
      } else {
        decls.insert(ptype + " nondet_" + sanitize(ptype) + "(void);");
        h.nondet_init.push_back(ptype + " " + pname + " = nondet_" +
                                sanitize(ptype) + "();");
      }
      args.push_back(pname);
    } else {
      std::string elem = rust_sequence_elem(ptype);
      if (!elem.empty()) {
        elem = trim_copy(elem);
        if (kRustPrimitives.count(elem)) {
          h.nondet_init.push_back("let " + pname + ": Vec<" + elem +
                                  "> = kani::vec::any_vec::<" + elem + ", 4>();");
        } else {
          // empty-sequence fallback: no nondet constructor for the element
          h.nondet_init.push_back("let " + pname + ": Vec<" + elem +
                                  "> = Vec::new(); // empty-sequence fallback");
        }
        args.push_back(ptype.rfind("&[", 0) == 0 ? "&" + pname : pname);
      } else if (ptype.rfind("&mut ", 0) == 0) {
        h.nondet_init.push_back("let mut " + pname + ": " + ptype.substr(5) +
                                " = kani::any();");
        args.push_back("&mut " + pname);
      } else if (ptype.rfind("&", 0) == 0) {
        h.nondet_init.push_back("let " + pname + ": " + ptype.substr(1) +
                                " = kani::any();");
        args.push_back("&" + pname);
      } else {
        h.nondet_init.push_back("let " + pname + ": " + ptype +
                                " = kani::any();");
        args.push_back(pname);
      }
    }
  }
  // function declarations ahead of the generated locals
  h.nondet_init.insert(h.nondet_init.begin(), decls.begin(), decls.end());

  for (const auto& inv : invariants) {
    auto t = dsl::translate(inv, h.dialect, dsl::TranslateMode::assume);
    if (!t.ok()) {
      res.error = t.error->reason;
      return res;
    }
    for (const auto& l : t.fragments.assume_lines) h.invariant_assumes.push_back(l);
  }

  if (spec.pre) {
    auto pre_lift = dsl::lift_old(spec.pre);
    if (!pre_lift.bindings.empty()) {
      res.error = "precondition references pre-state";
      return res;
    }
    auto t = dsl::translate(spec.pre, h.dialect, dsl::TranslateMode::assume,
                            {fn.name, "precondition"});
    if (!t.ok()) {
      res.error = t.error->reason;
      return res;
    }
    h.assumes = t.fragments;
  }

  std::string arg_list;
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) arg_list += ", ";
    arg_list += args[i];
  }
  std::string ret = trim_copy(fn.return_type_text);
  bool has_ret = !ret.empty() && ret != "void" && ret != "()";
  if (c)
    h.call_stmt = has_ret ? ret + " result = " + fn.name + "(" + arg_list + ");"
                          : fn.name + "(" + arg_list + ");";
  else
    h.call_stmt = has_ret
                      ? "let result: " + ret + " = " + fn.name + "(" + arg_list + ");"
                      : fn.name + "(" + arg_list + ");";

  if (lifted.rewritten) {
    auto t = dsl::translate(lifted.rewritten, h.dialect,
                            dsl::TranslateMode::assert_,
                            {fn.name, "postcondition"});
    if (!t.ok()) {
      res.error = t.error->reason;
      return res;
    }
    h.asserts = t.fragments;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Adapters

std::shared_ptr<MockAdapter> MockAdapter::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_array()) return nullptr;
  auto a = std::make_shared<MockAdapter>();
  for (const auto& e : j) {
    std::string fn = e.value("function", "");
    int attempt = e.value("attempt", 0);
    a->entries_[fn][attempt] = e.value("raw_output", "");
  }
  return a;
}

AdapterResult MockAdapter::invoke(const Harness& harness, const BackendConfig&) {
  std::lock_guard<std::mutex> lock(mu_);
  int n = ++call_counts_[harness.function];
  AdapterResult res;
  auto it = entries_.find(harness.function);
  if (it == entries_.end()) {
    res.process_error = true;
    return res;
  }
  auto jt = it->second.find(n);
  if (jt == it->second.end()) jt = it->second.find(0);
  if (jt == it->second.end()) {
    res.process_error = true;
    return res;
  }
  res.raw = jt->second;
  if (res.raw.find("TIMEOUT") != std::string::npos) res.timed_out = true;
  return res;
}

ExternalAdapter::ExternalAdapter(std::string tool, dsl::Dialect dialect,
                                 std::string work_dir)
    : tool_(std::move(tool)), dialect_(dialect), work_dir_(std::move(work_dir)) {}

std::string ExternalAdapter::command_line(const std::string& file,
                                          const BackendConfig& config) const {
  std::ostringstream cmd;
  cmd << tool_ << " " << file;
  if (dialect_ == dsl::Dialect::c_backend) {
    cmd << " --unwind " << config.unwind_bound;
    for (const auto& f : config.flags)
      if (flag_valid_for(f, dialect_)) cmd << " " << flag_cli(f);
    if (config.object_bits) cmd << " --object-bits " << *config.object_bits;
  } else {
    cmd << " --default-unwind " << config.unwind_bound;
    if (config.flags.count(CheckFlag::unwind_strategy))
      cmd << " -C panic=unwind";
  }
  return cmd.str();
}

AdapterResult ExternalAdapter::invoke(const Harness& harness,
                                      const BackendConfig& config) {
  int n;
  {
    std::lock_guard<std::mutex> lock(mu_);
    n = ++counter_;
  }
  std::string ext = dialect_ == dsl::Dialect::c_backend ? ".c" : ".rs";
  std::string file =
      work_dir_ + "/" + harness.function + "_" + std::to_string(n) + ext;
  std::string outfile = file + ".out";
  AdapterResult res;
  if (!write_file(file, harness.text())) {
    res.process_error = true;
    return res;
  }
  // wall-clock kill with a 2s grace period
  std::string cmd = "timeout -k 2 " + std::to_string(config.timeout_seconds) +
                    " " + command_line(file, config) + " > " + outfile + " 2>&1";
  int rc = std::system(cmd.c_str());
  int exit_code = rc >= 0 ? (rc >> 8) & 0xff : -1;
  if (exit_code == 124) res.timed_out = true;
  auto raw = read_file(outfile);
  res.raw = raw.value_or("");
  if (rc < 0) res.process_error = true;
  return res;
}

// ---------------------------------------------------------------------------
// Output parsing

RunOutcome parse_output(const std::string& raw, dsl::Dialect /*dialect*/) {
  RunOutcome out;
  bool success = raw.find("VERIFICATION SUCCESSFUL") != std::string::npos ||
                 raw.find("VERIFICATION:- SUCCESSFUL") != std::string::npos;
  bool failed = raw.find("VERIFICATION FAILED") != std::string::npos ||
                raw.find("VERIFICATION:- FAILED") != std::string::npos;
  if (success && !failed) {
    out.verdict = Verdict::verified_clean;
    return out;
  }
  if (!failed) {
    out.verdict = Verdict::inconclusive;
    out.reason = "parse_failure";
    return out;
  }
  static const std::regex prop_re(R"(\[([A-Za-z_][A-Za-z0-9_.]*)\][^\n]*FAILURE)");
  std::smatch m;
  if (!std::regex_search(raw, m, prop_re)) {
    out.verdict = Verdict::inconclusive;
    out.reason = "parse_failure";
    return out;
  }
  Witness w;
  w.property_id = m[1].str();
  w.property_type = property_type_of(w.property_id);
  size_t dot = w.property_id.find('.');
  w.function = dot == std::string::npos ? w.property_id : w.property_id.substr(0, dot);

  size_t tstart = raw.find("Trace for");
  std::string trace = tstart == std::string::npos ? "" : raw.substr(tstart);
  w.trace_text = trace;
  w.trace_digest = fnv1a_hex(trace);
  std::istringstream in(trace);
  std::string line;
  std::getline(in, line);  // "Trace for ..." header
  while (std::getline(in, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string name = trim_copy(line.substr(0, eq));
    std::string value = line.substr(eq + 1);
    size_t paren = value.find(" (");
    if (paren != std::string::npos) value = value.substr(0, paren);
    value = trim_copy(value);
    if (name.empty() || value.empty()) continue;
    if (name.find(' ') != std::string::npos) continue;
    w.assignments[name] = value;
  }
  out.verdict = Verdict::counterexample;
  out.witness = std::move(w);
  return out;
}

// ---------------------------------------------------------------------------
// Retry chains

RunOutcome run(const Harness& harness, const BackendConfig& config,
               BackendAdapter& adapter) {
  BackendConfig cfg = config;
  bool rust = harness.dialect == dsl::Dialect::rust_backend;
  if (rust && !cfg.slice_bound && !cfg.slice_ladder.empty())
    cfg.slice_bound = cfg.slice_ladder.front();

  size_t ob_rung = 0;
  size_t slice_idx = 0;
  bool unwind_retried = false;
  const int max_attempts =
      static_cast<int>((cfg.object_bits_ladder.size() + 1) *
                       (cfg.slice_ladder.size() + 1) * 2);

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    AdapterResult ar = adapter.invoke(harness, cfg);
    if (ar.process_error) {
      RunOutcome out;
      out.verdict = Verdict::inconclusive;
      out.reason = "adapter_error";
      out.effective_config = cfg;
      return out;
    }
    bool timed_out =
        ar.timed_out || ar.raw.find("TIMEOUT") != std::string::npos;
    if (timed_out) {
      if (rust && slice_idx + 1 < cfg.slice_ladder.size()) {
        ++slice_idx;
        cfg.slice_bound = cfg.slice_ladder[slice_idx];
        cfg.timeout_seconds = std::max(1, cfg.timeout_seconds / 2);
        continue;
      }
      RunOutcome out;
      out.verdict = Verdict::inconclusive;
      out.reason = "timeout";
      out.raw_output = ar.raw;
      out.effective_config = cfg;
      return out;
    }
    if (!rust && ar.raw.find("too many addressed objects") != std::string::npos) {
      if (ob_rung < cfg.object_bits_ladder.size()) {
        cfg.object_bits = cfg.object_bits_ladder[ob_rung++];
        continue;
      }
      RunOutcome out;
      out.verdict = Verdict::inconclusive;
      out.reason = "too many addressed objects at maximum object-bits";
      out.raw_output = ar.raw;
      out.effective_config = cfg;
      return out;
    }
    if (rust && ar.raw.find("unwind-exhausted") != std::string::npos) {
      if (!unwind_retried) {
        unwind_retried = true;
        cfg.unwind_bound *= 4;
        continue;
      }
      RunOutcome out;
      out.verdict = Verdict::inconclusive;
      out.reason = "unwind exhausted after escalation";
      out.raw_output = ar.raw;
      out.effective_config = cfg;
      return out;
    }
    RunOutcome out = parse_output(ar.raw, harness.dialect);
    out.raw_output = ar.raw;
    out.effective_config = cfg;
    if (out.witness &&
        (out.witness->function.empty() || out.witness->function == "main"))
      out.witness->function = harness.function;
    return out;
  }
  RunOutcome out;
  out.verdict = Verdict::inconclusive;
  out.reason = "retry budget exhausted";
  out.effective_config = cfg;
  return out;
}

}  // namespace bmca::backend
