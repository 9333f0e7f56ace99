#include <vector>

#include "doctest.h"

#include "bmca/backend.hpp"

using namespace bmca;
using namespace bmca::backend;

namespace {

dsl::ExprPtr parse(const std::string& text) {
  auto r = dsl::parse_spec(text);
  REQUIRE(r.ok());
  return r.expr;
}

index::FunctionRecord c_record() {
  index::FunctionRecord fn;
  fn.name = "clamp_add";
  fn.source_language = index::SourceLanguage::c;
  fn.body_text = "int clamp_add(int a, int b) { return a + b; }";
  fn.params = {{"a", "int"}, {"b", "int"}};
  fn.return_type_text = "int";
  return fn;
}

// Adapter recording configs and replaying canned raw outputs in order.
class SeqAdapter : public BackendAdapter {
 public:
  explicit SeqAdapter(std::vector<AdapterResult> script)
      : script_(std::move(script)) {}
  std::string id() const override { return "seq"; }
  AdapterResult invoke(const Harness&, const BackendConfig& config) override {
    configs.push_back(config);
    if (calls < script_.size()) return script_[calls++];
    AdapterResult r;
    r.process_error = true;
    return r;
  }
  std::vector<BackendConfig> configs;
  size_t calls = 0;

 private:
  std::vector<AdapterResult> script_;
};

AdapterResult raw(const std::string& text) {
  AdapterResult r;
  r.raw = text;
  return r;
}

}  // namespace

TEST_CASE("flags are dialect-scoped with stable names") {
  CHECK(flag_valid_for(CheckFlag::unsigned_overflow, dsl::Dialect::c_backend));
  CHECK_FALSE(
      flag_valid_for(CheckFlag::unsigned_overflow, dsl::Dialect::rust_backend));
  CHECK(flag_valid_for(CheckFlag::overflow_checks, dsl::Dialect::rust_backend));
  CHECK(flag_cli(CheckFlag::unsigned_overflow) == "--unsigned-overflow-check");
  for (auto f : {CheckFlag::unsigned_overflow, CheckFlag::signed_overflow,
                 CheckFlag::conversion, CheckFlag::pointer_overflow,
                 CheckFlag::overflow_checks, CheckFlag::unwind_strategy})
    CHECK(flag_from_name(flag_name(f)) == f);
  CHECK_FALSE(flag_from_name("bogus").has_value());
}

TEST_CASE("property type classification from property ids") {
  CHECK(property_type_of("calloc.unwind.0") == PropertyType::unwind);
  CHECK(property_type_of("calloc.overflow.1") == PropertyType::overflow);
  CHECK(property_type_of("f.precondition.0") == PropertyType::precondition);
  CHECK(property_type_of("f.array_bounds.2") == PropertyType::bounds);
  CHECK(property_type_of("f.pointer_dereference.1") == PropertyType::pointer);
  CHECK(property_type_of("f.conversion.0") == PropertyType::conversion);
  CHECK(property_type_of("f.functional.0") == PropertyType::functional);
  CHECK(property_type_of("main.assertion.1") == PropertyType::postcondition);
}

TEST_CASE("harness text keeps the fixed section order") {
  auto fn = c_record();
  FunctionSpec spec;
  spec.function = fn.name;
  spec.pre = parse("a <= 100 && b <= 100");
  spec.post = parse("result <= 200");
  auto syn = synthesize_harness(fn, spec, {}, {}, {parse("a >= 0")}, {});
  REQUIRE(syn.ok());
  std::string text = syn.harness.text();
  size_t inputs = text.find("nondeterministic inputs");
  size_t invariants = text.find("project invariants");
  size_t pre = text.find("precondition");
  size_t call = text.find("int result = clamp_add(a, b);");
  size_t post = text.find("postcondition");
  REQUIRE(inputs != std::string::npos);
  REQUIRE(invariants != std::string::npos);
  REQUIRE(call != std::string::npos);
  REQUIRE(post != std::string::npos);
  CHECK(inputs < invariants);
  CHECK(invariants < pre);
  CHECK(pre < call);
  CHECK(call < post);
  CHECK(text.find("__CPROVER_assume(a >= 0);") != std::string::npos);
  CHECK(text.find("__CPROVER_assert(result <= 200, "
                  "\"clamp_add.postcondition.0\");") != std::string::npos);
  // rendering is deterministic
  CHECK(text == syn.harness.text());
}

TEST_CASE("C pointer parameters get symbolic allocation plus null") {
  index::FunctionRecord fn;
  fn.name = "touch";
  fn.body_text = "void touch(char *p) {}";
  fn.params = {{"p", "char *"}};
  fn.return_type_text = "void";
  FunctionSpec spec;
  spec.pre = parse("true == true");
  spec.post = parse("true == true");
  auto syn = synthesize_harness(fn, spec, {}, {}, {}, {});
  REQUIRE(syn.ok());
  std::string text = syn.harness.text();
  CHECK(text.find("malloc(sizeof(char))") != std::string::npos);
  CHECK(text.find("if (nondet_bool()) p = (char *)0;") != std::string::npos);
}

TEST_CASE("old() in the postcondition becomes a pre-state binding") {
  auto fn = c_record();
  fn.name = "bump";
  fn.params = {{"x", "int"}};
  fn.body_text = "int bump(int x) { return x + 1; }";
  FunctionSpec spec;
  spec.pre = parse("x < 100");
  spec.post = parse("result == old(x) + 1");
  auto syn = synthesize_harness(fn, spec, {}, {}, {}, {});
  REQUIRE(syn.ok());
  std::string text = syn.harness.text();
  CHECK(text.find("__typeof__((x)) _pre_0 = (x);") != std::string::npos);
  CHECK(text.find("result == _pre_0 + 1") != std::string::npos);
  // pre-state in the precondition is an error, not a silent drop
  spec.pre = parse("old(x) < 100");
  spec.post = parse("result > 0");
  CHECK_FALSE(synthesize_harness(fn, spec, {}, {}, {}, {}).ok());
}

TEST_CASE("stubbed callees require contracts and errors name the callee") {
  auto fn = c_record();
  fn.callees = {"helper"};
  index::FunctionRecord helper;
  helper.name = "helper";
  helper.return_type_text = "int";
  FunctionSpec spec;
  spec.pre = parse("a > 0");
  spec.post = parse("result > 0");
  auto missing = synthesize_harness(fn, spec, {{"helper", helper}}, {}, {}, {});
  REQUIRE_FALSE(missing.ok());
  CHECK(missing.error->find("helper") != std::string::npos);

  std::map<std::string, dsl::ExprPtr> contracts = {
      {"helper", parse("result >= 0")}};
  auto ok = synthesize_harness(fn, spec, {{"helper", helper}}, contracts, {}, {});
  REQUIRE(ok.ok());
  std::string text = ok.harness.text();
  CHECK(text.find("int helper(void)") != std::string::npos);
  CHECK(text.find("__CPROVER_assume(result >= 0);") != std::string::npos);
}

TEST_CASE("stub_for rejects pre-state contracts and trivially-true is free") {
  auto bad = stub_for("g", parse("old(result) > 0"), dsl::Dialect::c_backend);
  CHECK_FALSE(bad.ok());
  auto none = stub_for("g", nullptr, dsl::Dialect::c_backend);
  REQUIRE_FALSE(none.ok());
  CHECK(none.error->find("g") != std::string::npos);
  auto trivial = stub_for("g", parse("true"), dsl::Dialect::c_backend);
  REQUIRE(trivial.ok());
  CHECK(trivial.text.find("__CPROVER_assume") == std::string::npos);
}

TEST_CASE("rust harness uses kani proof attribute and any()") {
  index::FunctionRecord fn;
  fn.name = "align_up";
  fn.source_language = index::SourceLanguage::rust;
  fn.body_text = "pub fn align_up(addr: usize, align: usize) -> usize { 0 }";
  fn.params = {{"addr", "usize"}, {"align", "usize"}};
  fn.return_type_text = "usize";
  FunctionSpec spec;
  spec.pre = parse("align > 0");
  spec.post = parse("result >= addr");
  auto syn = synthesize_harness(fn, spec, {}, {}, {}, {});
  REQUIRE(syn.ok());
  std::string text = syn.harness.text();
  CHECK(text.find("#[kani::proof]") != std::string::npos);
  CHECK(text.find("fn check_align_up()") != std::string::npos);
  CHECK(text.find("let addr: usize = kani::any();") != std::string::npos);
  CHECK(text.find("kani::assume(align > 0);") != std::string::npos);
  CHECK(text.find("let result: usize = align_up(addr, align);") !=
        std::string::npos);
  CHECK(text.find("kani::assert(result >= addr, "
                  "\"align_up.postcondition.0\");") != std::string::npos);
}

TEST_CASE("parse_output: success, failure with witness, garbage") {
  auto clean = parse_output("VERIFICATION SUCCESSFUL\n", dsl::Dialect::c_backend);
  CHECK(clean.verdict == Verdict::verified_clean);
  auto rust_clean =
      parse_output("VERIFICATION:- SUCCESSFUL\n", dsl::Dialect::rust_backend);
  CHECK(rust_clean.verdict == Verdict::verified_clean);

  std::string failed =
      "[calloc.overflow.1] arithmetic overflow: FAILURE\n"
      "Trace for calloc.overflow.1:\n"
      "  nmemb = 9223372036854775808 (1000...)\n"
      "  size = 2\n"
      "VERIFICATION FAILED\n";
  auto cex = parse_output(failed, dsl::Dialect::c_backend);
  REQUIRE(cex.verdict == Verdict::counterexample);
  REQUIRE(cex.witness.has_value());
  CHECK(cex.witness->property_id == "calloc.overflow.1");
  CHECK(cex.witness->function == "calloc");
  CHECK(cex.witness->property_type == PropertyType::overflow);
  CHECK(cex.witness->assignments.at("nmemb") == "9223372036854775808");
  CHECK(cex.witness->assignments.at("size") == "2");
  CHECK_FALSE(cex.witness->trace_digest.empty());

  auto garbage = parse_output("tool crashed\n", dsl::Dialect::c_backend);
  CHECK(garbage.verdict == Verdict::inconclusive);
  CHECK(garbage.reason == "parse_failure");
  auto no_prop = parse_output("VERIFICATION FAILED\n", dsl::Dialect::c_backend);
  CHECK(no_prop.verdict == Verdict::inconclusive);
}

TEST_CASE("mock adapter replays per-function ordinals, wildcard, misses") {
  auto mock = MockAdapter::from_json(R"([
    {"function":"f","attempt":1,"raw_output":"first"},
    {"function":"f","attempt":0,"raw_output":"rest"},
    {"function":"slow","attempt":0,"raw_output":"TIMEOUT"}
  ])");
  REQUIRE(mock);
  Harness h;
  h.function = "f";
  BackendConfig cfg;
  CHECK(mock->invoke(h, cfg).raw == "first");
  CHECK(mock->invoke(h, cfg).raw == "rest");
  CHECK(mock->invoke(h, cfg).raw == "rest");
  Harness slow;
  slow.function = "slow";
  CHECK(mock->invoke(slow, cfg).timed_out);
  Harness miss;
  miss.function = "nope";
  CHECK(mock->invoke(miss, cfg).process_error);
}

TEST_CASE("run: object-bits ladder walks 10, 12, 16 then gives up") {
  std::string sig = "too many addressed objects\n";
  SeqAdapter adapter({raw(sig), raw(sig), raw(sig), raw(sig)});
  Harness h;
  h.function = "f";
  h.dialect = dsl::Dialect::c_backend;
  BackendConfig cfg;
  auto out = run(h, cfg, adapter);
  CHECK(out.verdict == Verdict::inconclusive);
  REQUIRE(adapter.configs.size() == 4);
  CHECK_FALSE(adapter.configs[0].object_bits.has_value());
  CHECK(adapter.configs[1].object_bits == 10);
  CHECK(adapter.configs[2].object_bits == 12);
  CHECK(adapter.configs[3].object_bits == 16);
}

TEST_CASE("run: ladder retry that succeeds reports the effective config") {
  SeqAdapter adapter(
      {raw("too many addressed objects\n"), raw("VERIFICATION SUCCESSFUL\n")});
  Harness h;
  h.function = "f";
  BackendConfig cfg;
  auto out = run(h, cfg, adapter);
  CHECK(out.verdict == Verdict::verified_clean);
  CHECK(out.effective_config.object_bits == 10);
  CHECK(out.raw_output == "VERIFICATION SUCCESSFUL\n");
}

TEST_CASE("run: rust unwind escalates 4x exactly once") {
  SeqAdapter adapter({raw("unwind-exhausted\n"), raw("unwind-exhausted\n")});
  Harness h;
  h.function = "f";
  h.dialect = dsl::Dialect::rust_backend;
  BackendConfig cfg;
  cfg.unwind_bound = 4;
  auto out = run(h, cfg, adapter);
  CHECK(out.verdict == Verdict::inconclusive);
  REQUIRE(adapter.configs.size() == 2);
  CHECK(adapter.configs[0].unwind_bound == 4);
  CHECK(adapter.configs[1].unwind_bound == 16);
}

TEST_CASE("run: rust timeouts walk the slice ladder and halve the timeout") {
  AdapterResult to;
  to.timed_out = true;
  SeqAdapter adapter({to, to, to});
  Harness h;
  h.function = "f";
  h.dialect = dsl::Dialect::rust_backend;
  BackendConfig cfg;
  cfg.timeout_seconds = 120;
  auto out = run(h, cfg, adapter);
  CHECK(out.verdict == Verdict::inconclusive);
  CHECK(out.reason == "timeout");
  REQUIRE(adapter.configs.size() == 3);
  CHECK(adapter.configs[0].slice_bound == 4);
  CHECK(adapter.configs[1].slice_bound == 2);
  CHECK(adapter.configs[2].slice_bound == 1);
  CHECK(adapter.configs[1].timeout_seconds == 60);
  CHECK(adapter.configs[2].timeout_seconds == 30);
}

TEST_CASE("run: C timeouts fail fast without a slice ladder") {
  AdapterResult to;
  to.timed_out = true;
  SeqAdapter adapter({to});
  Harness h;
  h.function = "f";
  h.dialect = dsl::Dialect::c_backend;
  BackendConfig cfg;
  auto out = run(h, cfg, adapter);
  CHECK(out.verdict == Verdict::inconclusive);
  CHECK(out.reason == "timeout");
  CHECK(adapter.configs.size() == 1);
}

TEST_CASE("run: witness function defaults to the harness target") {
  SeqAdapter adapter({raw("[main.assertion.1] check: FAILURE\n"
                          "VERIFICATION FAILED\n")});
  Harness h;
  h.function = "clamp_add";
  auto out = run(h, BackendConfig{}, adapter);
  REQUIRE(out.witness.has_value());
  CHECK(out.witness->function == "clamp_add");
}

TEST_CASE("external adapter command lines carry flags verbatim") {
  ExternalAdapter c("cbmc", dsl::Dialect::c_backend, "/tmp");
  BackendConfig cfg;
  cfg.unwind_bound = 8;
  cfg.flags = {CheckFlag::unsigned_overflow, CheckFlag::pointer_overflow};
  cfg.object_bits = 12;
  CHECK(c.command_line("h.c", cfg) ==
        "cbmc h.c --unwind 8 --unsigned-overflow-check "
        "--pointer-overflow-check --object-bits 12");
  ExternalAdapter k("kani", dsl::Dialect::rust_backend, "/tmp");
  BackendConfig rcfg;
  rcfg.unwind_bound = 4;
  CHECK(k.command_line("h.rs", rcfg) == "kani h.rs --default-unwind 4");
}
