#ifndef BMCA_BACKEND_HPP
#define BMCA_BACKEND_HPP

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bmca/function_spec.hpp"
#include "bmca/source_index.hpp"
#include "bmca/spec_dsl.hpp"

namespace bmca::backend {

enum class CheckFlag {
  // C dialect
  unsigned_overflow,
  signed_overflow,
  conversion,
  pointer_overflow,
  // Rust dialect
  overflow_checks,
  unwind_strategy,
};

bool flag_valid_for(CheckFlag flag, dsl::Dialect dialect);
std::string flag_cli(CheckFlag flag);
std::string flag_name(CheckFlag flag);
std::optional<CheckFlag> flag_from_name(const std::string& name);

struct BackendConfig {
  int unwind_bound = 4;
  int timeout_seconds = 120;
  std::set<CheckFlag> flags;
  std::optional<int> object_bits;
  std::optional<int> slice_bound;  // rust dialect, defaults to 4 when used
  std::vector<int> object_bits_ladder = {10, 12, 16};
  std::vector<int> slice_ladder = {4, 2, 1};
};

enum class PropertyType {
  precondition,
  postcondition,
  overflow,
  bounds,
  unwind,
  pointer,
  conversion,
  functional,
};

const char* property_type_name(PropertyType t);
PropertyType property_type_of(const std::string& property_id);

struct Witness {
  std::string function;
  std::string property_id;
  PropertyType property_type = PropertyType::postcondition;
  std::map<std::string, std::string> assignments;  // param/field path -> value
  std::string trace_digest;
  std::string trace_text;  // raw trace section, consumed by pattern detectors
};

enum class Verdict { verified_clean, counterexample, inconclusive };

const char* verdict_name(Verdict v);

struct RunOutcome {
  Verdict verdict = Verdict::inconclusive;
  std::optional<Witness> witness;
  std::string reason;
  std::string raw_output;  // final attempt, kept for finding artifacts
  BackendConfig effective_config;
};

struct Harness {
  std::string function;
  dsl::Dialect dialect = dsl::Dialect::c_backend;
  std::string source_prefix;  // target body text or a #include line
  std::vector<std::string> prelude_bindings;
  std::vector<std::string> nondet_init;
  std::vector<std::string> invariant_assumes;
  dsl::HarnessFragments assumes;
  std::vector<std::string> pin_assumes;  // witness pinning, stage 2
  std::map<std::string, std::string> callee_stubs;
  std::string call_stmt;
  dsl::HarnessFragments asserts;
  std::set<CheckFlag> flags;

  std::string text() const;  // deterministic full rendering
};

struct SynthesisResult {
  Harness harness;
  std::optional<std::string> error;
  bool ok() const { return !error.has_value(); }
};

// Section order is fixed: prelude bindings, nondet init, project invariants,
// precondition assumes, pin assumes, call, postcondition asserts. Every
// callee in `stub_callees` needs a contract or synthesis fails naming it.
SynthesisResult synthesize_harness(
    const index::FunctionRecord& fn, const FunctionSpec& spec,
    const std::map<std::string, index::FunctionRecord>& stub_callees,
    const std::map<std::string, dsl::ExprPtr>& contracts,
    const std::vector<dsl::ExprPtr>& invariants, const std::set<CheckFlag>& flags,
    bool real_source_include = false);

struct StubResult {
  std::string text;
  std::optional<std::string> error;
  bool ok() const { return !error.has_value(); }
};

StubResult stub_for(const std::string& callee, const dsl::ExprPtr& contract,
                    dsl::Dialect dialect, const std::string& return_type = "int",
                    const std::string& params_text = "void");

struct AdapterResult {
  std::string raw;
  bool timed_out = false;
  bool process_error = false;
};

class BackendAdapter {
 public:
  virtual ~BackendAdapter() = default;
  virtual std::string id() const = 0;
  virtual AdapterResult invoke(const Harness& harness,
                               const BackendConfig& config) = 0;
};

// Replays raw backend output from a JSON fixture: array of
// {"function","attempt","raw_output"}. Attempts count invocations per
// function across the run; attempt 0 matches any.
class MockAdapter : public BackendAdapter {
 public:
  static std::shared_ptr<MockAdapter> from_json(const std::string& json_text);
  std::string id() const override { return "mock"; }
  AdapterResult invoke(const Harness& harness, const BackendConfig&) override;

 private:
  std::map<std::string, std::map<int, std::string>> entries_;
  std::map<std::string, int> call_counts_;
  std::mutex mu_;
};

// Shells out to an installed BMC tool (cbmc / kani). Command lines carry
// --unwind, the selected check flags verbatim and optional --object-bits.
class ExternalAdapter : public BackendAdapter {
 public:
  ExternalAdapter(std::string tool, dsl::Dialect dialect, std::string work_dir);
  std::string id() const override { return tool_; }
  AdapterResult invoke(const Harness& harness,
                       const BackendConfig& config) override;
  std::string command_line(const std::string& file,
                           const BackendConfig& config) const;

 private:
  std::string tool_;
  dsl::Dialect dialect_;
  std::string work_dir_;
  mutable std::mutex mu_;
  int counter_ = 0;
};

RunOutcome parse_output(const std::string& raw, dsl::Dialect dialect);

// Bounded retry chains: object-bits ladder on the addressed-objects
// signature (C), one 4x unwind escalation on unwind-exhausted and the
// 4 -> 2 -> 1 slice chain on timeouts (Rust). Exhaustion is inconclusive.
RunOutcome run(const Harness& harness, const BackendConfig& config,
               BackendAdapter& adapter);

}  // namespace bmca::backend

#endif
