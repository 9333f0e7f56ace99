#include <random>

#include "doctest.h"

#include "bmca/validation.hpp"

using namespace bmca;
using namespace bmca::validation;

namespace {

dsl::ExprPtr parse(const std::string& text) {
  auto r = dsl::parse_spec(text);
  REQUIRE(r.ok());
  return r.expr;
}

dedup::WitnessClass make_class(const std::string& fn, const std::string& prop,
                               std::map<std::string, std::string> asgn = {},
                               const std::string& trace = "") {
  backend::Witness w;
  w.function = fn;
  w.property_id = prop;
  w.property_type = backend::property_type_of(prop);
  w.assignments = std::move(asgn);
  w.trace_text = trace;
  w.trace_digest = "d";
  dedup::WitnessClass cls;
  cls.function = fn;
  cls.property_type = w.property_type;
  cls.representative = w;
  cls.members = {w};
  return cls;
}

index::CodebaseIndex chain_index() {
  // entry -> mid -> leaf
  index::CodebaseIndex idx;
  for (const char* name : {"entry", "mid", "leaf"}) {
    index::FunctionRecord rec;
    rec.name = name;
    idx.functions.emplace(name, rec);
  }
  idx.functions.at("entry").callees = {"mid"};
  idx.functions.at("mid").callees = {"leaf"};
  index::rebuild_graph(idx);
  return idx;
}

gateway::AgentGateway scripted(const std::string& json) {
  return gateway::AgentGateway(gateway::ScriptedProposer::from_json(json), 3);
}

}  // namespace

TEST_CASE("tier order and monotone upgrades") {
  CHECK(static_cast<int>(EvidenceTier::confirmed_bmc) <
        static_cast<int>(EvidenceTier::confirmed_system_entry));
  CHECK(static_cast<int>(EvidenceTier::confirmed_system_entry) <
        static_cast<int>(EvidenceTier::confirmed_dynamic));
  CHECK(max_tier(EvidenceTier::confirmed_dynamic,
                 EvidenceTier::confirmed_bmc) == EvidenceTier::confirmed_dynamic);

  ReachResult entry;
  entry.kind = ReachKind::system_entry;
  ReachResult halted;
  halted.kind = ReachKind::halted_at;
  CHECK(tier_after_stage1(EvidenceTier::confirmed_bmc, entry) ==
        EvidenceTier::confirmed_system_entry);
  CHECK(tier_after_stage1(EvidenceTier::confirmed_dynamic, entry) ==
        EvidenceTier::confirmed_dynamic);  // never downgrades
  CHECK(tier_after_stage1(EvidenceTier::confirmed_bmc, halted) ==
        EvidenceTier::confirmed_bmc);

  DynamicResult sig;
  sig.kind = DynamicKind::signal;
  DynamicResult none;
  none.kind = DynamicKind::no_signal;
  CHECK(tier_after_stage3(EvidenceTier::confirmed_bmc, sig) ==
        EvidenceTier::confirmed_dynamic);
  CHECK(tier_after_stage3(EvidenceTier::confirmed_system_entry, none) ==
        EvidenceTier::confirmed_system_entry);
}

TEST_CASE("tier is monotone over random stage interleavings") {
  std::mt19937 rng(3);
  for (int iter = 0; iter < 200; ++iter) {
    EvidenceTier t = EvidenceTier::confirmed_bmc;
    for (int step = 0; step < 6; ++step) {
      EvidenceTier before = t;
      if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
        ReachResult r;
        r.kind = static_cast<ReachKind>(
            std::uniform_int_distribution<int>(0, 2)(rng));
        t = tier_after_stage1(t, r);
      } else {
        DynamicResult d;
        d.kind = static_cast<DynamicKind>(
            std::uniform_int_distribution<int>(0, 3)(rng));
        t = tier_after_stage3(t, d);
      }
      CHECK(static_cast<int>(t) >= static_cast<int>(before));
    }
  }
}

TEST_CASE("stage1: entry manifest members short-circuit to system_entry") {
  auto idx = chain_index();
  idx.entry_manifest.insert("leaf");
  auto gw = scripted("[]");
  auto res = stage1_reachability(make_class("leaf", "leaf.overflow.0"), idx, gw);
  CHECK(res.kind == ReachKind::system_entry);
  CHECK(gw.snapshot_transcript().entries.empty());  // no gateway traffic
}

TEST_CASE("stage1: feasible hops ascend to a no-caller boundary") {
  auto idx = chain_index();
  auto gw = scripted(R"([
    {"kind":"classify_witness","function":"mid","attempt":0,"payload":"feasible"},
    {"kind":"classify_witness","function":"entry","attempt":0,"payload":"feasible"}
  ])");
  auto res = stage1_reachability(make_class("leaf", "leaf.overflow.0"), idx, gw);
  CHECK(res.kind == ReachKind::system_entry);
  CHECK(res.hop_chain.front() == "leaf");
  CHECK(res.hop_chain.back() == "entry");
}

TEST_CASE("stage1: the first infeasible hop halts at that caller") {
  auto idx = chain_index();
  auto gw = scripted(R"([
    {"kind":"classify_witness","function":"mid","attempt":0,"payload":"infeasible"}
  ])");
  auto res = stage1_reachability(make_class("leaf", "leaf.overflow.0"), idx, gw);
  CHECK(res.kind == ReachKind::halted_at);
  CHECK(res.caller == "mid");
}

TEST_CASE("stage1: exhausted gateway falls back to infeasible, conservative") {
  auto idx = chain_index();
  auto gw = scripted("[]");  // fallback: infeasible
  auto res = stage1_reachability(make_class("leaf", "leaf.overflow.0"), idx, gw);
  CHECK(res.kind == ReachKind::halted_at);
}

TEST_CASE("stage4: detectors settle the verdict with no gateway call") {
  auto cls = make_class("init", "init.pointer.0", {{"handle", "NULL"}},
                        "call to library-init routine");
  auto gw = scripted(R"([
    {"kind":"realism_audit","function":"init","attempt":0,"payload":"realistic"}
  ])");
  auto out = stage4_realism(cls, knowledge::builtin_detectors(), gw, "");
  CHECK(out.realism == Realism::unrealistic);
  CHECK(out.confidence == RealismConfidence::committed);
  REQUIRE(out.detector_id.has_value());
  CHECK(gw.snapshot_transcript().entries.empty());
}

TEST_CASE("stage4: gateway verdicts, uncertain folds to unrealistic") {
  auto cls = make_class("f", "f.overflow.0");
  auto realistic = scripted(R"([
    {"kind":"realism_audit","function":"f","attempt":0,"payload":"realistic"}])");
  auto r1 = stage4_realism(cls, {}, realistic, "");
  CHECK(r1.realism == Realism::realistic);
  CHECK(r1.confidence == RealismConfidence::committed);
  CHECK_FALSE(r1.detector_id.has_value());

  auto uncertain = scripted(R"([
    {"kind":"realism_audit","function":"f","attempt":0,"payload":"uncertain"}])");
  auto r2 = stage4_realism(cls, {}, uncertain, "");
  CHECK(r2.realism == Realism::unrealistic);
  CHECK(r2.confidence == RealismConfidence::folded_uncertain);

  auto silent = scripted("[]");  // fallback pole: unrealistic
  auto r3 = stage4_realism(cls, {}, silent, "");
  CHECK(r3.realism == Realism::unrealistic);
  CHECK(r3.confidence == RealismConfidence::committed);
}

TEST_CASE("classification matrix") {
  Finding f;
  f.cls = make_class("f", "f.overflow.0");
  f.realism = Realism::unrealistic;
  for (auto m : {ThreatModel::security, ThreatModel::safety,
                 ThreatModel::functional})
    CHECK(classify(f, m) == Classification::spurious);

  f.realism = Realism::realistic;
  f.reach.kind = ReachKind::system_entry;
  CHECK(classify(f, ThreatModel::security) == Classification::real_bug);
  CHECK(classify(f, ThreatModel::safety) == Classification::latent);
  CHECK(classify(f, ThreatModel::functional) == Classification::latent);

  f.reach.kind = ReachKind::halted_at;
  CHECK(classify(f, ThreatModel::security) == Classification::latent);

  // functional property violations are real bugs under every model
  f.cls = make_class("f", "f.functional.0");
  f.realism = Realism::realistic;
  for (auto m : {ThreatModel::security, ThreatModel::safety,
                 ThreatModel::functional})
    CHECK(classify(f, m) == Classification::real_bug);
}

TEST_CASE("spec overflow filter: wrap in the spec arithmetic is spurious") {
  backend::Witness w;
  w.assignments = {{"nmemb", "9223372036854775808"}, {"size", "2"}};
  // nmemb * size wraps u64: the overflow lives in the spec, not the program
  CHECK(spec_overflow_filter(w, parse("nmemb * size < MAX_UNSIGNED")) ==
        OverflowFilter::spurious);
  w.assignments = {{"nmemb", "5"}, {"size", "4"}};
  CHECK(spec_overflow_filter(w, parse("nmemb * size < MAX_UNSIGNED")) ==
        OverflowFilter::retain);
}

TEST_CASE("spec overflow filter: subtraction underflow and no short-circuit") {
  backend::Witness w;
  w.assignments = {{"a", "1"}, {"b", "2"}};
  CHECK(spec_overflow_filter(w, parse("a - b < 10")) == OverflowFilter::spurious);
  // left disjunct is true; the wrapping right side must still be inspected
  CHECK(spec_overflow_filter(w, parse("a == 1 || a - b < 10")) ==
        OverflowFilter::spurious);
  CHECK(spec_overflow_filter(w, parse("b - a == 1")) == OverflowFilter::retain);
}

TEST_CASE("spec overflow filter: unevaluable specs are retained") {
  backend::Witness w;
  w.assignments = {{"x", "3"}};
  CHECK(spec_overflow_filter(w, parse("y > 0")) == OverflowFilter::retain);
  CHECK(spec_overflow_filter(w, parse("valid(p)")) == OverflowFilter::retain);
  CHECK(spec_overflow_filter(w, parse("x / 0 == 1")) == OverflowFilter::retain);
  CHECK(spec_overflow_filter(w, nullptr) == OverflowFilter::retain);
}

TEST_CASE("name tables round-trip") {
  CHECK(std::string(tier_name(EvidenceTier::confirmed_dynamic)) ==
        "confirmed_dynamic");
  CHECK(std::string(feasibility_name(Feasibility::refuted)) == "refuted");
  CHECK(std::string(dynamic_kind_name(DynamicKind::not_compilable)) ==
        "not_compilable");
  CHECK(std::string(classification_name(Classification::real_bug)) == "real_bug");
  for (auto m : {ThreatModel::security, ThreatModel::safety,
                 ThreatModel::functional})
    CHECK(threat_model_from_name(threat_model_name(m)) == m);
  CHECK_FALSE(threat_model_from_name("bogus").has_value());
}
