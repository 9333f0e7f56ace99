#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "bmca/knowledge.hpp"
#include "bmca/util.hpp"

using namespace bmca;
using namespace bmca::knowledge;
namespace fs = std::filesystem;

namespace {

dsl::ExprPtr parse(const std::string& text) {
  auto r = dsl::parse_spec(text);
  REQUIRE(r.ok());
  return r.expr;
}

std::string temp_path(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "bmca_knowledge_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

backend::Witness witness(const std::string& prop, const std::string& trace,
                         std::map<std::string, std::string> asgn = {}) {
  backend::Witness w;
  w.property_id = prop;
  w.property_type = backend::property_type_of(prop);
  w.trace_text = trace;
  w.assignments = std::move(asgn);
  return w;
}

}  // namespace

TEST_CASE("built-in detector registry: ids, order, constraints") {
  auto rules = builtin_detectors();
  REQUIRE(rules.size() == 5);
  CHECK(rules[0].id == "library-init-global-null");
  CHECK(rules[1].id == "framework-managed-pointer-null");
  CHECK(rules[2].id == "null-guard-contradiction");
  CHECK(rules[3].id == "path-divergent-unwind");
  CHECK(rules[4].id == "tagged-union-stub-disconnect");
  CHECK(rules[0].requires_null_assignment);
  CHECK(rules[3].property_type == "unwind");
}

TEST_CASE("match_detector respects markers, null requirement and type") {
  auto rules = builtin_detectors();
  // marker plus a NULL assignment: matches
  CHECK(match_detector(rules, witness("f.pointer.0", "library-init path",
                                      {{"g", "NULL"}})) ==
        "library-init-global-null");
  // marker without any null assignment: no match
  CHECK_FALSE(match_detector(rules, witness("f.pointer.0", "library-init path",
                                            {{"g", "7"}}))
                  .has_value());
  // property-typed rule only fires on that type
  CHECK(match_detector(rules, witness("f.unwind.0", "path-divergent loop")) ==
        "path-divergent-unwind");
  CHECK_FALSE(match_detector(rules, witness("f.overflow.0", "path-divergent"))
                  .has_value());
  // first matching rule in registration order wins
  CHECK(match_detector(rules, witness("f.unwind.0",
                                      "library-init and path-divergent",
                                      {{"g", "0"}})) ==
        "library-init-global-null");
  // a rule with no constraints never matches
  std::vector<DetectorRule> vacuous = {{"anything", "", std::nullopt, {}, false}};
  CHECK_FALSE(match_detector(vacuous, witness("f.overflow.0", "x")).has_value());
}

TEST_CASE("invariant promotion happens at exactly the threshold, monotone") {
  KnowledgeStore store;
  auto inv = parse("size <= 4096");
  CHECK_FALSE(learn_invariant(store, inv, "f1"));
  CHECK_FALSE(learn_invariant(store, inv, "f2"));
  CHECK(promoted_invariants(store).empty());
  CHECK(learn_invariant(store, inv, "f3"));  // third distinct learner promotes
  REQUIRE(promoted_invariants(store).size() == 1);
  // repeat learners do not multiply entries, promotion never reverts
  CHECK(learn_invariant(store, inv, "f3"));
  CHECK(store.invariants.size() == 1);
  // structural identity dedups a reparsed expression
  CHECK(learn_invariant(store, parse("size <= 4096"), "f4"));
  CHECK(store.invariants.size() == 1);
  CHECK(store.invariants[0].learned_by.size() == 4);
}

TEST_CASE("mark_stale flags digest mismatches and missing functions") {
  KnowledgeStore store;
  SpecStoreEntry e;
  e.source_digest = "abc";
  store.entries["f"] = e;
  store.entries["gone"] = e;
  mark_stale(store, {{"f", "abc"}});
  CHECK_FALSE(store.entries["f"].stale);
  CHECK(store.entries["gone"].stale);
  mark_stale(store, {{"f", "changed"}});
  CHECK(store.entries["f"].stale);
}

TEST_CASE("persist and load round-trip the semantic content") {
  KnowledgeStore store;
  SpecStoreEntry e;
  e.spec.function = "calloc";
  e.spec.pre = parse("nmemb >= 0 && size >= 0");
  e.spec.post = parse("null(result) || valid(result)");
  e.spec.functional_spec = parse("result == result");
  e.spec.provenance = SpecProvenance::refined;
  e.spec.version = 3;
  e.spec.callee_contracts["malloc"] = parse("null(result) || valid(result)");
  e.learned_contracts["memset"] = parse("result != 0");
  e.last_run = "2026-08-23T00:00:00Z";
  e.source_digest = "deadbeef";
  store.entries["calloc"] = e;
  learn_invariant(store, parse("size <= 4096"), "a");
  learn_invariant(store, parse("size <= 4096"), "b");
  store.detectors.push_back(
      {"custom-rule", "project-specific", std::string("overflow"), {"marker"},
       true});
  store.flag_cache["digest1"] = {backend::CheckFlag::unsigned_overflow};

  std::string path = temp_path("store.json");
  REQUIRE(persist_store(store, path));
  auto loaded = load_store(path);
  CHECK(loaded.warnings.empty());
  REQUIRE(loaded.entries.count("calloc"));
  const auto& le = loaded.entries.at("calloc");
  CHECK(dsl::equal(le.spec.pre, e.spec.pre));
  CHECK(dsl::equal(le.spec.post, e.spec.post));
  CHECK(dsl::equal(le.spec.functional_spec, e.spec.functional_spec));
  CHECK(le.spec.provenance == SpecProvenance::refined);
  CHECK(le.spec.version == 3);
  CHECK(dsl::equal(le.spec.callee_contracts.at("malloc"),
                   e.spec.callee_contracts.at("malloc")));
  CHECK(dsl::equal(le.learned_contracts.at("memset"),
                   e.learned_contracts.at("memset")));
  CHECK(le.last_run == e.last_run);
  CHECK(le.source_digest == "deadbeef");
  REQUIRE(loaded.invariants.size() == 1);
  CHECK(loaded.invariants[0].learned_by ==
        std::set<std::string>({"a", "b"}));
  CHECK_FALSE(loaded.invariants[0].promoted);
  CHECK(loaded.flag_cache.at("digest1") ==
        std::set<backend::CheckFlag>{backend::CheckFlag::unsigned_overflow});

  // a second persist/load cycle is a fixed point
  std::string path2 = temp_path("store2.json");
  REQUIRE(persist_store(loaded, path2));
  CHECK(bmca::read_file(path) == bmca::read_file(path2));
}

TEST_CASE("custom detectors persist; built-ins stay code") {
  KnowledgeStore store;
  store.detectors = builtin_detectors();
  store.detectors.push_back(
      {"custom-rule", "desc", std::nullopt, {"marker"}, false});
  std::string path = temp_path("detectors.json");
  REQUIRE(persist_store(store, path));
  auto text = bmca::read_file(path);
  REQUIRE(text.has_value());
  CHECK(text->find("custom-rule") != std::string::npos);
  CHECK(text->find("library-init-global-null") == std::string::npos);
  auto loaded = load_store(path);
  REQUIRE(loaded.detectors.size() == 6);  // 5 built-ins plus the custom rule
  CHECK(loaded.detectors[0].id == "library-init-global-null");
  CHECK(loaded.detectors[5].id == "custom-rule");
}

TEST_CASE("missing store is empty, corrupt store is fresh with a warning") {
  auto missing = load_store(temp_path("nonexistent.json"));
  CHECK(missing.entries.empty());
  CHECK(missing.warnings.empty());
  CHECK(missing.detectors.size() == 5);

  std::string path = temp_path("corrupt.json");
  std::ofstream(path) << "{broken";
  auto corrupt = load_store(path);
  CHECK(corrupt.entries.empty());
  REQUIRE(corrupt.warnings.size() == 1);
  CHECK(corrupt.warnings[0].find("corrupt") != std::string::npos);
}

TEST_CASE("unknown fields survive a load/persist cycle") {
  std::string path = temp_path("forward.json");
  std::ofstream(path) << R"({
    "schema_version": 1,
    "promotion_threshold": 3,
    "future_top_level": {"nested": true},
    "functions": {
      "f": {"pre": "x > 0", "post": "result > 0", "future_field": 42}
    }
  })";
  auto store = load_store(path);
  REQUIRE(store.entries.count("f"));
  CHECK(store.extra.contains("future_top_level"));
  CHECK(store.entries.at("f").extra.value("future_field", 0) == 42);

  std::string out = temp_path("forward_out.json");
  REQUIRE(persist_store(store, out));
  auto text = bmca::read_file(out);
  REQUIRE(text.has_value());
  CHECK(text->find("future_top_level") != std::string::npos);
  CHECK(text->find("future_field") != std::string::npos);
}
