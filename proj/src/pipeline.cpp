#include "bmca/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "bmca/dedup.hpp"
#include "bmca/util.hpp"

namespace fs = std::filesystem;

namespace bmca::pipeline {

bool PipelineConfig::valid(std::string& reason) const {
  if (unwind <= 0 || timeout_s <= 0 || parallelism <= 0 ||
      refinement_budget <= 0) {
    reason = "numeric configuration fields must be positive";
    return false;
  }
  if (target_dir.empty() && sources.empty()) {
    reason = "no verification target given";
    return false;
  }
  return true;
}

namespace {

std::vector<std::string> collect_sources(const PipelineConfig& cfg) {
  if (!cfg.sources.empty()) return cfg.sources;
  std::vector<std::string> files;
  std::error_code ec;
  for (fs::recursive_directory_iterator it(cfg.target_dir, ec), end;
       !ec && it != end; it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    auto ext = it->path().extension().string();
    if (ext == ".c" || ext == ".rs") files.push_back(it->path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void parallel_for(const std::vector<std::string>& items, int parallelism,
                  const std::function<void(const std::string&)>& work) {
  if (parallelism <= 1 || items.size() < 2) {
    for (const auto& item : items) work(item);
    return;
  }
  std::atomic<size_t> next{0};
  int n = std::min<int>(parallelism, static_cast<int>(items.size()));
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int i = 0; i < n; ++i)
    pool.emplace_back([&] {
      for (size_t k = next.fetch_add(1); k < items.size();
           k = next.fetch_add(1))
        work(items[k]);
    });
  for (auto& t : pool) t.join();
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_flag_payload(const std::string& payload, dsl::Dialect dialect,
                        std::set<backend::CheckFlag>& out) {
  std::string p = trim(payload);
  out.clear();
  if (p == "none") return true;
  std::istringstream in(p);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    auto f = backend::flag_from_name(trim(tok));
    if (!f || !backend::flag_valid_for(*f, dialect)) return false;
    out.insert(*f);
  }
  return !out.empty();
}

std::string config_summary(const backend::BackendConfig& cfg) {
  std::ostringstream out;
  out << "unwind=" << cfg.unwind_bound << " timeout=" << cfg.timeout_seconds;
  if (cfg.object_bits) out << " object-bits=" << *cfg.object_bits;
  if (cfg.slice_bound) out << " slice=" << *cfg.slice_bound;
  out << " flags=";
  bool first = true;
  for (const auto& f : cfg.flags) {
    if (!first) out << ",";
    out << backend::flag_name(f);
    first = false;
  }
  if (first) out << "none";
  return out.str();
}

dsl::Dialect dialect_of(const index::FunctionRecord& fn) {
  return fn.source_language == index::SourceLanguage::rust
             ? dsl::Dialect::rust_backend
             : dsl::Dialect::c_backend;
}

std::string spec_text(const FunctionSpec& spec) {
  std::ostringstream out;
  out << "function: " << spec.function << "\n";
  out << "version: " << spec.version << "\n";
  out << "provenance: " << provenance_name(spec.provenance) << "\n";
  if (spec.pre) out << "pre: " << dsl::pretty(spec.pre) << "\n";
  if (spec.post) out << "post: " << dsl::pretty(spec.post) << "\n";
  if (spec.functional_spec)
    out << "functional: " << dsl::pretty(spec.functional_spec) << "\n";
  for (const auto& [name, expr] : spec.callee_contracts)
    if (expr) out << "callee " << name << ": " << dsl::pretty(expr) << "\n";
  return out.str();
}

struct FindingKey {
  std::string function;
  backend::PropertyType type;
  bool operator<(const FindingKey& o) const {
    if (function != o.function) return function < o.function;
    return static_cast<int>(type) < static_cast<int>(o.type);
  }
};

}  // namespace

std::optional<MockFixtures> load_mock_fixtures(const std::string& path) {
  auto text = read_file(path);
  if (!text) return std::nullopt;
  nlohmann::json j = nlohmann::json::parse(*text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  MockFixtures fx;
  if (j.contains("gateway"))
    fx.proposer = gateway::ScriptedProposer::from_json(j["gateway"].dump());
  if (j.contains("adapter"))
    fx.adapter = backend::MockAdapter::from_json(j["adapter"].dump());
  if (!fx.proposer && !fx.adapter) return std::nullopt;
  return fx;
}

RunReport run_pipeline(const PipelineConfig& config,
                       std::shared_ptr<gateway::Proposer> proposer,
                       std::shared_ptr<backend::BackendAdapter> adapter_c,
                       std::shared_ptr<backend::BackendAdapter> adapter_rust) {
  RunReport rep;
  std::string reason;
  if (!config.valid(reason)) {
    rep.fatal = true;
    rep.fatal_reason = reason;
    return rep;
  }
  if (!config.work_dir.empty()) {
    std::error_code ec;
    fs::create_directories(config.work_dir, ec);
  }
  auto files = collect_sources(config);
  if (files.empty()) {
    rep.fatal = true;
    rep.fatal_reason = "no .c or .rs sources under '" + config.target_dir + "'";
    return rep;
  }
  auto ir = index::index_sources(files);
  if (!ir.ok()) {
    rep.fatal = true;
    rep.fatal_reason = ir.error->reason;
    return rep;
  }
  index::CodebaseIndex idx = std::move(ir.index);
  if (!config.entry_manifest_path.empty()) {
    auto manifest = index::load_entry_manifest(config.entry_manifest_path);
    if (!manifest) {
      rep.fatal = true;
      rep.fatal_reason = "entry manifest unreadable: " + config.entry_manifest_path;
      return rep;
    }
    idx.entry_manifest = *manifest;
  }
  for (const auto& d : idx.diagnostics) rep.warnings.push_back(d);

  auto store = knowledge::load_store(config.store_path);
  for (const auto& w : store.warnings) rep.warnings.push_back(w);
  std::map<std::string, std::string> digests;
  for (const auto& [name, fn] : idx.functions)
    digests[name] = fnv1a_hex(fn.body_text);
  knowledge::mark_stale(store, digests);

  auto summary = index::build_domain_summary(idx);
  auto dag = index::condense_sccs(idx.graph);
  auto topdown = index::layer_schedule(dag, index::Direction::topdown);
  auto bottomup = index::layer_schedule(dag, index::Direction::bottomup);

  gateway::AgentGateway gw(proposer, 3);

  std::map<std::string, FunctionSpec> specs;
  std::map<std::string, std::string> skipped;
  std::map<std::string, std::string> inconclusive;

  // --- spec generation, topdown so caller intent is available downward
  for (const auto& layer : topdown) {
    for (const auto& fn : layer) {
      auto rec_it = idx.functions.find(fn);
      if (rec_it == idx.functions.end()) continue;
      auto se = store.entries.find(fn);
      if (se != store.entries.end() && !se->second.stale && se->second.spec.post) {
        specs[fn] = se->second.spec;  // fresh store entry: generation skipped
        specs[fn].function = fn;
        continue;
      }
      std::vector<std::string> idents;
      for (const auto& [pname, ptype] : rec_it->second.params)
        idents.push_back(pname);
      std::string ctx = summary.text + "\nfunction: " + fn;
      if (config.dual_source) {
        auto r = gateway::dual_source_spec(gw, fn, ctx, &idents);
        if (r.failed) {
          skipped[fn] = "spec generation failed";
          continue;
        }
        if (r.flagged) rep.flagged_disagreements.push_back(fn);
        specs[fn] = r.spec;
      } else {
        gateway::ProposerRequest req{gateway::RequestKind::spec_draft, fn, ctx,
                                     gateway::SpecMode::implementation};
        auto out = gw.submit(req, [&](const std::string& p) {
          return gateway::parse_spec_payload(p, &idents).has_value();
        });
        if (!out.ok()) {
          skipped[fn] = "spec generation failed";
          continue;
        }
        auto spec = gateway::parse_spec_payload(out.response->payload, &idents);
        spec->function = fn;
        spec->provenance = SpecProvenance::implementation;
        specs[fn] = *spec;
      }
    }
  }

  // --- flag selection pre-pass, parallel across all functions
  std::map<std::string, std::set<backend::CheckFlag>> flags;
  std::mutex flags_mu;
  std::vector<std::string> spec_fns;
  for (const auto& [fn, spec] : specs) spec_fns.push_back(fn);
  parallel_for(spec_fns, config.parallelism, [&](const std::string& fn) {
    const auto& rec = idx.functions.at(fn);
    dsl::Dialect dialect = dialect_of(rec);
    std::string digest = digests.at(fn);
    {
      std::lock_guard<std::mutex> lock(flags_mu);
      auto it = store.flag_cache.find(digest);
      if (it != store.flag_cache.end()) {
        flags[fn] = it->second;
        return;
      }
    }
    gateway::ProposerRequest req{gateway::RequestKind::flag_select, fn,
                                 summary.text, std::nullopt};
    std::set<backend::CheckFlag> selected;
    auto out = gw.submit(req, [&](const std::string& p) {
      std::set<backend::CheckFlag> tmp;
      return parse_flag_payload(p, dialect, tmp);
    });
    if (out.ok()) parse_flag_payload(out.response->payload, dialect, selected);
    std::lock_guard<std::mutex> lock(flags_mu);
    flags[fn] = selected;
    store.flag_cache[digest] = selected;
  });

  // --- BMC dispatch state
  std::map<std::string, std::map<std::string, std::string>> overrides;
  std::map<std::string, CleanRecord> clean;
  std::vector<backend::Witness> witnesses;
  std::mutex run_mu;

  auto adapter_for = [&](dsl::Dialect d) -> backend::BackendAdapter* {
    return d == dsl::Dialect::c_backend ? adapter_c.get() : adapter_rust.get();
  };

  auto run_function = [&](const std::string& fn,
                          std::vector<backend::Witness>* out_witnesses) {
    auto spec_it = specs.find(fn);
    if (spec_it == specs.end()) return;
    const auto& rec = idx.functions.at(fn);
    dsl::Dialect dialect = dialect_of(rec);
    backend::BackendAdapter* adapter = adapter_for(dialect);
    if (!adapter) {
      std::lock_guard<std::mutex> lock(run_mu);
      inconclusive[fn] = "no adapter configured for dialect";
      return;
    }
    std::map<std::string, index::FunctionRecord> stubs;
    std::map<std::string, dsl::ExprPtr> contracts;
    {
      std::lock_guard<std::mutex> lock(run_mu);
      for (const auto& callee : rec.callees) {
        auto cit = idx.functions.find(callee);
        if (cit != idx.functions.end()) {
          stubs[callee] = cit->second;
        } else {
          index::FunctionRecord ext;  // external: synthetic int-returning stub
          ext.name = callee;
          ext.source_language = rec.source_language;
          ext.return_type_text = dialect == dsl::Dialect::c_backend ? "int" : "i32";
          stubs[callee] = ext;
        }
        auto co = spec_it->second.callee_contracts.find(callee);
        if (co != spec_it->second.callee_contracts.end()) {
          contracts[callee] = co->second;
        } else {
          auto cs = specs.find(callee);
          if (cs != specs.end() && cs->second.post)
            contracts[callee] = cs->second.effective_post();
        }
      }
    }
    std::vector<dsl::ExprPtr> invariants = knowledge::promoted_invariants(store);
    backend::BackendConfig bcfg;
    bcfg.unwind_bound = config.unwind;
    bcfg.timeout_seconds = config.timeout_s;
    {
      std::lock_guard<std::mutex> lock(run_mu);
      bcfg.flags = flags.count(fn) ? flags[fn] : std::set<backend::CheckFlag>{};
      auto ov = overrides.find(fn);
      if (ov != overrides.end()) {
        auto u = ov->second.find("unwind");
        if (u != ov->second.end()) bcfg.unwind_bound = std::atoi(u->second.c_str());
        auto t = ov->second.find("timeout");
        if (t != ov->second.end())
          bcfg.timeout_seconds = std::atoi(t->second.c_str());
      }
    }
    auto synth = backend::synthesize_harness(rec, spec_it->second, stubs,
                                             contracts, invariants, bcfg.flags,
                                             config.real_source_include);
    if (!synth.ok()) {
      std::lock_guard<std::mutex> lock(run_mu);
      inconclusive[fn] = *synth.error;
      return;
    }
    auto outcome = backend::run(synth.harness, bcfg, *adapter);
    std::lock_guard<std::mutex> lock(run_mu);
    rep.harness_texts[fn] = synth.harness.text();
    rep.raw_outputs[fn] = outcome.raw_output;
    switch (outcome.verdict) {
      case backend::Verdict::verified_clean:
        clean[fn] = {fn, spec_it->second.version,
                     config_summary(outcome.effective_config)};
        inconclusive.erase(fn);
        break;
      case backend::Verdict::counterexample:
        clean.erase(fn);
        out_witnesses->push_back(*outcome.witness);
        break;
      case backend::Verdict::inconclusive:
        clean.erase(fn);
        inconclusive[fn] = outcome.reason.empty() ? "inconclusive"
                                                  : outcome.reason;
        break;
    }
  };

  for (const auto& layer : bottomup)
    parallel_for(layer, config.parallelism,
                 [&](const std::string& fn) { run_function(fn, &witnesses); });

  // --- dedup + validation
  std::map<FindingKey, validation::Finding> latest;
  refinement::RecheckQueue queue(config.refinement_budget);

  auto validate_class = [&](const dedup::WitnessClass& cls) {
    validation::Finding f;
    f.cls = cls;
    f.tier = validation::EvidenceTier::confirmed_bmc;
    const FunctionSpec& spec = specs[cls.function];
    bool spec_overflow =
        validation::spec_overflow_filter(cls.representative, spec.pre) ==
            validation::OverflowFilter::spurious ||
        validation::spec_overflow_filter(cls.representative,
                                         spec.effective_post()) ==
            validation::OverflowFilter::spurious;
    if (spec_overflow) {
      f.realism = validation::Realism::unrealistic;
      f.realism_confidence = validation::RealismConfidence::committed;
      f.detector_id = "spec-overflow-filter";
      f.classification = validation::Classification::spurious;
      return f;
    }
    f.reach = validation::stage1_reachability(cls, idx, gw);
    f.tier = validation::tier_after_stage1(f.tier, f.reach);
    auto rec_it = idx.functions.find(cls.function);
    backend::BackendAdapter* adapter =
        rec_it == idx.functions.end() ? nullptr
                                      : adapter_for(dialect_of(rec_it->second));
    if (adapter) {
      backend::BackendConfig bcfg;
      bcfg.unwind_bound = config.unwind;
      bcfg.timeout_seconds = config.timeout_s;
      f.feasibility = validation::stage2_callee_feasibility(cls, idx, spec,
                                                            *adapter, bcfg);
    }
    if (f.feasibility == validation::Feasibility::refuted) {
      f.realism = validation::Realism::unrealistic;  // stub artifact
      f.realism_confidence = validation::RealismConfidence::committed;
      f.classification = validation::Classification::spurious;
      return f;
    }
    if (config.enable_dynamic) {
      f.dynamic = validation::stage3_dynamic_replay(cls, idx, config.work_dir);
      f.tier = validation::tier_after_stage3(f.tier, f.dynamic);
    }
    if (config.enable_realism) {
      auto r = validation::stage4_realism(cls, store.detectors, gw,
                                          spec_text(spec));
      f.realism = r.realism;
      f.realism_confidence = r.confidence;
      f.detector_id = r.detector_id;
    } else if (auto id = knowledge::match_detector(store.detectors,
                                                   cls.representative)) {
      f.realism = validation::Realism::unrealistic;
      f.detector_id = id;
    } else {
      f.realism = validation::Realism::realistic;  // audit disabled
    }
    f.classification = validation::classify(f, config.threat_model);
    return f;
  };

  auto try_refine = [&](const validation::Finding& f) {
    bool eligible = f.classification == validation::Classification::spurious ||
                    f.cls.property_type == backend::PropertyType::unwind;
    if (!eligible) return;
    auto r = refinement::propose(f, gw, spec_text(specs[f.cls.function]));
    if (!r) {
      rep.refinement_log.push_back(
          "{\"target\":\"" + f.cls.function +
          "\",\"verdict\":\"unresolved: no acceptable proposal\"}");
      return;
    }
    refinement::GuardEvidence ev;
    ev.call_sites = refinement::collect_call_site_tuples(idx, r->target);
    ev.return_observations =
        refinement::collect_return_observations(idx, r->target);
    auto fit = flags.find(r->target);
    if (fit != flags.end()) ev.active_flags = fit->second;
    auto g = refinement::guard(*r, ev);
    rep.refinement_log.push_back(refinement::log_line(
        *r, g.accepted ? "accepted" : "rejected: " + g.reason));
    if (!g.accepted) return;
    auto applied = refinement::apply(*r, specs, idx, queue);
    if (!applied.queued) rep.budget_exhausted.push_back(r->target);
    if (r->kind == refinement::RefinementKind::verifier_level)
      overrides[r->target][r->config_key] = r->config_value;
    if (r->kind == refinement::RefinementKind::caller_side && r->payload_expr)
      knowledge::learn_invariant(store, r->payload_expr, r->target);
    if (r->kind == refinement::RefinementKind::callee_contract &&
        r->payload_expr) {
      FunctionSpec& callee_spec = specs[r->target];
      if (callee_spec.function.empty()) callee_spec.function = r->target;
      auto& entry = store.entries[r->target];
      entry.learned_contracts[r->target] = r->payload_expr;
    }
  };

  auto record_finding = [&](validation::Finding f) {
    FindingKey key{f.cls.function, f.cls.property_type};
    if (f.classification == validation::Classification::spurious) {
      rep.suppressed.push_back(f);
      latest.erase(key);
      try_refine(f);
    } else {
      latest[key] = std::move(f);
    }
  };

  for (const auto& cls : dedup::dedup(witnesses)) record_finding(validate_class(cls));

  // --- refinement / re-verification until the queue drains
  while (auto item = queue.pop()) {
    std::vector<backend::Witness> round;
    run_function(item->function, &round);
    for (const auto& cls : dedup::dedup(round))
      record_finding(validate_class(cls));
  }
  for (const auto& fn : queue.exhausted()) rep.budget_exhausted.push_back(fn);

  // --- knowledge persist
  for (const auto& [fn, spec] : specs) {
    auto& entry = store.entries[fn];
    auto learned = entry.learned_contracts;  // keep across spec overwrite
    entry.spec = spec;
    entry.learned_contracts = std::move(learned);
    entry.source_digest = digests.count(fn) ? digests[fn] : "";
    entry.last_run = config.timestamp;
    entry.stale = false;
  }
  if (!config.store_path.empty() &&
      !knowledge::persist_store(store, config.store_path))
    rep.warnings.push_back("spec store not writable: " + config.store_path);

  // --- final accounting: every function lands in exactly one bucket
  rep.final_specs = specs;
  std::set<std::string> finding_fns;
  for (const auto& [key, f] : latest) {
    rep.findings.push_back(f);
    finding_fns.insert(key.function);
  }
  std::sort(rep.findings.begin(), rep.findings.end(),
            [](const validation::Finding& a, const validation::Finding& b) {
              if (a.tier != b.tier)
                return static_cast<int>(a.tier) > static_cast<int>(b.tier);
              if (a.cls.function != b.cls.function)
                return a.cls.function < b.cls.function;
              return static_cast<int>(a.cls.property_type) <
                     static_cast<int>(b.cls.property_type);
            });
  for (const auto& [name, fn] : idx.functions) {
    if (finding_fns.count(name)) continue;
    if (clean.count(name)) {
      rep.verified_clean.push_back(clean[name]);
    } else if (inconclusive.count(name)) {
      rep.inconclusive.push_back({name, inconclusive[name]});
    } else if (skipped.count(name)) {
      rep.skipped.push_back({name, skipped[name]});
    } else {
      bool had_spurious = std::any_of(
          rep.suppressed.begin(), rep.suppressed.end(),
          [&](const validation::Finding& f) { return f.cls.function == name; });
      rep.inconclusive.push_back(
          {name, had_spurious ? "all witnesses classified spurious"
                              : "not scheduled"});
    }
  }
  for (const auto& f : rep.findings) {
    rep.tier_counts[validation::tier_name(f.tier)] += 1;
    rep.classification_counts[validation::classification_name(f.classification)] +=
        1;
  }
  for (const auto& f : rep.suppressed)
    rep.classification_counts[validation::classification_name(f.classification)] +=
        1;
  return rep;
}

// ---------------------------------------------------------------------------
// Reporting

namespace {

nlohmann::json finding_json(const validation::Finding& f) {
  nlohmann::json j;
  j["function"] = f.cls.function;
  j["property_type"] = backend::property_type_name(f.cls.property_type);
  j["property_id"] = f.cls.representative.property_id;
  j["members"] = f.cls.members.size();
  j["assignments"] = f.cls.representative.assignments;
  j["tier"] = validation::tier_name(f.tier);
  switch (f.reach.kind) {
    case validation::ReachKind::system_entry: j["reach"] = "system_entry"; break;
    case validation::ReachKind::halted_at:
      j["reach"] = "halted_at(" + f.reach.caller + ")";
      break;
    case validation::ReachKind::unknown: j["reach"] = "unknown"; break;
  }
  j["feasibility"] = validation::feasibility_name(f.feasibility);
  j["dynamic"] = validation::dynamic_kind_name(f.dynamic.kind);
  if (!f.dynamic.signal_name.empty()) j["signal"] = f.dynamic.signal_name;
  j["realism"] = validation::realism_name(f.realism);
  j["realism_confidence"] =
      f.realism_confidence == validation::RealismConfidence::committed
          ? "committed"
          : "folded_uncertain";
  if (f.detector_id) j["detector"] = *f.detector_id;
  j["classification"] = validation::classification_name(f.classification);
  return j;
}

}  // namespace

nlohmann::json report_json(const RunReport& report,
                           const PipelineConfig& config) {
  nlohmann::json j;
  j["schema"] = "bmca-report-v1";
  j["timestamp"] = config.timestamp;
  j["config"]["unwind"] = config.unwind;
  j["config"]["timeout_s"] = config.timeout_s;
  j["config"]["threat_model"] = validation::threat_model_name(config.threat_model);
  j["config"]["dual_source"] = config.dual_source;
  j["fatal"] = report.fatal;
  if (report.fatal) j["fatal_reason"] = report.fatal_reason;
  j["counts"]["findings"] = report.findings.size();
  j["counts"]["verified_clean"] = report.verified_clean.size();
  j["counts"]["inconclusive"] = report.inconclusive.size();
  j["counts"]["skipped"] = report.skipped.size();
  j["counts"]["suppressed"] = report.suppressed.size();
  j["counts"]["per_tier"] = report.tier_counts;
  j["counts"]["per_classification"] = report.classification_counts;
  j["findings"] = nlohmann::json::array();
  for (const auto& f : report.findings) j["findings"].push_back(finding_json(f));
  j["suppressed"] = nlohmann::json::array();
  for (const auto& f : report.suppressed)
    j["suppressed"].push_back(finding_json(f));
  j["verified_clean"] = nlohmann::json::array();
  for (const auto& c : report.verified_clean) {
    nlohmann::json e;
    e["function"] = c.function;
    e["spec_version"] = c.spec_version;
    e["effective_config"] = c.effective_config;
    j["verified_clean"].push_back(e);
  }
  j["inconclusive"] = nlohmann::json::array();
  for (const auto& [fn, reason] : report.inconclusive)
    j["inconclusive"].push_back({{"function", fn}, {"reason", reason}});
  j["skipped"] = nlohmann::json::array();
  for (const auto& [fn, reason] : report.skipped)
    j["skipped"].push_back({{"function", fn}, {"reason", reason}});
  j["flagged_disagreements"] = report.flagged_disagreements;
  j["refinement_log"] = report.refinement_log;
  j["budget_exhausted"] = report.budget_exhausted;
  j["warnings"] = report.warnings;
  return j;
}

std::string report_table(const RunReport& report) {
  std::ostringstream out;
  out << "verification report\n";
  out << "===================\n";
  out << "findings: " << report.findings.size()
      << "  verified clean: " << report.verified_clean.size()
      << "  inconclusive: " << report.inconclusive.size()
      << "  skipped: " << report.skipped.size() << "\n\n";
  const validation::EvidenceTier order[] = {
      validation::EvidenceTier::confirmed_dynamic,
      validation::EvidenceTier::confirmed_system_entry,
      validation::EvidenceTier::confirmed_bmc};
  for (auto tier : order) {
    bool any = false;
    for (const auto& f : report.findings) {
      if (f.tier != tier) continue;
      if (!any) {
        out << validation::tier_name(tier) << "\n";
        out << "--------------------------------\n";
        any = true;
      }
      out << "  " << f.cls.function << "  "
          << backend::property_type_name(f.cls.property_type) << "  "
          << f.cls.representative.property_id << "  "
          << validation::classification_name(f.classification);
      if (f.dynamic.kind == validation::DynamicKind::signal)
        out << "  " << f.dynamic.signal_name;
      out << "\n";
    }
    if (any) out << "\n";
  }
  if (!report.verified_clean.empty()) {
    out << "verified clean (bounded, spec-relative)\n";
    out << "--------------------------------\n";
    for (const auto& c : report.verified_clean)
      out << "  " << c.function << "  v" << c.spec_version << "  "
          << c.effective_config << "\n";
  }
  return out.str();
}

bool emit_report(const RunReport& report, const PipelineConfig& config) {
  if (config.report_dir.empty()) return false;
  std::error_code ec;
  fs::create_directories(config.report_dir, ec);
  if (ec) return false;
  if (!write_file(config.report_dir + "/report.json",
                  report_json(report, config).dump(2) + "\n"))
    return false;
  if (!write_file(config.report_dir + "/report.txt", report_table(report)))
    return false;
  auto emit_artifacts = [&](const validation::Finding& f) {
    std::string dir = config.report_dir + "/findings/" + f.cls.function + "." +
                      backend::property_type_name(f.cls.property_type);
    fs::create_directories(dir, ec);
    if (ec) return;
    auto spec_it = report.final_specs.find(f.cls.function);
    if (spec_it != report.final_specs.end())
      write_file(dir + "/spec.txt", spec_text(spec_it->second));
    auto h = report.harness_texts.find(f.cls.function);
    if (h != report.harness_texts.end())
      write_file(dir + "/harness.txt", h->second);
    auto r = report.raw_outputs.find(f.cls.function);
    if (r != report.raw_outputs.end())
      write_file(dir + "/raw_output.txt", r->second);
    write_file(dir + "/classification.json", finding_json(f).dump(2) + "\n");
    std::string dyn = validation::dynamic_kind_name(f.dynamic.kind);
    if (!f.dynamic.signal_name.empty()) dyn += " " + f.dynamic.signal_name;
    write_file(dir + "/dynamic.txt", dyn + "\n");
  };
  for (const auto& f : report.findings) emit_artifacts(f);
  return true;
}

}  // namespace bmca::pipeline
