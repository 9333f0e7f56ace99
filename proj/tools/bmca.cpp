#include <cstdio>
#include <memory>
#include <string>

#include "CLI11.hpp"

#include "bmca/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bmca - compositional bounded-model-checking orchestrator"};

  bmca::pipeline::PipelineConfig cfg;
  std::string threat_model = "security";

  app.add_option("target", cfg.target_dir, "directory (or file) to verify")
      ->required();
  app.add_option("--unwind", cfg.unwind, "loop unwinding bound")
      ->default_val(4);
  app.add_option("--timeout", cfg.timeout_s, "per-function timeout in seconds")
      ->default_val(120);
  app.add_option("--threat-model", threat_model,
                 "classification gate: security, safety or functional")
      ->check(CLI::IsMember({"security", "safety", "functional"}))
      ->default_val("security");
  app.add_flag("--strict-dsl", cfg.strict_dsl,
               "reject any spec clause outside the DSL grammar");
  app.add_flag("--real-libc", cfg.real_source_include,
               "harnesses include the original source file verbatim");
  app.add_flag("--enable-realism-check", cfg.enable_realism,
               "run the stage-4 realism audit");
  app.add_flag("--enable-dynamic-validation", cfg.enable_dynamic,
               "run the stage-3 host replay");
  app.add_flag("--dual-source", cfg.dual_source,
               "draft specs from caller intent and implementation");
  app.add_option("--store", cfg.store_path, "spec store JSON path");
  app.add_option("--adapter-c", cfg.adapter_c, "C-dialect BMC tool");
  app.add_option("--adapter-rust", cfg.adapter_rust, "Rust-dialect BMC tool");
  app.add_option("--mock-fixtures", cfg.mock_fixtures,
                 "scripted gateway/adapter fixture JSON");
  app.add_option("--entry-manifest", cfg.entry_manifest_path,
                 "JSON list of system-entry functions");
  app.add_option("--report-dir", cfg.report_dir, "report output directory");
  app.add_option("--jobs", cfg.parallelism, "worker pool size")->default_val(1);

  CLI11_PARSE(app, argc, argv);
  cfg.threat_model = *bmca::validation::threat_model_from_name(threat_model);
  if (!cfg.target_dir.empty() &&
      (cfg.target_dir.size() > 2 &&
       (cfg.target_dir.rfind(".c") == cfg.target_dir.size() - 2 ||
        cfg.target_dir.rfind(".rs") == cfg.target_dir.size() - 3))) {
    cfg.sources = {cfg.target_dir};  // single-file mode
  }

  std::shared_ptr<bmca::gateway::Proposer> proposer;
  std::shared_ptr<bmca::backend::BackendAdapter> adapter_c;
  std::shared_ptr<bmca::backend::BackendAdapter> adapter_rust;

  if (!cfg.mock_fixtures.empty()) {
    auto fx = bmca::pipeline::load_mock_fixtures(cfg.mock_fixtures);
    if (!fx) {
      std::fprintf(stderr, "error: fixture file '%s' unreadable or malformed\n",
                   cfg.mock_fixtures.c_str());
      return 2;
    }
    proposer = fx->proposer;
    adapter_c = fx->adapter;
    adapter_rust = fx->adapter;
  }
  std::string work = cfg.report_dir.empty() ? "/tmp" : cfg.report_dir;
  if (!cfg.adapter_c.empty())
    adapter_c = std::make_shared<bmca::backend::ExternalAdapter>(
        cfg.adapter_c, bmca::dsl::Dialect::c_backend, work);
  if (!cfg.adapter_rust.empty())
    adapter_rust = std::make_shared<bmca::backend::ExternalAdapter>(
        cfg.adapter_rust, bmca::dsl::Dialect::rust_backend, work);
  cfg.work_dir = work;

  auto report =
      bmca::pipeline::run_pipeline(cfg, proposer, adapter_c, adapter_rust);
  if (report.fatal) {
    std::fprintf(stderr, "error: %s\n", report.fatal_reason.c_str());
    return 2;
  }
  std::fputs(bmca::pipeline::report_table(report).c_str(), stdout);
  if (!cfg.report_dir.empty() && !bmca::pipeline::emit_report(report, cfg)) {
    std::fprintf(stderr, "error: report directory '%s' not writable\n",
                 cfg.report_dir.c_str());
    return 2;
  }
  return report.findings.empty() ? 0 : 1;
}
