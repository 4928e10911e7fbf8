// vchatter: headless simulation, cohort seeding, reporting, validation, and
// the HTTP server.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "vchatter/error.hpp"
#include "vchatter/http_server.hpp"
#include "vchatter/service.hpp"
#include "vchatter/simulation.hpp"

namespace {

namespace fs = std::filesystem;
using namespace vchatter;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

int cmd_simulate(const fs::path& script, const fs::path& out, const fs::path& assets) {
  const auto result = simulation::run_simulation(script, out, {assets});
  if (!result.ok) {
    std::cerr << "simulation failed: " << result.violations.front() << '\n';
    return 1;
  }
  std::cout << "simulation ok: session " << result.report.value("session_id", "") << ", "
            << result.report.value("exposure_transcripts", 0) << " exposure transcripts, phase "
            << protocol::phase_name(result.final_state.phase) << '\n';
  return 0;
}

int cmd_validate(const fs::path& path) {
  const auto violations = simulation::validate_path(path);
  for (const auto& v : violations) std::cerr << v << '\n';
  if (!violations.empty()) return 1;
  std::cout << "valid: " << path.string() << '\n';
  return 0;
}

int cmd_serve(const std::string& host, int port, const fs::path& data_dir, const fs::path& assets) {
  auto store = std::make_shared<store::Store>(data_dir);
  auto provider = provider::make_provider_from_env();
  std::shared_ptr<presence::Synthesizer> synth = presence::make_synthesizer(
      env_or("VCHATTER_SYNTH", "null"), env_or("VCHATTER_SYNTH_COMMAND", ""));
  service::ServiceConfig cfg;
  cfg.asset_dir = assets;
  cfg.params.model_id = env_or("VCHATTER_MODEL", cfg.params.model_id);
  cfg.protocol.min_hours_between_days = std::atof(env_or("VCHATTER_MIN_HOURS_BETWEEN_DAYS", "0").c_str());
  service::Service svc(store, provider, synth, cfg);
  std::cerr << "listening on " << host << ':' << port << ", data in " << data_dir.string() << '\n';
  return service::serve(svc, host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vchatter: exposure-therapy chat engine tools"};
  app.require_subcommand(1);

  std::string assets = env_or("VCHATTER_ASSET_DIR", VCHATTER_DEFAULT_ASSET_DIR);
  std::string data_dir = vchatter::store::Store::data_dir_from_env().string();
  app.add_option("--assets", assets, "Directory with templates/, lexicon.txt, instruments.json")
      ->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Run a scripted six-day session on the mock provider");
  std::string script, out = "sim-out";
  sim->add_option("script", script, "Simulation script (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out, "Output directory")->capture_default_str();

  auto* seed = app.add_subcommand("seed", "Populate a data directory with a seeded cohort");
  int n = 10;
  std::uint64_t seed_value = 42;
  seed->add_option("-n,--participants", n, "Number of participants")->capture_default_str();
  seed->add_option("-s,--seed", seed_value, "RNG seed")->capture_default_str();
  seed->add_option("-d,--data-dir", data_dir, "Data directory (VCHATTER_DATA_DIR)")->capture_default_str();

  auto* rep = app.add_subcommand("report", "Print the pre/post outcome table");
  bool as_json = false;
  rep->add_option("-d,--data-dir", data_dir, "Data directory (VCHATTER_DATA_DIR)")->capture_default_str();
  rep->add_flag("--json", as_json, "Print JSON instead of the text table");

  auto* val = app.add_subcommand("validate", "Check transcripts and event logs");
  std::string target;
  val->add_option("path", target, "Transcript file, session directory, or data directory")->required();

  auto* srv = app.add_subcommand("serve", "Serve the HTTP API");
  std::string host = "127.0.0.1";
  int port = 8080;
  srv->add_option("--host", host)->capture_default_str();
  srv->add_option("-p,--port", port)->capture_default_str();
  srv->add_option("-d,--data-dir", data_dir, "Data directory (VCHATTER_DATA_DIR)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(script, out, assets);
    if (*seed) {
      simulation::seed_cohort(data_dir, n, seed_value, assets);
      std::cout << "seeded " << n << " participants into " << data_dir << '\n';
      return 0;
    }
    if (*rep) {
      const auto report = simulation::report(data_dir);
      std::cout << (as_json ? stats::to_json(report).dump(2) + "\n" : stats::render_table(report));
      return 0;
    }
    if (*val) return cmd_validate(target);
    if (*srv) return cmd_serve(host, port, data_dir, assets);
  } catch (const vchatter::Error& e) {
    std::cerr << code_name(e.code()) << ": " << e.what() << '\n';
    return 1;
  }
  return 2;
}
