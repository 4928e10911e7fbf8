#include <doctest.h>
#include <httplib.h>

#include <sys/wait.h>

#include <thread>

#include "support.hpp"
#include "vchatter/http_server.hpp"
#include "vchatter/service.hpp"
#include "vchatter/simulation.hpp"

using namespace vchatter;
using namespace vchatter::simulation;
using nlohmann::json;
using vtest::error_of;
namespace fs = std::filesystem;

namespace {

json canonical() { return vtest::load_json(vtest::fixture_dir() / "canonical_simulation.json"); }

SimulationOptions opts() { return {vtest::asset_dir()}; }

// Relative path -> contents for every regular file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = vtest::slurp(e.path());
  }
  return out;
}

struct Run {
  int status = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(VCHATTER_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) r.out += buf;
  const int st = ::pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string first_violation(const SimulationResult& r) { return r.violations.empty() ? "" : r.violations.front(); }

}  // namespace

TEST_CASE("canonical simulation") {
  vtest::TempDir dir;
  const auto r = run_simulation(canonical(), dir / "a", opts());
  INFO(first_violation(r));
  REQUIRE(r.ok);
  CHECK(r.final_state.phase == protocol::Phase::Closed);
  CHECK(r.report["levels"] == json{"Low", "Low", "Medium", "Medium", "High", "High"});
  CHECK(r.report["agent_h_counts"] == json{1, 1, 1, 1, 2, 2});
  CHECK(r.report["exposure_transcripts"] == 6);
  CHECK(r.report["channels"].size() == 9);
  CHECK(r.report["memory_isolation_ok"] == true);
  CHECK(r.report["phase_order_ok"] == true);
  CHECK(r.report["help_requests"] == 1);
  CHECK(fs::exists(dir / "a" / "bundles.jsonl"));
  CHECK(validate_path(dir / "a" / "transcripts").empty());
  CHECK(validate_path(dir / "a" / "store").empty());

  const auto again = run_simulation(canonical(), dir / "b", opts());
  REQUIRE(again.ok);
  CHECK(tree(dir / "a") == tree(dir / "b"));
}

TEST_CASE("single-role card on a high day fails the run") {
  auto script = canonical();
  auto& card = script["provider"]["responses"]["therapist/5/Planning/1"];
  std::string text = card.get<std::string>();
  const auto c1 = text.find("Character-1:\n");
  const auto c2 = text.find("Character-2:");
  const auto scene = text.find("\n\nExposure Scenario:");
  REQUIRE(c2 != std::string::npos);
  text = text.substr(0, c2) + text.substr(scene + 1);
  text.erase(c1, std::string("Character-1:\n").size());
  card = text;

  vtest::TempDir dir;
  const auto r = run_simulation(script, dir / "out", opts());
  CHECK_FALSE(r.ok);
  CHECK(first_violation(r).rfind("plan_role_count_mismatch", 0) == 0);
}

TEST_CASE("missing debrief utterance stalls the run") {
  auto script = canonical();
  script["utterances"].erase("participant/3/Debrief/0");
  vtest::TempDir dir;
  const auto r = run_simulation(script, dir / "out", opts());
  CHECK_FALSE(r.ok);
  CHECK(first_violation(r).find("stalled at day 3 Debrief") != std::string::npos);
}

TEST_CASE("missing provider reply is reported") {
  auto script = canonical();
  script["provider"]["responses"].erase("interlocutor-1/6/Exposure/0");
  vtest::TempDir dir;
  const auto r = run_simulation(script, dir / "out", opts());
  CHECK_FALSE(r.ok);
  CHECK(first_violation(r).find("interlocutor-1/6/Exposure/0") != std::string::npos);
}

TEST_CASE("isolation checker finds copied interlocutor text") {
  BundleRecord b;
  b.agent_kind = "therapist";
  b.bundle.system_text = "You are a therapist.";
  b.bundle.context_messages = {{provider::Role::User, "She said: the library closes at nine tonight, sorry"}};
  const std::vector<std::string> agent{"Sorry, the library closes at nine tonight, sorry."};
  CHECK_FALSE(memory_isolation_violations({b}, agent, {}).empty());
  // Text the participant typed themselves is allowed through.
  CHECK(memory_isolation_violations({b}, agent, {"She said: the library closes at nine tonight, sorry"}).empty());
  CHECK(memory_isolation_violations({b}, {"short"}, {}).empty());
}

TEST_CASE("validator flags broken transcripts") {
  vtest::TempDir dir;
  REQUIRE(run_simulation(canonical(), dir / "sim", opts()).ok);
  const auto file = dir / "sim" / "transcripts" / "therapist.jsonl";
  REQUIRE(fs::exists(file));
  std::string t = vtest::slurp(file);
  std::ofstream(file, std::ios::trunc) << t.substr(t.find('\n') + 1);
  CHECK_FALSE(validate_path(file).empty());
  std::ofstream(file, std::ios::trunc) << "{\"seq\": 1, \"channel\": \"nowhere\"}\n";
  CHECK_FALSE(validate_path(file).empty());
  CHECK_FALSE(validate_path(dir / "missing").empty());
}

TEST_CASE("seeded cohort is deterministic and reported") {
  vtest::TempDir dir;
  seed_cohort(dir / "a", 10, 42, vtest::asset_dir());
  seed_cohort(dir / "b", 10, 42, vtest::asset_dir());
  CHECK(tree(dir / "a") == tree(dir / "b"));
  seed_cohort(dir / "c", 10, 43, vtest::asset_dir());
  CHECK(tree(dir / "a") != tree(dir / "c"));
  CHECK(error_of([&] { seed_cohort(dir / "d", 0, 1, vtest::asset_dir()); }) == ErrorCode::Validation);
  CHECK(validate_path(dir / "a").empty());

  const auto rep = report(dir / "a");
  CHECK(rep.participants == 10);
  CHECK(rep.rows.size() == 5);
  CHECK(error_of([&] { report(dir / "nothing"); }) == ErrorCode::NotFound);

  // The CLI table and the HTTP text view agree.
  const auto text = cli("report -d " + (dir / "a").string());
  CHECK(text.status == 0);
  CHECK(text.out == stats::render_table(rep));

  auto st = std::make_shared<store::Store>(dir / "a");
  service::ServiceConfig cfg;
  cfg.asset_dir = vtest::asset_dir();
  service::Service svc(st, std::make_shared<provider::ScriptedProvider>(provider::ScriptedProvider::Script{}),
                       std::make_shared<presence::NullSynthesizer>(), cfg);
  httplib::Server server;
  service::register_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/outcomes?format=text");
  REQUIRE(res);
  CHECK(res->body == text.out);
  res = client.Get("/outcomes");
  CHECK(json::parse(res->body) == stats::to_json(rep));
  server.stop();
  th.join();
}

TEST_CASE("command line exit codes") {
  vtest::TempDir dir;
  const std::string script = (vtest::fixture_dir() / "canonical_simulation.json").string();
  auto r = cli("simulate " + script + " -o " + (dir / "sim").string());
  CHECK(r.status == 0);
  CHECK(r.out.find("simulation ok") != std::string::npos);
  CHECK(cli("validate " + (dir / "sim" / "transcripts").string()).status == 0);

  auto broken = canonical();
  broken["utterances"].erase("participant/3/Debrief/0");
  std::ofstream(dir / "broken.json") << broken.dump();
  r = cli("simulate " + (dir / "broken.json").string() + " -o " + (dir / "bad").string());
  CHECK(r.status == 1);
  CHECK(r.out.find("stalled") != std::string::npos);

  CHECK(cli("seed -n 3 -s 5 -d " + (dir / "data").string()).status == 0);
  r = cli("report --json -d " + (dir / "data").string());
  CHECK(r.status == 0);
  CHECK(json::parse(r.out)["participants"] == 3);
  r = cli("report -d " + (dir / "empty").string());
  CHECK(r.status == 1);
  CHECK(r.out.find("not_found") != std::string::npos);

  CHECK(cli("").status == 2);
  CHECK(cli("frobnicate").status == 2);
  CHECK(cli("seed -n notanumber").status == 2);
  CHECK(cli("simulate /nonexistent.json").status == 2);
}
