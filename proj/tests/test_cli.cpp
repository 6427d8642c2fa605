#include "fixtures.hpp"

#include <doctest.h>
#include <httplib.h>

#include <csignal>
#include <fcntl.h>
#include <fstream>
#include <regex>
#include <spawn.h>
#include <sstream>
#include <sys/wait.h>
#include <thread>

using namespace deepalm;
using nlohmann::json;

extern char** environ;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) {
  return "'" + s + "'";
}

Run run(const std::string& args, const std::string& env = {}) {
  static fixtures::TempDir dir;
  const auto out = dir.file("stdout");
  const auto err = dir.file("stderr");
  const auto cmd = env + " " + quote(DEEPALM_CLI) + " " + args + " >" + quote(out) + " 2>"
                   + quote(err);
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const std::string route_file = fixtures::data_path("route_25km.json");

void write(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

} // namespace

TEST_CASE("help exits 0 and lists the flags") {
  auto r = run("--help");
  CHECK(r.code == 0);
  for (const char* sub : {"serve", "analyze", "simulate", "report"})
    CHECK(r.out.find(sub) != std::string::npos);
  r = run("simulate --help");
  CHECK(r.code == 0);
  for (const char* flag : {"--route", "--incident", "--seed", "--output"})
    CHECK(r.out.find(flag) != std::string::npos);
  r = run("analyze --help");
  CHECK(r.code == 0);
  CHECK(r.out.find("--baseline") != std::string::npos);
  CHECK(r.out.find("--json") != std::string::npos);
  CHECK(run("serve --help").code == 0);
  CHECK(run("report --help").code == 0);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("simulate").code == 2);
  CHECK(run("analyze").code == 2);
  CHECK(run("simulate --route " + quote(route_file) + " --incident volcano:5").code == 2);
  CHECK(run("simulate --route " + quote(route_file) + " --incident cut:99999").code == 2);
}

TEST_CASE("simulate is deterministic and writes to stdout by default") {
  fixtures::TempDir dir;
  const auto a = dir.file("a.json");
  const auto b = dir.file("b.json");
  CHECK(run("simulate --route " + quote(route_file) + " --seed 5 -o " + quote(a)).code == 0);
  CHECK(run("simulate --route " + quote(route_file) + " --seed 5 -o " + quote(b)).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK_FALSE(slurp(a).empty());
  const auto stdout_run = run("simulate --route " + quote(route_file) + " --seed 5");
  CHECK(stdout_run.code == 0);
  CHECK(stdout_run.out == slurp(a));
  CHECK(run("simulate --route " + quote(route_file) + " --seed 6").out != slurp(a));
  const auto doc = json::parse(slurp(a));
  CHECK(doc["format"] == "deepalm-trace/1");
  CHECK(doc["samples"].size() == 2501);
}

TEST_CASE("cut round trip through analyze") {
  fixtures::TempDir dir;
  const auto base = dir.file("base.json");
  const auto cut = dir.file("cut.json");
  REQUIRE(run("simulate --route " + quote(route_file) + " --seed 1 -o " + quote(base)).code == 0);
  REQUIRE(run("simulate --route " + quote(route_file) + " --seed 2 --incident cut:12345 -o "
              + quote(cut)).code == 0);

  auto r = run("analyze " + quote(base));
  CHECK(r.code == 0);
  CHECK(r.out.find("reflective") != std::string::npos);

  r = run("analyze " + quote(base) + " --json");
  CHECK(r.code == 0);
  const auto events = json::parse(r.out);
  CHECK(events.is_array());
  CHECK(events.size() >= 2);

  r = run("analyze " + quote(cut) + " --baseline " + quote(base));
  CHECK(r.code == 1);
  CHECK(r.out.find("fiber_cut") != std::string::npos);

  r = run("analyze " + quote(cut) + " --baseline " + quote(base) + " --route " + quote(route_file)
          + " --json");
  CHECK(r.code == 1);
  const auto j = json::parse(r.out);
  CHECK(j["diagnosis"]["fault_kind"] == "fiber_cut");
  CHECK(std::abs(j["diagnosis"]["position_m"].get<double>() - 12345) <= 30);
  CHECK(j["diff"]["end_shift_m"].get<double>() < 0);

  r = run("analyze " + quote(base) + " --baseline " + quote(base));
  CHECK(r.code == 0);
}

TEST_CASE("corrupt or missing input exits 2") {
  fixtures::TempDir dir;
  const auto bad = dir.file("bad.json");
  write(bad, "{\"format\": \"deepalm-trace/1\", \"samples\": [1, 2,");
  auto r = run("analyze " + quote(bad));
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.json") != std::string::npos);
  CHECK(run("analyze " + quote(dir.file("missing.json"))).code == 2);
  write(bad, R"({"format": "deepalm-route/1"})");
  CHECK(run("analyze " + quote(bad)).code == 2);
}

TEST_CASE("the shipped demo config is valid") {
  const auto r = run("report --config " + quote(fixtures::data_path("demo_config.json")));
  CHECK(r.code == 0);
  CHECK(r.out.find("device edfa-1: ok") != std::string::npos);
}

TEST_CASE("serve rejects bad configs with exit 2") {
  fixtures::TempDir dir;
  auto r = run("serve --config " + quote(dir.file("nope.json")));
  CHECK(r.code == 2);
  CHECK(r.err.find("nope.json") != std::string::npos);

  auto j = service::config_to_json(fixtures::demo_config());
  j["scan_interval_s"] = 0;
  j["telemetry_interval_s"] = 0;
  const auto cfg = dir.file("bad.json");
  write(cfg, j.dump());
  r = run("serve --config " + quote(cfg));
  CHECK(r.code == 2);
  CHECK(r.err.find("scan_interval_s") != std::string::npos);
  CHECK(r.err.find("telemetry_interval_s") != std::string::npos);

  CHECK(run("serve").code == 2);
  r = run("serve", "DEEPALM_CONFIG=" + quote(cfg));
  CHECK(r.code == 2);
  CHECK(r.err.find("scan_interval_s") != std::string::npos);
}

TEST_CASE("serve answers health, stops on SIGTERM, report reads the journal") {
  fixtures::TempDir dir;
  auto c = fixtures::demo_config();
  c.start_time.reset();
  c.listen_port = 0;
  c.scan_interval_s = 1;
  c.persistence_path = dir.file("alerts.ndjson");
  const auto cfg = dir.file("config.json");
  write(cfg, service::config_to_json(c).dump(2));

  const auto out = dir.file("serve.out");
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  std::string exe = DEEPALM_CLI;
  std::vector<std::string> args{exe, "serve", "--config", cfg};
  std::vector<char*> argv;
  for (auto& a : args)
    argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  REQUIRE(posix_spawn(&pid, exe.c_str(), &fa, nullptr, argv.data(), environ) == 0);
  posix_spawn_file_actions_destroy(&fa);

  int port = 0;
  const std::regex re(R"(listening on http://127\.0\.0\.1:(\d+))");
  for (int i = 0; i < 100 && port == 0; ++i) {
    std::smatch m;
    const auto text = slurp(out);
    if (std::regex_search(text, m, re))
      port = std::stoi(m[1]);
    else
      std::this_thread::sleep_for(std::chrono::milliseconds{50});
  }
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/v1/health");
  REQUIRE(res);
  CHECK(json::parse(res->body)["status"] == "ok");

  res = client.Post("/api/v1/scenario/inject",
                    R"({"kind":"fiber_cut","route_id":"route-b","position_m":5000})",
                    "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  bool seen = false;
  for (int i = 0; i < 60 && !seen; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds{100});
    auto alerts = client.Get("/api/v1/alerts?domain=fiber");
    seen = alerts && !json::parse(alerts->body).empty();
  }
  CHECK(seen);

  kill(pid, SIGTERM);
  int status = 0;
  REQUIRE(waitpid(pid, &status, 0) == pid);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);

  auto r = run("report --config " + quote(cfg));
  CHECK(r.code == 0);
  CHECK(r.out.find("fiber_cut") != std::string::npos);
  CHECK(r.out.find("device amp-1") != std::string::npos);
  r = run("report --config " + quote(cfg) + " --json");
  CHECK(r.code == 0);
  const auto rep = json::parse(r.out);
  CHECK(rep["summary"]["by_domain"]["fiber"] == 1);
  CHECK(rep["devices"].size() == 3);
}
