// End-to-end runs of the installed binary (path in QBC_CLI): flag parsing,
// config precedence (flag > file > QBC_SEED > default), exit codes 0/2/1,
// byte-identical reruns, and the audit dump.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

struct CliResult {
  int status = -1;
  std::string out;
};

std::string cli_path() {
  const char* p = std::getenv("QBC_CLI");
  REQUIRE_MESSAGE(p != nullptr, "QBC_CLI must point at the binary under test");
  return p;
}

// env_prefix like "QBC_SEED=42 "; stderr folded into the capture
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd = env_prefix + cli_path() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, got);
  const int rc = pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("a valid run exits 0 and prints one json record") {
  const CliResult r = run_cli("run --experiment concealing --n 2 --seed 7");
  CHECK(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["experiment"] == "concealing");
  CHECK(j["params"]["n"] == 2);
  CHECK(j["params"]["m"] == 3);         // default
  CHECK(j["params"]["trials"] == 10000);  // default
  CHECK(j["seed"] == 7);
  CHECK(j["distance"].get<double>() < 1e-9);
  CHECK(j["pass"] == true);
}

TEST_CASE("usage errors exit 1 with a single-line diagnostic") {
  CHECK(run_cli("run --n 0 --experiment honest").status == 1);
  CHECK(run_cli("run --n 2").status == 1);  // missing experiment id
  CHECK(run_cli("run --experiment honest --frobnicate 3").status == 1);
  CHECK(run_cli("").status == 1);  // missing subcommand
  const CliResult diag = run_cli("run --experiment sorcery");
  CHECK(diag.status == 1);
  CHECK(diag.out.find("unknown experiment id") != std::string::npos);
  CHECK(std::count(diag.out.begin(), diag.out.end(), '\n') == 1);
}

TEST_CASE("flags override the config file, the file overrides the environment") {
  const std::string path = "/tmp/qbc_cli_cfg.json";
  {
    std::ofstream out(path);
    out << R"({"experiment":"honest","n":1,"m":1,"trials":500,"seed":7})";
  }
  CliResult r = run_cli("run --config " + path + " --trials 200");
  CHECK(r.status == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["params"]["trials"] == 200);  // flag wins
  CHECK(j["params"]["n"] == 1);         // file fills the rest
  CHECK(j["seed"] == 7);                // file beats the env default

  r = run_cli("run --config " + path + " --trials 200", "QBC_SEED=99 ");
  CHECK(nlohmann::json::parse(r.out)["seed"] == 7);

  r = run_cli("run --experiment honest --n 1 --m 1 --trials 200", "QBC_SEED=99 ");
  CHECK(nlohmann::json::parse(r.out)["seed"] == 99);  // env beats the default

  r = run_cli("run --experiment honest --n 1 --m 1 --trials 200 --seed 5", "QBC_SEED=99 ");
  CHECK(nlohmann::json::parse(r.out)["seed"] == 5);  // flag beats the env

  CHECK(run_cli("run --config /tmp/definitely_missing.json").status == 1);
  {
    std::ofstream out(path);
    out << R"({"experiment":"honest","wormhole":1})";
  }
  const CliResult bad = run_cli("run --config " + path);
  CHECK(bad.status == 1);
  CHECK(bad.out.find("wormhole") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical report files") {
  const std::string args =
      "run --experiment cheat-guess --n 2 --m 2 --trials 300 --seed 13 --output ";
  CHECK(run_cli(args + "/tmp/qbc_r1.json").status == 0);
  CHECK(run_cli(args + "/tmp/qbc_r2.json --jobs 3").status == 0);
  const std::string a = slurp("/tmp/qbc_r1.json");
  CHECK(!a.empty());
  CHECK(a == slurp("/tmp/qbc_r2.json"));
}

TEST_CASE("csv output starts with the fixed header row") {
  const CliResult r =
      run_cli("run --experiment honest --n 1 --m 1 --trials 100 --seed 3 --format csv");
  CHECK(r.status == 0);
  CHECK(r.out.rfind("experiment,n,m,b,trials,bob,alice,K,p_profile,p,knowledge,"
                    "counterfactual,estimate,distance,ci_low,ci_high,exact_reference,"
                    "pass,seed,version\n", 0) == 0);
}

TEST_CASE("a failed check exits 2") {
  // hidden hook tightens the tolerance beyond numerical reach
  CHECK(run_cli("run --experiment concealing --n 1 --seed 7", "QBC_TOLERANCE=1e-30 ").status ==
        2);
  // and the delayed-choice adversary fails the concealing check for real
  const CliResult r =
      run_cli("run --experiment concealing --n 1 --bob quantum_ancilla --seed 7");
  CHECK(r.status == 2);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["pass"] == false);
  CHECK(j["distance"].get<double>() > 0.9);
}

TEST_CASE("the transcript dump is a parsable audit record") {
  const std::string path = "/tmp/qbc_tr.json";
  const CliResult r = run_cli("run --experiment honest --n 1 --m 1 --trials 100 --seed 3 "
                              "--output /tmp/qbc_r3.json --transcript " +
                              path);
  CHECK(r.status == 0);
  const auto j = nlohmann::json::parse(slurp(path));
  CHECK(j["verdict"] == "accepted");
  CHECK(j["messages"].size() >= 8);
  CHECK(run_cli("run --experiment prelim1 --n 2 --transcript " + path).status == 1);
}
