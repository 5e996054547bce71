// Batch entry point: resolve a run configuration from defaults, the QBC_SEED
// environment variable, an optional JSON config file and command-line flags
// (each layer overriding the previous), run one experiment and emit a report.
// Exit status: 0 all asserted checks pass, 2 a check failed, 1 usage or
// internal error.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qbc/report.hpp"

namespace {

using qbc::report::RunConfig;
using qbc::report::UsageError;

// First pass over argv: find --config without committing to the full grammar.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

void merge_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file must hold one JSON object");
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "experiment") cfg.experiment = val.get<std::string>();
      else if (key == "n") cfg.n = val.get<int>();
      else if (key == "m") cfg.m = val.get<int>();
      else if (key == "b") cfg.b = val.is_null() ? -1 : val.get<int>();
      else if (key == "trials") cfg.trials = val.get<int>();
      else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
      else if (key == "jobs") cfg.jobs = val.get<int>();
      else if (key == "bob") cfg.bob = val.get<std::string>();
      else if (key == "alice") cfg.alice = val.get<std::string>();
      else if (key == "K") cfg.K = val.get<int>();
      else if (key == "p-profile" || key == "p_profile")
        cfg.p_profile = val.get<std::string>();
      else if (key == "p") cfg.p = val.get<std::vector<double>>();
      else if (key == "knowledge") cfg.knowledge = val.get<std::string>();
      else if (key == "output") cfg.output = val.get<std::string>();
      else if (key == "format") cfg.format = val.get<std::string>();
      else if (key == "transcript") cfg.transcript_path = val.get<std::string>();
      else throw UsageError("config file: unknown key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
}

int run_main(int argc, char** argv) {
  RunConfig cfg;
  if (const char* env = std::getenv("QBC_SEED")) {
    char* end = nullptr;
    cfg.seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw UsageError("QBC_SEED must be a decimal integer");
  }
  const std::string config_path = find_config_path(argc, argv);
  if (!config_path.empty()) merge_config_file(cfg, config_path);

  CLI::App app{"exact simulator and adversarial analysis for an EPR-pair bit commitment"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "run one experiment and emit a report record");
  std::string config_echo;  // consumed in the first pass; registered for help/validation
  run->add_option("--config", config_echo, "JSON config file; flags override its values");
  run->add_option("--experiment", cfg.experiment,
                  "concealing | prelim1 | prelim2 | cheat-guess | cheat-z | cheat-quantum | "
                  "binding-relabel | binding-epr-oracle | binding-epr-blind | "
                  "ua-dependence | honest");
  run->add_option("--n", cfg.n, "kept pairs (>= 1)");
  run->add_option("--m", cfg.m, "tested pairs (>= 0)");
  run->add_option("--b", cfg.b, "committed bit; omit to alternate per trial");
  run->add_option("--trials", cfg.trials, "Monte Carlo trials (>= 100)");
  run->add_option("--seed", cfg.seed, "base seed (also via QBC_SEED)");
  run->add_option("--jobs", cfg.jobs, "worker threads; never changes results");
  run->add_option("--bob", cfg.bob,
                  "honest | guess_test_set | measure_z | quantum_ancilla | "
                  "quantum_ancilla_particles");
  run->add_option("--alice", cfg.alice, "honest | classical_relabel | purification_attack");
  run->add_option("--K", cfg.K, "candidate axes of the delayed-choice strategy");
  run->add_option("--p-profile", cfg.p_profile, "uniform | single | custom");
  run->add_option("--p", cfg.p, "branch amplitudes for the custom profile");
  run->add_option("--knowledge", cfg.knowledge, "blind | oracle");
  run->add_option("--output", cfg.output, "report path; default stdout");
  run->add_option("--format", cfg.format, "json | csv");
  run->add_option("--transcript", cfg.transcript_path, "audit dump of trial 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const qbc::report::ReportRecord rec = qbc::report::run_experiment(cfg);
  qbc::report::emit(rec);
  return rec.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
