#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qbc/protocol.hpp"

namespace qbc::report {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Configuration problems raised by validate/parse layers; the CLI maps these
// to a usage-error exit, distinct from a failed check.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string experiment;
  int n = 3;
  int m = 3;
  int b = -1;  // -1: unset; Monte Carlo then alternates per trial
  int trials = 10000;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0: library default; never affects results
  std::string bob = "honest";
  std::string alice = "honest";
  int K = 2;
  std::string p_profile = "uniform";
  std::vector<double> p;  // branch amplitudes for the custom profile
  std::string knowledge = "blind";
  std::string output;  // report destination; empty writes to stdout
  std::string format = "json";
  std::string transcript_path;  // optional audit dump of trial 0
};

// Throws UsageError on any out-of-range or unknown field.
void validate(const RunConfig& cfg);

struct ReportRecord {
  RunConfig cfg;
  std::optional<double> estimate;  // Monte Carlo experiments
  std::optional<double> distance;  // exact-analysis experiments
  std::optional<double> ci_low, ci_high;
  std::optional<double> exact_reference;
  bool pass = false;
};

// Runs the configured experiment.  Throws UsageError for invalid configs and
// std::exception subclasses for internal failures; a false `pass` is not an
// error, it is the measured outcome.
ReportRecord run_experiment(const RunConfig& cfg);

// One record per line; numbers rendered deterministically.
std::string render_json(const ReportRecord& rec);
std::string render_csv(const ReportRecord& rec);  // fixed header + one row

// Flat audit tree of one session: config, messages in order, verdict.
std::string transcript_json(const protocol::ProtocolTranscript& t);

// Writes the rendered report to cfg.output or stdout, plus the optional
// transcript dump.  Throws std::runtime_error on I/O failure.
void emit(const ReportRecord& rec);

}  // namespace qbc::report
