#include "qbc/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "json.hpp"
#include "qbc/adversaries.hpp"
#include "qbc/analysis.hpp"

namespace qbc::report {

using nlohmann::ordered_json;

namespace {

constexpr double kTau = 6.283185307179586476925287;

const std::set<std::string>& experiment_ids() {
  static const std::set<std::string> ids{
      "concealing",      "prelim1",         "prelim2",          "cheat-guess",
      "cheat-z",         "cheat-quantum",   "binding-relabel",  "binding-epr-oracle",
      "binding-epr-blind", "ua-dependence", "honest"};
  return ids;
}

bool is_session_experiment(const std::string& id) {
  return id == "honest" || id.rfind("cheat-", 0) == 0 || id.rfind("binding-", 0) == 0;
}

// Hidden hook: overrides the pass tolerance of exact-distance experiments so
// the failure path stays exercisable end to end.
double distance_tolerance() {
  const char* s = std::getenv("QBC_TOLERANCE");
  return s ? std::strtod(s, nullptr) : 1e-9;
}

adversaries::StrategyParams strategy_of(const RunConfig& cfg) {
  adversaries::StrategyParams sp;
  sp.K = cfg.K;
  sp.p_profile = cfg.p_profile;
  sp.p = cfg.p;
  sp.knowledge = cfg.knowledge;
  return sp;
}

analysis::ExperimentSpec spec_of(const RunConfig& cfg) {
  analysis::ExperimentSpec spec;
  spec.id = cfg.experiment;
  spec.cfg.n = cfg.n;
  spec.cfg.m = cfg.m;
  spec.cfg.b = cfg.b;
  spec.strat = strategy_of(cfg);
  return spec;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string join_p(const std::vector<double>& p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ';';
    out += fmt(p[i]);
  }
  return out;
}

ordered_json params_json(const RunConfig& cfg) {
  ordered_json p;
  p["n"] = cfg.n;
  p["m"] = cfg.m;
  if (cfg.b < 0)
    p["b"] = nullptr;
  else
    p["b"] = cfg.b;
  p["trials"] = cfg.trials;
  p["bob"] = cfg.bob;
  p["alice"] = cfg.alice;
  p["K"] = cfg.K;
  p["p_profile"] = cfg.p_profile;
  p["p"] = cfg.p;
  p["knowledge"] = cfg.knowledge;
  p["counterfactual"] = cfg.experiment == "binding-epr-oracle";
  return p;
}

const char* kind_name(protocol::MessageKind k) {
  switch (k) {
    case protocol::MessageKind::ParticlesB2: return "particles_b2";
    case protocol::MessageKind::OutcomeReport: return "outcome_report";
    case protocol::MessageKind::ReturnParticles: return "return_particles";
    case protocol::MessageKind::TestRequest: return "test_request";
    case protocol::MessageKind::AxisDisclosure: return "axis_disclosure";
    case protocol::MessageKind::TestVerdict: return "test_verdict";
    case protocol::MessageKind::ShuffledSequence: return "shuffled_sequence";
    case protocol::MessageKind::Unveil: return "unveil";
    case protocol::MessageKind::FinalVerdict: return "final_verdict";
  }
  return "unknown";
}

const char* verdict_name(protocol::Verdict v) {
  switch (v) {
    case protocol::Verdict::None: return "none";
    case protocol::Verdict::Accepted: return "accepted";
    case protocol::Verdict::Rejected: return "rejected";
    case protocol::Verdict::Aborted: return "aborted";
  }
  return "unknown";
}

void write_file_or_stdout(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

}  // namespace

void validate(const RunConfig& cfg) {
  if (cfg.experiment.empty()) throw UsageError("missing experiment id");
  if (!experiment_ids().count(cfg.experiment))
    throw UsageError("unknown experiment id: " + cfg.experiment);
  if (cfg.n < 1) throw UsageError("n must be at least 1");
  if (cfg.m < 0) throw UsageError("m must be non-negative");
  if (cfg.b < -1 || cfg.b > 1) throw UsageError("b must be 0 or 1 when given");
  if (cfg.trials < 100) throw UsageError("trials must be at least 100");
  if (cfg.K < 2) throw UsageError("K must be at least 2");
  if (cfg.jobs < 0) throw UsageError("jobs must be non-negative");
  if (cfg.format != "json" && cfg.format != "csv")
    throw UsageError("format must be json or csv");
  if (cfg.p_profile != "uniform" && cfg.p_profile != "single" && cfg.p_profile != "custom")
    throw UsageError("p-profile must be uniform, single or custom");
  if (cfg.p_profile == "custom" && cfg.p.empty())
    throw UsageError("custom p-profile needs branch amplitudes");
  if (cfg.knowledge != "blind" && cfg.knowledge != "oracle")
    throw UsageError("knowledge must be blind or oracle");
  static const std::set<std::string> bobs{"honest", "guess_test_set", "measure_z",
                                          "quantum_ancilla", "quantum_ancilla_particles"};
  static const std::set<std::string> alices{"honest", "classical_relabel",
                                            "purification_attack"};
  if (!bobs.count(cfg.bob)) throw UsageError("unknown bob strategy: " + cfg.bob);
  if (!alices.count(cfg.alice)) throw UsageError("unknown alice strategy: " + cfg.alice);
  if (!cfg.transcript_path.empty() && !is_session_experiment(cfg.experiment))
    throw UsageError("transcript dumps need a session experiment");
}

ReportRecord run_experiment(const RunConfig& cfg) {
  validate(cfg);
  ReportRecord rec;
  rec.cfg = cfg;
  const std::string& id = cfg.experiment;
  // embed the parties that actually run, not whatever the flags carried over
  if (is_session_experiment(id)) {
    const auto [alice, bob] = analysis::experiment_parties(id);
    rec.cfg.alice = alice;
    rec.cfg.bob = bob;
    if (id == "binding-epr-oracle") rec.cfg.knowledge = "oracle";
    if (id == "binding-epr-blind") rec.cfg.knowledge = "blind";
  } else if (id != "concealing") {
    rec.cfg.alice = "honest";
    rec.cfg.bob = "honest";
  } else {
    rec.cfg.alice = "honest";
  }
  const double tol = distance_tolerance();
  if (id == "concealing") {
    rec.distance = analysis::concealing_check(cfg.n, cfg.bob, strategy_of(cfg), true, cfg.seed);
    rec.exact_reference = 0.0;
    rec.pass = *rec.distance < tol;
  } else if (id == "prelim1") {
    const auto rep = analysis::prelim_one_report(cfg.n);
    rec.distance = rep.trace_distance_full;
    rec.exact_reference = rep.tv_distance_sz;
    rec.pass = std::abs(rep.trace_distance_full - rep.tv_distance_sz) < tol;
  } else if (id == "prelim2") {
    double worst = 0;
    for (int g = 0; g < 16; ++g) {
      std::vector<analysis::MeasurementAxis> axes(
          static_cast<std::size_t>(cfg.n),
          analysis::MeasurementAxis{kTau * g / 16, false});
      std::vector<int> outcomes(static_cast<std::size_t>(cfg.n));
      for (int i = 0; i < cfg.n; ++i) outcomes[static_cast<std::size_t>(i)] = i % 2 ? -1 : +1;
      worst = std::max(worst, analysis::prelim_two_check(cfg.n, axes, outcomes));
    }
    rec.distance = worst;
    rec.exact_reference = 0.0;
    rec.pass = worst < tol;
  } else if (id == "ua-dependence") {
    const int b = cfg.b < 0 ? 0 : cfg.b;
    const auto cmp = adversaries::ua_for_bob_params(b, 1 - b, +1, 0.0, +1, kTau / 4);
    rec.distance = cmp.distance;
    rec.pass = cmp.distance > 0.1;
  } else {
    const analysis::Estimate e =
        analysis::monte_carlo(spec_of(cfg), cfg.trials, cfg.seed, cfg.jobs);
    rec.estimate = e.point;
    rec.ci_low = e.ci_low;
    rec.ci_high = e.ci_high;
    rec.exact_reference = e.exact_reference;
    if (!e.exact_reference)
      rec.pass = true;  // evidence-gathering run, nothing asserted
    else if (*e.exact_reference == 1.0)
      rec.pass = e.point == 1.0;  // probability-one claims allow zero failures
    else
      rec.pass = e.ci_low <= *e.exact_reference && *e.exact_reference <= e.ci_high;
  }
  return rec;
}

std::string render_json(const ReportRecord& rec) {
  ordered_json j;
  j["experiment"] = rec.cfg.experiment;
  j["params"] = params_json(rec.cfg);
  j["estimate"] = rec.estimate ? ordered_json(*rec.estimate) : ordered_json(nullptr);
  j["distance"] = rec.distance ? ordered_json(*rec.distance) : ordered_json(nullptr);
  j["ci_low"] = rec.ci_low ? ordered_json(*rec.ci_low) : ordered_json(nullptr);
  j["ci_high"] = rec.ci_high ? ordered_json(*rec.ci_high) : ordered_json(nullptr);
  j["exact_reference"] =
      rec.exact_reference ? ordered_json(*rec.exact_reference) : ordered_json(nullptr);
  j["pass"] = rec.pass;
  j["seed"] = rec.cfg.seed;
  j["version"] = kArtifactVersion;
  return j.dump() + "\n";
}

std::string render_csv(const ReportRecord& rec) {
  std::string out =
      "experiment,n,m,b,trials,bob,alice,K,p_profile,p,knowledge,counterfactual,"
      "estimate,distance,ci_low,ci_high,exact_reference,pass,seed,version\n";
  const RunConfig& c = rec.cfg;
  out += c.experiment + ',';
  out += std::to_string(c.n) + ',' + std::to_string(c.m) + ',';
  out += (c.b < 0 ? std::string() : std::to_string(c.b)) + ',';
  out += std::to_string(c.trials) + ',';
  out += c.bob + ',' + c.alice + ',' + std::to_string(c.K) + ',';
  out += c.p_profile + ',' + join_p(c.p) + ',' + c.knowledge + ',';
  out += (c.experiment == "binding-epr-oracle" ? "true" : "false") + std::string(",");
  out += fmt(rec.estimate) + ',' + fmt(rec.distance) + ',';
  out += fmt(rec.ci_low) + ',' + fmt(rec.ci_high) + ',';
  out += fmt(rec.exact_reference) + ',';
  out += (rec.pass ? "true" : "false") + std::string(",");
  out += std::to_string(c.seed) + ',';
  out += kArtifactVersion;
  out += '\n';
  return out;
}

std::string transcript_json(const protocol::ProtocolTranscript& t) {
  ordered_json j;
  j["config"] = {{"n", t.config.n},       {"m", t.config.m},
                 {"b", t.config.b},       {"target_bit", t.config.target_bit},
                 {"seed", t.config.seed}, {"alice", t.config.alice},
                 {"bob", t.config.bob}};
  j["messages"] = ordered_json::array();
  for (const auto& msg : t.messages) {
    ordered_json m;
    m["kind"] = kind_name(msg.kind);
    if (!msg.particles.empty()) m["particles"] = msg.particles;
    if (!msg.outcomes.empty()) m["outcomes"] = msg.outcomes;
    if (!msg.indices.empty()) m["indices"] = msg.indices;
    if (!msg.axes.empty()) m["axes"] = msg.axes;
    if (msg.kind == protocol::MessageKind::TestVerdict) m["pass"] = msg.pass;
    if (msg.kind == protocol::MessageKind::Unveil) {
      m["unveil"] = {{"b", msg.unveil.b}, {"item_of_slot", msg.unveil.item_of_slot}};
      ordered_json labels = ordered_json::array();
      for (const auto& l : msg.unveil.labels)
        labels.push_back({{"bit", l.bit}, {"sign", l.sign}});
      m["unveil"]["labels"] = labels;
    }
    if (msg.kind == protocol::MessageKind::FinalVerdict) {
      m["verdict"] = verdict_name(msg.verdict);
      m["verdict_bit"] = msg.verdict_bit;
    }
    j["messages"].push_back(m);
  }
  ordered_json recs = ordered_json::array();
  for (const auto& r : t.bob_records)
    recs.push_back({{"theta", r.theta}, {"alpha", r.alpha}, {"genuine", r.genuine}});
  j["bob_records"] = recs;
  j["alice_test_probs"] = t.alice_test_probs;
  j["unveil_check_probs"] = t.unveil_check_probs;
  j["test_pass"] = t.test_pass;
  j["unveil_pass"] = t.unveil_pass;
  j["verdict"] = verdict_name(t.verdict);
  j["accepted_bit"] = t.accepted_bit;
  return j.dump(2) + "\n";
}

void emit(const ReportRecord& rec) {
  const std::string text =
      rec.cfg.format == "csv" ? render_csv(rec) : render_json(rec);
  write_file_or_stdout(rec.cfg.output, text);
  if (!rec.cfg.transcript_path.empty()) {
    const auto t = analysis::single_transcript(spec_of(rec.cfg), rec.cfg.seed, 0);
    write_file_or_stdout(rec.cfg.transcript_path, transcript_json(t));
  }
}

}  // namespace qbc::report
