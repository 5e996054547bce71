#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qbc/adversaries.hpp"
#include "qbc/protocol.hpp"

namespace qbc::analysis {

// Two-sided 99% normal quantile; every interval below is a Wilson interval.
inline constexpr double kWilsonZ = 2.5758293035489008;

struct Estimate {
  double point = 0;
  double ci_low = 0;
  double ci_high = 1;
  int trials = 0;
  std::optional<double> exact_reference;
};

Estimate wilson_estimate(int successes, int trials,
                         std::optional<double> exact = std::nullopt);

struct WeightClassStat {
  int weight = 0;     // number of down spins in the z basis string
  long count = 0;     // basis states in the class
  double min_diag = 0;
  double max_diag = 0;
};

// Distinguishability of the two committed sequences once the pair order is
// forgotten (uniformly averaged over all particle permutations).
struct DistinguishabilityReport {
  int n = 0;
  double trace_distance_full = 0;
  double tv_distance_sz = 0;
  // all index pairs below: [committed bit]
  std::array<std::vector<WeightClassStat>, 2> weight_classes;
  std::array<double, 2> max_off_diagonal{0, 0};
  // probability of z weight w; the total spin is S_z = 2n - 2w
  std::array<std::vector<double>, 2> weight_probs;
};

// Trace distance between Bob's total holdings after the shuffle step for
// b = 0 versus b = 1, conditioned on Bob's sampled-then-fixed randomness and
// averaged over his outcome record (a block-diagonal classical register).
// Exact enumeration over Alice's sign coins and all slot permutations; set
// shuffle = false to study the unshuffled control.
// bob_kind: honest | measure_z | quantum_ancilla (joint state including the
// retained axis registers) | quantum_ancilla_particles (axis registers traced
// out, i.e. the returned particles alone).
double concealing_check(int n, const std::string& bob_kind,
                        const adversaries::StrategyParams& sp, bool shuffle,
                        std::uint64_t seed);

DistinguishabilityReport prelim_one_report(int n);

struct MeasurementAxis {
  double theta = 0;
  bool z_axis = false;  // rejected unless the caller opts into the bypass
};

// Trace distance of the conditional two-sequence states after the second
// member of every pair was measured along the given axis with the given
// outcome.  In-plane axes must give 0; the z bypass exists to show why.
double prelim_two_check(int n, std::span<const MeasurementAxis> axes,
                        std::span<const int> outcomes, bool allow_z_bypass = false);

// A session-based experiment: which parties cheat and what counts as success.
struct ExperimentSpec {
  std::string id;  // honest | cheat-guess | cheat-z | cheat-quantum |
                   // binding-relabel | binding-epr-oracle | binding-epr-blind
  protocol::ProtocolConfig cfg;
  adversaries::StrategyParams strat;
};

// Success rate over independent seeded sessions.  Trial t draws its own rng
// streams from (seed, t), so the result is identical for any jobs value.
Estimate monte_carlo(const ExperimentSpec& spec, int trials, std::uint64_t seed,
                     int jobs = 0);

// Full transcript of one Monte Carlo trial, exactly as the estimator runs it;
// used for audit dumps.
protocol::ProtocolTranscript single_transcript(const ExperimentSpec& spec, std::uint64_t seed,
                                               int trial = 0);

// The (alice, bob) strategy pair a session experiment id stands for.
std::pair<std::string, std::string> experiment_parties(const std::string& id);

// Acceptance of the bit-flip attempt as a function of n.
std::vector<std::pair<int, Estimate>> binding_curve(const std::string& alice_kind,
                                                    std::span<const int> n_values, int m,
                                                    int trials, std::uint64_t seed,
                                                    const adversaries::StrategyParams& sp = {});

}  // namespace qbc::analysis
