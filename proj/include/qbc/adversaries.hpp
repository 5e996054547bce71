#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qbc/protocol.hpp"

namespace qbc::adversaries {

// Cheating parties, pluggable into the protocol engine.  Each strategy keeps
// the message grammar intact and differs only in what it does with particles
// and payloads.

struct StrategyParams {
  int K = 2;                         // axis branches of the delayed-choice Bob
  std::string p_profile = "uniform";  // uniform | single | custom
  std::vector<double> p;              // custom branch amplitudes
  std::string knowledge = "blind";    // oracle | blind (entangled-ancilla Alice)
};

// Resolved branch amplitudes; enforces sum of squares = 1 within 1e-9.
std::vector<double> resolve_profile(int K, const std::string& profile,
                                    const std::vector<double>& custom);

// Bob guesses the m-pair test set up front, measures those honestly in the
// xy plane and everything else along z.  success_flag() reports whether the
// guess matched Alice's request exactly.
class GuessTestSetBob : public protocol::HonestBob {
 public:
  GuessTestSetBob(int total, int tests) : total_(total), tests_(tests) {}
  std::string name() const override { return "guess_test_set"; }
  std::vector<int> measure_and_report(ParticleSystem& u, std::span<const int> particles,
                                      Rng& rng) override;
  std::vector<double> disclose_axes(ParticleSystem& u, std::span<const int> test_indices,
                                    Rng& rng) override;
  int success_flag() const override { return success_; }
  const std::vector<int>& guess() const { return guess_; }

 private:
  int total_, tests_;
  std::vector<int> guess_;
  int success_ = -1;
};

// Bob measures everything along z, fabricates axes on demand, and reads the
// total z-spin of whatever he is handed afterwards to guess the bit.
class MeasureZBob : public protocol::BobActor {
 public:
  std::string name() const override { return "measure_z"; }
  std::vector<int> measure_and_report(ParticleSystem& u, std::span<const int> particles,
                                      Rng& rng) override;
  std::vector<double> disclose_axes(ParticleSystem& u, std::span<const int> test_indices,
                                    Rng& rng) override;
  void receive_shuffled(ParticleSystem& u, std::span<const int> slot_ids, Rng& rng) override;
  protocol::MeasRecord record_for(ParticleSystem& u, int original_index, Rng& rng) override;
  int guess_bit() const override { return guess_; }
  int received_sz() const { return received_sz_; }

 private:
  std::vector<protocol::MeasRecord> records_;
  int received_sz_ = 0;
  int guess_ = -1;
};

// Bob entangles each incoming particle with a K-branch axis ancilla (chi) and
// an outcome register (xi), measures xi immediately and keeps chi unmeasured
// until an axis must be produced.  K = 2 uses the antipodal pair {theta,
// theta+pi}; larger K draws independent axes per branch.
class QuantumAncillaBob : public protocol::BobActor {
 public:
  QuantumAncillaBob(int K, std::vector<double> p);
  std::string name() const override { return "quantum_ancilla"; }
  std::vector<int> measure_and_report(ParticleSystem& u, std::span<const int> particles,
                                      Rng& rng) override;
  std::vector<double> disclose_axes(ParticleSystem& u, std::span<const int> test_indices,
                                    Rng& rng) override;
  protocol::MeasRecord record_for(ParticleSystem& u, int original_index, Rng& rng) override;
  // chi ancillas still unmeasured, ascending original index.
  std::vector<int> retained_chis() const;
  const std::vector<double>& branch_axes(int original_index) const;

 private:
  struct Slot {
    int chi = -1;
    std::vector<double> thetas;
    int reported_alpha = 0;
    std::optional<protocol::MeasRecord> record;
  };
  protocol::MeasRecord collapse_axis(ParticleSystem& u, int original_index, Rng& rng);
  int k_;
  std::vector<double> p_;
  std::vector<Slot> slots_;
};

// The unitary entangling (particle, chi, xi) for one delayed-choice step:
// the particle input column |z,0,0> maps to the K-branch superposition of
// measured states with their chi and xi registers.
CMatrix delayed_choice_unitary(std::span<const double> thetas, std::span<const double> p);

// Alice commits honestly to b but unveils the bit she is configured to show.
// When the bits differ she enumerates pair assignments, member swaps and sign
// claims, scoring each candidate's expected acceptance (axes unknown, uniform)
// by exact trigonometric quadrature, and declares the argmax.
class RelabelAlice : public protocol::HonestAlice {
 public:
  std::string name() const override { return "classical_relabel"; }
  protocol::UnveilPayload unveil(ParticleSystem& u, const protocol::AliceView& view,
                                 Rng& rng) override;
};

// Alice keeps the pair signs in superposition with one ancilla qubit per pair.
// At unveiling she computes, per pair, the local ancilla unitary mapping her
// committed purification to the target-bit purification, applies it, measures
// the ancilla and declares the collapsed sign.  In oracle mode the session
// hands her Bob's true (theta, alpha) counterfactually; in blind mode she
// guesses axes uniformly.
class PurificationAlice : public protocol::AliceActor {
 public:
  explicit PurificationAlice(bool oracle) : oracle_(oracle) {}
  std::string name() const override {
    return oracle_ ? "purification_attack(oracle)" : "purification_attack(blind)";
  }
  bool needs_oracle() const override { return oracle_; }
  protocol::CommitRecord commit(ParticleSystem& u, int b, int count, Rng& rng) override;
  std::pair<bool, double> verify_test_pair(ParticleSystem& u, int index, double theta, int alpha,
                                           Rng& rng) override;
  protocol::UnveilPayload unveil(ParticleSystem& u, const protocol::AliceView& view,
                                 Rng& rng) override;

 private:
  bool oracle_;
  int b_ = 0;
  std::vector<int> member1_, ancilla_;
};

// Joint (kept member, sign ancilla) state after Bob measured the sent member
// of a `bit` pair along theta with outcome alpha.
StateVector pair_purification(int bit, int alpha, double theta);

// The ancilla unitaries a purification Alice would use against two Bob
// parameter sets, and their phase-minimized sup-norm distance.
struct UaComparison {
  CMatrix ua_p, ua_q;
  double distance = 0;
};
UaComparison ua_for_bob_params(int b, int target, int alpha_p, double theta_p, int alpha_q,
                               double theta_q);

// Density matrix of the chi ancillas a delayed-choice Bob retains at the end
// of the commitment phase (no tests, n pairs).
DensityMatrix chi_ancilla_state(int n, int b, int K, const std::vector<double>& p,
                                std::uint64_t seed);

// Strategy factories keyed by the configuration identifiers.
std::unique_ptr<protocol::BobActor> make_bob(const std::string& kind,
                                             const protocol::ProtocolConfig& cfg,
                                             const StrategyParams& sp);
std::unique_ptr<protocol::AliceActor> make_alice(const std::string& kind,
                                                 const protocol::ProtocolConfig& cfg,
                                                 const StrategyParams& sp);

}  // namespace qbc::adversaries
