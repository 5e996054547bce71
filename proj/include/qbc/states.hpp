#pragma once

#include <span>
#include <vector>

#include "qbc/linalg.hpp"
#include "qbc/rng.hpp"

// Constructors for the protocol's concrete states and observables.
//
// Conventions, fixed once and used everywhere:
//  - qubit basis index 0 = up along z, 1 = down along z;
//  - spin values are +1 (up) / -1 (down);
//  - xy-plane axis given by angle theta, eigenstates
//      |up; theta>   = (|0> + e^{i theta}|1>) / sqrt2
//      |down; theta> = (|0> - e^{i theta}|1>) / sqrt2
//    so |up; theta + pi> = |down; theta> holds exactly;
//  - pair states: bit 0 -> (|01> + sign|10>)/sqrt2, bit 1 -> (|00> + sign|11>)/sqrt2.

namespace qbc::states {

struct BellLabel {
  int bit = 0;    // committed bit, 0 or 1
  int sign = +1;  // +1 or -1

  bool operator==(const BellLabel&) const = default;
};

// One committed pair: label plus the ids of its two particles.  Particle 1
// stays with the committer; particle 2 is the one handed over.
struct PairRecord {
  BellLabel label;
  int particle1 = -1;
  int particle2 = -1;
};

struct PairSequence {
  std::vector<PairRecord> pairs;
  // Joint pure state over 2n qubits, factor order (1_1, 2_1, 1_2, 2_2, ...).
  StateVector joint;
};

// The four maximally entangled two-qubit states; dims {2,2}.
StateVector bell(const BellLabel& label);

// Eigenstate of cos(theta) sigma_x + sin(theta) sigma_y; dims {2}.
StateVector xy_eigenstate(double theta, int alpha);

// Projectors {P(up;theta), P(down;theta)} resolving the identity.
std::vector<CMatrix> xy_projectors(double theta);

// Projectors {P(up_z), P(down_z)}.
std::vector<CMatrix> z_projectors();

// Basis check: outcome order matches the projector order above.
inline int spin_of_outcome(int outcome) { return outcome == 0 ? +1 : -1; }
inline int outcome_of_spin(int spin) { return spin > 0 ? 0 : 1; }

// State of the unmeasured partner after the handed-over member of `label`
// is measured along `theta` with result `alpha`; dims {2}.
StateVector partner_conditional(const BellLabel& label, int alpha, double theta);

// Commitment sequence of `count` pairs for bit `b`, signs independently
// uniform; particle ids 2i (kept member) and 2i+1 (sent member).
PairSequence build_commit_sequence(int b, int count, Rng& rng);

// Uniform ensemble over the 2^n sign choices of an n-pair commitment.
Ensemble commit_ensemble(int b, int n);

// The z-basis product ensemble with the same density matrix: bit 0 mixes
// |01>,|10> per pair, bit 1 mixes |00>,|11>, uniformly and independently.
Ensemble z_product_ensemble(int b, int n);

// Total z-spin of a measured sequence in units of hbar/2: sum of +-1 spins.
int sz_total(std::span<const int> spins);

// Reorder a particle list: element at position f moves to position dest[f].
std::vector<int> permute(std::span<const int> seq, std::span<const int> dest);

}  // namespace qbc::states
