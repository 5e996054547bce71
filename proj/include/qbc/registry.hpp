#pragma once

#include <map>
#include <span>
#include <vector>

#include "qbc/linalg.hpp"
#include "qbc/rng.hpp"

namespace qbc {

// Exact joint state of many particles, stored as disjoint entangled groups.
//
// Operations merge groups lazily (joint unitaries, joint measurements) and
// split them back when a rank-1 measurement leaves the measured particles in
// a pure product with the rest.  This keeps per-group dimensions small while
// the total particle count grows, which is what makes Monte Carlo protocol
// runs cheap.  All mutations are deterministic functions of the call
// sequence and the supplied rng.
class ParticleSystem {
 public:
  // Register the factors of `s` as fresh particles; returns their new ids
  // in factor order.
  std::vector<int> add_group(const StateVector& s);
  int add_particle(const StateVector& s);

  bool contains(int id) const;
  int particle_count() const { return static_cast<int>(where_.size()); }

  // Apply a unitary over the listed particles; U's factor order equals the
  // order of `particles`.
  void apply(const CMatrix& u, std::span<const int> particles);

  // Projective measurement over the listed particles.
  MeasureResult measure_particles(std::span<const int> particles,
                                  std::span<const CMatrix> projectors, Rng& rng);

  // Born probabilities of each outcome without collapsing anything.
  std::vector<double> outcome_probabilities(std::span<const int> particles,
                                            std::span<const CMatrix> projectors) const;

  // Pure joint state over exactly these particles, factors in the requested
  // order.  Errors if any listed particle is entangled with an unlisted one.
  StateVector state_of(std::span<const int> particles) const;

  // Reduced density matrix over the listed particles, factors in the
  // requested order.
  DensityMatrix reduced_density(std::span<const int> particles) const;

  // Remove an unentangled particle (its group must have size 1).
  void discard(int id);

 private:
  struct Group {
    StateVector state;
    std::vector<int> members;
  };

  // Indices of the groups covering `particles` (ascending, deduplicated).
  std::vector<int> groups_of(std::span<const int> particles) const;
  // Merge those groups into one; returns its index.
  int merge(const std::vector<int>& group_indices);
  const Group& group_of(int id) const;
  void reindex();

  std::vector<Group> groups_;
  std::map<int, int> where_;  // particle id -> index into groups_
  int next_id_ = 0;
};

}  // namespace qbc
