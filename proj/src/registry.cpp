#include "qbc/registry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qbc {

namespace {
// Positions of `ids` inside `members`; errors if one is missing.
std::vector<int> positions_of(std::span<const int> ids, const std::vector<int>& members) {
  std::vector<int> pos;
  pos.reserve(ids.size());
  for (int id : ids) {
    const auto it = std::find(members.begin(), members.end(), id);
    if (it == members.end()) throw std::logic_error("ParticleSystem: member lookup failed");
    pos.push_back(static_cast<int>(it - members.begin()));
  }
  return pos;
}

void check_distinct(std::span<const int> ids) {
  std::vector<int> v(ids.begin(), ids.end());
  std::sort(v.begin(), v.end());
  if (std::adjacent_find(v.begin(), v.end()) != v.end())
    throw std::invalid_argument("ParticleSystem: repeated particle id");
}
}  // namespace

std::vector<int> ParticleSystem::add_group(const StateVector& s) {
  Group g;
  g.state = s;
  std::vector<int> ids;
  for (int f = 0; f < s.factors(); ++f) {
    ids.push_back(next_id_);
    g.members.push_back(next_id_);
    ++next_id_;
  }
  if (ids.empty()) throw std::invalid_argument("ParticleSystem: cannot add a scalar state");
  groups_.push_back(std::move(g));
  reindex();
  return ids;
}

int ParticleSystem::add_particle(const StateVector& s) {
  if (s.factors() != 1) throw std::invalid_argument("ParticleSystem: add_particle wants one factor");
  return add_group(s).front();
}

bool ParticleSystem::contains(int id) const { return where_.count(id) != 0; }

const ParticleSystem::Group& ParticleSystem::group_of(int id) const {
  const auto it = where_.find(id);
  if (it == where_.end()) throw std::invalid_argument("ParticleSystem: unknown particle id");
  return groups_[static_cast<std::size_t>(it->second)];
}

std::vector<int> ParticleSystem::groups_of(std::span<const int> particles) const {
  if (particles.empty()) throw std::invalid_argument("ParticleSystem: empty particle list");
  std::vector<int> gs;
  for (int id : particles) {
    const auto it = where_.find(id);
    if (it == where_.end()) throw std::invalid_argument("ParticleSystem: unknown particle id");
    gs.push_back(it->second);
  }
  std::sort(gs.begin(), gs.end());
  gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
  return gs;
}

int ParticleSystem::merge(const std::vector<int>& group_indices) {
  if (group_indices.size() == 1) return group_indices.front();
  Group merged = groups_[static_cast<std::size_t>(group_indices.front())];
  for (std::size_t i = 1; i < group_indices.size(); ++i) {
    const Group& g = groups_[static_cast<std::size_t>(group_indices[i])];
    merged.state = kron(merged.state, g.state);
    merged.members.insert(merged.members.end(), g.members.begin(), g.members.end());
  }
  // Erase the absorbed groups from the back so indices stay valid.
  for (auto it = group_indices.rbegin(); std::next(it) != group_indices.rend(); ++it)
    groups_.erase(groups_.begin() + *it);
  groups_[static_cast<std::size_t>(group_indices.front())] = std::move(merged);
  reindex();
  return group_indices.front();
}

void ParticleSystem::reindex() {
  where_.clear();
  for (int g = 0; g < static_cast<int>(groups_.size()); ++g)
    for (int id : groups_[static_cast<std::size_t>(g)].members) where_[id] = g;
}

void ParticleSystem::apply(const CMatrix& u, std::span<const int> particles) {
  check_distinct(particles);
  const int g = merge(groups_of(particles));
  Group& grp = groups_[static_cast<std::size_t>(g)];
  const auto pos = positions_of(particles, grp.members);
  grp.state = apply_unitary(u, pos, grp.state);
}

MeasureResult ParticleSystem::measure_particles(std::span<const int> particles,
                                                std::span<const CMatrix> projectors, Rng& rng) {
  check_distinct(particles);
  const int g = merge(groups_of(particles));
  Group& grp = groups_[static_cast<std::size_t>(g)];
  const auto pos = positions_of(particles, grp.members);
  MeasureResult r = measure(grp.state, pos, projectors, rng);

  // A rank-1 outcome leaves the measured particles pure: split them off so
  // later operations stay on small groups.
  cd tr(0, 0);
  const CMatrix& chosen = projectors[static_cast<std::size_t>(r.outcome)];
  for (int i = 0; i < chosen.rows; ++i) tr += chosen.at(i, i);
  const bool rank1 = std::abs(tr - cd(1, 0)) < kTol;

  if (rank1 && static_cast<int>(pos.size()) < grp.state.factors()) {
    const SchmidtForm f = schmidt(r.post, pos);
    // rank-1 collapse: exactly one Schmidt coefficient, equal to 1
    if (f.coefficients.empty() || std::abs(f.coefficients.front() - 1.0) > 1e-7)
      throw std::logic_error("ParticleSystem: rank-1 outcome did not factorize");
    std::vector<int> target_ids, rest_ids;
    std::vector<char> is_target(grp.members.size(), 0);
    for (int p : pos) is_target[static_cast<std::size_t>(p)] = 1;
    for (std::size_t i = 0; i < grp.members.size(); ++i)
      (is_target[i] ? target_ids : rest_ids).push_back(grp.members[i]);

    Group targets{f.basis_a.front(), std::move(target_ids)};
    Group rest{f.basis_b.front(), std::move(rest_ids)};
    groups_[static_cast<std::size_t>(g)] = std::move(targets);
    groups_.push_back(std::move(rest));
    reindex();
  } else {
    grp.state = r.post;
  }
  return r;
}

std::vector<double> ParticleSystem::outcome_probabilities(
    std::span<const int> particles, std::span<const CMatrix> projectors) const {
  check_distinct(particles);
  const auto gs = groups_of(particles);
  StateVector joint;
  std::vector<int> members;
  for (int g : gs) {
    joint = kron(joint, groups_[static_cast<std::size_t>(g)].state);
    members.insert(members.end(), groups_[static_cast<std::size_t>(g)].members.begin(),
                   groups_[static_cast<std::size_t>(g)].members.end());
  }
  const auto pos = positions_of(particles, members);
  return born_probabilities(joint, pos, projectors);
}

StateVector ParticleSystem::state_of(std::span<const int> particles) const {
  check_distinct(particles);
  const auto gs = groups_of(particles);
  StateVector joint;
  std::vector<int> members;
  std::size_t covered = 0;
  for (int g : gs) {
    joint = kron(joint, groups_[static_cast<std::size_t>(g)].state);
    const auto& m = groups_[static_cast<std::size_t>(g)].members;
    members.insert(members.end(), m.begin(), m.end());
    covered += m.size();
  }
  if (covered != particles.size())
    throw std::invalid_argument("ParticleSystem: listed particles are entangled with unlisted ones");
  // dest[current position] = requested position
  std::vector<int> dest(members.size(), -1);
  for (std::size_t f = 0; f < members.size(); ++f) {
    const auto it = std::find(particles.begin(), particles.end(), members[f]);
    dest[f] = static_cast<int>(it - particles.begin());
  }
  return permute_factors(joint, dest);
}

DensityMatrix ParticleSystem::reduced_density(std::span<const int> particles) const {
  check_distinct(particles);
  const auto gs = groups_of(particles);
  DensityMatrix joint;
  std::vector<int> kept_ids;  // ids in the factor order of `joint`
  bool first = true;
  for (int g : gs) {
    const Group& grp = groups_[static_cast<std::size_t>(g)];
    std::vector<int> keep_pos;
    std::vector<int> keep_ids;
    for (std::size_t i = 0; i < grp.members.size(); ++i)
      if (std::find(particles.begin(), particles.end(), grp.members[i]) != particles.end()) {
        keep_pos.push_back(static_cast<int>(i));
        keep_ids.push_back(grp.members[i]);
      }
    DensityMatrix part = density_from_state(grp.state);
    if (static_cast<int>(keep_pos.size()) < grp.state.factors())
      part = partial_trace(part, keep_pos);
    joint = first ? std::move(part) : kron(joint, part);
    first = false;
    kept_ids.insert(kept_ids.end(), keep_ids.begin(), keep_ids.end());
  }
  std::vector<int> dest(kept_ids.size(), -1);
  for (std::size_t f = 0; f < kept_ids.size(); ++f) {
    const auto it = std::find(particles.begin(), particles.end(), kept_ids[f]);
    dest[f] = static_cast<int>(it - particles.begin());
  }
  return permute_factors(joint, dest);
}

void ParticleSystem::discard(int id) {
  const auto it = where_.find(id);
  if (it == where_.end()) throw std::invalid_argument("ParticleSystem: unknown particle id");
  const Group& g = groups_[static_cast<std::size_t>(it->second)];
  if (g.members.size() != 1)
    throw std::invalid_argument("ParticleSystem: cannot discard an entangled particle");
  groups_.erase(groups_.begin() + it->second);
  reindex();
}

}  // namespace qbc
