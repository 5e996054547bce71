#include "qbc/adversaries.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qbc/linalg.hpp"

namespace qbc::adversaries {

using protocol::AliceView;
using protocol::CommitRecord;
using protocol::MeasRecord;
using protocol::UnveilPayload;
using states::BellLabel;
using states::bell;
using states::spin_of_outcome;
using states::xy_eigenstate;
using states::xy_projectors;
using states::z_projectors;

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;
constexpr double kPi = 3.14159265358979323846;

std::vector<CMatrix> basis_projectors(int dim) {
  std::vector<CMatrix> ps;
  for (int k = 0; k < dim; ++k) {
    CMatrix p(dim, dim);
    p.at(k, k) = cd(1, 0);
    ps.push_back(std::move(p));
  }
  return ps;
}

// |<v;psi|u;phi>|^2 for xy eigenstates.
double xy_overlap_prob(int u, double phi, int v, double psi) {
  const double c = std::cos((phi - psi) / 2);
  return u == v ? c * c : 1 - c * c;
}

}  // namespace

std::vector<double> resolve_profile(int K, const std::string& profile,
                                    const std::vector<double>& custom) {
  if (K < 2) throw std::invalid_argument("resolve_profile: K must be >= 2");
  std::vector<double> p;
  if (profile == "uniform") {
    p.assign(static_cast<std::size_t>(K), 1.0 / std::sqrt(static_cast<double>(K)));
  } else if (profile == "single") {
    p.assign(static_cast<std::size_t>(K), 0.0);
    p[0] = 1.0;
  } else if (profile == "custom") {
    p = custom;
  } else {
    throw std::invalid_argument("resolve_profile: unknown profile " + profile);
  }
  if (p.size() != static_cast<std::size_t>(K))
    throw std::invalid_argument("resolve_profile: amplitude count does not match K");
  double s = 0;
  for (double x : p) s += x * x;
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("resolve_profile: amplitudes must have unit square sum");
  return p;
}

// --- guess-the-test-set Bob ---

std::vector<int> GuessTestSetBob::measure_and_report(ParticleSystem& u,
                                                     std::span<const int> particles, Rng& rng) {
  if (static_cast<int>(particles.size()) != total_)
    throw std::logic_error("GuessTestSetBob: particle count mismatch");
  records_.clear();
  guess_ = protocol::sample_test_set(total_, tests_, rng);
  success_ = -1;
  std::vector<int> spins;
  std::size_t g = 0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const bool guessed = g < guess_.size() && guess_[g] == static_cast<int>(i);
    if (guessed) ++g;
    const std::array<int, 1> t{particles[i]};
    if (guessed) {
      const double theta = rng.uniform() * kTwoPi;
      const auto r = u.measure_particles(t, xy_projectors(theta), rng);
      records_.push_back({theta, spin_of_outcome(r.outcome), true});
    } else {
      const auto r = u.measure_particles(t, z_projectors(), rng);
      records_.push_back({rng.uniform() * kTwoPi, spin_of_outcome(r.outcome), false});
    }
    spins.push_back(records_.back().alpha);
  }
  return spins;
}

std::vector<double> GuessTestSetBob::disclose_axes(ParticleSystem& u,
                                                   std::span<const int> test_indices, Rng& rng) {
  success_ = std::equal(test_indices.begin(), test_indices.end(), guess_.begin(), guess_.end()) ? 1 : 0;
  return HonestBob::disclose_axes(u, test_indices, rng);
}

// --- measure-everything-along-z Bob ---

std::vector<int> MeasureZBob::measure_and_report(ParticleSystem& u,
                                                 std::span<const int> particles, Rng& rng) {
  records_.clear();
  std::vector<int> spins;
  for (int id : particles) {
    const std::array<int, 1> t{id};
    const auto r = u.measure_particles(t, z_projectors(), rng);
    records_.push_back({rng.uniform() * kTwoPi, spin_of_outcome(r.outcome), false});
    spins.push_back(records_.back().alpha);
  }
  return spins;
}

std::vector<double> MeasureZBob::disclose_axes(ParticleSystem& u,
                                               std::span<const int> test_indices, Rng& rng) {
  (void)u, (void)rng;
  std::vector<double> axes;
  for (int i : test_indices) axes.push_back(records_.at(static_cast<std::size_t>(i)).theta);
  return axes;
}

void MeasureZBob::receive_shuffled(ParticleSystem& u, std::span<const int> slot_ids, Rng& rng) {
  received_sz_ = 0;
  for (int id : slot_ids) {
    const std::array<int, 1> t{id};
    const auto r = u.measure_particles(t, z_projectors(), rng);
    received_sz_ += spin_of_outcome(r.outcome);
  }
  // a committed 0 always yields total z-spin zero over full pairs
  guess_ = received_sz_ == 0 ? 0 : 1;
}

MeasRecord MeasureZBob::record_for(ParticleSystem& u, int original_index, Rng& rng) {
  (void)u, (void)rng;
  return records_.at(static_cast<std::size_t>(original_index));
}

// --- delayed-choice Bob ---

CMatrix delayed_choice_unitary(std::span<const double> thetas, std::span<const double> p) {
  const int K = static_cast<int>(thetas.size());
  if (K < 2 || p.size() != thetas.size())
    throw std::invalid_argument("delayed_choice_unitary: need K >= 2 matching amplitudes");
  const int dim = 2 * K * 2;  // (particle, chi, xi)
  std::vector<std::pair<int, std::vector<cd>>> action;
  for (int z = 0; z < 2; ++z) {
    std::vector<cd> col(static_cast<std::size_t>(dim), cd(0, 0));
    for (int k = 0; k < K; ++k)
      for (int a = 0; a < 2; ++a) {
        const StateVector e = xy_eigenstate(thetas[static_cast<std::size_t>(k)], spin_of_outcome(a));
        const cd amp = p[static_cast<std::size_t>(k)] * std::conj(e[z]);
        for (int z2 = 0; z2 < 2; ++z2)
          col[static_cast<std::size_t>(z2 * 2 * K + k * 2 + a)] += amp * e[z2];
      }
    action.emplace_back(z * 2 * K, std::move(col));
  }
  return unitary_from_columns(dim, action);
}

QuantumAncillaBob::QuantumAncillaBob(int K, std::vector<double> p) : k_(K), p_(std::move(p)) {
  if (k_ < 2) throw std::invalid_argument("QuantumAncillaBob: K must be >= 2");
  double s = 0;
  for (double x : p_) s += x * x;
  if (p_.size() != static_cast<std::size_t>(k_) || std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("QuantumAncillaBob: bad amplitude profile");
}

std::vector<int> QuantumAncillaBob::measure_and_report(ParticleSystem& u,
                                                       std::span<const int> particles, Rng& rng) {
  slots_.clear();
  std::vector<int> spins;
  for (int id : particles) {
    Slot s;
    const double base = rng.uniform() * kTwoPi;
    s.thetas.push_back(base);
    for (int k = 1; k < k_; ++k)
      s.thetas.push_back(k_ == 2 ? base + kPi : rng.uniform() * kTwoPi);
    s.chi = u.add_particle(StateVector::basis({k_}, 0));
    const int xi = u.add_particle(StateVector::basis({2}, 0));
    const CMatrix v = delayed_choice_unitary(s.thetas, p_);
    const std::array<int, 3> t{id, s.chi, xi};
    u.apply(v, t);
    const std::array<int, 1> xt{xi};
    const auto r = u.measure_particles(xt, z_projectors(), rng);
    u.discard(xi);
    s.reported_alpha = spin_of_outcome(r.outcome);
    spins.push_back(s.reported_alpha);
    slots_.push_back(std::move(s));
  }
  return spins;
}

MeasRecord QuantumAncillaBob::collapse_axis(ParticleSystem& u, int original_index, Rng& rng) {
  Slot& s = slots_.at(static_cast<std::size_t>(original_index));
  if (s.record) return *s.record;
  const std::array<int, 1> t{s.chi};
  const auto r = u.measure_particles(t, basis_projectors(k_), rng);
  u.discard(s.chi);
  s.chi = -1;
  s.record = MeasRecord{s.thetas.at(static_cast<std::size_t>(r.outcome)), s.reported_alpha, true};
  return *s.record;
}

std::vector<double> QuantumAncillaBob::disclose_axes(ParticleSystem& u,
                                                     std::span<const int> test_indices, Rng& rng) {
  std::vector<double> axes;
  for (int i : test_indices) axes.push_back(collapse_axis(u, i, rng).theta);
  return axes;
}

MeasRecord QuantumAncillaBob::record_for(ParticleSystem& u, int original_index, Rng& rng) {
  return collapse_axis(u, original_index, rng);
}

std::vector<int> QuantumAncillaBob::retained_chis() const {
  std::vector<int> out;
  for (const Slot& s : slots_)
    if (s.chi >= 0 && !s.record) out.push_back(s.chi);
  return out;
}

const std::vector<double>& QuantumAncillaBob::branch_axes(int original_index) const {
  return slots_.at(static_cast<std::size_t>(original_index)).thetas;
}

// --- relabeling Alice ---

namespace {

// Expected joint pass probability of both unveil checks for one claimed pair,
// over unknown axes (uniform) and outcomes, by exact trigonometric quadrature:
// the integrands are trig polynomials of degree < 8 per axis variable.
double relabel_pair_score(int b, int t, int s_src, bool same_pair, int swap, int sigma) {
  const int kGrid = 8;
  double acc = 0;
  int cnt = 0;
  for (int gr = 0; gr < kGrid; ++gr)
    for (int ar = 0; ar < 2; ++ar) {
      const double th_r = kTwoPi * gr / kGrid;
      const int al_r = ar ? -1 : +1;
      const int src_gs = same_pair ? 1 : kGrid;
      const int src_as = same_pair ? 1 : 2;
      for (int gs = 0; gs < src_gs; ++gs)
        for (int as = 0; as < src_as; ++as) {
          const double th_j = same_pair ? th_r : kTwoPi * gs / kGrid;
          const int al_j = same_pair ? al_r : (as ? -1 : +1);
          // true states of the source pair's members
          const int u1 = s_src * al_j;
          const double f1 = b == 0 ? th_j : -th_j;
          const int u2 = al_j;
          const double f2 = th_j;
          const int um1 = swap ? u2 : u1;
          const double fm1 = swap ? f2 : f1;
          const int um2 = swap ? u1 : u2;
          const double fm2 = swap ? f1 : f2;
          const double pred_axis = t == 0 ? th_r : -th_r;
          const double pa = xy_overlap_prob(um1, fm1, sigma * al_r, pred_axis);
          const double pb = xy_overlap_prob(um2, fm2, al_r, th_r);
          acc += pa * pb;
          ++cnt;
        }
    }
  return acc / cnt;
}

}  // namespace

UnveilPayload RelabelAlice::unveil(ParticleSystem& u, const AliceView& view, Rng& rng) {
  const int t = view.target_bit < 0 ? view.b : view.target_bit;
  if (t == view.b) return HonestAlice::unveil(u, view, rng);
  const int n = static_cast<int>(view.remaining.size());

  // score every (source pair, member swap, claimed sign) choice per rank
  std::vector<double> table(static_cast<std::size_t>(n * n * 4));
  const auto cell = [n](int r, int j, int w, int sg) {
    return static_cast<std::size_t>(((r * n + j) * 2 + w) * 2 + sg);
  };
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < n; ++j) {
      const int s_src =
          labels_[static_cast<std::size_t>(view.remaining[static_cast<std::size_t>(j)])].sign;
      for (int w = 0; w < 2; ++w)
        for (int sg = 0; sg < 2; ++sg)
          table[cell(r, j, w, sg)] =
              relabel_pair_score(view.b, t, s_src, j == r, w, sg ? -1 : +1);
    }

  std::vector<int> q(static_cast<std::size_t>(n));
  std::iota(q.begin(), q.end(), 0);
  std::vector<int> best_q = q;
  int best_w = 0, best_s = 0;
  double best = -1;
  do {
    for (int w = 0; w < (1 << n); ++w)
      for (int sm = 0; sm < (1 << n); ++sm) {
        double sc = 1;
        for (int r = 0; r < n; ++r)
          sc *= table[cell(r, q[static_cast<std::size_t>(r)], (w >> r) & 1, (sm >> r) & 1)];
        if (sc > best + 1e-15) {
          best = sc;
          best_q = q;
          best_w = w;
          best_s = sm;
        }
      }
  } while (std::next_permutation(q.begin(), q.end()));

  UnveilPayload up;
  up.b = t;
  up.item_of_slot.assign(view.shuffle_dest.size(), -1);
  for (int r = 0; r < n; ++r) {
    for (int wm = 0; wm < 2; ++wm) {
      const int true_item = 2 * best_q[static_cast<std::size_t>(r)] + (wm ^ ((best_w >> r) & 1));
      const int slot = view.shuffle_dest[static_cast<std::size_t>(true_item)];
      up.item_of_slot[static_cast<std::size_t>(slot)] = 2 * r + wm;
    }
    up.labels.push_back({t, ((best_s >> r) & 1) ? -1 : +1});
  }
  return up;
}

// --- entangled-ancilla Alice ---

StateVector pair_purification(int bit, int alpha, double theta) {
  const StateVector probe = xy_eigenstate(theta, alpha);
  std::vector<cd> v(4, cd(0, 0));
  int slot = 0;
  for (int sign : {+1, -1}) {
    const StateVector pair = bell({bit, sign});
    for (int z1 = 0; z1 < 2; ++z1) {
      cd amp(0, 0);
      for (int z2 = 0; z2 < 2; ++z2) amp += std::conj(probe[z2]) * pair[z1 * 2 + z2];
      v[static_cast<std::size_t>(z1 * 2 + slot)] += amp;
    }
    ++slot;
  }
  double norm = 0;
  for (const cd& x : v) norm += std::norm(x);
  norm = std::sqrt(norm);
  for (cd& x : v) x /= norm;
  return StateVector({2, 2}, std::move(v));
}

CommitRecord PurificationAlice::commit(ParticleSystem& u, int b, int count, Rng& rng) {
  (void)rng;
  b_ = b;
  member1_.clear();
  ancilla_.clear();
  CommitRecord cr;
  const double s = 0.7071067811865475244;
  for (int i = 0; i < count; ++i) {
    const StateVector plus = kron(bell({b, +1}), StateVector::basis({2}, 0));
    const StateVector minus = kron(bell({b, -1}), StateVector::basis({2}, 1));
    std::vector<cd> amps(8);
    for (long j = 0; j < 8; ++j) amps[static_cast<std::size_t>(j)] = (plus[j] + minus[j]) * s;
    const auto ids = u.add_group(StateVector({2, 2, 2}, std::move(amps)));
    cr.member1.push_back(ids[0]);
    cr.member2.push_back(ids[1]);
    member1_.push_back(ids[0]);
    ancilla_.push_back(ids[2]);
  }
  return cr;  // labels stay empty: the signs are in superposition
}

std::pair<bool, double> PurificationAlice::verify_test_pair(ParticleSystem& u, int index,
                                                            double theta, int alpha, Rng& rng) {
  // collapse the sign ancilla first, then run the honest partner check
  const std::size_t i = static_cast<std::size_t>(index);
  const std::array<int, 1> t{ancilla_[i]};
  const auto r = u.measure_particles(t, z_projectors(), rng);
  u.discard(ancilla_[i]);
  ancilla_[i] = -1;
  const int sign = r.outcome == 0 ? +1 : -1;
  const StateVector pred = states::partner_conditional({b_, sign}, alpha, theta);
  return protocol::check_predicted_state(u, member1_[i], pred, rng);
}

UnveilPayload PurificationAlice::unveil(ParticleSystem& u, const AliceView& view, Rng& rng) {
  const int t = view.target_bit < 0 ? b_ : view.target_bit;
  UnveilPayload up;
  up.b = t;
  up.item_of_slot.assign(view.shuffle_dest.size(), -1);
  for (std::size_t f = 0; f < view.shuffle_dest.size(); ++f)
    up.item_of_slot[static_cast<std::size_t>(view.shuffle_dest[f])] = static_cast<int>(f);
  for (std::size_t r = 0; r < view.remaining.size(); ++r) {
    const std::size_t idx = static_cast<std::size_t>(view.remaining[r]);
    const int alpha = view.reported[idx];
    const double theta = oracle_ ? view.oracle_records[r].theta : rng.uniform() * kTwoPi;
    const StateVector psi0 = pair_purification(b_, alpha, theta);
    const StateVector psi1 = pair_purification(t, alpha, theta);
    const std::array<int, 1> cut{1};
    const CMatrix ua = uhlmann_unitary(psi0, psi1, cut);
    const std::array<int, 1> anc{ancilla_[idx]};
    u.apply(ua, anc);
    const auto rr = u.measure_particles(anc, z_projectors(), rng);
    u.discard(ancilla_[idx]);
    ancilla_[idx] = -1;
    up.labels.push_back({t, rr.outcome == 0 ? +1 : -1});
  }
  return up;
}

UaComparison ua_for_bob_params(int b, int target, int alpha_p, double theta_p, int alpha_q,
                               double theta_q) {
  const std::array<int, 1> cut{1};
  UaComparison out;
  out.ua_p = uhlmann_unitary(pair_purification(b, alpha_p, theta_p),
                             pair_purification(target, alpha_p, theta_p), cut);
  out.ua_q = uhlmann_unitary(pair_purification(b, alpha_q, theta_q),
                             pair_purification(target, alpha_q, theta_q), cut);
  out.distance = phase_aligned_sup_distance(out.ua_p, out.ua_q);
  return out;
}

DensityMatrix chi_ancilla_state(int n, int b, int K, const std::vector<double>& p,
                                std::uint64_t seed) {
  ParticleSystem u;
  Rng arng(seed, 0), brng(seed, 1);
  protocol::HonestAlice alice;
  const CommitRecord cr = alice.commit(u, b, n, arng);
  QuantumAncillaBob bob(K, p);
  bob.measure_and_report(u, cr.member2, brng);
  return u.reduced_density(bob.retained_chis());
}

// --- factories ---

std::unique_ptr<protocol::BobActor> make_bob(const std::string& kind,
                                             const protocol::ProtocolConfig& cfg,
                                             const StrategyParams& sp) {
  if (kind == "honest") return protocol::make_honest_bob();
  if (kind == "guess_test_set") return std::make_unique<GuessTestSetBob>(cfg.n + cfg.m, cfg.m);
  if (kind == "measure_z") return std::make_unique<MeasureZBob>();
  if (kind == "quantum_ancilla")
    return std::make_unique<QuantumAncillaBob>(sp.K, resolve_profile(sp.K, sp.p_profile, sp.p));
  throw std::invalid_argument("unknown bob strategy: " + kind);
}

std::unique_ptr<protocol::AliceActor> make_alice(const std::string& kind,
                                                 const protocol::ProtocolConfig& cfg,
                                                 const StrategyParams& sp) {
  (void)cfg;
  if (kind == "honest") return protocol::make_honest_alice();
  if (kind == "classical_relabel") return std::make_unique<RelabelAlice>();
  if (kind == "purification_attack") {
    if (sp.knowledge == "oracle") return std::make_unique<PurificationAlice>(true);
    if (sp.knowledge == "blind") return std::make_unique<PurificationAlice>(false);
    throw std::invalid_argument("unknown knowledge mode: " + sp.knowledge);
  }
  throw std::invalid_argument("unknown alice strategy: " + kind);
}

}  // namespace qbc::adversaries
