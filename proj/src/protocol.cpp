#include "qbc/protocol.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "qbc/linalg.hpp"

namespace qbc::protocol {

using states::BellLabel;
using states::bell;
using states::partner_conditional;
using states::spin_of_outcome;
using states::outcome_of_spin;
using states::xy_projectors;

namespace {

constexpr std::array<MessageKind, 9> kSchedule{
    MessageKind::ParticlesB2,   MessageKind::OutcomeReport, MessageKind::ReturnParticles,
    MessageKind::TestRequest,   MessageKind::AxisDisclosure, MessageKind::TestVerdict,
    MessageKind::ShuffledSequence, MessageKind::Unveil,      MessageKind::FinalVerdict,
};
constexpr std::size_t kFinalPos = kSchedule.size() - 1;
constexpr double kTwoPi = 6.283185307179586476925287;

std::vector<int> random_permutation(int k, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = k - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

bool is_bijection(const std::vector<int>& v) {
  std::vector<char> seen(v.size(), 0);
  for (int x : v) {
    if (x < 0 || x >= static_cast<int>(v.size()) || seen[static_cast<std::size_t>(x)]) return false;
    seen[static_cast<std::size_t>(x)] = 1;
  }
  return true;
}

}  // namespace

std::vector<int> sample_test_set(int count, int m, Rng& rng) {
  if (m < 0 || m > count) throw std::invalid_argument("sample_test_set: bad m");
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < m; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(count - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::pair<bool, double> check_predicted_state(ParticleSystem& u, int id, const StateVector& pred,
                                              Rng& rng) {
  const CMatrix p = density_from_state(pred).m;
  CMatrix rest = CMatrix::identity(p.rows);
  for (std::size_t i = 0; i < rest.a.size(); ++i) rest.a[i] -= p.a[i];
  const std::array<CMatrix, 2> projs{p, rest};
  const std::array<int, 1> t{id};
  const auto probs = u.outcome_probabilities(t, projs);
  const auto r = u.measure_particles(t, projs, rng);
  return {r.outcome == 0, probs[0]};
}

std::pair<int, double> measure_axis_expect(ParticleSystem& u, int id, double theta, int expect_spin,
                                           Rng& rng) {
  const auto projs = xy_projectors(theta);
  const std::array<int, 1> t{id};
  const auto probs = u.outcome_probabilities(t, projs);
  const auto r = u.measure_particles(t, projs, rng);
  return {spin_of_outcome(r.outcome), probs[static_cast<std::size_t>(outcome_of_spin(expect_spin))]};
}

// --- honest parties ---

CommitRecord HonestAlice::commit(ParticleSystem& u, int b, int count, Rng& rng) {
  CommitRecord cr;
  labels_.clear();
  member1_.clear();
  for (int i = 0; i < count; ++i) {
    const BellLabel label{b, rng.coin() ? +1 : -1};
    const auto ids = u.add_group(bell(label));
    labels_.push_back(label);
    member1_.push_back(ids[0]);
    cr.member1.push_back(ids[0]);
    cr.member2.push_back(ids[1]);
  }
  cr.labels = labels_;
  return cr;
}

std::pair<bool, double> HonestAlice::verify_test_pair(ParticleSystem& u, int index, double theta,
                                                      int alpha, Rng& rng) {
  const StateVector pred = partner_conditional(labels_[static_cast<std::size_t>(index)], alpha, theta);
  return check_predicted_state(u, member1_[static_cast<std::size_t>(index)], pred, rng);
}

UnveilPayload HonestAlice::unveil(ParticleSystem& u, const AliceView& view, Rng& rng) {
  (void)u, (void)rng;
  UnveilPayload up;
  up.b = view.b;
  up.item_of_slot.assign(view.shuffle_dest.size(), -1);
  for (std::size_t f = 0; f < view.shuffle_dest.size(); ++f)
    up.item_of_slot[static_cast<std::size_t>(view.shuffle_dest[f])] = static_cast<int>(f);
  for (int idx : view.remaining) up.labels.push_back(labels_[static_cast<std::size_t>(idx)]);
  return up;
}

std::vector<int> HonestBob::measure_and_report(ParticleSystem& u, std::span<const int> particles,
                                               Rng& rng) {
  records_.clear();
  std::vector<int> spins;
  for (int id : particles) {
    const double theta = rng.uniform() * kTwoPi;
    const std::array<int, 1> t{id};
    const auto r = u.measure_particles(t, xy_projectors(theta), rng);
    const int alpha = spin_of_outcome(r.outcome);
    records_.push_back({theta, alpha, true});
    spins.push_back(alpha);
  }
  return spins;
}

std::vector<double> HonestBob::disclose_axes(ParticleSystem& u, std::span<const int> test_indices,
                                             Rng& rng) {
  (void)u, (void)rng;
  std::vector<double> axes;
  for (int i : test_indices) axes.push_back(records_.at(static_cast<std::size_t>(i)).theta);
  return axes;
}

MeasRecord HonestBob::record_for(ParticleSystem& u, int original_index, Rng& rng) {
  (void)u, (void)rng;
  return records_.at(static_cast<std::size_t>(original_index));
}

// --- session ---

Session::Session(ProtocolConfig cfg, std::unique_ptr<AliceActor> alice,
                 std::unique_ptr<BobActor> bob)
    : cfg_(cfg),
      alice_(std::move(alice)),
      bob_(std::move(bob)),
      alice_rng_(cfg.seed, 0),
      bob_rng_(cfg.seed, 1) {
  if (cfg_.n < 1) throw std::invalid_argument("Session: n must be >= 1");
  if (cfg_.m < 0) throw std::invalid_argument("Session: m must be >= 0");
  if (cfg_.b != 0 && cfg_.b != 1) throw std::invalid_argument("Session: b must be 0 or 1");
  if (cfg_.target_bit < -1 || cfg_.target_bit > 1)
    throw std::invalid_argument("Session: target_bit must be -1, 0 or 1");
  cfg_.alice = alice_->name();
  cfg_.bob = bob_->name();
  t_.config = cfg_;
}

bool Session::log(Message msg) {
  if (frozen_) return false;
  const bool in_order = schedule_pos_ < kSchedule.size() && msg.kind == kSchedule[schedule_pos_];
  t_.messages.push_back(std::move(msg));
  if (!in_order) {
    t_.verdict = Verdict::Aborted;
    frozen_ = true;
    return false;
  }
  ++schedule_pos_;
  return true;
}

void Session::finish(Verdict v, int bit) {
  Message msg;
  msg.kind = MessageKind::FinalVerdict;
  msg.verdict = v;
  msg.verdict_bit = bit;
  if (log(std::move(msg))) {
    t_.verdict = v;
    t_.accepted_bit = bit;
  }
  frozen_ = true;
}

Verdict Session::inject(const Message& msg) {
  log(msg);
  return t_.verdict;
}

const ProtocolTranscript& Session::run() {
  if (ran_) throw std::logic_error("Session: run() called twice");
  ran_ = true;
  if (frozen_) return t_;
  const int N = cfg_.n + cfg_.m;

  // commit
  const CommitRecord cr = alice_->commit(universe_, cfg_.b, N, alice_rng_);
  t_.alice_labels = cr.labels;
  Message m1;
  m1.kind = MessageKind::ParticlesB2;
  m1.particles = cr.member2;
  if (!log(std::move(m1))) return t_;

  // Bob measures and reports
  const std::vector<int> reported = bob_->measure_and_report(universe_, cr.member2, bob_rng_);
  Message m2;
  m2.kind = MessageKind::OutcomeReport;
  m2.outcomes = reported;
  if (!log(std::move(m2))) return t_;
  Message m3;
  m3.kind = MessageKind::ReturnParticles;
  m3.particles = cr.member2;
  if (!log(std::move(m3))) return t_;

  // test phase
  const std::vector<int> tests = sample_test_set(N, cfg_.m, alice_rng_);
  Message m4;
  m4.kind = MessageKind::TestRequest;
  m4.indices = tests;
  if (!log(std::move(m4))) return t_;
  const std::vector<double> axes = bob_->disclose_axes(universe_, tests, bob_rng_);
  Message m5;
  m5.kind = MessageKind::AxisDisclosure;
  m5.axes = axes;
  if (!log(std::move(m5))) return t_;
  if (axes.size() != tests.size()) {
    schedule_pos_ = kFinalPos;
    finish(Verdict::Rejected, -1);
    return t_;
  }
  bool all_pass = true;
  for (std::size_t j = 0; j < tests.size(); ++j) {
    const int idx = tests[j];
    const auto [ok, prob] = alice_->verify_test_pair(
        universe_, idx, axes[j], reported[static_cast<std::size_t>(idx)], alice_rng_);
    t_.alice_test_probs.push_back(prob);
    all_pass = all_pass && ok;
  }
  t_.test_pass = all_pass;
  Message m6;
  m6.kind = MessageKind::TestVerdict;
  m6.pass = all_pass;
  if (!log(std::move(m6))) return t_;
  if (!all_pass) {
    schedule_pos_ = kFinalPos;
    finish(Verdict::Rejected, -1);
    return t_;
  }
  for (int idx : tests) {
    universe_.discard(cr.member1[static_cast<std::size_t>(idx)]);
    universe_.discard(cr.member2[static_cast<std::size_t>(idx)]);
  }

  // shuffle and hand everything to Bob
  std::vector<int> remaining;
  {
    std::size_t j = 0;
    for (int i = 0; i < N; ++i) {
      if (j < tests.size() && tests[j] == i) {
        ++j;
        continue;
      }
      remaining.push_back(i);
    }
  }
  const int two_n = 2 * cfg_.n;
  const std::vector<int> dest = random_permutation(two_n, alice_rng_);
  std::vector<int> slot_ids(static_cast<std::size_t>(two_n), -1);
  for (std::size_t r = 0; r < remaining.size(); ++r) {
    const std::size_t idx = static_cast<std::size_t>(remaining[r]);
    slot_ids[static_cast<std::size_t>(dest[2 * r])] = cr.member1[idx];
    slot_ids[static_cast<std::size_t>(dest[2 * r + 1])] = cr.member2[idx];
  }
  Message m7;
  m7.kind = MessageKind::ShuffledSequence;
  m7.particles = slot_ids;
  if (!log(std::move(m7))) return t_;
  bob_->receive_shuffled(universe_, slot_ids, bob_rng_);

  // unveil
  AliceView view;
  view.b = cfg_.b;
  view.target_bit = cfg_.target_bit < 0 ? cfg_.b : cfg_.target_bit;
  view.member1 = cr.member1;
  view.member2 = cr.member2;
  view.reported = reported;
  view.test_set = tests;
  view.remaining = remaining;
  view.shuffle_dest = dest;
  view.slot_ids = slot_ids;
  if (alice_->needs_oracle())
    for (int idx : remaining) view.oracle_records.push_back(bob_->record_for(universe_, idx, bob_rng_));
  const UnveilPayload up = alice_->unveil(universe_, view, alice_rng_);
  Message m8;
  m8.kind = MessageKind::Unveil;
  m8.unveil = up;
  if (!log(std::move(m8))) return t_;

  // Bob's verification
  bool payload_ok = (up.b == 0 || up.b == 1) &&
                    up.item_of_slot.size() == static_cast<std::size_t>(two_n) &&
                    is_bijection(up.item_of_slot) &&
                    up.labels.size() == static_cast<std::size_t>(cfg_.n);
  if (payload_ok)
    for (const BellLabel& l : up.labels)
      payload_ok = payload_ok && l.bit == up.b && (l.sign == +1 || l.sign == -1);
  if (!payload_ok) {
    finish(Verdict::Rejected, -1);
    return t_;
  }
  std::vector<int> slot_of_item(static_cast<std::size_t>(two_n));
  for (int s = 0; s < two_n; ++s)
    slot_of_item[static_cast<std::size_t>(up.item_of_slot[static_cast<std::size_t>(s)])] = s;
  bool accept = true;
  for (int r = 0; r < cfg_.n; ++r) {
    const MeasRecord rec =
        bob_->record_for(universe_, remaining[static_cast<std::size_t>(r)], bob_rng_);
    t_.bob_records.push_back(rec);
    const int id1 = slot_ids[static_cast<std::size_t>(slot_of_item[static_cast<std::size_t>(2 * r)])];
    const int id2 =
        slot_ids[static_cast<std::size_t>(slot_of_item[static_cast<std::size_t>(2 * r + 1)])];
    // partner correlation: the kept member must sit in the state predicted
    // from the claimed label and Bob's own record
    const StateVector pred =
        partner_conditional(up.labels[static_cast<std::size_t>(r)], rec.alpha, rec.theta);
    const auto [ok1, p1] = check_predicted_state(universe_, id1, pred, bob_rng_);
    // the claimed measured member must still show Bob's recorded outcome
    const auto [spin, p2] = measure_axis_expect(universe_, id2, rec.theta, rec.alpha, bob_rng_);
    t_.unveil_check_probs.push_back(p1);
    t_.unveil_check_probs.push_back(p2);
    accept = accept && ok1 && (spin == rec.alpha);
  }
  t_.unveil_pass = accept;
  finish(accept ? Verdict::Accepted : Verdict::Rejected, accept ? up.b : -1);
  return t_;
}

ProtocolTranscript run_protocol(const ProtocolConfig& cfg, std::unique_ptr<AliceActor> alice,
                                std::unique_ptr<BobActor> bob) {
  Session s(cfg, std::move(alice), std::move(bob));
  return s.run();
}

std::unique_ptr<AliceActor> make_honest_alice() { return std::make_unique<HonestAlice>(); }
std::unique_ptr<BobActor> make_honest_bob() { return std::make_unique<HonestBob>(); }

}  // namespace qbc::protocol
