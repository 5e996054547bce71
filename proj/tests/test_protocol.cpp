#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "qbc/linalg.hpp"
#include "qbc/protocol.hpp"
#include "qbc/rng.hpp"
#include "qbc/states.hpp"

using namespace qbc;
using namespace qbc::protocol;

namespace {

ProtocolTranscript run_honest(int n, int m, int b, std::uint64_t seed) {
  ProtocolConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.b = b;
  cfg.seed = seed;
  return run_protocol(cfg, make_honest_alice(), make_honest_bob());
}

// Bob who measures every received particle along z and fabricates axes.
class ZBob : public HonestBob {
 public:
  std::string name() const override { return "zbob"; }
  std::vector<int> measure_and_report(ParticleSystem& u, std::span<const int> particles,
                                      Rng& rng) override {
    records_.clear();
    std::vector<int> spins;
    for (int id : particles) {
      const std::array<int, 1> t{id};
      const auto r = u.measure_particles(t, states::z_projectors(), rng);
      const int alpha = states::spin_of_outcome(r.outcome);
      records_.push_back({rng.uniform() * 6.283185307179586, alpha, false});
      spins.push_back(alpha);
    }
    return spins;
  }
};

// Alice who claims the flipped bit with otherwise honest bookkeeping.
class BitFlipAlice : public HonestAlice {
 public:
  std::string name() const override { return "bitflip"; }
  UnveilPayload unveil(ParticleSystem& u, const AliceView& view, Rng& rng) override {
    UnveilPayload up = HonestAlice::unveil(u, view, rng);
    up.b = 1 - up.b;
    for (auto& l : up.labels) l.bit = up.b;
    return up;
  }
};

// Alice who declares a cyclic mispairing of the kept pairs.
class CycleAlice : public HonestAlice {
 public:
  std::string name() const override { return "cycle"; }
  UnveilPayload unveil(ParticleSystem& u, const AliceView& view, Rng& rng) override {
    UnveilPayload up = HonestAlice::unveil(u, view, rng);
    const int n = static_cast<int>(up.labels.size());
    // claimed pair r points at the particles of true pair (r+1) mod n
    UnveilPayload moved = up;
    for (int s = 0; s < 2 * n; ++s) {
      const int item = up.item_of_slot[static_cast<std::size_t>(s)];
      const int r = item / 2, w = item % 2;
      moved.item_of_slot[static_cast<std::size_t>(s)] = 2 * ((r + n - 1) % n) + w;
    }
    return moved;
  }
};

// Alice whose permutation payload is not a bijection.
class BadPermAlice : public HonestAlice {
 public:
  std::string name() const override { return "badperm"; }
  UnveilPayload unveil(ParticleSystem& u, const AliceView& view, Rng& rng) override {
    UnveilPayload up = HonestAlice::unveil(u, view, rng);
    if (up.item_of_slot.size() > 1) up.item_of_slot[1] = up.item_of_slot[0];
    return up;
  }
};

}  // namespace

TEST_CASE("honest runs accept with analytic certainty") {
  for (int n = 1; n <= 4; ++n)
    for (int m = 0; m <= 4; ++m)
      for (int b : {0, 1}) {
        const auto t = run_honest(n, m, b, 1000 + static_cast<std::uint64_t>(n * 10 + m));
        REQUIRE(t.verdict == Verdict::Accepted);
        CHECK(t.accepted_bit == b);
        REQUIRE(static_cast<int>(t.alice_test_probs.size()) == m);
        for (double p : t.alice_test_probs) CHECK(std::abs(p - 1.0) < 1e-9);
        REQUIRE(static_cast<int>(t.unveil_check_probs.size()) == 2 * n);
        for (double p : t.unveil_check_probs) CHECK(std::abs(p - 1.0) < 1e-9);
      }
}

TEST_CASE("transcript message kinds follow the fixed schedule") {
  const auto t = run_honest(2, 2, 0, 5);
  const std::array<MessageKind, 9> want{
      MessageKind::ParticlesB2,   MessageKind::OutcomeReport, MessageKind::ReturnParticles,
      MessageKind::TestRequest,   MessageKind::AxisDisclosure, MessageKind::TestVerdict,
      MessageKind::ShuffledSequence, MessageKind::Unveil,      MessageKind::FinalVerdict,
  };
  REQUIRE(t.messages.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(t.messages[i].kind == want[i]);
}

TEST_CASE("out-of-order delivery aborts the session") {
  ProtocolConfig cfg;
  cfg.seed = 3;
  Session s(cfg, make_honest_alice(), make_honest_bob());
  Message msg;
  msg.kind = MessageKind::TestRequest;
  CHECK(s.inject(msg) == Verdict::Aborted);
  CHECK(s.transcript().verdict == Verdict::Aborted);
  // the dead session stays dead
  CHECK(s.run().verdict == Verdict::Aborted);
}

TEST_CASE("replay determinism") {
  const auto a = run_honest(3, 2, 1, 77);
  const auto b = run_honest(3, 2, 1, 77);
  CHECK(a == b);
  const auto c = run_honest(3, 2, 1, 78);
  CHECK_FALSE(a == c);
}

TEST_CASE("config validation") {
  ProtocolConfig cfg;
  cfg.n = 0;
  CHECK_THROWS_AS(Session(cfg, make_honest_alice(), make_honest_bob()), std::invalid_argument);
  cfg.n = 1;
  cfg.m = -1;
  CHECK_THROWS_AS(Session(cfg, make_honest_alice(), make_honest_bob()), std::invalid_argument);
  cfg.m = 0;
  cfg.b = 2;
  CHECK_THROWS_AS(Session(cfg, make_honest_alice(), make_honest_bob()), std::invalid_argument);
}

TEST_CASE("running a session twice throws") {
  ProtocolConfig cfg;
  cfg.n = 1;
  cfg.m = 0;
  Session s(cfg, make_honest_alice(), make_honest_bob());
  s.run();
  CHECK_THROWS_AS(s.run(), std::logic_error);
}

TEST_CASE("m=0 skips testing but keeps the message schedule") {
  const auto t = run_honest(2, 0, 1, 9);
  CHECK(t.verdict == Verdict::Accepted);
  CHECK(t.messages[3].indices.empty());
  CHECK(t.messages[4].axes.empty());
  CHECK(t.messages[5].pass);
}

TEST_CASE("test sets are uniform m-subsets") {
  Rng rng(21, 0);
  std::map<std::vector<int>, int> freq;
  const int trials = 12000;
  for (int t = 0; t < trials; ++t) ++freq[sample_test_set(4, 2, rng)];
  CHECK(freq.size() == 6);
  const double want = trials / 6.0;
  const double sigma = std::sqrt(trials * (1.0 / 6) * (5.0 / 6));
  for (const auto& [subset, count] : freq) {
    (void)subset;
    CHECK(std::abs(count - want) < 3 * sigma);
  }
  CHECK(sample_test_set(3, 0, rng).empty());
  CHECK(sample_test_set(3, 3, rng) == std::vector<int>{0, 1, 2});
  CHECK_THROWS(sample_test_set(3, 4, rng));
}

TEST_CASE("second members alone are maximally mixed for both bits") {
  for (int b : {0, 1}) {
    const DensityMatrix full = density_from_ensemble(states::commit_ensemble(b, 2));
    const std::array<int, 2> member2_factors{1, 3};
    const DensityMatrix rho = partial_trace(full, member2_factors);
    CMatrix expect = CMatrix::identity(4);
    for (auto& x : expect.a) x *= 0.25;
    CHECK(rho.m.max_abs_diff(expect) < 1e-12);
  }
}

TEST_CASE("z-measuring Bob faces exactly a fair coin per spot check") {
  int sessions_passed = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    ProtocolConfig cfg;
    cfg.n = 1;
    cfg.m = 3;
    cfg.b = t & 1;
    cfg.seed = 5000 + static_cast<std::uint64_t>(t);
    Session s(cfg, make_honest_alice(), std::make_unique<ZBob>());
    const auto& tr = s.run();
    REQUIRE(tr.alice_test_probs.size() == 3);
    // analytic: an xy prediction tested on a z-collapsed partner is 1/2
    for (double p : tr.alice_test_probs) CHECK(std::abs(p - 0.5) < 1e-9);
    sessions_passed += tr.test_pass;
  }
  const double rate = sessions_passed / static_cast<double>(trials);
  const double sigma = std::sqrt(0.125 * 0.875 / trials);
  CHECK(std::abs(rate - 0.125) < 3 * sigma);
}

TEST_CASE("claiming the flipped bit passes a pair only at cos^2 rate") {
  double prob_sum = 0;
  int accepted = 0;
  const int trials = 3000;
  for (int t = 0; t < trials; ++t) {
    ProtocolConfig cfg;
    cfg.n = 1;
    cfg.m = 1;
    cfg.b = t & 1;
    cfg.target_bit = 1 - cfg.b;
    cfg.seed = 9000 + static_cast<std::uint64_t>(t);
    Session s(cfg, std::make_unique<BitFlipAlice>(), make_honest_bob());
    const auto& tr = s.run();
    REQUIRE(tr.unveil_check_probs.size() == 2);
    prob_sum += tr.unveil_check_probs[0];
    CHECK(std::abs(tr.unveil_check_probs[1] - 1.0) < 1e-9);  // member check unaffected
    accepted += tr.verdict == Verdict::Accepted;
    if (tr.verdict == Verdict::Accepted) CHECK(tr.accepted_bit == 1 - cfg.b);
  }
  // E[cos^2 theta] = 1/2; Var[cos^2 theta] = 1/8
  const double mean = prob_sum / trials;
  CHECK(std::abs(mean - 0.5) < 3 * std::sqrt(0.125 / trials));
  const double rate = accepted / static_cast<double>(trials);
  CHECK(std::abs(rate - 0.5) < 3 * std::sqrt(0.25 / trials));
}

TEST_CASE("mispaired permutations pass each corrupted pair at most half the time") {
  int pair_checks = 0;
  double pass_prob_sum = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    ProtocolConfig cfg;
    cfg.n = 3;
    cfg.m = 0;
    cfg.b = t & 1;
    cfg.seed = 40000 + static_cast<std::uint64_t>(t);
    Session s(cfg, std::make_unique<CycleAlice>(), make_honest_bob());
    const auto& tr = s.run();
    REQUIRE(tr.unveil_check_probs.size() == 6);
    for (int r = 0; r < 3; ++r) {
      // both checks must pass; the measurements are on distinct particles
      pass_prob_sum += tr.unveil_check_probs[static_cast<std::size_t>(2 * r)] *
                       tr.unveil_check_probs[static_cast<std::size_t>(2 * r + 1)];
      ++pair_checks;
    }
  }
  // average per-pair acceptance must not beat a fair coin
  const double rate = pass_prob_sum / pair_checks;
  CHECK(rate < 0.5 + 3 * std::sqrt(0.25 / pair_checks));
}

TEST_CASE("malformed permutation payloads are rejected") {
  ProtocolConfig cfg;
  cfg.n = 2;
  cfg.m = 0;
  cfg.seed = 4;
  Session s(cfg, std::make_unique<BadPermAlice>(), make_honest_bob());
  const auto& tr = s.run();
  CHECK(tr.verdict == Verdict::Rejected);
  CHECK(tr.accepted_bit == -1);
}

TEST_CASE("transcript echoes the acting strategy names") {
  ProtocolConfig cfg;
  cfg.n = 1;
  cfg.m = 1;
  cfg.seed = 88;
  Session s(cfg, make_honest_alice(), std::make_unique<ZBob>());
  const auto& tr = s.run();
  CHECK(tr.config.alice == "honest");
  CHECK(tr.config.bob == "zbob");
}
