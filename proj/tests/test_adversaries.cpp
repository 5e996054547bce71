// Frozen oracles, computed before the implementation and independent of it:
//  - delayed-choice column amplitudes p_k * conj(e_k[z]) * e_k[z'], with
//    e_k the xy eigenstates (1, +-e^{i theta_k})/sqrt(2)
//  - joint (particle, chi) state after the outcome register collapses:
//    sum_k p_k^2 |alpha;theta_k><alpha;theta_k| x |k><k| for K = 2 antipodal
//  - chi diagonal == p_k^2 for any K and axes
//  - K = 2 antipodal chi ensemble: independent of b, maximally mixed for the
//    uniform profile, pure |0...0> for the single-branch profile
//  - guess-the-test-set success rate 1/C(4,2) = 1/6 at (n,m) = (2,2)
//  - measure-z Bob: test pass rate 2^-m, bit guess exact for odd n,
//    wrong with probability 1/2 for b = 1 at n = 2
//  - relabeling Alice acceptance 2^-n; truthful unveiling accepted always
//  - purification Alice: oracle mode accepted always, blind mode strictly
//    worse at n = 2; unveiling the committed bit accepted always
//  - ancilla unitaries for target 1 from commit 0 at alpha = +1:
//    theta = 0 gives the identity, theta = pi/2 gives sigma_x, distance 1
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "qbc/adversaries.hpp"
#include "qbc/linalg.hpp"
#include "qbc/protocol.hpp"
#include "qbc/registry.hpp"
#include "qbc/states.hpp"

using namespace qbc;
using namespace qbc::adversaries;
using protocol::ProtocolConfig;
using protocol::ProtocolTranscript;
using protocol::Session;
using protocol::Verdict;

namespace {

constexpr double kTau = 6.283185307179586476925287;

ProtocolConfig base_config(int n, int m, int b, std::uint64_t seed) {
  ProtocolConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.b = b;
  cfg.seed = seed;
  return cfg;
}

// xy eigenstate amplitudes written out by hand, independent of states.cpp.
std::array<cd, 2> plane_state(double theta, int alpha) {
  const double s = 1.0 / std::sqrt(2.0);
  return {cd(s, 0), std::polar(s, theta) * (alpha > 0 ? 1.0 : -1.0)};
}

}  // namespace

TEST_CASE("branch amplitude profiles resolve and validate") {
  const auto u2 = resolve_profile(2, "uniform", {});
  CHECK(u2.size() == 2);
  CHECK(u2[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  const auto s3 = resolve_profile(3, "single", {});
  CHECK(s3[0] == doctest::Approx(1.0));
  CHECK(s3[1] == 0.0);
  const auto c2 = resolve_profile(2, "custom", {0.6, 0.8});
  CHECK(c2[1] == doctest::Approx(0.8));
  CHECK_THROWS_AS(resolve_profile(2, "custom", {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(resolve_profile(2, "custom", {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(resolve_profile(1, "uniform", {}), std::invalid_argument);
  CHECK_THROWS_AS(resolve_profile(2, "gaussian", {}), std::invalid_argument);
}

TEST_CASE("delayed-choice unitary matches the hand-written column oracle") {
  const std::vector<double> thetas{0.7, 0.7 + kTau / 2};
  const std::vector<double> p{0.6, 0.8};
  const CMatrix v = delayed_choice_unitary(thetas, p);
  REQUIRE(v.rows == 8);
  CHECK(v.is_unitary());
  // prescribed columns live at input indices z * 2K for z in {0, 1}
  for (int z = 0; z < 2; ++z) {
    for (int k = 0; k < 2; ++k)
      for (int a = 0; a < 2; ++a) {
        const auto e = plane_state(thetas[static_cast<std::size_t>(k)], a == 0 ? +1 : -1);
        for (int z2 = 0; z2 < 2; ++z2) {
          const cd want = p[static_cast<std::size_t>(k)] *
                          std::conj(e[static_cast<std::size_t>(z)]) *
                          e[static_cast<std::size_t>(z2)];
          const cd got = v.at(z2 * 4 + k * 2 + a, z * 4);
          CHECK(std::abs(want - got) < 1e-12);
        }
      }
  }
  CHECK_THROWS_AS(delayed_choice_unitary(std::vector<double>{0.4}, std::vector<double>{1.0}),
                  std::invalid_argument);
}

TEST_CASE("delayed-choice measurement leaves the branch mixture on (particle, chi)") {
  Rng rng(99, 0);
  for (int b : {0, 1}) {
    ParticleSystem u;
    const auto ids = u.add_group(states::bell({b, +1}));
    QuantumAncillaBob bob(2, resolve_profile(2, "uniform", {}));
    const std::array<int, 1> sent{ids[1]};
    const auto spins = bob.measure_and_report(u, sent, rng);
    REQUIRE(spins.size() == 1);
    const int alpha = spins[0];
    const auto& axes = bob.branch_axes(0);
    REQUIRE(axes.size() == 2);
    CHECK(axes[1] == doctest::Approx(axes[0] + kTau / 2).epsilon(1e-12));

    const auto chis = bob.retained_chis();
    REQUIRE(chis.size() == 1);
    const std::array<int, 2> probe{ids[1], chis[0]};
    const DensityMatrix got = u.reduced_density(probe);

    std::vector<std::pair<StateVector, double>> mix;
    for (int k = 0; k < 2; ++k)
      mix.emplace_back(kron(states::xy_eigenstate(axes[static_cast<std::size_t>(k)], alpha),
                            StateVector::basis({2}, k)),
                       0.5);
    const DensityMatrix want = density_from_ensemble(Ensemble(std::move(mix)));
    CHECK(trace_distance(got, want) < 1e-9);
  }
}

TEST_CASE("retained chi ensemble hides the committed bit for antipodal branches") {
  const auto uniform = resolve_profile(2, "uniform", {});
  const DensityMatrix r0 = chi_ancilla_state(2, 0, 2, uniform, 5);
  const DensityMatrix r1 = chi_ancilla_state(2, 1, 2, uniform, 5);
  CHECK(trace_distance(r0, r1) < 1e-9);

  // uniform antipodal branches leave the chis exactly maximally mixed
  CMatrix mixed(4, 4);
  for (int i = 0; i < 4; ++i) mixed.at(i, i) = cd(0.25, 0);
  CHECK(trace_distance(r0, DensityMatrix({2, 2}, mixed)) < 1e-9);

  // a single live branch keeps them pure
  const DensityMatrix rs = chi_ancilla_state(2, 0, 2, resolve_profile(2, "single", {}), 5);
  CMatrix pure(4, 4);
  pure.at(0, 0) = cd(1, 0);
  CHECK(trace_distance(rs, DensityMatrix({2, 2}, pure)) < 1e-9);
}

TEST_CASE("chi diagonal carries the branch weights for any K") {
  const std::vector<double> p{0.6, 0.8, 0.0};
  const DensityMatrix r = chi_ancilla_state(1, 0, 3, p, 11);
  REQUIRE(r.dim() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(r.m.at(k, k).imag()) < 1e-12);
    CHECK(r.m.at(k, k).real() == doctest::Approx(p[static_cast<std::size_t>(k)] *
                                                 p[static_cast<std::size_t>(k)])
                                     .epsilon(1e-9));
  }
}

TEST_CASE("delayed-choice Bob passes the full protocol with certainty") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    auto cfg = base_config(2, 2, 1, seed);
    Session s(cfg, protocol::make_honest_alice(),
              std::make_unique<QuantumAncillaBob>(2, resolve_profile(2, "uniform", {})));
    const auto& t = s.run();
    CHECK(t.verdict == Verdict::Accepted);
    CHECK(t.accepted_bit == 1);
    for (double pr : t.alice_test_probs) CHECK(pr == doctest::Approx(1.0).epsilon(1e-9));
    for (double pr : t.unveil_check_probs) CHECK(pr == doctest::Approx(1.0).epsilon(1e-9));
  }
  // K = 3 with independent axes behaves the same way
  auto cfg = base_config(1, 1, 0, 7);
  Session s(cfg, protocol::make_honest_alice(),
            std::make_unique<QuantumAncillaBob>(3, resolve_profile(3, "uniform", {})));
  const auto& t = s.run();
  CHECK(t.verdict == Verdict::Accepted);
  for (double pr : t.alice_test_probs) CHECK(pr == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("guessing the test set succeeds at rate 1/C(n+m, m)") {
  const int trials = 2400;
  int hits = 0;
  for (int i = 0; i < trials; ++i) {
    auto cfg = base_config(2, 2, i & 1, 1000 + static_cast<std::uint64_t>(i));
    Session s(cfg, protocol::make_honest_alice(), std::make_unique<GuessTestSetBob>(4, 2));
    s.run();
    const int flag = s.bob().success_flag();
    REQUIRE(flag >= 0);
    hits += flag;
  }
  const double rate = static_cast<double>(hits) / trials;
  const double expect = 1.0 / 6.0;
  const double sigma = std::sqrt(expect * (1 - expect) / trials);
  CHECK(std::abs(rate - expect) < 3 * sigma);
}

TEST_CASE("guessing an empty test set always succeeds") {
  auto cfg = base_config(2, 0, 0, 42);
  Session s(cfg, protocol::make_honest_alice(), std::make_unique<GuessTestSetBob>(2, 0));
  const auto& t = s.run();
  CHECK(s.bob().success_flag() == 1);
  // with no tests every pair was z-measured, so the unveiling still fails
  CHECK(t.verdict != Verdict::Aborted);
}

TEST_CASE("measure-z Bob slips through the pair tests at rate 2^-m") {
  const int trials = 800;
  int passed = 0;
  for (int i = 0; i < trials; ++i) {
    auto cfg = base_config(1, 3, i & 1, 2000 + static_cast<std::uint64_t>(i));
    Session s(cfg, protocol::make_honest_alice(), std::make_unique<MeasureZBob>());
    const auto& t = s.run();
    passed += t.test_pass ? 1 : 0;
  }
  const double rate = static_cast<double>(passed) / trials;
  const double expect = 0.125;
  const double sigma = std::sqrt(expect * (1 - expect) / trials);
  CHECK(std::abs(rate - expect) < 3 * sigma);
}

TEST_CASE("measure-z Bob reads the bit exactly when n is odd") {
  for (int i = 0; i < 200; ++i) {
    const int b = i & 1;
    auto cfg = base_config(3, 0, b, 3000 + static_cast<std::uint64_t>(i));
    Session s(cfg, protocol::make_honest_alice(), std::make_unique<MeasureZBob>());
    s.run();
    CHECK(s.bob().guess_bit() == b);
    if (b == 0) CHECK(dynamic_cast<MeasureZBob&>(s.bob()).received_sz() == 0);
  }
}

TEST_CASE("measure-z Bob errs half the time on b = 1 at n = 2") {
  const int trials = 600;
  int wrong = 0;
  for (int i = 0; i < trials; ++i) {
    auto cfg = base_config(2, 0, 1, 4000 + static_cast<std::uint64_t>(i));
    Session s(cfg, protocol::make_honest_alice(), std::make_unique<MeasureZBob>());
    s.run();
    wrong += s.bob().guess_bit() == 1 ? 0 : 1;
  }
  const double rate = static_cast<double>(wrong) / trials;
  const double sigma = std::sqrt(0.25 / trials);
  CHECK(std::abs(rate - 0.5) < 3 * sigma);
}

TEST_CASE("relabeling Alice is caught at rate 2^-n") {
  for (int n : {1, 2, 3}) {
    const int trials = n == 3 ? 1000 : 1200;
    int accepted = 0;
    for (int i = 0; i < trials; ++i) {
      auto cfg = base_config(n, 0, 0, 5000 + static_cast<std::uint64_t>(i));
      cfg.target_bit = 1;
      Session s(cfg, std::make_unique<RelabelAlice>(), protocol::make_honest_bob());
      const auto& t = s.run();
      if (t.verdict == Verdict::Accepted) {
        CHECK(t.accepted_bit == 1);
        ++accepted;
      }
    }
    const double rate = static_cast<double>(accepted) / trials;
    const double expect = std::pow(0.5, n);
    const double sigma = std::sqrt(expect * (1 - expect) / trials);
    INFO("n = ", n, " rate = ", rate);
    CHECK(std::abs(rate - expect) < 3 * sigma);
  }
}

TEST_CASE("relabeling Alice showing the committed bit is accepted always") {
  for (int i = 0; i < 60; ++i) {
    auto cfg = base_config(2, 1, 1, 6000 + static_cast<std::uint64_t>(i));
    cfg.target_bit = 1;
    Session s(cfg, std::make_unique<RelabelAlice>(), protocol::make_honest_bob());
    const auto& t = s.run();
    CHECK(t.verdict == Verdict::Accepted);
    CHECK(t.accepted_bit == 1);
  }
}

TEST_CASE("purified signs survive the pair tests and truthful unveiling") {
  for (bool oracle : {true, false}) {
    for (int i = 0; i < 300; ++i) {
      auto cfg = base_config(2, 1, 0, 7000 + static_cast<std::uint64_t>(i));
      cfg.target_bit = 0;
      Session s(cfg, std::make_unique<PurificationAlice>(oracle), protocol::make_honest_bob());
      const auto& t = s.run();
      CHECK(t.verdict == Verdict::Accepted);
      CHECK(t.accepted_bit == 0);
      for (double pr : t.alice_test_probs) CHECK(pr == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("oracle-aided purification flips the bit without ever failing") {
  int blind_accepted = 0;
  const int trials = 600;
  for (int i = 0; i < trials; ++i) {
    auto cfg = base_config(2, 1, 0, 8000 + static_cast<std::uint64_t>(i));
    cfg.target_bit = 1;
    Session oracle_s(cfg, std::make_unique<PurificationAlice>(true), protocol::make_honest_bob());
    const auto& ot = oracle_s.run();
    CHECK(ot.verdict == Verdict::Accepted);
    CHECK(ot.accepted_bit == 1);
    for (double pr : ot.unveil_check_probs) CHECK(pr == doctest::Approx(1.0).epsilon(1e-9));

    Session blind_s(cfg, std::make_unique<PurificationAlice>(false), protocol::make_honest_bob());
    const auto& bt = blind_s.run();
    blind_accepted += bt.verdict == Verdict::Accepted ? 1 : 0;
  }
  const double blind_rate = static_cast<double>(blind_accepted) / trials;
  INFO("blind acceptance = ", blind_rate);
  CHECK(blind_rate < 0.9);  // the axis oracle is what makes the attack work
}

TEST_CASE("ancilla unitary depends on the hidden measurement parameters") {
  // identical parameters give identical unitaries
  const UaComparison same = ua_for_bob_params(0, 1, +1, 1.1, +1, 1.1);
  CHECK(same.distance < 1e-12);

  // theta = 0 needs no correction at all; theta = pi/2 needs a bit flip
  const UaComparison diff = ua_for_bob_params(0, 1, +1, 0.0, +1, kTau / 4);
  CMatrix eye(2, 2);
  eye.at(0, 0) = eye.at(1, 1) = cd(1, 0);
  CMatrix flip(2, 2);
  flip.at(0, 1) = flip.at(1, 0) = cd(1, 0);
  CHECK(phase_aligned_sup_distance(diff.ua_p, eye) < 1e-9);
  CHECK(phase_aligned_sup_distance(diff.ua_q, flip) < 1e-9);
  CHECK(diff.distance == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(diff.distance > 0.1);

  // symmetry of the comparison
  const UaComparison rev = ua_for_bob_params(0, 1, +1, kTau / 4, +1, 0.0);
  CHECK(rev.distance == doctest::Approx(diff.distance).epsilon(1e-12));
}

TEST_CASE("pair purification carries both signs with equal weight") {
  const double theta = 1.3;
  for (int bit : {0, 1}) {
    const StateVector psi = pair_purification(bit, +1, theta);
    for (int slot = 0; slot < 2; ++slot) {
      const int sign = slot == 0 ? +1 : -1;
      const StateVector branch =
          kron(states::partner_conditional({bit, sign}, +1, theta), StateVector::basis({2}, slot));
      CHECK(std::norm(inner(branch, psi)) == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("every strategy leaves the outcome report unbiased") {
  const auto spin_bias = [](auto make_bob_fn) {
    int up = 0, total = 0;
    for (int i = 0; i < 150; ++i) {
      auto cfg = base_config(2, 1, i & 1, 9000 + static_cast<std::uint64_t>(i));
      Session s(cfg, protocol::make_honest_alice(), make_bob_fn());
      const auto& t = s.run();
      for (const auto& msg : t.messages)
        if (msg.kind == protocol::MessageKind::OutcomeReport)
          for (int a : msg.outcomes) {
            up += a > 0 ? 1 : 0;
            ++total;
          }
    }
    return std::pair<int, int>(up, total);
  };
  const auto check_fair = [](std::pair<int, int> c) {
    const double rate = static_cast<double>(c.first) / c.second;
    const double sigma = std::sqrt(0.25 / c.second);
    CHECK(std::abs(rate - 0.5) < 3 * sigma);
  };
  check_fair(spin_bias([] { return protocol::make_honest_bob(); }));
  check_fair(spin_bias([] { return std::make_unique<GuessTestSetBob>(3, 1); }));
  check_fair(spin_bias([] { return std::make_unique<MeasureZBob>(); }));
  check_fair(spin_bias(
      [] { return std::make_unique<QuantumAncillaBob>(2, resolve_profile(2, "uniform", {})); }));
}

TEST_CASE("no strategy breaks the message grammar") {
  StrategyParams sp;
  auto cfg = base_config(2, 1, 0, 77);
  cfg.target_bit = 1;
  const std::vector<std::pair<std::string, std::string>> combos{
      {"honest", "guess_test_set"},   {"honest", "measure_z"}, {"honest", "quantum_ancilla"},
      {"classical_relabel", "honest"}, {"purification_attack", "honest"},
  };
  for (const auto& [a, b] : combos) {
    Session s(cfg, make_alice(a, cfg, sp), make_bob(b, cfg, sp));
    const auto& t = s.run();
    CHECK(t.verdict != Verdict::Aborted);
    CHECK(t.messages.back().kind == protocol::MessageKind::FinalVerdict);
  }
  CHECK_THROWS_AS(make_bob("optimal", cfg, sp), std::invalid_argument);
  CHECK_THROWS_AS(make_alice("optimal", cfg, sp), std::invalid_argument);
  sp.knowledge = "psychic";
  CHECK_THROWS_AS(make_alice("purification_attack", cfg, sp), std::invalid_argument);
}
