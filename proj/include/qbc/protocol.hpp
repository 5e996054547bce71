#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qbc/registry.hpp"
#include "qbc/rng.hpp"
#include "qbc/states.hpp"

namespace qbc::protocol {

// Commitment over n+m entangled pairs.  Alice keeps the first member of each
// pair and sends the second members to Bob; Bob measures each along a random
// xy axis and reports the outcomes; Alice spot-checks m random pairs against
// the disclosed axes and discards them; the remaining 2n particles go back to
// Bob in a random order; the unveil names the bit, the order, and the pair
// labels so Bob can verify the spin correlation of every pair himself.

struct ProtocolConfig {
  int n = 3;            // kept pairs
  int m = 3;            // tested pairs
  int b = 0;            // committed bit
  int target_bit = -1;  // bit Alice tries to unveil; -1 means the committed bit
  std::uint64_t seed = 0;
  std::string alice = "honest";
  std::string bob = "honest";
  bool operator==(const ProtocolConfig&) const = default;
};

enum class MessageKind {
  ParticlesB2,
  OutcomeReport,
  ReturnParticles,
  TestRequest,
  AxisDisclosure,
  TestVerdict,
  ShuffledSequence,
  Unveil,
  FinalVerdict,
};

enum class Verdict { None, Accepted, Rejected, Aborted };

struct UnveilPayload {
  int b = -1;
  // Slot s of the shuffled sequence is claimed to hold item 2r+w: member w
  // (0 or 1) of kept pair r.
  std::vector<int> item_of_slot;
  // One label per kept pair, in rank order.
  std::vector<states::BellLabel> labels;
  bool operator==(const UnveilPayload&) const = default;
};

struct Message {
  MessageKind kind{};
  std::vector<int> particles;  // ParticlesB2 / ReturnParticles / ShuffledSequence
  std::vector<int> outcomes;   // OutcomeReport: spins in original order
  std::vector<int> indices;    // TestRequest: tested original indices, ascending
  std::vector<double> axes;    // AxisDisclosure: one theta per tested index
  bool pass = false;           // TestVerdict
  UnveilPayload unveil;        // Unveil
  Verdict verdict = Verdict::None;  // FinalVerdict
  int verdict_bit = -1;             // FinalVerdict: accepted bit, -1 otherwise
  bool operator==(const Message&) const = default;
};

// Bob's belief about one measured particle.
struct MeasRecord {
  double theta = 0;
  int alpha = 0;
  bool genuine = true;  // false when the strategy fabricated the axis
  bool operator==(const MeasRecord&) const = default;
};

struct CommitRecord {
  std::vector<int> member1;  // Alice-held particle ids, original order
  std::vector<int> member2;  // ids sent to Bob, original order
  // Empty when the strategy keeps the signs in superposition.
  std::vector<states::BellLabel> labels;
};

// Everything Alice may consult when building the unveil payload.
struct AliceView {
  int b = 0;
  int target_bit = 0;
  std::vector<int> member1, member2;  // original order
  std::vector<int> reported;          // Bob's public outcome report, original order
  std::vector<int> test_set;          // ascending
  std::vector<int> remaining;         // untested original indices, ascending
  std::vector<int> shuffle_dest;      // item f -> slot
  std::vector<int> slot_ids;          // slot -> particle id
  // Filled only when the strategy asks for it: Bob's true records per kept
  // pair, handed over counterfactually so existence of the matching unitary
  // can be validated.  Never part of the real message flow; runs using it
  // must be flagged as counterfactual in every report.
  std::vector<MeasRecord> oracle_records;
};

class AliceActor {
 public:
  virtual ~AliceActor() = default;
  virtual std::string name() const = 0;
  virtual CommitRecord commit(ParticleSystem& u, int b, int count, Rng& rng) = 0;
  // One spot check: measure the kept partner of pair `index` against the
  // state predicted from the disclosed (theta, alpha).  Returns pass and the
  // Born probability of the passing branch (1 against an honest Bob).
  virtual std::pair<bool, double> verify_test_pair(ParticleSystem& u, int index, double theta,
                                                   int alpha, Rng& rng) = 0;
  virtual UnveilPayload unveil(ParticleSystem& u, const AliceView& view, Rng& rng) = 0;
  virtual bool needs_oracle() const { return false; }
};

class BobActor {
 public:
  virtual ~BobActor() = default;
  virtual std::string name() const = 0;
  // Step (1b): handle the received second members; returns reported spins.
  virtual std::vector<int> measure_and_report(ParticleSystem& u, std::span<const int> particles,
                                              Rng& rng) = 0;
  // Step (1c): one axis per requested original index.
  virtual std::vector<double> disclose_axes(ParticleSystem& u, std::span<const int> test_indices,
                                            Rng& rng) = 0;
  // Receive the shuffled sequence after the test phase.
  virtual void receive_shuffled(ParticleSystem& u, std::span<const int> slot_ids, Rng& rng) {
    (void)u, (void)slot_ids, (void)rng;
  }
  // Bob's (theta, alpha) for an original index, used by the unveil checks.
  // May collapse retained ancillas on first call; must be stable after that.
  virtual MeasRecord record_for(ParticleSystem& u, int original_index, Rng& rng) = 0;
  // Bob's guess of the committed bit, -1 when the strategy makes none.
  virtual int guess_bit() const { return -1; }
  // Strategy-specific success flag (e.g. "guessed the test set"), -1 if none.
  virtual int success_flag() const { return -1; }
};

class HonestAlice : public AliceActor {
 public:
  std::string name() const override { return "honest"; }
  CommitRecord commit(ParticleSystem& u, int b, int count, Rng& rng) override;
  std::pair<bool, double> verify_test_pair(ParticleSystem& u, int index, double theta, int alpha,
                                           Rng& rng) override;
  UnveilPayload unveil(ParticleSystem& u, const AliceView& view, Rng& rng) override;

 protected:
  std::vector<states::BellLabel> labels_;
  std::vector<int> member1_;
};

class HonestBob : public BobActor {
 public:
  std::string name() const override { return "honest"; }
  std::vector<int> measure_and_report(ParticleSystem& u, std::span<const int> particles,
                                      Rng& rng) override;
  std::vector<double> disclose_axes(ParticleSystem& u, std::span<const int> test_indices,
                                    Rng& rng) override;
  MeasRecord record_for(ParticleSystem& u, int original_index, Rng& rng) override;

 protected:
  std::vector<MeasRecord> records_;  // original order
};

struct ProtocolTranscript {
  ProtocolConfig config;
  std::vector<Message> messages;
  std::vector<states::BellLabel> alice_labels;  // empty for label-free strategies
  std::vector<MeasRecord> bob_records;          // per kept pair, rank order
  std::vector<double> alice_test_probs;         // Born prob of pass, per tested pair
  std::vector<double> unveil_check_probs;       // per kept pair: partner then member
  bool test_pass = false;
  bool unveil_pass = false;
  Verdict verdict = Verdict::None;
  int accepted_bit = -1;
  bool operator==(const ProtocolTranscript&) const = default;
};

// Drives one session.  The message schedule is fixed; delivering any message
// kind out of order aborts the run, failed physics checks reject it.
class Session {
 public:
  Session(ProtocolConfig cfg, std::unique_ptr<AliceActor> alice, std::unique_ptr<BobActor> bob);
  const ProtocolTranscript& run();
  // Out-of-band delivery; returns the verdict state afterwards.
  Verdict inject(const Message& msg);
  const ProtocolTranscript& transcript() const { return t_; }
  ParticleSystem& universe() { return universe_; }
  BobActor& bob() { return *bob_; }
  AliceActor& alice() { return *alice_; }

 private:
  bool log(Message msg);  // grammar check; false once the session is dead
  void finish(Verdict v, int bit);

  ProtocolConfig cfg_;
  std::unique_ptr<AliceActor> alice_;
  std::unique_ptr<BobActor> bob_;
  ParticleSystem universe_;
  Rng alice_rng_, bob_rng_;
  ProtocolTranscript t_;
  std::size_t schedule_pos_ = 0;
  bool ran_ = false;
  bool frozen_ = false;
};

// Uniform m-subset of {0..count-1}, ascending.
std::vector<int> sample_test_set(int count, int m, Rng& rng);
// Measure `id` against a rank-1 prediction: (passed, Born prob of passing).
std::pair<bool, double> check_predicted_state(ParticleSystem& u, int id, const StateVector& pred,
                                              Rng& rng);
// Measure `id` along xy axis theta: (spin, Born prob of the expected spin).
std::pair<int, double> measure_axis_expect(ParticleSystem& u, int id, double theta,
                                           int expect_spin, Rng& rng);

ProtocolTranscript run_protocol(const ProtocolConfig& cfg, std::unique_ptr<AliceActor> alice,
                                std::unique_ptr<BobActor> bob);

std::unique_ptr<AliceActor> make_honest_alice();
std::unique_ptr<BobActor> make_honest_bob();

}  // namespace qbc::protocol
