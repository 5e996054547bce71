#include "qbc/states.hpp"

#include <cmath>
#include <stdexcept>

namespace qbc::states {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;

void check_label(const BellLabel& l) {
  if ((l.bit != 0 && l.bit != 1) || (l.sign != 1 && l.sign != -1))
    throw std::invalid_argument("BellLabel: bit must be 0/1 and sign +-1");
}

void check_spin(int alpha) {
  if (alpha != 1 && alpha != -1) throw std::invalid_argument("spin value must be +-1");
}
}  // namespace

StateVector bell(const BellLabel& label) {
  check_label(label);
  std::vector<cd> a(4, cd(0, 0));
  const double s = label.sign * kInvSqrt2;
  if (label.bit == 0) {
    a[1] = kInvSqrt2;  // |01>
    a[2] = s;          // |10>
  } else {
    a[0] = kInvSqrt2;  // |00>
    a[3] = s;          // |11>
  }
  return StateVector({2, 2}, std::move(a));
}

StateVector xy_eigenstate(double theta, int alpha) {
  check_spin(alpha);
  const cd phase = std::polar(1.0, theta);
  return StateVector({2}, {cd(kInvSqrt2, 0), (alpha > 0 ? phase : -phase) * kInvSqrt2});
}

std::vector<CMatrix> xy_projectors(double theta) {
  std::vector<CMatrix> out;
  for (int alpha : {+1, -1}) {
    const StateVector e = xy_eigenstate(theta, alpha);
    CMatrix p(2, 2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) p.at(r, c) = e[r] * std::conj(e[c]);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<CMatrix> z_projectors() {
  CMatrix p0(2, 2), p1(2, 2);
  p0.at(0, 0) = 1;
  p1.at(1, 1) = 1;
  return {p0, p1};
}

StateVector partner_conditional(const BellLabel& label, int alpha, double theta) {
  check_label(label);
  check_spin(alpha);
  // Contract <alpha;theta| against the sent member and renormalize; the
  // result is always another xy eigenstate, derived here in closed form and
  // cross-checked against the contraction in tests.
  //   bit 0: partner = |sign*alpha; theta>
  //   bit 1: partner = |sign*alpha; -theta>
  const int partner_spin = label.sign * alpha;
  const double partner_theta = (label.bit == 0) ? theta : -theta;
  return xy_eigenstate(partner_theta, partner_spin);
}

PairSequence build_commit_sequence(int b, int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("build_commit_sequence: count must be >= 1");
  PairSequence seq;
  seq.joint = StateVector{};
  for (int i = 0; i < count; ++i) {
    PairRecord rec;
    rec.label = BellLabel{b, rng.coin() ? +1 : -1};
    rec.particle1 = 2 * i;
    rec.particle2 = 2 * i + 1;
    seq.joint = kron(seq.joint, bell(rec.label));
    seq.pairs.push_back(rec);
  }
  return seq;
}

Ensemble commit_ensemble(int b, int n) {
  if (n < 1) throw std::invalid_argument("commit_ensemble: n must be >= 1");
  std::vector<std::pair<StateVector, double>> members;
  const double p = std::ldexp(1.0, -n);
  for (long mask = 0; mask < (1L << n); ++mask) {
    StateVector s;
    for (int i = 0; i < n; ++i)
      s = kron(s, bell(BellLabel{b, ((mask >> i) & 1) ? -1 : +1}));
    members.emplace_back(std::move(s), p);
  }
  return Ensemble(std::move(members));
}

Ensemble z_product_ensemble(int b, int n) {
  if (n < 1) throw std::invalid_argument("z_product_ensemble: n must be >= 1");
  std::vector<std::pair<StateVector, double>> members;
  const double p = std::ldexp(1.0, -n);
  for (long mask = 0; mask < (1L << n); ++mask) {
    StateVector s;
    for (int i = 0; i < n; ++i) {
      const bool flip = (mask >> i) & 1;
      // bit 0: |01> or |10>; bit 1: |00> or |11>
      const long index = (b == 0) ? (flip ? 2 : 1) : (flip ? 3 : 0);
      s = kron(s, StateVector::basis({2, 2}, index));
    }
    members.emplace_back(std::move(s), p);
  }
  return Ensemble(std::move(members));
}

int sz_total(std::span<const int> spins) {
  int sum = 0;
  for (int s : spins) {
    check_spin(s);
    sum += s;
  }
  return sum;
}

std::vector<int> permute(std::span<const int> seq, std::span<const int> dest) {
  const int n = static_cast<int>(seq.size());
  if (static_cast<int>(dest.size()) != n)
    throw std::invalid_argument("permute: permutation length mismatch");
  std::vector<int> out(seq.size(), 0);
  std::vector<int> seen(seq.size(), 0);
  for (int f = 0; f < n; ++f) {
    const int d = dest[static_cast<std::size_t>(f)];
    if (d < 0 || d >= n || seen[static_cast<std::size_t>(d)]++)
      throw std::invalid_argument("permute: not a bijection");
    out[static_cast<std::size_t>(d)] = seq[static_cast<std::size_t>(f)];
  }
  return out;
}

}  // namespace qbc::states
