#include "qbc/analysis.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qbc/linalg.hpp"
#include "qbc/rng.hpp"
#include "qbc/states.hpp"

namespace qbc::analysis {

using adversaries::StrategyParams;
using protocol::ProtocolConfig;
using protocol::Session;

namespace {

constexpr double kTau = 6.283185307179586476925287;
constexpr double kPi = 3.14159265358979323846;

void add_outer(CMatrix& acc, const StateVector& psi, double weight) {
  const long d = psi.dim();
  for (long r = 0; r < d; ++r)
    for (long c = 0; c < d; ++c)
      acc.at(static_cast<int>(r), static_cast<int>(c)) +=
          weight * psi[r] * std::conj(psi[c]);
}

// Uniform average over all orderings of the first `count` tensor factors
// (which must share one dimension); the remaining factors stay in place.
DensityMatrix average_permutations(const DensityMatrix& rho, int count) {
  const int f = static_cast<int>(rho.dims.size());
  for (int i = 1; i < count; ++i)
    if (rho.dims[static_cast<std::size_t>(i)] != rho.dims[0])
      throw std::invalid_argument("average_permutations: mixed dims in permuted block");
  std::vector<int> dest(static_cast<std::size_t>(f));
  std::iota(dest.begin(), dest.end(), 0);
  std::vector<int> head(dest.begin(), dest.begin() + count);
  CMatrix acc(rho.m.rows, rho.m.cols);
  long terms = 0;
  do {
    std::copy(head.begin(), head.end(), dest.begin());
    const DensityMatrix moved = permute_factors(rho, dest);
    for (std::size_t i = 0; i < acc.a.size(); ++i) acc.a[i] += moved.m.a[i];
    ++terms;
  } while (std::next_permutation(head.begin(), head.end()));
  const double w = 1.0 / static_cast<double>(terms);
  for (cd& x : acc.a) x *= w;
  return DensityMatrix(rho.dims, std::move(acc));
}

StateVector honest_pair_state(int b, int sign, int alpha, double theta) {
  return kron(states::partner_conditional({b, sign}, alpha, theta),
              states::xy_eigenstate(theta, alpha));
}

StateVector z_pair_state(int b, int alpha) {
  const int m2 = alpha > 0 ? 0 : 1;
  const int m1 = b == 0 ? 1 - m2 : m2;
  return kron(StateVector::basis({2}, m1), StateVector::basis({2}, m2));
}

// (member1, member2, chi) after the delayed-choice step reported alpha.
StateVector ancilla_pair_state(int b, int sign, int alpha, const std::vector<double>& thetas,
                               const std::vector<double>& p) {
  const int K = static_cast<int>(thetas.size());
  const StateVector pair = states::bell({b, sign});
  std::vector<cd> v(static_cast<std::size_t>(4 * K), cd(0, 0));
  for (int k = 0; k < K; ++k) {
    const StateVector e = states::xy_eigenstate(thetas[static_cast<std::size_t>(k)], alpha);
    for (int z1 = 0; z1 < 2; ++z1) {
      cd w(0, 0);
      for (int z2 = 0; z2 < 2; ++z2) w += std::conj(e[z2]) * pair[z1 * 2 + z2];
      for (int z2 = 0; z2 < 2; ++z2)
        v[static_cast<std::size_t>((z1 * 2 + z2) * K + k)] +=
            p[static_cast<std::size_t>(k)] * w * e[z2];
    }
  }
  double norm = 0;
  for (const cd& x : v) norm += std::norm(x);
  norm = std::sqrt(norm);
  for (cd& x : v) x /= norm;
  return StateVector({2, 2, K}, std::move(v));
}

}  // namespace

Estimate wilson_estimate(int successes, int trials, std::optional<double> exact) {
  if (trials < 1 || successes < 0 || successes > trials)
    throw std::invalid_argument("wilson_estimate: bad counts");
  const double T = trials;
  const double z2 = kWilsonZ * kWilsonZ;
  const double ph = successes / T;
  const double denom = 1 + z2 / T;
  const double center = (ph + z2 / (2 * T)) / denom;
  const double half = kWilsonZ * std::sqrt(ph * (1 - ph) / T + z2 / (4 * T * T)) / denom;
  Estimate e;
  e.point = ph;
  // clamp so the interval always contains the point estimate; at ph = 0 or 1
  // the closed form touches the boundary only up to rounding
  e.ci_low = std::min(std::max(0.0, center - half), ph);
  e.ci_high = std::max(std::min(1.0, center + half), ph);
  e.trials = trials;
  e.exact_reference = exact;
  return e;
}

double concealing_check(int n, const std::string& bob_kind, const StrategyParams& sp,
                        bool shuffle, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("concealing_check: n >= 1");
  const bool marginal = bob_kind == "quantum_ancilla_particles";
  const bool quantum = marginal || bob_kind == "quantum_ancilla";
  const bool zmode = bob_kind == "measure_z";
  if (!quantum && !zmode && bob_kind != "honest")
    throw std::invalid_argument("concealing_check: unknown bob strategy " + bob_kind);
  // exact-regime guards; the ancilla variant squares the dimension again
  if (quantum ? n > 2 : n > 3)
    throw std::invalid_argument("concealing_check: n beyond the exact regime");

  const std::vector<double> p =
      quantum ? adversaries::resolve_profile(sp.K, sp.p_profile, sp.p) : std::vector<double>{1};
  const int K = quantum ? sp.K : 1;

  // Bob's randomness, sampled once and fixed across both b values
  Rng rng(seed, 1);
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(n));
  if (!zmode)
    for (auto& a : axes) {
      const double base = rng.uniform() * kTau;
      a.push_back(base);
      for (int k = 1; k < K; ++k) a.push_back(K == 2 ? base + kPi : rng.uniform() * kTau);
    }

  std::vector<int> dims(static_cast<std::size_t>(2 * n), 2);
  if (quantum) dims.insert(dims.end(), static_cast<std::size_t>(n), K);
  long full_dim = 1L << (2 * n);
  if (quantum)
    for (int i = 0; i < n; ++i) full_dim *= K;

  // relabeling from per-pair blocks (m1, m2, chi) to [particles..., chis...]
  std::vector<int> regroup(static_cast<std::size_t>(3 * n));
  for (int i = 0; i < n; ++i) {
    regroup[static_cast<std::size_t>(3 * i)] = 2 * i;
    regroup[static_cast<std::size_t>(3 * i + 1)] = 2 * i + 1;
    regroup[static_cast<std::size_t>(3 * i + 2)] = 2 * n + i;
  }

  const int nalpha = 1 << n;
  const int nsigma = zmode ? 1 : 1 << n;
  double total = 0;
  for (int am = 0; am < nalpha; ++am) {
    std::array<DensityMatrix, 2> block;
    for (int b = 0; b < 2; ++b) {
      CMatrix acc(static_cast<int>(full_dim), static_cast<int>(full_dim));
      for (int sm = 0; sm < nsigma; ++sm) {
        StateVector psi;
        for (int i = 0; i < n; ++i) {
          const int alpha = (am >> i) & 1 ? -1 : +1;
          const int sign = (sm >> i) & 1 ? -1 : +1;
          StateVector part;
          if (zmode)
            part = z_pair_state(b, alpha);
          else if (quantum)
            part = ancilla_pair_state(b, sign, alpha, axes[static_cast<std::size_t>(i)], p);
          else
            part = honest_pair_state(b, sign, alpha, axes[static_cast<std::size_t>(i)][0]);
          psi = i == 0 ? std::move(part) : kron(psi, part);
        }
        if (quantum) psi = permute_factors(psi, regroup);
        add_outer(acc, psi, 1.0 / nsigma);
      }
      DensityMatrix rho(dims, std::move(acc));
      if (marginal) {
        // discard the axis registers before looking at the returned particles;
        // tracing commutes with the shuffle, which touches particles only
        std::vector<int> keep(static_cast<std::size_t>(2 * n));
        std::iota(keep.begin(), keep.end(), 0);
        rho = partial_trace(rho, keep);
      }
      if (shuffle) rho = average_permutations(rho, 2 * n);
      block[static_cast<std::size_t>(b)] = std::move(rho);
    }
    // Bob's outcome record is uniform over alpha for every strategy here
    total += trace_distance(block[0], block[1]) / nalpha;
  }
  return total;
}

namespace {

// z-weight distribution of the committed sequence: a bit-0 pair contributes
// exactly one down spin, a bit-1 pair zero or two with equal probability
std::vector<double> weight_dist(int b, int n) {
  std::vector<double> q{1.0};
  for (int i = 0; i < n; ++i) {
    std::vector<double> nx(q.size() + 2, 0.0);
    for (std::size_t w = 0; w < q.size(); ++w) {
      if (b == 0) {
        nx[w + 1] += q[w];
      } else {
        nx[w] += q[w] / 2;
        nx[w + 2] += q[w] / 2;
      }
    }
    q = std::move(nx);
  }
  return q;
}

double binom(int n, int k) {
  double r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace

DistinguishabilityReport prelim_one_report(int n) {
  if (n < 1 || n > 4) throw std::invalid_argument("prelim_one_report: 1 <= n <= 4");
  DistinguishabilityReport rep;
  rep.n = n;
  const long dim = 1L << (2 * n);
  std::array<std::vector<double>, 2> diag;
  std::array<DensityMatrix, 2> rho;

  for (int b = 0; b < 2; ++b) {
    diag[static_cast<std::size_t>(b)].assign(static_cast<std::size_t>(dim), 0.0);
    auto& d = diag[static_cast<std::size_t>(b)];
    if (n <= 3) {
      // brute force: mix the sign coins, then forget the order exactly
      std::vector<int> dims(static_cast<std::size_t>(2 * n), 2);
      CMatrix acc(static_cast<int>(dim), static_cast<int>(dim));
      for (int sm = 0; sm < (1 << n); ++sm) {
        StateVector psi;
        for (int i = 0; i < n; ++i) {
          const StateVector pair = states::bell({b, (sm >> i) & 1 ? -1 : +1});
          psi = i == 0 ? pair : kron(psi, pair);
        }
        add_outer(acc, psi, 1.0 / (1 << n));
      }
      DensityMatrix r(dims, std::move(acc));
      r = average_permutations(r, 2 * n);
      double off = 0;
      for (long y = 0; y < dim; ++y) {
        d[static_cast<std::size_t>(y)] = r.m.at(static_cast<int>(y), static_cast<int>(y)).real();
        for (long c = 0; c < dim; ++c)
          if (c != y) off = std::max(off, std::abs(r.m.at(static_cast<int>(y), static_cast<int>(c))));
      }
      rep.max_off_diagonal[static_cast<std::size_t>(b)] = off;
      if (off >= 1e-12)
        throw std::logic_error("prelim_one_report: averaged state is not diagonal");
      rho[static_cast<std::size_t>(b)] = std::move(r);
    } else {
      // weight-class symmetry: uniform within each class by construction
      const auto q = weight_dist(b, n);
      for (long y = 0; y < dim; ++y) {
        const int w = std::popcount(static_cast<unsigned long>(y));
        d[static_cast<std::size_t>(y)] = q[static_cast<std::size_t>(w)] / binom(2 * n, w);
      }
    }

    auto& probs = rep.weight_probs[static_cast<std::size_t>(b)];
    probs.assign(static_cast<std::size_t>(2 * n + 1), 0.0);
    auto& classes = rep.weight_classes[static_cast<std::size_t>(b)];
    classes.assign(static_cast<std::size_t>(2 * n + 1), WeightClassStat{});
    for (int w = 0; w <= 2 * n; ++w) {
      classes[static_cast<std::size_t>(w)].weight = w;
      classes[static_cast<std::size_t>(w)].min_diag = 2.0;
    }
    for (long y = 0; y < dim; ++y) {
      const int w = std::popcount(static_cast<unsigned long>(y));
      auto& c = classes[static_cast<std::size_t>(w)];
      const double v = d[static_cast<std::size_t>(y)];
      probs[static_cast<std::size_t>(w)] += v;
      ++c.count;
      c.min_diag = std::min(c.min_diag, v);
      c.max_diag = std::max(c.max_diag, v);
    }
    for (const auto& c : classes)
      if (n <= 3 && c.max_diag - c.min_diag >= 1e-12)
        throw std::logic_error("prelim_one_report: weight class is not uniform");
  }

  if (n <= 3) {
    rep.trace_distance_full = trace_distance(rho[0], rho[1]);
  } else {
    double s = 0;
    for (long y = 0; y < dim; ++y)
      s += std::abs(diag[0][static_cast<std::size_t>(y)] - diag[1][static_cast<std::size_t>(y)]);
    rep.trace_distance_full = s / 2;
  }
  double tv = 0;
  for (int w = 0; w <= 2 * n; ++w)
    tv += std::abs(rep.weight_probs[0][static_cast<std::size_t>(w)] -
                   rep.weight_probs[1][static_cast<std::size_t>(w)]);
  rep.tv_distance_sz = tv / 2;
  if (rep.tv_distance_sz > rep.trace_distance_full + 1e-9)
    throw std::logic_error("prelim_one_report: measurement beats the trace distance");
  return rep;
}

double prelim_two_check(int n, std::span<const MeasurementAxis> axes,
                        std::span<const int> outcomes, bool allow_z_bypass) {
  if (n < 1 || n > 4) throw std::invalid_argument("prelim_two_check: 1 <= n <= 4");
  if (axes.size() != static_cast<std::size_t>(n) || outcomes.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("prelim_two_check: need one axis and outcome per pair");
  for (int a : outcomes)
    if (a != 1 && a != -1) throw std::invalid_argument("prelim_two_check: outcomes are +-1");
  for (const auto& ax : axes)
    if (ax.z_axis && !allow_z_bypass)
      throw std::invalid_argument("prelim_two_check: axis leaves the xy-plane");

  std::array<DensityMatrix, 2> rho;
  for (int b = 0; b < 2; ++b) {
    CMatrix m;
    std::vector<int> dims;
    for (int i = 0; i < n; ++i) {
      DensityMatrix part;
      if (axes[static_cast<std::size_t>(i)].z_axis) {
        part = density_from_state(z_pair_state(b, outcomes[static_cast<std::size_t>(i)]));
      } else {
        std::vector<std::pair<StateVector, double>> mix;
        for (int sign : {+1, -1})
          mix.emplace_back(honest_pair_state(b, sign, outcomes[static_cast<std::size_t>(i)],
                                             axes[static_cast<std::size_t>(i)].theta),
                           0.5);
        part = density_from_ensemble(Ensemble(std::move(mix)));
      }
      if (i == 0) {
        m = part.m;
        dims = part.dims;
      } else {
        // kronecker product of the accumulated block with the new pair
        CMatrix nx(m.rows * part.m.rows, m.cols * part.m.cols);
        for (int r1 = 0; r1 < m.rows; ++r1)
          for (int c1 = 0; c1 < m.cols; ++c1)
            for (int r2 = 0; r2 < part.m.rows; ++r2)
              for (int c2 = 0; c2 < part.m.cols; ++c2)
                nx.at(r1 * part.m.rows + r2, c1 * part.m.cols + c2) =
                    m.at(r1, c1) * part.m.at(r2, c2);
        m = std::move(nx);
        dims.insert(dims.end(), part.dims.begin(), part.dims.end());
      }
    }
    rho[static_cast<std::size_t>(b)] = DensityMatrix(dims, std::move(m));
  }
  return trace_distance(rho[0], rho[1]);
}

namespace {

struct Parties {
  std::string alice, bob;
};

Parties parties_for(const std::string& id) {
  if (id == "honest") return {"honest", "honest"};
  if (id == "cheat-guess") return {"honest", "guess_test_set"};
  if (id == "cheat-z") return {"honest", "measure_z"};
  if (id == "cheat-quantum") return {"honest", "quantum_ancilla"};
  if (id == "binding-relabel") return {"classical_relabel", "honest"};
  if (id == "binding-epr-oracle" || id == "binding-epr-blind")
    return {"purification_attack", "honest"};
  throw std::invalid_argument("unknown experiment id: " + id);
}

std::optional<double> exact_for(const ExperimentSpec& spec) {
  const auto& cfg = spec.cfg;
  if (spec.id == "honest" || spec.id == "cheat-quantum" || spec.id == "binding-epr-oracle")
    return 1.0;
  if (spec.id == "cheat-guess") return 1.0 / binom(cfg.n + cfg.m, cfg.m);
  if (spec.id == "cheat-z") return std::pow(0.5, cfg.m);
  if (spec.id == "binding-relabel") return std::pow(0.5, cfg.n);
  return std::nullopt;
}

struct TrialSetup {
  ProtocolConfig cfg;
  StrategyParams sp;
};

TrialSetup trial_setup(const ExperimentSpec& spec, std::uint64_t seed, int t) {
  TrialSetup ts{spec.cfg, spec.strat};
  ts.cfg.seed = mix64(mix64(seed) + static_cast<std::uint64_t>(t));
  if (ts.cfg.b < 0) ts.cfg.b = t & 1;
  if (spec.id.rfind("binding", 0) == 0 && ts.cfg.target_bit < 0)
    ts.cfg.target_bit = 1 - ts.cfg.b;
  if (spec.id == "binding-epr-oracle") ts.sp.knowledge = "oracle";
  if (spec.id == "binding-epr-blind") ts.sp.knowledge = "blind";
  return ts;
}

bool run_one(const ExperimentSpec& spec, const Parties& pt, std::uint64_t seed, int t) {
  TrialSetup ts = trial_setup(spec, seed, t);
  ts.cfg.alice = pt.alice;
  ts.cfg.bob = pt.bob;
  Session s(ts.cfg, adversaries::make_alice(pt.alice, ts.cfg, ts.sp),
            adversaries::make_bob(pt.bob, ts.cfg, ts.sp));
  const auto& tr = s.run();
  if (spec.id == "cheat-guess") return s.bob().success_flag() == 1;
  if (spec.id == "cheat-z") return tr.test_pass;
  const int want = spec.id.rfind("binding", 0) == 0 ? ts.cfg.target_bit : ts.cfg.b;
  return tr.verdict == protocol::Verdict::Accepted && tr.accepted_bit == want;
}

}  // namespace

std::pair<std::string, std::string> experiment_parties(const std::string& id) {
  const Parties pt = parties_for(id);
  return {pt.alice, pt.bob};
}

protocol::ProtocolTranscript single_transcript(const ExperimentSpec& spec, std::uint64_t seed,
                                               int trial) {
  const Parties pt = parties_for(spec.id);
  TrialSetup ts = trial_setup(spec, seed, trial);
  ts.cfg.alice = pt.alice;
  ts.cfg.bob = pt.bob;
  Session s(ts.cfg, adversaries::make_alice(pt.alice, ts.cfg, ts.sp),
            adversaries::make_bob(pt.bob, ts.cfg, ts.sp));
  s.run();
  return s.transcript();
}

Estimate monte_carlo(const ExperimentSpec& spec, int trials, std::uint64_t seed, int jobs) {
  if (trials < 100) throw std::invalid_argument("monte_carlo: trials >= 100");
  const Parties pt = parties_for(spec.id);
  std::vector<unsigned char> ok(static_cast<std::size_t>(trials), 0);
  // trial 0 runs on this thread so config errors surface as exceptions
  ok[0] = run_one(spec, pt, seed, 0) ? 1 : 0;
  const int nt = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for num_threads(nt) schedule(dynamic, 16)
  for (int t = 1; t < trials; ++t) ok[static_cast<std::size_t>(t)] = run_one(spec, pt, seed, t) ? 1 : 0;
  int successes = 0;
  for (unsigned char v : ok) successes += v;
  return wilson_estimate(successes, trials, exact_for(spec));
}

std::vector<std::pair<int, Estimate>> binding_curve(const std::string& alice_kind,
                                                    std::span<const int> n_values, int m,
                                                    int trials, std::uint64_t seed,
                                                    const StrategyParams& sp) {
  std::string id;
  if (alice_kind == "classical_relabel") {
    id = "binding-relabel";
  } else if (alice_kind == "purification_attack") {
    id = sp.knowledge == "oracle" ? "binding-epr-oracle" : "binding-epr-blind";
  } else {
    throw std::invalid_argument("binding_curve: unknown alice strategy " + alice_kind);
  }
  std::vector<std::pair<int, Estimate>> out;
  for (int n : n_values) {
    if (n < 1 || n > 4) throw std::invalid_argument("binding_curve: n in [1, 4]");
    ExperimentSpec spec;
    spec.id = id;
    spec.strat = sp;
    spec.cfg.n = n;
    spec.cfg.m = m;
    spec.cfg.b = 0;
    spec.cfg.target_bit = 1;
    out.emplace_back(n, monte_carlo(spec, trials,
                                    seed + static_cast<std::uint64_t>(n) * 0x9e3779b97f4a7c15ull,
                                    0));
  }
  return out;
}

}  // namespace qbc::analysis
