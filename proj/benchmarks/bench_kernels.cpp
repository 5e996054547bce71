// Timing comparison between the serial reference kernels and their
// OpenMP-parallel counterparts.  Not part of the test suite; results are
// informational.  Output verification (max |serial - parallel|) should
// always print 0 because the two flavors share the per-element routines.

#include <complex>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "qbc/kernels.hpp"
#include "qbc/rng.hpp"

using cd = std::complex<double>;
namespace k = qbc::kernels;

namespace {

std::vector<cd> random_vec(std::size_t n, qbc::Rng& rng) {
  std::vector<cd> v(n);
  for (auto& x : v) x = cd(rng.uniform() * 2 - 1, rng.uniform() * 2 - 1);
  return v;
}

double max_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = omp_get_wtime();
    f();
    best = std::min(best, omp_get_wtime() - t0);
  }
  return best;
}

}  // namespace

int main() {
  qbc::Rng rng(2024, 0);
  std::printf("threads available: %d\n\n", omp_get_max_threads());
  std::printf("%-22s %12s %12s %8s %10s\n", "kernel", "serial(ms)", "parallel(ms)", "speedup",
              "max|diff|");

  {
    const int n = 384;
    const auto a = random_vec(static_cast<std::size_t>(n) * n, rng);
    const auto b = random_vec(static_cast<std::size_t>(n) * n, rng);
    std::vector<cd> cs(a.size()), cp(a.size());
    const double ts = time_best_of(3, [&] { k::gemm_nn_serial(a.data(), b.data(), cs.data(), n, n, n); });
    const double tp = time_best_of(3, [&] { k::gemm_nn_parallel(a.data(), b.data(), cp.data(), n, n, n); });
    std::printf("%-22s %12.3f %12.3f %8.2f %10.2e\n", "gemm_nn 384^3", ts * 1e3, tp * 1e3, ts / tp,
                max_diff(cs, cp));
  }

  {
    const int n = 384;
    const auto a = random_vec(static_cast<std::size_t>(n) * n, rng);
    std::vector<cd> cs(a.size()), cp(a.size());
    const double ts = time_best_of(3, [&] { k::gemm_nh_serial(a.data(), a.data(), cs.data(), n, n, n); });
    const double tp = time_best_of(3, [&] { k::gemm_nh_parallel(a.data(), a.data(), cp.data(), n, n, n); });
    std::printf("%-22s %12.3f %12.3f %8.2f %10.2e\n", "gemm_nh 384^3", ts * 1e3, tp * 1e3, ts / tp,
                max_diff(cs, cp));
  }

  {
    const auto v = random_vec(2048, rng);
    std::vector<cd> rs(v.size() * v.size(), cd(0, 0)), rp(rs.size(), cd(0, 0));
    const double ts = time_best_of(3, [&] { k::outer_acc_serial(v.data(), v.size(), 0.5, rs.data()); });
    const double tp = time_best_of(3, [&] { k::outer_acc_parallel(v.data(), v.size(), 0.5, rp.data()); });
    std::printf("%-22s %12.3f %12.3f %8.2f %10.2e\n", "outer_acc 2048", ts * 1e3, tp * 1e3, ts / tp,
                max_diff(rs, rp));
  }

  {
    const auto a = random_vec(4096, rng);
    const auto b = random_vec(4096, rng);
    std::vector<cd> os(a.size() * b.size()), op(os.size());
    const double ts = time_best_of(3, [&] { k::kron_vec_serial(a.data(), a.size(), b.data(), b.size(), os.data()); });
    const double tp = time_best_of(3, [&] { k::kron_vec_parallel(a.data(), a.size(), b.data(), b.size(), op.data()); });
    std::printf("%-22s %12.3f %12.3f %8.2f %10.2e\n", "kron_vec 4096x4096", ts * 1e3, tp * 1e3,
                ts / tp, max_diff(os, op));
  }

  {
    const std::size_t n = 1u << 22;
    const auto in = random_vec(n, rng);
    std::vector<std::size_t> map(n);
    for (std::size_t i = 0; i < n; ++i) map[i] = (i * 2654435761u) % n;
    std::vector<cd> gs(n), gp(n);
    const double ts = time_best_of(3, [&] { k::gather_serial(in.data(), map.data(), gs.data(), n); });
    const double tp = time_best_of(3, [&] { k::gather_parallel(in.data(), map.data(), gp.data(), n); });
    std::printf("%-22s %12.3f %12.3f %8.2f %10.2e\n", "gather 4M", ts * 1e3, tp * 1e3, ts / tp,
                max_diff(gs, gp));
  }

  return 0;
}
