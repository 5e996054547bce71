#include "qbc/kernels.hpp"

#include <atomic>
#include <omp.h>

namespace qbc::kernels {

namespace {
std::atomic<int> g_max_threads{0};

int threads_for(std::size_t work) {
  if (work < kParallelGrain) return 1;
  const int cap = g_max_threads.load(std::memory_order_relaxed);
  const int hw = omp_get_max_threads();
  if (cap <= 0) return hw;
  return cap < hw ? cap : hw;
}

// Inner routines are shared by the serial and parallel flavors so both
// perform the same floating-point operations in the same order per element.

inline void gemm_nn_row(const cd* a, const cd* b, cd* c, int k, int m, int i) {
  const cd* arow = a + static_cast<std::size_t>(i) * k;
  cd* crow = c + static_cast<std::size_t>(i) * m;
  for (int j = 0; j < m; ++j) crow[j] = cd(0.0, 0.0);
  for (int t = 0; t < k; ++t) {
    const cd av = arow[t];
    const cd* brow = b + static_cast<std::size_t>(t) * m;
    for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
  }
}

inline void gemm_nh_row(const cd* a, const cd* b, cd* c, int k, int m, int i) {
  const cd* arow = a + static_cast<std::size_t>(i) * k;
  cd* crow = c + static_cast<std::size_t>(i) * m;
  for (int j = 0; j < m; ++j) {
    const cd* brow = b + static_cast<std::size_t>(j) * k;
    cd acc(0.0, 0.0);
    for (int t = 0; t < k; ++t) acc += arow[t] * std::conj(brow[t]);
    crow[j] = acc;
  }
}

inline void kron_vec_at(const cd* a, const cd* b, std::size_t nb, cd* out, std::size_t i) {
  out[i] = a[i / nb] * b[i % nb];
}

inline void kron_mat_row(const cd* a, int ca, const cd* b, int rb, int cb, cd* out,
                         int cols, int r) {
  const int ia = r / rb, ib = r % rb;
  const cd* arow = a + static_cast<std::size_t>(ia) * ca;
  const cd* brow = b + static_cast<std::size_t>(ib) * cb;
  cd* orow = out + static_cast<std::size_t>(r) * cols;
  for (int ja = 0; ja < ca; ++ja) {
    const cd av = arow[ja];
    cd* seg = orow + static_cast<std::size_t>(ja) * cb;
    for (int jb = 0; jb < cb; ++jb) seg[jb] = av * brow[jb];
  }
}

inline void outer_acc_row(const cd* v, std::size_t n, double w, cd* rho, std::size_t i) {
  const cd lhs = w * v[i];
  cd* row = rho + i * n;
  for (std::size_t j = 0; j < n; ++j) row[j] += lhs * std::conj(v[j]);
}

inline void strided_sum_at(const cd* in, const std::size_t* bases, const std::size_t* offs,
                           std::size_t nt, cd* out, std::size_t e) {
  const cd* src = in + bases[e];
  cd acc(0.0, 0.0);
  for (std::size_t t = 0; t < nt; ++t) acc += src[offs[t]];
  out[e] = acc;
}

inline void block_apply_one(const cd* u, int du, const std::size_t* toffs, cd* v,
                            std::size_t base, cd* x, cd* y) {
  cd* blk = v + base;
  for (int j = 0; j < du; ++j) x[j] = blk[toffs[j]];
  for (int i = 0; i < du; ++i) {
    const cd* urow = u + static_cast<std::size_t>(i) * du;
    cd acc(0.0, 0.0);
    for (int j = 0; j < du; ++j) acc += urow[j] * x[j];
    y[i] = acc;
  }
  for (int j = 0; j < du; ++j) blk[toffs[j]] = y[j];
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n, std::memory_order_relaxed); }
int max_threads() { return g_max_threads.load(std::memory_order_relaxed); }

void gemm_nn_serial(const cd* a, const cd* b, cd* c, int n, int k, int m) {
  for (int i = 0; i < n; ++i) gemm_nn_row(a, b, c, k, m, i);
}
void gemm_nn_parallel(const cd* a, const cd* b, cd* c, int n, int k, int m) {
  const int nt = threads_for(static_cast<std::size_t>(n) * k * m);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int i = 0; i < n; ++i) gemm_nn_row(a, b, c, k, m, i);
}
void gemm_nn(const cd* a, const cd* b, cd* c, int n, int k, int m) {
  if (static_cast<std::size_t>(n) * k * m < kParallelGrain) {
    gemm_nn_serial(a, b, c, n, k, m);
  } else {
    gemm_nn_parallel(a, b, c, n, k, m);
  }
}

void gemm_nh_serial(const cd* a, const cd* b, cd* c, int n, int k, int m) {
  for (int i = 0; i < n; ++i) gemm_nh_row(a, b, c, k, m, i);
}
void gemm_nh_parallel(const cd* a, const cd* b, cd* c, int n, int k, int m) {
  const int nt = threads_for(static_cast<std::size_t>(n) * k * m);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int i = 0; i < n; ++i) gemm_nh_row(a, b, c, k, m, i);
}
void gemm_nh(const cd* a, const cd* b, cd* c, int n, int k, int m) {
  if (static_cast<std::size_t>(n) * k * m < kParallelGrain) {
    gemm_nh_serial(a, b, c, n, k, m);
  } else {
    gemm_nh_parallel(a, b, c, n, k, m);
  }
}

void kron_vec_serial(const cd* a, std::size_t na, const cd* b, std::size_t nb, cd* out) {
  const std::size_t n = na * nb;
  for (std::size_t i = 0; i < n; ++i) kron_vec_at(a, b, nb, out, i);
}
void kron_vec_parallel(const cd* a, std::size_t na, const cd* b, std::size_t nb, cd* out) {
  const std::size_t n = na * nb;
  const int nt = threads_for(n);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    kron_vec_at(a, b, nb, out, static_cast<std::size_t>(i));
}
void kron_vec(const cd* a, std::size_t na, const cd* b, std::size_t nb, cd* out) {
  if (na * nb < kParallelGrain) {
    kron_vec_serial(a, na, b, nb, out);
  } else {
    kron_vec_parallel(a, na, b, nb, out);
  }
}

void kron_mat_serial(const cd* a, int ra, int ca, const cd* b, int rb, int cb, cd* out) {
  const int rows = ra * rb, cols = ca * cb;
  for (int r = 0; r < rows; ++r) kron_mat_row(a, ca, b, rb, cb, out, cols, r);
}
void kron_mat_parallel(const cd* a, int ra, int ca, const cd* b, int rb, int cb, cd* out) {
  const int rows = ra * rb, cols = ca * cb;
  const int nt = threads_for(static_cast<std::size_t>(rows) * cols);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int r = 0; r < rows; ++r) kron_mat_row(a, ca, b, rb, cb, out, cols, r);
}
void kron_mat(const cd* a, int ra, int ca, const cd* b, int rb, int cb, cd* out) {
  if (static_cast<std::size_t>(ra) * rb * ca * cb < kParallelGrain) {
    kron_mat_serial(a, ra, ca, b, rb, cb, out);
  } else {
    kron_mat_parallel(a, ra, ca, b, rb, cb, out);
  }
}

void outer_acc_serial(const cd* v, std::size_t n, double w, cd* rho) {
  for (std::size_t i = 0; i < n; ++i) outer_acc_row(v, n, w, rho, i);
}
void outer_acc_parallel(const cd* v, std::size_t n, double w, cd* rho) {
  const int nt = threads_for(n * n);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    outer_acc_row(v, n, w, rho, static_cast<std::size_t>(i));
}
void outer_acc(const cd* v, std::size_t n, double w, cd* rho) {
  if (n * n < kParallelGrain) {
    outer_acc_serial(v, n, w, rho);
  } else {
    outer_acc_parallel(v, n, w, rho);
  }
}

void gather_serial(const cd* in, const std::size_t* map, cd* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[map[i]];
}
void gather_parallel(const cd* in, const std::size_t* map, cd* out, std::size_t n) {
  const int nt = threads_for(n);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = in[map[i]];
}
void gather(const cd* in, const std::size_t* map, cd* out, std::size_t n) {
  if (n < kParallelGrain) {
    gather_serial(in, map, out, n);
  } else {
    gather_parallel(in, map, out, n);
  }
}

void strided_sum_serial(const cd* in, const std::size_t* bases, std::size_t nout,
                        const std::size_t* offs, std::size_t nt, cd* out) {
  for (std::size_t e = 0; e < nout; ++e) strided_sum_at(in, bases, offs, nt, out, e);
}
void strided_sum_parallel(const cd* in, const std::size_t* bases, std::size_t nout,
                          const std::size_t* offs, std::size_t nt, cd* out) {
  const int nthr = threads_for(nout * nt);
#pragma omp parallel for schedule(static) num_threads(nthr)
  for (long long e = 0; e < static_cast<long long>(nout); ++e)
    strided_sum_at(in, bases, offs, nt, out, static_cast<std::size_t>(e));
}
void strided_sum(const cd* in, const std::size_t* bases, std::size_t nout,
                 const std::size_t* offs, std::size_t nt, cd* out) {
  if (nout * nt < kParallelGrain) {
    strided_sum_serial(in, bases, nout, offs, nt, out);
  } else {
    strided_sum_parallel(in, bases, nout, offs, nt, out);
  }
}

void block_apply_serial(const cd* u, int du, const std::size_t* bases, std::size_t nb,
                        const std::size_t* toffs, cd* v) {
  std::vector<cd> x(du), y(du);
  for (std::size_t b = 0; b < nb; ++b) block_apply_one(u, du, toffs, v, bases[b], x.data(), y.data());
}
void block_apply_parallel(const cd* u, int du, const std::size_t* bases, std::size_t nb,
                          const std::size_t* toffs, cd* v) {
  const int nt = threads_for(nb * static_cast<std::size_t>(du) * du);
#pragma omp parallel num_threads(nt)
  {
    std::vector<cd> x(du), y(du);
#pragma omp for schedule(static)
    for (long long b = 0; b < static_cast<long long>(nb); ++b)
      block_apply_one(u, du, toffs, v, bases[b], x.data(), y.data());
  }
}
void block_apply(const cd* u, int du, const std::size_t* bases, std::size_t nb,
                 const std::size_t* toffs, cd* v) {
  if (nb * static_cast<std::size_t>(du) * du < kParallelGrain) {
    block_apply_serial(u, du, bases, nb, toffs, v);
  } else {
    block_apply_parallel(u, du, bases, nb, toffs, v);
  }
}

}  // namespace qbc::kernels
