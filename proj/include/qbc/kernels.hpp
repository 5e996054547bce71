#pragma once

#include <complex>
#include <cstddef>
#include <vector>

// Dense complex primitives used by the state/density operations.
//
// Every kernel comes in a *_serial and a *_parallel flavor built around the
// same per-element routine, so the two produce bit-identical output; the
// undecorated name dispatches on problem size.  Parallel loops always range
// over disjoint output elements (never reductions), which keeps results
// independent of thread count and schedule.

namespace qbc::kernels {

using cd = std::complex<double>;

// Global thread cap for the parallel flavors and for Monte Carlo driver
// loops.  0 means "OpenMP default".
void set_max_threads(int n);
int max_threads();

// Work below this many scalar ops is not worth a parallel region.
inline constexpr std::size_t kParallelGrain = 1u << 15;

// C = A(n x k) * B(k x m), row-major.
void gemm_nn_serial(const cd* a, const cd* b, cd* c, int n, int k, int m);
void gemm_nn_parallel(const cd* a, const cd* b, cd* c, int n, int k, int m);
void gemm_nn(const cd* a, const cd* b, cd* c, int n, int k, int m);

// C = A(n x k) * B(m x k)^dagger, row-major.
void gemm_nh_serial(const cd* a, const cd* b, cd* c, int n, int k, int m);
void gemm_nh_parallel(const cd* a, const cd* b, cd* c, int n, int k, int m);
void gemm_nh(const cd* a, const cd* b, cd* c, int n, int k, int m);

// out = a (x) b for vectors.
void kron_vec_serial(const cd* a, std::size_t na, const cd* b, std::size_t nb, cd* out);
void kron_vec_parallel(const cd* a, std::size_t na, const cd* b, std::size_t nb, cd* out);
void kron_vec(const cd* a, std::size_t na, const cd* b, std::size_t nb, cd* out);

// out = A (x) B for row-major matrices.
void kron_mat_serial(const cd* a, int ra, int ca, const cd* b, int rb, int cb, cd* out);
void kron_mat_parallel(const cd* a, int ra, int ca, const cd* b, int rb, int cb, cd* out);
void kron_mat(const cd* a, int ra, int ca, const cd* b, int rb, int cb, cd* out);

// rho += w * v * v^dagger.
void outer_acc_serial(const cd* v, std::size_t n, double w, cd* rho);
void outer_acc_parallel(const cd* v, std::size_t n, double w, cd* rho);
void outer_acc(const cd* v, std::size_t n, double w, cd* rho);

// out[i] = in[map[i]].  Permutations are expressed as gather maps.
void gather_serial(const cd* in, const std::size_t* map, cd* out, std::size_t n);
void gather_parallel(const cd* in, const std::size_t* map, cd* out, std::size_t n);
void gather(const cd* in, const std::size_t* map, cd* out, std::size_t n);

// out[e] = sum_t in[bases[e] + offs[t]].  Backs the partial trace.
void strided_sum_serial(const cd* in, const std::size_t* bases, std::size_t nout,
                        const std::size_t* offs, std::size_t nt, cd* out);
void strided_sum_parallel(const cd* in, const std::size_t* bases, std::size_t nout,
                          const std::size_t* offs, std::size_t nt, cd* out);
void strided_sum(const cd* in, const std::size_t* bases, std::size_t nout,
                 const std::size_t* offs, std::size_t nt, cd* out);

// For each block base: gather x[j] = v[base + toffs[j]], compute y = U x,
// scatter back.  Blocks touch disjoint elements of v.
void block_apply_serial(const cd* u, int du, const std::size_t* bases, std::size_t nb,
                        const std::size_t* toffs, cd* v);
void block_apply_parallel(const cd* u, int du, const std::size_t* bases, std::size_t nb,
                          const std::size_t* toffs, cd* v);
void block_apply(const cd* u, int du, const std::size_t* bases, std::size_t nb,
                 const std::size_t* toffs, cd* v);

}  // namespace qbc::kernels
