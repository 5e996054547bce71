#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qbc/rng.hpp"

namespace qbc {

using cd = std::complex<double>;

// Default tolerance for physics identities checked in double precision.
inline constexpr double kTol = 1e-9;
// Rank / degeneracy cutoff used when splitting spectra.
inline constexpr double kRankTol = 1e-12;

// Hard ceilings keeping every exact computation at desk scale.
// 2^16 admits a full 16-qubit commitment sequence as a pure state; density
// matrices stay a factor 16 smaller since they are quadratic in the dim.
inline constexpr long kMaxStateDim = 1L << 16;
inline constexpr long kMaxDensityDim = 1L << 12;

// Dense row-major complex matrix.
struct CMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<cd> a;

  CMatrix() = default;
  CMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, cd(0, 0)) {}

  static CMatrix identity(int n);

  cd& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  const cd& at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  CMatrix adjoint() const;
  CMatrix operator*(const CMatrix& o) const;
  bool is_unitary(double tol = kTol) const;
  double max_abs_diff(const CMatrix& o) const;
};

// Pure state over a list of tensor factors, row-major amplitudes
// (factor 0 is the most significant index digit).  An empty dims list is the
// scalar state with a single amplitude.
class StateVector {
 public:
  StateVector() : amps_{cd(1, 0)} {}
  StateVector(std::vector<int> dims, std::vector<cd> amps);

  // Computational basis state |index> over the given factor list.
  static StateVector basis(std::vector<int> dims, long index);

  const std::vector<int>& dims() const { return dims_; }
  long dim() const { return static_cast<long>(amps_.size()); }
  int factors() const { return static_cast<int>(dims_.size()); }

  std::vector<cd>& amps() { return amps_; }
  const std::vector<cd>& amps() const { return amps_; }
  cd& operator[](long i) { return amps_[static_cast<std::size_t>(i)]; }
  const cd& operator[](long i) const { return amps_[static_cast<std::size_t>(i)]; }

  double norm() const;
  void normalize();                   // throws on (near-)zero vectors
  bool is_normalized(double tol = kTol) const;
  void require_normalized(double tol = kTol) const;

 private:
  std::vector<int> dims_;
  std::vector<cd> amps_{cd(1, 0)};
};

// Mixed state over a factor list.  Hermiticity and unit trace are enforced
// at construction; positivity is checked by validate(true) because the
// eigensolve is not free at every call site.
struct DensityMatrix {
  std::vector<int> dims;
  CMatrix m;

  DensityMatrix() = default;
  DensityMatrix(std::vector<int> d, CMatrix mat);

  long dim() const { return m.rows; }
  void validate(bool check_positive = false, double tol = kTol) const;
};

// Finite ensemble of pure states with probabilities summing to one.
struct Ensemble {
  std::vector<std::pair<StateVector, double>> members;

  Ensemble() = default;
  explicit Ensemble(std::vector<std::pair<StateVector, double>> m);
};

// Result of a bipartite Schmidt decomposition, coefficients descending.
struct SchmidtForm {
  std::vector<double> coefficients;
  std::vector<StateVector> basis_a;
  std::vector<StateVector> basis_b;
};

struct MeasureResult {
  int outcome = -1;
  double probability = 0.0;
  StateVector post;
};

// --- elementary helpers ---

cd inner(const StateVector& a, const StateVector& b);  // <a|b>

// || |a> - e^{i phi} |b> || minimized over the global phase phi.
double phase_distance(const StateVector& a, const StateVector& b);

// min over phi of max_ij |A_ij - e^{i phi} B_ij|.
double phase_aligned_sup_distance(const CMatrix& a, const CMatrix& b);

// --- spec operations ---

StateVector kron(const StateVector& a, const StateVector& b);
DensityMatrix kron(const DensityMatrix& a, const DensityMatrix& b);

// Reduced density matrix over `keep` (set semantics; result factors keep
// their original relative order).
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep);

// Relabel tensor factors: factor f of the input becomes factor dest[f].
StateVector permute_factors(const StateVector& s, std::span<const int> dest);
DensityMatrix permute_factors(const DensityMatrix& rho, std::span<const int> dest);

SchmidtForm schmidt(const StateVector& psi, std::span<const int> cut_a);

// Local unitary U on cut_a with (U x I)|psi0> = |psi1| up to global phase.
// Throws if the reduced states on the complement differ: no such local
// unitary exists in that case.
CMatrix uhlmann_unitary(const StateVector& psi0, const StateVector& psi1,
                        std::span<const int> cut_a);

// Apply a unitary on the listed factors (U's factor order = `targets` order).
StateVector apply_unitary(const CMatrix& u, std::span<const int> targets,
                          const StateVector& s);

// Deterministic unitary whose column `index` equals the prescribed vector,
// for every (index, vector) pair; the free columns complete the basis by
// Gram-Schmidt over computational vectors in index order.  The prescribed
// vectors must be orthonormal.
CMatrix unitary_from_columns(int dim,
                             std::span<const std::pair<int, std::vector<cd>>> action);

// Projective measurement with a complete orthogonal projector set over the
// target subspace.  Zero-probability branches are never selected.
MeasureResult measure(const StateVector& s, std::span<const int> targets,
                      std::span<const CMatrix> projectors, Rng& rng);

// Born probability of each projector outcome, no collapse.
std::vector<double> born_probabilities(const StateVector& s, std::span<const int> targets,
                                       std::span<const CMatrix> projectors);

double trace_distance(const DensityMatrix& r0, const DensityMatrix& r1);

DensityMatrix density_from_state(const StateVector& s);
DensityMatrix density_from_ensemble(const Ensemble& e);

// Eigenvalues of a Hermitian matrix, ascending.
std::vector<double> hermitian_eigenvalues(const CMatrix& h);

}  // namespace qbc
