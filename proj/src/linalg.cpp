#include "qbc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "qbc/kernels.hpp"

namespace qbc {

namespace {

using EMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic>;

long product_of(std::span<const int> dims) {
  long p = 1;
  for (int d : dims) p *= d;
  return p;
}

std::vector<long> strides_of(std::span<const int> dims) {
  std::vector<long> s(dims.size(), 1);
  for (int f = static_cast<int>(dims.size()) - 2; f >= 0; --f)
    s[static_cast<std::size_t>(f)] = s[static_cast<std::size_t>(f) + 1] * dims[static_cast<std::size_t>(f) + 1];
  return s;
}

std::vector<int> sorted_unique(std::span<const int> v, int nfactors, const char* what) {
  std::vector<int> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw std::invalid_argument(std::string(what) + ": repeated factor index");
  if (!out.empty() && (out.front() < 0 || out.back() >= nfactors))
    throw std::invalid_argument(std::string(what) + ": factor index out of range");
  return out;
}

EMatrix to_eigen(const CMatrix& m) {
  EMatrix out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out(r, c) = m.at(r, c);
  return out;
}

void check_finite(std::span<const cd> a, const char* what) {
  for (const cd& v : a)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::invalid_argument(std::string(what) + ": non-finite amplitude");
}

// Gram-Schmidt completion: extends `have` (orthonormal columns over dim n)
// to a full basis by sweeping computational basis vectors in index order.
std::vector<std::vector<cd>> complete_basis(const std::vector<std::vector<cd>>& have, int n) {
  std::vector<std::vector<cd>> basis = have;
  for (int j = 0; j < n && static_cast<int>(basis.size()) < n; ++j) {
    std::vector<cd> v(static_cast<std::size_t>(n), cd(0, 0));
    v[static_cast<std::size_t>(j)] = cd(1, 0);
    for (const auto& b : basis) {
      cd ov(0, 0);
      for (int i = 0; i < n; ++i) ov += std::conj(b[static_cast<std::size_t>(i)]) * v[static_cast<std::size_t>(i)];
      for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] -= ov * b[static_cast<std::size_t>(i)];
    }
    double nr = 0;
    for (const cd& x : v) nr += std::norm(x);
    nr = std::sqrt(nr);
    if (nr < 1e-6) continue;
    for (cd& x : v) x /= nr;
    basis.push_back(std::move(v));
  }
  if (static_cast<int>(basis.size()) != n)
    throw std::logic_error("complete_basis: failed to span the space");
  return basis;
}

}  // namespace

// --- CMatrix ---

CMatrix CMatrix::identity(int n) {
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = cd(1, 0);
  return m;
}

CMatrix CMatrix::adjoint() const {
  CMatrix out(cols, rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(c, r) = std::conj(at(r, c));
  return out;
}

CMatrix CMatrix::operator*(const CMatrix& o) const {
  if (cols != o.rows) throw std::invalid_argument("CMatrix multiply: shape mismatch");
  CMatrix out(rows, o.cols);
  kernels::gemm_nn(a.data(), o.a.data(), out.a.data(), rows, cols, o.cols);
  return out;
}

bool CMatrix::is_unitary(double tol) const {
  if (rows != cols) return false;
  CMatrix prod(rows, rows);
  kernels::gemm_nh(a.data(), a.data(), prod.a.data(), rows, cols, rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < rows; ++c) {
      const cd want = (r == c) ? cd(1, 0) : cd(0, 0);
      if (std::abs(prod.at(r, c) - want) > tol) return false;
    }
  return true;
}

double CMatrix::max_abs_diff(const CMatrix& o) const {
  if (rows != o.rows || cols != o.cols)
    throw std::invalid_argument("CMatrix::max_abs_diff: shape mismatch");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - o.a[i]));
  return m;
}

// --- StateVector ---

StateVector::StateVector(std::vector<int> dims, std::vector<cd> amps)
    : dims_(std::move(dims)), amps_(std::move(amps)) {
  for (int d : dims_)
    if (d < 2) throw std::invalid_argument("StateVector: factor dimensions must be >= 2");
  const long want = product_of(dims_);
  if (want > kMaxStateDim)
    throw std::invalid_argument("StateVector: dimension exceeds the desk-scale ceiling");
  if (want != static_cast<long>(amps_.size()))
    throw std::invalid_argument("StateVector: amplitude count does not match dims");
  check_finite(amps_, "StateVector");
  require_normalized();
}

StateVector StateVector::basis(std::vector<int> dims, long index) {
  const long d = product_of(dims);
  if (index < 0 || index >= d) throw std::invalid_argument("StateVector::basis: index out of range");
  std::vector<cd> a(static_cast<std::size_t>(d), cd(0, 0));
  a[static_cast<std::size_t>(index)] = cd(1, 0);
  return StateVector(std::move(dims), std::move(a));
}

double StateVector::norm() const {
  double s = 0;
  for (const cd& v : amps_) s += std::norm(v);
  return std::sqrt(s);
}

void StateVector::normalize() {
  const double n = norm();
  if (n < 1e-12) throw std::runtime_error("StateVector::normalize: zero vector");
  for (cd& v : amps_) v /= n;
}

bool StateVector::is_normalized(double tol) const { return std::abs(norm() - 1.0) <= tol; }

void StateVector::require_normalized(double tol) const {
  if (!is_normalized(tol)) throw std::invalid_argument("StateVector: norm is not 1");
}

// --- DensityMatrix / Ensemble ---

DensityMatrix::DensityMatrix(std::vector<int> d, CMatrix mat) : dims(std::move(d)), m(std::move(mat)) {
  const long want = product_of(dims);
  if (want > kMaxDensityDim)
    throw std::invalid_argument("DensityMatrix: dimension exceeds the desk-scale ceiling");
  if (m.rows != m.cols || m.rows != want)
    throw std::invalid_argument("DensityMatrix: shape does not match dims");
  validate(false);
}

void DensityMatrix::validate(bool check_positive, double tol) const {
  check_finite(m.a, "DensityMatrix");
  cd tr(0, 0);
  for (int i = 0; i < m.rows; ++i) tr += m.at(i, i);
  if (std::abs(tr - cd(1, 0)) > tol) throw std::invalid_argument("DensityMatrix: trace is not 1");
  for (int r = 0; r < m.rows; ++r)
    for (int c = r; c < m.cols; ++c)
      if (std::abs(m.at(r, c) - std::conj(m.at(c, r))) > tol)
        throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (check_positive) {
    const auto ev = hermitian_eigenvalues(m);
    if (!ev.empty() && ev.front() < -tol)
      throw std::invalid_argument("DensityMatrix: negative eigenvalue");
  }
}

Ensemble::Ensemble(std::vector<std::pair<StateVector, double>> m) : members(std::move(m)) {
  if (members.empty()) throw std::invalid_argument("Ensemble: empty");
  double total = 0;
  for (const auto& [s, p] : members) {
    if (p < -kRankTol) throw std::invalid_argument("Ensemble: negative probability");
    if (s.dims() != members.front().first.dims())
      throw std::invalid_argument("Ensemble: mixed factor shapes");
    total += p;
  }
  if (std::abs(total - 1.0) > kTol) throw std::invalid_argument("Ensemble: probabilities do not sum to 1");
}

// --- helpers ---

cd inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("inner: dimension mismatch");
  cd s(0, 0);
  for (long i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double phase_distance(const StateVector& a, const StateVector& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("phase_distance: dimension mismatch");
  // min over phi of ||a - e^{i phi} b||; computing the aligned residual directly
  // avoids the sqrt(2 - 2|<a|b>|) cancellation that floors near sqrt(eps).
  const cd ov = inner(b, a);
  const cd ph = std::abs(ov) < 1e-300 ? cd(1, 0) : ov / std::abs(ov);
  double s = 0;
  for (long i = 0; i < a.dim(); ++i) s += std::norm(a[i] - ph * b[i]);
  return std::sqrt(s);
}

double phase_aligned_sup_distance(const CMatrix& a, const CMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("phase_aligned_sup_distance: shape mismatch");
  const auto cost = [&](double phi) {
    const cd ph = std::polar(1.0, phi);
    double m = 0;
    for (std::size_t i = 0; i < a.a.size(); ++i) m = std::max(m, std::abs(a.a[i] - ph * b.a[i]));
    return m;
  };
  const double two_pi = 6.283185307179586476925287;
  double best_phi = 0, best = cost(0);
  const int grid = 2048;
  for (int i = 1; i < grid; ++i) {
    const double phi = two_pi * i / grid;
    const double c = cost(phi);
    if (c < best) {
      best = c;
      best_phi = phi;
    }
  }
  double step = two_pi / grid;
  for (int round = 0; round < 40; ++round) {
    for (const double phi : {best_phi - step, best_phi + step}) {
      const double c = cost(phi);
      if (c < best) {
        best = c;
        best_phi = phi;
      }
    }
    step *= 0.5;
  }
  return best;
}

// --- kron ---

StateVector kron(const StateVector& a, const StateVector& b) {
  std::vector<int> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  if (product_of(dims) > kMaxStateDim)
    throw std::invalid_argument("kron: result exceeds the desk-scale ceiling");
  std::vector<cd> out(static_cast<std::size_t>(a.dim()) * b.dim());
  kernels::kron_vec(a.amps().data(), static_cast<std::size_t>(a.dim()), b.amps().data(),
                    static_cast<std::size_t>(b.dim()), out.data());
  return StateVector(std::move(dims), std::move(out));
}

DensityMatrix kron(const DensityMatrix& a, const DensityMatrix& b) {
  std::vector<int> dims = a.dims;
  dims.insert(dims.end(), b.dims.begin(), b.dims.end());
  CMatrix out(a.m.rows * b.m.rows, a.m.cols * b.m.cols);
  kernels::kron_mat(a.m.a.data(), a.m.rows, a.m.cols, b.m.a.data(), b.m.rows, b.m.cols,
                    out.a.data());
  return DensityMatrix(std::move(dims), std::move(out));
}

// --- partial trace ---

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  const int nf = static_cast<int>(rho.dims.size());
  const auto k = sorted_unique(keep, nf, "partial_trace");
  if (k.empty()) throw std::invalid_argument("partial_trace: keep set must be non-empty");

  std::vector<int> traced;
  for (int f = 0; f < nf; ++f)
    if (!std::binary_search(k.begin(), k.end(), f)) traced.push_back(f);

  const auto strides = strides_of(rho.dims);
  const long d = rho.dim();
  std::vector<int> kdims;
  kdims.reserve(k.size());
  for (int f : k) kdims.push_back(rho.dims[static_cast<std::size_t>(f)]);
  const long dk = product_of(kdims);

  // offs[t]: flat offset of one traced-diagonal assignment.
  long dt = 1;
  for (int f : traced) dt *= rho.dims[static_cast<std::size_t>(f)];
  std::vector<std::size_t> offs(static_cast<std::size_t>(dt));
  for (long t = 0; t < dt; ++t) {
    long rem = t, off = 0;
    for (int fi = static_cast<int>(traced.size()) - 1; fi >= 0; --fi) {
      const int f = traced[static_cast<std::size_t>(fi)];
      const int dim = rho.dims[static_cast<std::size_t>(f)];
      const long digit = rem % dim;
      rem /= dim;
      off += digit * strides[static_cast<std::size_t>(f)] * (d + 1);
    }
    offs[static_cast<std::size_t>(t)] = static_cast<std::size_t>(off);
  }

  // row/col bases of every kept assignment.
  std::vector<long> kbase(static_cast<std::size_t>(dk));
  for (long e = 0; e < dk; ++e) {
    long rem = e, base = 0;
    for (int fi = static_cast<int>(k.size()) - 1; fi >= 0; --fi) {
      const int f = k[static_cast<std::size_t>(fi)];
      const int dim = rho.dims[static_cast<std::size_t>(f)];
      const long digit = rem % dim;
      rem /= dim;
      base += digit * strides[static_cast<std::size_t>(f)];
    }
    kbase[static_cast<std::size_t>(e)] = base;
  }

  std::vector<std::size_t> bases(static_cast<std::size_t>(dk) * dk);
  for (long r = 0; r < dk; ++r)
    for (long c = 0; c < dk; ++c)
      bases[static_cast<std::size_t>(r * dk + c)] =
          static_cast<std::size_t>(kbase[static_cast<std::size_t>(r)] * d + kbase[static_cast<std::size_t>(c)]);

  CMatrix out(static_cast<int>(dk), static_cast<int>(dk));
  kernels::strided_sum(rho.m.a.data(), bases.data(), static_cast<std::size_t>(dk) * dk,
                       offs.data(), static_cast<std::size_t>(dt), out.a.data());
  return DensityMatrix(std::move(kdims), std::move(out));
}

// --- factor permutation ---

namespace {
std::vector<std::size_t> permutation_gather_map(std::span<const int> dims, std::span<const int> dest,
                                                std::vector<int>& new_dims) {
  const int nf = static_cast<int>(dims.size());
  if (static_cast<int>(dest.size()) != nf)
    throw std::invalid_argument("permute_factors: permutation length mismatch");
  std::vector<int> seen(static_cast<std::size_t>(nf), 0);
  for (int f = 0; f < nf; ++f) {
    const int d = dest[static_cast<std::size_t>(f)];
    if (d < 0 || d >= nf || seen[static_cast<std::size_t>(d)]++)
      throw std::invalid_argument("permute_factors: not a bijection");
  }
  new_dims.assign(static_cast<std::size_t>(nf), 0);
  for (int f = 0; f < nf; ++f)
    new_dims[static_cast<std::size_t>(dest[static_cast<std::size_t>(f)])] = dims[static_cast<std::size_t>(f)];

  const auto old_strides = strides_of(dims);
  const auto new_strides = strides_of(new_dims);
  const long d = product_of(dims);
  // map[new_index] = old_index
  std::vector<std::size_t> map(static_cast<std::size_t>(d));
  for (long ni = 0; ni < d; ++ni) {
    long old = 0;
    for (int f = 0; f < nf; ++f) {
      const int nd = dest[static_cast<std::size_t>(f)];
      const long digit = (ni / new_strides[static_cast<std::size_t>(nd)]) % new_dims[static_cast<std::size_t>(nd)];
      old += digit * old_strides[static_cast<std::size_t>(f)];
    }
    map[static_cast<std::size_t>(ni)] = static_cast<std::size_t>(old);
  }
  return map;
}
}  // namespace

StateVector permute_factors(const StateVector& s, std::span<const int> dest) {
  std::vector<int> new_dims;
  const auto map = permutation_gather_map(s.dims(), dest, new_dims);
  std::vector<cd> out(static_cast<std::size_t>(s.dim()));
  kernels::gather(s.amps().data(), map.data(), out.data(), out.size());
  return StateVector(std::move(new_dims), std::move(out));
}

DensityMatrix permute_factors(const DensityMatrix& rho, std::span<const int> dest) {
  std::vector<int> new_dims;
  const auto map = permutation_gather_map(rho.dims, dest, new_dims);
  const long d = rho.dim();
  std::vector<std::size_t> map2(static_cast<std::size_t>(d) * d);
  for (long r = 0; r < d; ++r)
    for (long c = 0; c < d; ++c)
      map2[static_cast<std::size_t>(r * d + c)] =
          map[static_cast<std::size_t>(r)] * static_cast<std::size_t>(d) + map[static_cast<std::size_t>(c)];
  CMatrix out(static_cast<int>(d), static_cast<int>(d));
  kernels::gather(rho.m.a.data(), map2.data(), out.a.data(), map2.size());
  return DensityMatrix(std::move(new_dims), std::move(out));
}

// --- Schmidt decomposition ---

namespace {
// Reshape psi into the dA x dB coefficient matrix with cut-A factors major.
EMatrix cut_matrix(const StateVector& psi, const std::vector<int>& a_set,
                   const std::vector<int>& b_set) {
  const auto strides = strides_of(psi.dims());
  long da = 1, db = 1;
  for (int f : a_set) da *= psi.dims()[static_cast<std::size_t>(f)];
  for (int f : b_set) db *= psi.dims()[static_cast<std::size_t>(f)];
  EMatrix m(da, db);
  for (long ia = 0; ia < da; ++ia) {
    long rem = ia, abase = 0;
    for (int fi = static_cast<int>(a_set.size()) - 1; fi >= 0; --fi) {
      const int f = a_set[static_cast<std::size_t>(fi)];
      const int dim = psi.dims()[static_cast<std::size_t>(f)];
      abase += (rem % dim) * strides[static_cast<std::size_t>(f)];
      rem /= dim;
    }
    for (long ib = 0; ib < db; ++ib) {
      long rem2 = ib, bbase = 0;
      for (int fi = static_cast<int>(b_set.size()) - 1; fi >= 0; --fi) {
        const int f = b_set[static_cast<std::size_t>(fi)];
        const int dim = psi.dims()[static_cast<std::size_t>(f)];
        bbase += (rem2 % dim) * strides[static_cast<std::size_t>(f)];
        rem2 /= dim;
      }
      m(ia, ib) = psi[abase + bbase];
    }
  }
  return m;
}

void split_cut(const StateVector& psi, std::span<const int> cut_a, std::vector<int>& a_set,
               std::vector<int>& b_set, const char* what) {
  a_set = sorted_unique(cut_a, psi.factors(), what);
  if (a_set.empty()) throw std::invalid_argument(std::string(what) + ": empty cut");
  if (static_cast<int>(a_set.size()) == psi.factors())
    throw std::invalid_argument(std::string(what) + ": cut must be a proper subset");
  b_set.clear();
  for (int f = 0; f < psi.factors(); ++f)
    if (!std::binary_search(a_set.begin(), a_set.end(), f)) b_set.push_back(f);
}

std::vector<int> dims_at(const StateVector& psi, const std::vector<int>& set) {
  std::vector<int> d;
  d.reserve(set.size());
  for (int f : set) d.push_back(psi.dims()[static_cast<std::size_t>(f)]);
  return d;
}
}  // namespace

SchmidtForm schmidt(const StateVector& psi, std::span<const int> cut_a) {
  psi.require_normalized();
  std::vector<int> a_set, b_set;
  split_cut(psi, cut_a, a_set, b_set, "schmidt");
  const EMatrix m = cut_matrix(psi, a_set, b_set);

  Eigen::JacobiSVD<EMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const auto& u = svd.matrixU();
  const auto& v = svd.matrixV();

  SchmidtForm out;
  const auto adims = dims_at(psi, a_set);
  const auto bdims = dims_at(psi, b_set);
  for (int k = 0; k < sv.size(); ++k) {
    out.coefficients.push_back(sv(k));
    std::vector<cd> av(static_cast<std::size_t>(m.rows()));
    for (long i = 0; i < m.rows(); ++i) av[static_cast<std::size_t>(i)] = u(i, k);
    std::vector<cd> bv(static_cast<std::size_t>(m.cols()));
    for (long i = 0; i < m.cols(); ++i) bv[static_cast<std::size_t>(i)] = std::conj(v(i, k));
    out.basis_a.emplace_back(adims, std::move(av));
    out.basis_b.emplace_back(bdims, std::move(bv));
  }
  return out;
}

// --- Uhlmann-style local unitary ---

CMatrix uhlmann_unitary(const StateVector& psi0, const StateVector& psi1,
                        std::span<const int> cut_a) {
  if (psi0.dims() != psi1.dims())
    throw std::invalid_argument("uhlmann_unitary: states live on different factor lists");
  psi0.require_normalized();
  psi1.require_normalized();
  std::vector<int> a_set, b_set;
  split_cut(psi0, cut_a, a_set, b_set, "uhlmann_unitary");

  const EMatrix m0 = cut_matrix(psi0, a_set, b_set);
  const EMatrix m1 = cut_matrix(psi1, a_set, b_set);
  const long da = m0.rows(), db = m0.cols();

  // Reduced state on the kept (B) side: rho[b,b'] = sum_a psi[a,b] conj(psi[a,b']).
  const EMatrix rho0 = m0.transpose() * m0.conjugate();
  const EMatrix rho1 = m1.transpose() * m1.conjugate();
  double mismatch = 0;
  for (long r = 0; r < db; ++r)
    for (long c = 0; c < db; ++c) mismatch = std::max(mismatch, std::abs(rho0(r, c) - rho1(r, c)));
  if (mismatch > kTol)
    throw std::runtime_error(
        "uhlmann_unitary: reduced states on the kept side differ; no local unitary on the cut "
        "can map one state to the other");

  EMatrix rho = (rho0 + rho1) * 0.5;
  Eigen::SelfAdjointEigenSolver<EMatrix> es(rho);
  if (es.info() != Eigen::Success) throw std::runtime_error("uhlmann_unitary: eigensolve failed");

  // Descending spectrum with a deterministic basis inside degenerate
  // clusters: project computational basis vectors onto the cluster and
  // Gram-Schmidt them in index order, then fix each vector's phase.
  const long nb = db;
  std::vector<double> lam(static_cast<std::size_t>(nb));
  EMatrix vecs(nb, nb);
  for (long j = 0; j < nb; ++j) {
    lam[static_cast<std::size_t>(j)] = es.eigenvalues()(nb - 1 - j);
    vecs.col(j) = es.eigenvectors().col(nb - 1 - j);
  }
  std::vector<Eigen::VectorXcd> beta;
  long j = 0;
  while (j < nb) {
    long k = j;
    while (k + 1 < nb && std::abs(lam[static_cast<std::size_t>(k + 1)] - lam[static_cast<std::size_t>(j)]) < kTol) ++k;
    const long width = k - j + 1;
    EMatrix proj = EMatrix::Zero(nb, nb);
    for (long t = j; t <= k; ++t) proj += vecs.col(t) * vecs.col(t).adjoint();
    std::vector<Eigen::VectorXcd> cluster;
    for (long e = 0; e < nb && static_cast<long>(cluster.size()) < width; ++e) {
      Eigen::VectorXcd cand = proj.col(e);
      for (const auto& c : cluster) cand -= c.dot(cand) * c;
      const double nr = cand.norm();
      if (nr < 1e-6) continue;
      cand /= nr;
      long imax = 0;
      for (long i = 1; i < nb; ++i)
        if (std::abs(cand(i)) > std::abs(cand(imax)) + kRankTol) imax = i;
      if (std::abs(cand(imax)) > kRankTol) cand *= std::conj(cand(imax)) / std::abs(cand(imax));
      cluster.push_back(cand);
    }
    if (static_cast<long>(cluster.size()) != width)
      throw std::logic_error("uhlmann_unitary: failed to canonicalize a degenerate cluster");
    for (auto& c : cluster) beta.push_back(std::move(c));
    j = k + 1;
  }

  // Relative states of both sides with respect to the common B basis.
  std::vector<std::vector<cd>> rel0, rel1;
  for (long t = 0; t < nb; ++t) {
    if (lam[static_cast<std::size_t>(t)] < kRankTol) continue;
    const double inv = 1.0 / std::sqrt(lam[static_cast<std::size_t>(t)]);
    std::vector<cd> a0(static_cast<std::size_t>(da), cd(0, 0));
    std::vector<cd> a1(static_cast<std::size_t>(da), cd(0, 0));
    for (long a = 0; a < da; ++a) {
      cd s0(0, 0), s1(0, 0);
      for (long b = 0; b < db; ++b) {
        const cd w = std::conj(beta[static_cast<std::size_t>(t)](b));
        s0 += m0(a, b) * w;
        s1 += m1(a, b) * w;
      }
      a0[static_cast<std::size_t>(a)] = s0 * inv;
      a1[static_cast<std::size_t>(a)] = s1 * inv;
    }
    rel0.push_back(std::move(a0));
    rel1.push_back(std::move(a1));
  }

  const auto full0 = complete_basis(rel0, static_cast<int>(da));
  const auto full1 = complete_basis(rel1, static_cast<int>(da));

  CMatrix u(static_cast<int>(da), static_cast<int>(da));
  for (std::size_t t = 0; t < full0.size(); ++t)
    for (long r = 0; r < da; ++r)
      for (long c = 0; c < da; ++c)
        u.at(static_cast<int>(r), static_cast<int>(c)) +=
            full1[t][static_cast<std::size_t>(r)] * std::conj(full0[t][static_cast<std::size_t>(c)]);
  return u;
}

// --- unitary application ---

namespace {
struct BlockPlan {
  std::vector<std::size_t> bases;
  std::vector<std::size_t> toffs;
  int du = 1;
};

BlockPlan block_plan(std::span<const int> dims, std::span<const int> targets) {
  const int nf = static_cast<int>(dims.size());
  std::vector<int> seen(static_cast<std::size_t>(nf), 0);
  for (int t : targets) {
    if (t < 0 || t >= nf) throw std::invalid_argument("apply_unitary: target out of range");
    if (seen[static_cast<std::size_t>(t)]++) throw std::invalid_argument("apply_unitary: repeated target");
  }
  const auto strides = strides_of(dims);
  BlockPlan plan;
  for (int t : targets) plan.du *= dims[static_cast<std::size_t>(t)];

  plan.toffs.resize(static_cast<std::size_t>(plan.du));
  for (int j = 0; j < plan.du; ++j) {
    long rem = j, off = 0;
    for (int ti = static_cast<int>(targets.size()) - 1; ti >= 0; --ti) {
      const int f = targets[static_cast<std::size_t>(ti)];
      const int dim = dims[static_cast<std::size_t>(f)];
      off += (rem % dim) * strides[static_cast<std::size_t>(f)];
      rem /= dim;
    }
    plan.toffs[static_cast<std::size_t>(j)] = static_cast<std::size_t>(off);
  }

  std::vector<int> rest;
  for (int f = 0; f < nf; ++f)
    if (!std::count(targets.begin(), targets.end(), f)) rest.push_back(f);
  long nblocks = 1;
  for (int f : rest) nblocks *= dims[static_cast<std::size_t>(f)];
  plan.bases.resize(static_cast<std::size_t>(nblocks));
  for (long b = 0; b < nblocks; ++b) {
    long rem = b, base = 0;
    for (int fi = static_cast<int>(rest.size()) - 1; fi >= 0; --fi) {
      const int f = rest[static_cast<std::size_t>(fi)];
      const int dim = dims[static_cast<std::size_t>(f)];
      base += (rem % dim) * strides[static_cast<std::size_t>(f)];
      rem /= dim;
    }
    plan.bases[static_cast<std::size_t>(b)] = static_cast<std::size_t>(base);
  }
  return plan;
}
}  // namespace

StateVector apply_unitary(const CMatrix& u, std::span<const int> targets, const StateVector& s) {
  s.require_normalized();
  const auto plan = block_plan(s.dims(), targets);
  if (u.rows != plan.du || u.cols != plan.du)
    throw std::invalid_argument("apply_unitary: operator shape does not match targets");
  if (!u.is_unitary()) throw std::invalid_argument("apply_unitary: operator is not unitary");
  std::vector<cd> out = s.amps();
  kernels::block_apply(u.a.data(), plan.du, plan.bases.data(), plan.bases.size(),
                       plan.toffs.data(), out.data());
  return StateVector(s.dims(), std::move(out));
}

CMatrix unitary_from_columns(int dim, std::span<const std::pair<int, std::vector<cd>>> action) {
  if (dim < 1) throw std::invalid_argument("unitary_from_columns: dim must be positive");
  if (action.size() > static_cast<std::size_t>(dim))
    throw std::invalid_argument("unitary_from_columns: too many columns");
  std::vector<char> taken(static_cast<std::size_t>(dim), 0);
  std::vector<std::vector<cd>> cols;
  for (const auto& [idx, v] : action) {
    if (idx < 0 || idx >= dim || taken[static_cast<std::size_t>(idx)])
      throw std::invalid_argument("unitary_from_columns: bad column index");
    taken[static_cast<std::size_t>(idx)] = 1;
    if (v.size() != static_cast<std::size_t>(dim))
      throw std::invalid_argument("unitary_from_columns: column length mismatch");
    cols.push_back(v);
  }
  for (std::size_t i = 0; i < cols.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      cd ov(0, 0);
      for (int r = 0; r < dim; ++r)
        ov += std::conj(cols[j][static_cast<std::size_t>(r)]) * cols[i][static_cast<std::size_t>(r)];
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(ov - cd(want, 0)) > kTol)
        throw std::invalid_argument("unitary_from_columns: columns not orthonormal");
    }
  const auto basis = complete_basis(cols, dim);
  CMatrix u(dim, dim);
  for (std::size_t t = 0; t < action.size(); ++t)
    for (int r = 0; r < dim; ++r) u.at(r, action[t].first) = basis[t][static_cast<std::size_t>(r)];
  std::size_t next = action.size();
  for (int c = 0; c < dim; ++c) {
    if (taken[static_cast<std::size_t>(c)]) continue;
    for (int r = 0; r < dim; ++r) u.at(r, c) = basis[next][static_cast<std::size_t>(r)];
    ++next;
  }
  if (!u.is_unitary()) throw std::logic_error("unitary_from_columns: completion failed");
  return u;
}

// --- measurement ---

namespace {
void check_projector_set(std::span<const CMatrix> projectors, int du) {
  if (projectors.empty()) throw std::invalid_argument("measure: no projectors");
  CMatrix sum(du, du);
  for (const CMatrix& p : projectors) {
    if (p.rows != du || p.cols != du)
      throw std::invalid_argument("measure: projector shape does not match targets");
    if (p.max_abs_diff(p.adjoint()) > kTol) throw std::invalid_argument("measure: projector not Hermitian");
    if ((p * p).max_abs_diff(p) > kTol) throw std::invalid_argument("measure: projector not idempotent");
    for (std::size_t i = 0; i < sum.a.size(); ++i) sum.a[i] += p.a[i];
  }
  if (sum.max_abs_diff(CMatrix::identity(du)) > kTol)
    throw std::invalid_argument("measure: projectors do not resolve the identity");
}

void project_branches(const StateVector& s, const BlockPlan& plan,
                      std::span<const CMatrix> projectors, std::vector<std::vector<cd>>& branches,
                      std::vector<double>& probs) {
  const int np = static_cast<int>(projectors.size());
  branches.assign(static_cast<std::size_t>(np), {});
  probs.assign(static_cast<std::size_t>(np), 0.0);
  for (int i = 0; i < np; ++i) {
    auto& buf = branches[static_cast<std::size_t>(i)];
    buf = s.amps();
    kernels::block_apply(projectors[static_cast<std::size_t>(i)].a.data(), plan.du,
                         plan.bases.data(), plan.bases.size(), plan.toffs.data(), buf.data());
    double p = 0;
    for (const cd& v : buf) p += std::norm(v);
    probs[static_cast<std::size_t>(i)] = p;
  }
}
}  // namespace

std::vector<double> born_probabilities(const StateVector& s, std::span<const int> targets,
                                       std::span<const CMatrix> projectors) {
  s.require_normalized();
  const auto plan = block_plan(s.dims(), targets);
  check_projector_set(projectors, plan.du);
  std::vector<std::vector<cd>> branches;
  std::vector<double> probs;
  project_branches(s, plan, projectors, branches, probs);
  return probs;
}

MeasureResult measure(const StateVector& s, std::span<const int> targets,
                      std::span<const CMatrix> projectors, Rng& rng) {
  s.require_normalized();
  const auto plan = block_plan(s.dims(), targets);
  check_projector_set(projectors, plan.du);

  const int np = static_cast<int>(projectors.size());
  std::vector<std::vector<cd>> branches;
  std::vector<double> probs;
  project_branches(s, plan, projectors, branches, probs);

  double total = 0;
  for (double p : probs)
    if (p >= kRankTol) total += p;
  if (total <= 0) throw std::runtime_error("measure: all branch probabilities vanish");
  const double draw = rng.uniform() * total;
  double cum = 0;
  int pick = -1;
  for (int i = 0; i < np; ++i) {
    if (probs[static_cast<std::size_t>(i)] < kRankTol) continue;  // dead branch, never selected
    cum += probs[static_cast<std::size_t>(i)];
    pick = i;
    if (draw < cum) break;
  }

  MeasureResult out;
  out.outcome = pick;
  out.probability = probs[static_cast<std::size_t>(pick)];
  auto& buf = branches[static_cast<std::size_t>(pick)];
  const double inv = 1.0 / std::sqrt(out.probability);
  for (cd& v : buf) v *= inv;
  out.post = StateVector(s.dims(), std::move(buf));
  return out;
}

// --- distances / densities ---

std::vector<double> hermitian_eigenvalues(const CMatrix& h) {
  if (h.rows != h.cols) throw std::invalid_argument("hermitian_eigenvalues: not square");
  Eigen::SelfAdjointEigenSolver<EMatrix> es(to_eigen(h), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("hermitian_eigenvalues: solver failed");
  std::vector<double> ev(static_cast<std::size_t>(h.rows));
  for (int i = 0; i < h.rows; ++i) ev[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return ev;
}

double trace_distance(const DensityMatrix& r0, const DensityMatrix& r1) {
  if (r0.dims != r1.dims) throw std::invalid_argument("trace_distance: factor lists differ");
  CMatrix diff = r0.m;
  for (std::size_t i = 0; i < diff.a.size(); ++i) diff.a[i] -= r1.m.a[i];
  double s = 0;
  for (double ev : hermitian_eigenvalues(diff)) s += std::abs(ev);
  return 0.5 * s;
}

DensityMatrix density_from_state(const StateVector& s) {
  s.require_normalized();
  CMatrix m(static_cast<int>(s.dim()), static_cast<int>(s.dim()));
  kernels::outer_acc(s.amps().data(), static_cast<std::size_t>(s.dim()), 1.0, m.a.data());
  return DensityMatrix(s.dims(), std::move(m));
}

DensityMatrix density_from_ensemble(const Ensemble& e) {
  const auto& first = e.members.front().first;
  CMatrix m(static_cast<int>(first.dim()), static_cast<int>(first.dim()));
  for (const auto& [s, p] : e.members) {
    s.require_normalized();
    if (p < kRankTol) continue;
    kernels::outer_acc(s.amps().data(), static_cast<std::size_t>(s.dim()), p, m.a.data());
  }
  return DensityMatrix(first.dims(), std::move(m));
}

}  // namespace qbc
