#pragma once

#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "nbsigma/core.hpp"
#include "nbsigma/lindblad.hpp"
#include "nbsigma/self_energy.hpp"
#include "nbsigma/three_particle.hpp"

namespace nbsigma {

// One a-particle states |j_a⟩ followed by |p_a, q_a, m_b⟩ = a_p^† a_q^† b_m^† |0⟩, p < q.
struct TruncatedBasis {
  int n_sites = 0;

  explicit TruncatedBasis(int n) : n_sites(n) {}

  long long single_dim() const { return n_sites; }
  long long pair_count() const { return static_cast<long long>(n_sites) * (n_sites - 1) / 2; }
  long long triple_dim() const { return pair_count() * n_sites; }
  long long total_dim() const { return single_dim() + triple_dim(); }

  // Index of the pair p < q in lexicographic order.
  long long pair_index(int p, int q) const {
    return static_cast<long long>(p) * (2LL * n_sites - p - 1) / 2 + (q - p - 1);
  }
  long long triple_index(int p, int q, int m) const {
    return single_dim() + pair_index(p, q) * n_sites + m;
  }
};

struct EdBlocks {
  Mat xa;  // X - (i/2) diag(w)
  Mat xb;  // X* + (i/2) diag(w)
  RMat u;
};

inline void require_balanced(const LindbladModel& model) {
  BathMatrices b = build_bath_matrices(model);
  if (max_abs(b.m_gain.transpose() - b.m_loss) > 1e-12)
    fail(ErrorKind::invalid_argument, "truncated Liouvillian needs a balanced model ((M^g)^T = M^l)");
}

inline EdBlocks ed_blocks(const LindbladModel& model, const InteractionSpec& in) {
  require_balanced(model);
  in.validate();
  EdBlocks b;
  Mat x = build_damping_matrix(model);
  b.u = interaction_matrix(in.u_symbol, model.n_sites, model.boundary);
  Vec w = b.u.rowwise().sum().cast<cplx>();
  b.xa = x;
  b.xb = x.conjugate();
  b.xa.diagonal() -= 0.5 * I * w;
  b.xb.diagonal() += 0.5 * I * w;
  return b;
}

using SpMatC = Eigen::SparseMatrix<cplx>;

// Matrix of 𝓛 on the truncated basis, column = source state.
inline SpMatC build_truncated_liouvillian(const LindbladModel& model, const InteractionSpec& in) {
  EdBlocks bl = ed_blocks(model, in);
  const int n = model.n_sites;
  TruncatedBasis basis(n);
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (bl.xa(i, j) != cplx{}) trip.emplace_back(i, j, bl.xa(i, j));
  auto put3 = [&](int p, int q, int m, cplx amp, long long col) {
    if (p == q) return;
    if (p < q) trip.emplace_back(basis.triple_index(p, q, m), col, amp);
    else trip.emplace_back(basis.triple_index(q, p, m), col, -amp);
  };
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q)
      for (int m = 0; m < n; ++m) {
        long long col = basis.triple_index(p, q, m);
        for (int x = 0; x < n; ++x) {
          if (bl.xa(x, p) != cplx{}) put3(x, q, m, bl.xa(x, p), col);
          if (bl.xa(x, q) != cplx{}) put3(p, x, m, bl.xa(x, q), col);
          if (bl.xb(x, m) != cplx{}) put3(p, q, x, bl.xb(x, m), col);
        }
        if (bl.u(p, q) != 0.0) {
          if (m == p) trip.emplace_back(q, col, 0.5 * I * bl.u(p, q));
          if (m == q) trip.emplace_back(p, col, -0.5 * I * bl.u(p, q));
        }
      }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i != j && bl.u(i, j) != 0.0) put3(j, i, i, -0.5 * I * bl.u(i, j), j);
  SpMatC m(basis.total_dim(), basis.total_dim());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

struct EdResult {
  cplx e0;
  cplx eigenvalue;
  cplx shift;
  int iterations = 0;
  double residual = 0;
  std::string solver;
};

struct EdOptions {
  std::string solver = "schur_complement";  // or "dense"
  int threads = 1;
  NumericPolicy policy{};
};

// Unperturbed eigenvalue of X matched to the GBZ angle θ by nearest X(ρ e^{iθ}).
inline cplx ed_target_energy(const LindbladModel& model, double theta) {
  Mat x = build_damping_matrix(model);
  int mid = model.n_sites / 2, m = 0;
  for (int j = 0; j < model.n_sites; ++j)
    if (std::abs(x(mid, j)) > 0) m = std::max(m, std::abs(mid - j));
  LaurentSymbol bulk = LaurentSymbol::from_row(x, mid, m);
  double rho = skin_radius(bulk);
  cplx want = bulk(std::polar(rho, theta));
  Eigen::ComplexEigenSolver<Mat> es(ThreeParticleResolvent::scale(x, rho), false);
  cplx best = es.eigenvalues()(0);
  for (Eigen::Index k = 1; k < es.eigenvalues().size(); ++k)
    if (std::abs(es.eigenvalues()(k) - want) < std::abs(best - want)) best = es.eigenvalues()(k);
  return best;
}

namespace detail {

inline cplx nearest_unique(const Vec& ev, cplx target, double tol) {
  Eigen::Index k0 = 0;
  for (Eigen::Index k = 1; k < ev.size(); ++k)
    if (std::abs(ev(k) - target) < std::abs(ev(k0) - target)) k0 = k;
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (k != k0 && std::abs(ev(k) - ev(k0)) < tol)
      fail(ErrorKind::non_convergence, "ed_selfenergy: ambiguous eigenvalue tracking");
  return ev(k0);
}

}  // namespace detail

// Perturbed eigenvalue continuously connected to target_e0; returns the full shift.
//
// schur_complement: λ = eigenvalue of Xa + V13 (λ - A3)^{-1} V31 nearest the
// current λ, iterated to a fixed point. This is exact on the truncated space.
inline EdResult ed_selfenergy(const LindbladModel& model, const InteractionSpec& in, cplx target_e0,
                              const EdOptions& opt = {}) {
  EdResult res;
  res.e0 = target_e0;
  res.solver = opt.solver;
  EdBlocks bl = ed_blocks(model, in);
  const int n = model.n_sites;
  if (opt.solver == "dense") {
    TruncatedBasis basis(n);
    if (basis.total_dim() > opt.policy.dense_ed_limit)
      fail(ErrorKind::size_guard, "ed_selfenergy: dense solver above the size limit");
    Mat dense = Mat(build_truncated_liouvillian(model, in));
    Eigen::ComplexEigenSolver<Mat> es(dense, false);
    res.eigenvalue = detail::nearest_unique(es.eigenvalues(), target_e0, opt.policy.ed_tracking_tol);
    res.shift = res.eigenvalue - target_e0;
    res.iterations = 1;
    return res;
  }
  if (opt.solver != "schur_complement") fail(ErrorKind::invalid_argument, "ed_selfenergy: unknown solver " + opt.solver);
  if (in.u_symbol.empty()) {
    res.eigenvalue = target_e0;
    return res;
  }
  double rho = model_skin_radius(model);
  ThreeParticleResolvent r3(bl.xa, bl.xb, bl.u, rho);
  Mat xs = ThreeParticleResolvent::scale(bl.xa, rho);
  cplx lambda = target_e0;
  for (int it = 1; it <= opt.policy.ed_max_iter; ++it) {
    Mat h = xs + r3.effective_scaled(lambda, opt.threads);
    Eigen::ComplexEigenSolver<Mat> es(h, false);
    cplx next = detail::nearest_unique(es.eigenvalues(), lambda, opt.policy.ed_tracking_tol);
    res.iterations = it;
    res.residual = std::abs(next - lambda);
    lambda = next;
    if (res.residual <= opt.policy.ed_tol * std::max(1.0, std::abs(lambda))) {
      res.eigenvalue = lambda;
      res.shift = lambda - target_e0;
      return res;
    }
  }
  fail(ErrorKind::non_convergence, "ed_selfenergy: Schur-complement iteration did not converge");
}

struct ScalingSeries {
  std::vector<int> sizes;
  std::vector<cplx> values;
  cplx slope{};
  cplx intercept{};
  double residual = 0;           // max |fit - value|
  double relative_residual = 0;  // residual / min |value|
};

// Least squares value = a + b/N; fills the fit fields and returns a.
inline cplx finite_size_extrapolate(ScalingSeries& s) {
  const std::size_t k = s.sizes.size();
  if (k < 4 || s.values.size() != k) fail(ErrorKind::invalid_argument, "finite_size_extrapolate: need at least 4 sizes");
  for (std::size_t i = 1; i < k; ++i)
    if (s.sizes[i] <= s.sizes[i - 1]) fail(ErrorKind::invalid_argument, "finite_size_extrapolate: sizes must increase");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(k), 2);
  Vec y(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = 1.0 / s.sizes[i];
    y(static_cast<Eigen::Index>(i)) = s.values[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(1) < 1e-12 * svd.singularValues()(0))
    fail(ErrorKind::singular, "finite_size_extrapolate: ill-conditioned fit");
  Eigen::MatrixXcd ac = a.cast<cplx>();
  Vec coef = ac.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
  s.intercept = coef(0);
  s.slope = coef(1);
  double mx = 0, mn = 1e300;
  for (std::size_t i = 0; i < k; ++i) {
    mx = std::max(mx, std::abs(s.intercept + s.slope / double(s.sizes[i]) - s.values[i]));
    mn = std::min(mn, std::abs(s.values[i]));
  }
  s.residual = mx;
  s.relative_residual = mn > 0 ? mx / mn : 0.0;
  return s.intercept;
}

}  // namespace nbsigma
