#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "nbsigma/core.hpp"

namespace nbsigma {

// Resolvent of the three-quasi-particle block restricted to the coupling
// with one-particle states. Tensors F[p,q,m] (index (p·N + q)·N + m) carry
// amplitudes of a_p^† a_q^† b_m^† |0⟩, antisymmetric in (p, q); the block acts
// as the Kronecker sum Xa ⊕ Xa ⊕ Xb, which keeps that subspace invariant.
//
// All work is done in scaled coordinates: one-particle index j carries ρ^j,
// each three-particle leg carries r^i with r = ρ^{1/3}. In those coordinates
// the resolvent stays bounded for long chains.
class ThreeParticleResolvent {
 public:
  ThreeParticleResolvent(const Mat& xa, const Mat& xb, const RMat& u, double rho)
      : n_(static_cast<int>(xa.rows())), rho_(rho), r_(std::cbrt(rho)), u_(u) {
    Mat sa = scale(xa, r_), sb = scale(xb, r_);
    Eigen::ComplexSchur<Mat> ca(sa), cb(sb);
    ta_ = ca.matrixT();
    qa_ = ca.matrixU();
    tb_ = cb.matrixT();
    qb_ = cb.matrixU();
  }

  int n() const { return n_; }
  double rho() const { return rho_; }

  // D^{-1} X D with D = diag(s^i).
  static Mat scale(const Mat& x, double s) {
    const int n = static_cast<int>(x.rows());
    Mat out = x;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (out(i, j) != cplx{}) out(i, j) *= std::pow(s, j - i);
    return out;
  }

  // Scaled V31 applied to the scaled one-particle basis vector j.
  std::vector<cplx> source(int j) const {
    std::vector<cplx> f(static_cast<std::size_t>(n_) * n_ * n_, cplx{});
    for (int i = 0; i < n_; ++i) {
      if (i == j || u_(i, j) == 0.0) continue;
      cplx amp = -0.5 * I * u_(i, j) * std::pow(r_, 2 * (j - i));
      f[idx(j, i, i)] += amp;
      f[idx(i, j, i)] -= amp;
    }
    return f;
  }

  // Scaled V13 applied to a tensor: out_b = (i/2) Σ_{a≠b} U_ab F[a,b,a].
  Vec project(const std::vector<cplx>& f) const {
    Vec out = Vec::Zero(n_);
    for (int b = 0; b < n_; ++b)
      for (int a = 0; a < n_; ++a)
        if (a != b && u_(a, b) != 0.0) out(b) += 0.5 * I * u_(a, b) * std::pow(r_, 2 * (a - b)) * f[idx(a, b, a)];
    return out;
  }

  // (λ - A3)^{-1} f in scaled coordinates.
  std::vector<cplx> solve(cplx lambda, const std::vector<cplx>& f) const {
    std::vector<cplx> y = transform(f, true);
    const int n = n_;
    for (int p = n - 1; p >= 0; --p)
      for (int q = n - 1; q >= 0; --q)
        for (int m = n - 1; m >= 0; --m) {
          cplx acc = y[idx(p, q, m)];
          for (int k = p + 1; k < n; ++k) acc += ta_(p, k) * y[idx(k, q, m)];
          for (int k = q + 1; k < n; ++k) acc += ta_(q, k) * y[idx(p, k, m)];
          for (int k = m + 1; k < n; ++k) acc += tb_(m, k) * y[idx(p, q, k)];
          cplx d = lambda - ta_(p, p) - ta_(q, q) - tb_(m, m);
          if (std::abs(d) < 1e-14) fail(ErrorKind::singular, "three-particle resolvent is singular at this energy");
          y[idx(p, q, m)] = acc / d;
        }
    return transform(y, false);
  }

  // Scaled effective matrix S~(λ) = V13 (λ - A3)^{-1} V31; S = ρ^{i-j} S~_ij.
  Mat effective_scaled(cplx lambda, int threads = 1) const {
    Mat s = Mat::Zero(n_, n_);
    parallel_for(n_, threads, [&](int j) { s.col(j) = project(solve(lambda, source(j))); });
    return s;
  }

  Vec effective_scaled_column(cplx lambda, int j) const { return project(solve(lambda, source(j))); }

 private:
  std::size_t idx(int p, int q, int m) const {
    return (static_cast<std::size_t>(p) * n_ + q) * n_ + m;
  }

  // Apply Q^† (to_schur) or Q along all three legs.
  std::vector<cplx> transform(const std::vector<cplx>& f, bool to_schur) const {
    const int n = n_;
    Mat qa = to_schur ? Mat(qa_.adjoint()) : qa_;
    Mat qb = to_schur ? Mat(qb_.adjoint()) : qb_;
    std::vector<cplx> g(f.size()), h(f.size());
    // leg p
    for (int p = 0; p < n; ++p)
      for (int k = 0; k < n; ++k) {
        cplx c = qa(p, k);
        if (c == cplx{}) continue;
        const cplx* src = &f[idx(k, 0, 0)];
        cplx* dst = &g[idx(p, 0, 0)];
        for (int t = 0; t < n * n; ++t) dst[t] += c * src[t];
      }
    // leg q
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        for (int k = 0; k < n; ++k) {
          cplx c = qa(q, k);
          if (c == cplx{}) continue;
          const cplx* src = &g[idx(p, k, 0)];
          cplx* dst = &h[idx(p, q, 0)];
          for (int m = 0; m < n; ++m) dst[m] += c * src[m];
        }
    // leg m
    std::fill(g.begin(), g.end(), cplx{});
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        const cplx* src = &h[idx(p, q, 0)];
        cplx* dst = &g[idx(p, q, 0)];
        for (int m = 0; m < n; ++m) {
          cplx acc{};
          for (int k = 0; k < n; ++k) acc += qb(m, k) * src[k];
          dst[m] = acc;
        }
      }
    return g;
  }

  int n_;
  double rho_, r_;
  RMat u_;
  Mat ta_, qa_, tb_, qb_;
};

}  // namespace nbsigma
