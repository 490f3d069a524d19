#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "nbsigma/core.hpp"
#include "nbsigma/laurent.hpp"

namespace nbsigma {

struct GbzSample {
  cplx beta;
  cplx energy;
};

struct GbzCurve {
  std::vector<GbzSample> samples;
  std::optional<double> analytic_radius;
  int hopping_range = 1;

  static GbzCurve circle(const LaurentSymbol& x, double radius, int n) {
    GbzCurve g;
    g.analytic_radius = radius;
    g.hopping_range = x.range();
    g.samples.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      cplx b = std::polar(radius, -pi + 2.0 * pi * k / n);
      g.samples.push_back({b, x(b)});
    }
    return g;
  }

  double mean_radius() const {
    if (analytic_radius) return *analytic_radius;
    double s = 0;
    for (auto& p : samples) s += std::log(std::abs(p.beta));
    return samples.empty() ? 1.0 : std::exp(s / double(samples.size()));
  }
};

struct EigenstateDecomposition {
  cplx energy;
  std::vector<cplx> roots;
  std::vector<cplx> phi_r;
  std::vector<cplx> phi_l;
  int n_sites = 0;
  double residual_r = 0;
  double residual_l = 0;
  bool degenerate = false;
  std::vector<cplx> phi_r_second;
  std::vector<cplx> phi_l_second;
};

namespace detail {

// Modulus-sorted with ascending argument inside groups of equal modulus.
inline void sort_roots(std::vector<cplx>& r, double rel_tol = 1e-12) {
  std::sort(r.begin(), r.end(), [](cplx a, cplx b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
    return std::arg(a) < std::arg(b);
  });
  std::size_t i = 0;
  while (i < r.size()) {
    std::size_t j = i + 1;
    while (j < r.size() && std::abs(r[j]) - std::abs(r[i]) <= rel_tol * std::max(1.0, std::abs(r[i]))) ++j;
    std::sort(r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(j),
              [](cplx a, cplx b) { return std::arg(a) < std::arg(b); });
    i = j;
  }
}

// Roots of Σ_k a_k β^k through the companion matrix, then Newton polish.
inline std::vector<cplx> polynomial_roots(const std::vector<cplx>& a) {
  const int deg = static_cast<int>(a.size()) - 1;
  if (deg < 1) return {};
  Mat c = Mat::Zero(deg, deg);
  for (int k = 1; k < deg; ++k) c(k, k - 1) = 1.0;
  for (int k = 0; k < deg; ++k) c(k, deg - 1) = -a[static_cast<std::size_t>(k)] / a[static_cast<std::size_t>(deg)];
  Eigen::ComplexEigenSolver<Mat> es(c, false);
  std::vector<cplx> roots(static_cast<std::size_t>(deg));
  auto eval = [&](cplx z, cplx& dp) {
    cplx p = a[static_cast<std::size_t>(deg)];
    dp = 0;
    for (int k = deg - 1; k >= 0; --k) {
      dp = dp * z + p;
      p = p * z + a[static_cast<std::size_t>(k)];
    }
    return p;
  };
  for (int k = 0; k < deg; ++k) {
    cplx z = es.eigenvalues()(k);
    for (int it = 0; it < 3; ++it) {
      cplx dp;
      cplx p = eval(z, dp);
      if (dp == cplx{}) break;
      cplx zn = z - p / dp;
      cplx dq;
      if (std::abs(eval(zn, dq)) < std::abs(p)) z = zn;
      else break;
    }
    roots[static_cast<std::size_t>(k)] = z;
  }
  return roots;
}

}  // namespace detail

// All 2M roots of β^M (E - X(β)) = 0, modulus-sorted.
inline std::vector<cplx> characteristic_roots(const LaurentSymbol& x, cplx energy) {
  const int m = x.range();
  if (m == 0) fail(ErrorKind::invalid_argument, "characteristic_roots: constant symbol has no roots");
  if (x.coeff(-m) == cplx{} || x.coeff(m) == cplx{})
    fail(ErrorKind::invalid_argument, "characteristic_roots: degenerate symbol (vanishing leading or trailing coefficient)");
  std::vector<cplx> a(static_cast<std::size_t>(2 * m + 1));
  for (int k = 0; k <= 2 * m; ++k) a[static_cast<std::size_t>(k)] = -x.coeff(m - k);
  a[static_cast<std::size_t>(m)] += energy;
  auto r = detail::polynomial_roots(a);
  detail::sort_roots(r);
  return r;
}

// Radius r for which the loop X(r e^{ik}) encloses the least area. For M = 1
// this is the GBZ radius sqrt(|c_1|/|c_{-1}|); used as a similarity scaling
// that removes most of the skin-effect non-normality.
inline double skin_radius(const LaurentSymbol& x) {
  if (x.range() == 1 && x.coeff(1) != cplx{} && x.coeff(-1) != cplx{})
    return std::sqrt(std::abs(x.coeff(1)) / std::abs(x.coeff(-1)));
  auto area = [&](double logr) {
    const int n = 256;
    double s = 0;
    cplx prev = x(std::polar(std::exp(logr), 0.0));
    for (int k = 1; k <= n; ++k) {
      cplx cur = x(std::polar(std::exp(logr), 2.0 * pi * k / n));
      s += 0.5 * (prev.real() * cur.imag() - cur.real() * prev.imag());
      prev = cur;
    }
    return std::abs(s);
  };
  double lo = -5, hi = 5;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (area(a) < area(b)) hi = b;
    else lo = a;
  }
  return std::exp(0.5 * (lo + hi));
}

// OBC spectrum of the N-site Toeplitz section, computed on the similarity
// transform diag(r^i)^{-1} X diag(r^i) in the arithmetic of Real.
template <class Real>
std::vector<cplx> obc_spectrum_t(const LaurentSymbol& x, int n, double radius) {
  using C = std::complex<Real>;
  using M = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
  using std::exp;
  using std::log;
  M a = M::Zero(n, n);
  Real lr = log(Real(radius));
  for (auto& [r, c] : x.coeffs()) {
    Real f = exp(-Real(r) * lr);
    C cc(Real(c.real()), Real(c.imag()));
    for (int i = 0; i < n; ++i) {
      int j = i - r;
      if (j >= 0 && j < n) a(i, j) = cc * f;
    }
  }
  Eigen::ComplexEigenSolver<M> es(a, false);
  std::vector<cplx> ev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    C v = es.eigenvalues()(i);
    ev[static_cast<std::size_t>(i)] = cplx(static_cast<double>(v.real()), static_cast<double>(v.imag()));
  }
  std::sort(ev.begin(), ev.end(), [](cplx p, cplx q) {
    return p.imag() != q.imag() ? p.imag() < q.imag() : p.real() < q.real();
  });
  return ev;
}

inline std::vector<cplx> obc_spectrum(const LaurentSymbol& x, int n) {
  return obc_spectrum_t<double>(x, n, skin_radius(x));
}

using SpectrumFn = std::function<std::vector<cplx>(const LaurentSymbol&, int)>;

struct GbzOptions {
  int reference_size = 120;
  SpectrumFn spectrum;  // defaults to obc_spectrum
  int projection_iterations = 40;
};

namespace detail {

inline double modulus_gap(const LaurentSymbol& x, cplx e) {
  auto r = characteristic_roots(x, e);
  const std::size_t m = static_cast<std::size_t>(x.range());
  return std::log(std::abs(r[m])) - std::log(std::abs(r[m - 1]));
}

// Roots β of X(β) = X(β e^{iφ}) for fixed real φ.
inline std::vector<cplx> phase_pair_roots(const LaurentSymbol& x, double phi) {
  const int m = x.range();
  std::vector<cplx> a(static_cast<std::size_t>(2 * m + 1));
  for (int q = 0; q <= 2 * m; ++q) {
    int r = m - q;
    a[static_cast<std::size_t>(q)] = x.coeff(r) * (1.0 - std::polar(1.0, -r * phi));
  }
  int deg = 2 * m;
  while (deg > 0 && std::abs(a[static_cast<std::size_t>(deg)]) < 1e-14) --deg;
  int low = 0;
  while (low < deg && std::abs(a[static_cast<std::size_t>(low)]) < 1e-14) ++low;
  std::vector<cplx> trimmed(a.begin() + low, a.begin() + deg + 1);
  std::vector<cplx> out;
  for (cplx b : polynomial_roots(trimmed))
    if (std::abs(b) > 1e-12) out.push_back(b);
  return out;
}

// Move E onto the curve |β_M(E)| = |β_{M+1}(E)|: first along the steepest
// direction of the modulus gap, then snapped exactly through the phase-pair
// equation at the current relative phase of the middle roots.
inline cplx project_to_gbz(const LaurentSymbol& x, cplx e, int iters) {
  const std::size_t m = static_cast<std::size_t>(x.range());
  for (int it = 0; it < iters; ++it) {
    double f = modulus_gap(x, e);
    if (std::abs(f) < 1e-13) break;
    double h = 1e-7 * std::max(1.0, std::abs(e));
    double fx = (modulus_gap(x, e + h) - modulus_gap(x, e - h)) / (2 * h);
    double fy = (modulus_gap(x, e + cplx(0, h)) - modulus_gap(x, e - cplx(0, h))) / (2 * h);
    double g2 = fx * fx + fy * fy;
    if (g2 == 0) break;
    e -= f / g2 * cplx(fx, fy);
  }
  auto r = characteristic_roots(x, e);
  const double phi = std::arg(r[m] / r[m - 1]);
  if (std::abs(phi) < 1e-10) return e;
  cplx best = e;
  double best_gap = modulus_gap(x, e);
  for (cplx b : phase_pair_roots(x, phi)) {
    if (std::abs(b - r[m - 1]) > 1e-3 * std::abs(r[m - 1])) continue;
    cplx cand = x(b);
    double g = modulus_gap(x, cand);
    if (g < best_gap) {
      best_gap = g;
      best = cand;
    }
  }
  return best;
}

}  // namespace detail

inline GbzCurve compute_gbz(const LaurentSymbol& x, int n_samples, const GbzOptions& opt = {}) {
  if (n_samples < 8) fail(ErrorKind::invalid_argument, "compute_gbz: insufficient samples");
  {
    double maxre = -1e300;
    for (int k = 0; k < 1024; ++k) maxre = std::max(maxre, x(std::polar(1.0, 2.0 * pi * k / 1024)).real());
    if (maxre > 1e-10) fail(ErrorKind::numeric_policy, "compute_gbz: symbol unstable (max Re X on the unit circle > 0)");
  }
  const int m = x.range();
  if (m == 1 && x.coeff(1) != cplx{} && x.coeff(-1) != cplx{})
    return GbzCurve::circle(x, skin_radius(x), n_samples);
  if (x.coeff(m) == cplx{} || x.coeff(-m) == cplx{})
    fail(ErrorKind::invalid_argument, "compute_gbz: one-sided symbol has no finite GBZ");
  std::vector<cplx> ev = opt.spectrum ? opt.spectrum(x, opt.reference_size) : obc_spectrum(x, opt.reference_size);
  GbzCurve g;
  g.hopping_range = m;
  for (cplx e : ev) {
    cplx ep = detail::project_to_gbz(x, e, opt.projection_iterations);
    auto r = characteristic_roots(x, ep);
    for (std::size_t k : {std::size_t(m - 1), std::size_t(m)}) g.samples.push_back({r[k], x(r[k])});
  }
  std::sort(g.samples.begin(), g.samples.end(),
            [](const GbzSample& p, const GbzSample& q) { return std::arg(p.beta) < std::arg(q.beta); });
  return g;
}

// G_ij = ∮ dβ/(2πiβ) β^{i-j} / (z - X(β)) along the GBZ.
inline cplx obc_green_function(const LaurentSymbol& x, cplx z, int i, int j, const GbzCurve& gbz,
                               double pole_tol = 1e-6) {
  const std::size_t n = gbz.samples.size();
  if (n < 3) fail(ErrorKind::invalid_argument, "obc_green_function: too few GBZ samples");
  auto f = [&](cplx b) {
    cplx d = z - x(b);
    if (std::abs(d) < pole_tol) fail(ErrorKind::numeric_policy, "obc_green_function: z too close to the contour image");
    return ipow(b, i - j) / d;
  };
  std::vector<cplx> terms(n);
  if (gbz.analytic_radius) {
    for (std::size_t k = 0; k < n; ++k) terms[k] = f(gbz.samples[k].beta) / double(n);
    return pairwise_sum(terms);
  }
  // Trapezoid in log β along the ordered samples.
  for (std::size_t k = 0; k < n; ++k) {
    cplx b0 = gbz.samples[k].beta, b1 = gbz.samples[(k + 1) % n].beta;
    double dphi = std::arg(b1 / b0);
    cplx dl = cplx(std::log(std::abs(b1) / std::abs(b0)), dphi);
    terms[k] = 0.5 * (f(b0) + f(b1)) * dl / (2.0 * pi * I);
  }
  return pairwise_sum(terms);
}

// Winding number of X(β) - z along the ordered GBZ samples.
inline double winding_number(const LaurentSymbol& x, cplx z, const GbzCurve& gbz) {
  double w = 0;
  const std::size_t n = gbz.samples.size();
  for (std::size_t k = 0; k < n; ++k) {
    cplx a = x(gbz.samples[k].beta) - z, b = x(gbz.samples[(k + 1) % n].beta) - z;
    w += std::arg(b / a);
  }
  return w / (2.0 * pi);
}

namespace detail {

// Column-scaled boundary matrix. Rows: Σ_μ β_μ^{s(1-ν)} φ_μ and
// Σ_μ β_μ^{s(N+ν)} φ_μ for ν = 1..M, s = ±1. Returns the column log-scales.
inline Mat boundary_matrix(const std::vector<cplx>& roots, int m, int n, int s, std::vector<double>& logscale) {
  const int k = 2 * m;
  Mat b(k, k);
  logscale.assign(static_cast<std::size_t>(k), 0.0);
  for (int mu = 0; mu < k; ++mu) {
    cplx lb = std::log(roots[static_cast<std::size_t>(mu)]) * double(s);
    std::vector<cplx> logs;
    for (int nu = 1; nu <= m; ++nu) logs.push_back(lb * double(1 - nu));
    for (int nu = 1; nu <= m; ++nu) logs.push_back(lb * double(n + nu));
    double mx = -1e300;
    for (auto& l : logs) mx = std::max(mx, l.real());
    logscale[static_cast<std::size_t>(mu)] = mx;
    for (int row = 0; row < k; ++row) b(row, mu) = std::exp(logs[static_cast<std::size_t>(row)] - mx);
  }
  return b;
}

struct NullResult {
  Vec v;
  Vec v2;
  double sigma_min;
  double sigma_next;
};

inline NullResult null_vector(const Mat& b) {
  Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeFullV);
  const Eigen::Index k = b.cols();
  NullResult r;
  r.v = svd.matrixV().col(k - 1);
  r.v2 = k >= 2 ? Vec(svd.matrixV().col(k - 2)) : Vec();
  double s0 = svd.singularValues()(0);
  r.sigma_min = svd.singularValues()(k - 1) / std::max(s0, 1e-300);
  r.sigma_next = k >= 2 ? svd.singularValues()(k - 2) / std::max(s0, 1e-300) : 1.0;
  return r;
}

inline std::vector<cplx> unscale(const Vec& y, const std::vector<double>& logscale, int m) {
  std::vector<cplx> phi(static_cast<std::size_t>(y.size()));
  for (Eigen::Index mu = 0; mu < y.size(); ++mu)
    phi[static_cast<std::size_t>(mu)] = y(mu) * std::exp(-logscale[static_cast<std::size_t>(mu)]);
  cplx a = phi[static_cast<std::size_t>(m - 1)], b = phi[static_cast<std::size_t>(m)];
  cplx ref = std::abs(a) >= std::abs(b) ? a : b;
  if (ref != cplx{})
    for (auto& p : phi) p /= ref;
  return phi;
}

}  // namespace detail

// Sites are labelled 1..N in the boundary conditions: ψ^R_i = Σ_μ φ^R_μ β_μ^i,
// ψ^L_i = Σ_μ φ^L_μ β_μ^{-i}.
inline EigenstateDecomposition boundary_coefficients(const LaurentSymbol& x, cplx energy, int n_sites,
                                                     double residual_tol = 1e-8) {
  const int m = x.range();
  EigenstateDecomposition d;
  d.n_sites = n_sites;
  auto solve = [&](cplx e, bool keep) {
    auto roots = characteristic_roots(x, e);
    std::vector<double> ls_r, ls_l;
    Mat br = detail::boundary_matrix(roots, m, n_sites, 1, ls_r);
    Mat bl = detail::boundary_matrix(roots, m, n_sites, -1, ls_l);
    auto nr = detail::null_vector(br);
    auto nl = detail::null_vector(bl);
    if (keep) {
      d.energy = e;
      d.roots = roots;
      d.phi_r = detail::unscale(nr.v, ls_r, m);
      d.phi_l = detail::unscale(nl.v, ls_l, m);
      d.residual_r = nr.sigma_min;
      d.residual_l = nl.sigma_min;
      d.degenerate = nr.sigma_next < residual_tol || nl.sigma_next < residual_tol;
      if (d.degenerate) {
        d.phi_r_second = detail::unscale(nr.v2, ls_r, m);
        d.phi_l_second = detail::unscale(nl.v2, ls_l, m);
      }
    }
    return nr.sigma_min;
  };
  double res = solve(energy, true);
  if (res > residual_tol) {
    // Refine E by minimizing the smallest singular value with a local secant
    // search along a few directions.
    cplx e = energy;
    double h = 1e-6 * std::max(1.0, std::abs(e));
    for (int it = 0; it < 60 && res > 1e-13; ++it) {
      cplx best = e;
      double bres = res;
      for (cplx dir : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
        double r2 = solve(e + h * dir, false);
        if (r2 < bres) {
          bres = r2;
          best = e + h * dir;
        }
      }
      if (best == e) h *= 0.5;
      else {
        e = best;
        res = bres;
      }
    }
    solve(e, true);
  }
  if (d.residual_r > residual_tol || d.residual_l > residual_tol)
    fail(ErrorKind::invalid_argument, "boundary_coefficients: energy is not an OBC eigenvalue within tolerance");
  return d;
}

inline Vec reconstruct_right(const EigenstateDecomposition& d) {
  Vec psi = Vec::Zero(d.n_sites);
  for (int i = 1; i <= d.n_sites; ++i)
    for (std::size_t mu = 0; mu < d.roots.size(); ++mu)
      if (d.phi_r[mu] != cplx{}) psi(i - 1) += d.phi_r[mu] * std::exp(double(i) * std::log(d.roots[mu]));
  return psi;
}

inline Vec reconstruct_left(const EigenstateDecomposition& d) {
  Vec psi = Vec::Zero(d.n_sites);
  for (int i = 1; i <= d.n_sites; ++i)
    for (std::size_t mu = 0; mu < d.roots.size(); ++mu)
      if (d.phi_l[mu] != cplx{}) psi(i - 1) += d.phi_l[mu] * std::exp(-double(i) * std::log(d.roots[mu]));
  return psi;
}

struct PairWeights {
  cplx beta_m, beta_m1;
  cplx w_m, w_m1;  // φ^R_μ φ^L_μ for μ = M, M+1
};

// N -> ∞ weights of the modulus-degenerate pair: only the left-edge
// conditions survive, involving roots 1..M+1 for ψ^R and M..2M for ψ^L.
inline PairWeights asymptotic_pair_weights(const LaurentSymbol& x, cplx energy) {
  const int m = x.range();
  auto roots = characteristic_roots(x, energy);
  PairWeights pw;
  pw.beta_m = roots[static_cast<std::size_t>(m - 1)];
  pw.beta_m1 = roots[static_cast<std::size_t>(m)];
  Mat br(m, m + 1), bl(m, m + 1);
  for (int nu = 1; nu <= m; ++nu)
    for (int k = 0; k <= m; ++k) {
      br(nu - 1, k) = ipow(roots[static_cast<std::size_t>(k)], 1 - nu);
      bl(nu - 1, k) = ipow(roots[static_cast<std::size_t>(m - 1 + k)], nu - 1);
    }
  Eigen::JacobiSVD<Mat> sr(br, Eigen::ComputeFullV), sl(bl, Eigen::ComputeFullV);
  Vec vr = sr.matrixV().col(m), vl = sl.matrixV().col(m);
  // ψ^R: entries m-1, m of vr are μ = M, M+1; ψ^L: entries 0, 1 of vl.
  pw.w_m = vr(m - 1) * vl(0);
  pw.w_m1 = vr(m) * vl(1);
  return pw;
}

// Auxiliary GBZ: all β with X(β) = X(β e^{iφ}) for φ on a grid in (0, 2π).
inline GbzCurve auxiliary_gbz(const LaurentSymbol& x, int n_phi) {
  GbzCurve g;
  g.hopping_range = x.range();
  for (int k = 1; k < n_phi; ++k)
    for (cplx b : detail::phase_pair_roots(x, 2.0 * pi * k / n_phi)) g.samples.push_back({b, x(b)});
  return g;
}

}  // namespace nbsigma
