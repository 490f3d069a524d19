#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nbsigma/core.hpp"
#include "nbsigma/laurent.hpp"
#include "nbsigma/lindblad.hpp"
#include "nbsigma/nonbloch.hpp"
#include "nbsigma/three_particle.hpp"

namespace nbsigma {

struct InteractionSpec {
  LaurentSymbol u_symbol;
  double u = 0.0;

  void validate() const {
    if (!u_symbol.real_symmetric())
      fail(ErrorKind::invalid_argument, "interaction coefficients must be real and symmetric in r");
  }

  static InteractionSpec nearest_neighbour(double u) {
    return {presets::nearest_neighbour_interaction(u), u};
  }
};

enum class SigmaMethod { gbz_triple, bz_double, realspace };

inline std::string to_string(SigmaMethod m) {
  switch (m) {
    case SigmaMethod::gbz_triple: return "gbz_triple";
    case SigmaMethod::bz_double: return "bz_double";
    case SigmaMethod::realspace: return "realspace";
  }
  return "";
}

struct SelfEnergyValue {
  cplx value{};
  SigmaMethod method = SigmaMethod::bz_double;
  long long quadrature_points = 0;
  double error_estimate = 0;
  bool converged = true;
};

struct PerturbedBandPoint {
  double theta = 0;
  cplx beta;
  cplx e0;
  cplx sigma1;
  SelfEnergyValue sigma2;
  cplx e_total;
};

// First-order single-particle shift -(i/2) Σ_r U_r.
inline cplx first_order_shift(const InteractionSpec& in) {
  in.validate();
  return -0.5 * I * in.u_symbol.sum().real();
}

// Periodic node map k = k* + 2π w(t) with w'(t) = (3 - 4cos 2πt + cos 4πt)/3
// = (8/3) sin^4(πt); it clusters nodes around k* with a fourth-order zero.
struct ClusterMap {
  static double w(double t) {
    return t - (4.0 / 3.0) * std::sin(2 * pi * t) / (2 * pi) + (1.0 / 3.0) * std::sin(4 * pi * t) / (4 * pi);
  }
  static double dw(double t) { return (3.0 - 4.0 * std::cos(2 * pi * t) + std::cos(4 * pi * t)) / 3.0; }
};

struct BzOptions {
  std::optional<double> radius;          // contour radius for β1, β2; default |β|^{1/3}
  double regulator = 0.0;                // E -> E + ε
  std::optional<double> cluster_center;  // cluster nodes around this momentum
  const LaurentSymbol* z_symbol = nullptr;
  double pole_tol = 1e-8;
  int threads = 1;
};

namespace detail {

inline cplx vertex(const LaurentSymbol& u, cplx b1, cplx b2, cplx b3) {
  cplx u23 = u(b2 * b3);
  return u23 * u23 - u23 * u(b1 * b3);
}

// -(1/4) ∮∮ V / (E - X(β1) - X(β2) - X*(β3)), β3 = β/(β1 β2).
inline cplx bz_sum(const LaurentSymbol& x, const LaurentSymbol& xc, const LaurentSymbol& u, cplx e, cplx beta,
                   int n, const BzOptions& opt) {
  const double rad = opt.radius ? *opt.radius : std::cbrt(std::abs(beta));
  std::vector<double> k(static_cast<std::size_t>(n)), wt(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    double t = double(a) / n;
    if (opt.cluster_center) {
      k[static_cast<std::size_t>(a)] = *opt.cluster_center + 2 * pi * ClusterMap::w(t);
      wt[static_cast<std::size_t>(a)] = ClusterMap::dw(t);
    } else {
      k[static_cast<std::size_t>(a)] = 2 * pi * t;
      wt[static_cast<std::size_t>(a)] = 1.0;
    }
  }
  std::vector<cplx> b(static_cast<std::size_t>(n)), xb(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    b[static_cast<std::size_t>(a)] = std::polar(rad, k[static_cast<std::size_t>(a)]);
    xb[static_cast<std::size_t>(a)] = x(b[static_cast<std::size_t>(a)]);
  }
  const cplx ee = e + opt.regulator;
  std::vector<cplx> rows(static_cast<std::size_t>(n));
  parallel_for(n, opt.threads, [&](int a) {
    std::vector<cplx> terms(static_cast<std::size_t>(n));
    const std::size_t ia = static_cast<std::size_t>(a);
    for (int c = 0; c < n; ++c) {
      const std::size_t ic = static_cast<std::size_t>(c);
      double w = wt[ia] * wt[ic];
      if (w == 0.0) continue;
      cplx b1 = b[ia], b2 = b[ic], b3 = beta / (b1 * b2);
      cplx d = ee - xb[ia] - xb[ic] - xc(b3);
      if (std::abs(d) < opt.pole_tol)
        fail(ErrorKind::numeric_policy, "sigma_bz_double: pole at k1=" + std::to_string(k[ia]) +
                                            ", k2=" + std::to_string(k[ic]));
      cplx v = vertex(u, b1, b2, b3);
      if (opt.z_symbol) v *= 1.0 - (*opt.z_symbol)(b2) * (*opt.z_symbol)(b3);
      terms[ic] = w * v / d;
    }
    rows[ia] = pairwise_sum(terms);
  });
  return -0.25 * pairwise_sum(rows) / (double(n) * double(n));
}

}  // namespace detail

inline SelfEnergyValue sigma_bz_double(const LaurentSymbol& x, const InteractionSpec& in, cplx energy, cplx beta,
                                       int grid, const BzOptions& opt = {}) {
  in.validate();
  if (beta == cplx{} || !std::isfinite(std::abs(beta))) fail(ErrorKind::invalid_argument, "sigma_bz_double: invalid beta");
  if (grid < 4) fail(ErrorKind::invalid_argument, "sigma_bz_double: grid too small");
  SelfEnergyValue out;
  out.method = SigmaMethod::bz_double;
  out.quadrature_points = static_cast<long long>(grid) * grid;
  if (in.u_symbol.empty()) return out;
  LaurentSymbol xc = x.conj();
  cplx fine = detail::bz_sum(x, xc, in.u_symbol, energy, beta, grid, opt);
  cplx coarse = detail::bz_sum(x, xc, in.u_symbol, energy, beta, grid / 2, opt);
  out.value = fine;
  out.error_estimate = 0.5 * std::abs(fine - coarse);
  return out;
}

// Bulk Z(β) enters as the prefactor 1 - Z(β2) Z(β3).
inline SelfEnergyValue sigma_generic_z(const LaurentSymbol& x, const InteractionSpec& in, const LaurentSymbol& z,
                                       cplx energy, cplx beta, int grid, BzOptions opt = {}) {
  if (!z.empty()) opt.z_symbol = &z;
  return sigma_bz_double(x, in, energy, beta, grid, opt);
}

struct TripleOptions {
  bool dilate = true;  // place all three legs on |β|^{1/3}
  int threads = 1;
  double convergence_tol = 1e-4;
};

// Triple contour integral with the finite geometric sum Σ_{|r|<=r_max} w^r,
// w = β1β2β3/β. With dilate the legs sit on circles of radius |β|^{1/3}, so
// |w| = 1 and the sum is the Dirichlet kernel; deforming from the GBZ is
// exact while the denominator keeps a positive real part.
inline SelfEnergyValue sigma_gbz_triple(const LaurentSymbol& x, const InteractionSpec& in, const GbzCurve& gbz,
                                        cplx energy, cplx beta, int r_max, int n_contour,
                                        const TripleOptions& opt = {}) {
  in.validate();
  if (r_max < 20) fail(ErrorKind::invalid_argument, "sigma_gbz_triple: r_max must be at least 20");
  if (n_contour <= 2 * r_max) fail(ErrorKind::invalid_argument, "sigma_gbz_triple: n_contour must exceed 2*r_max");
  SelfEnergyValue out;
  out.method = SigmaMethod::gbz_triple;
  out.quadrature_points = static_cast<long long>(n_contour) * n_contour * n_contour;
  if (in.u_symbol.empty()) return out;
  const int n = n_contour;
  const double rho = gbz.mean_radius();
  const double rad = opt.dilate ? std::cbrt(std::abs(beta)) : rho;
  const double phase0 = std::arg(beta);
  const double lw = 3.0 * std::log(rad) - std::log(std::abs(beta));  // log|w|
  const LaurentSymbol xc = x.conj();
  std::vector<cplx> b(static_cast<std::size_t>(n)), xb(static_cast<std::size_t>(n)), xcb(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    b[static_cast<std::size_t>(a)] = std::polar(rad, 2 * pi * a / n);
    xb[static_cast<std::size_t>(a)] = x(b[static_cast<std::size_t>(a)]);
    xcb[static_cast<std::size_t>(a)] = xc(b[static_cast<std::size_t>(a)]);
  }
  auto kernel = [&](double phase, int rm) -> cplx {
    if (std::abs(lw) < 1e-14) {
      double s = std::sin(0.5 * phase);
      if (std::abs(s) < 1e-12) return double(2 * rm + 1);
      return std::sin((rm + 0.5) * phase) / s;
    }
    cplx w = std::polar(std::exp(lw), phase);
    cplx sum{};
    for (int r = -rm; r <= rm; ++r) sum += ipow(w, r);
    return sum;
  };
  const int rh = r_max / 2;
  std::vector<cplx> rows_full(static_cast<std::size_t>(n)), rows_half(static_cast<std::size_t>(n));
  std::vector<char> positive(static_cast<std::size_t>(n), 1);
  parallel_for(n, opt.threads, [&](int a) {
    std::vector<cplx> tf(static_cast<std::size_t>(n) * n), th(static_cast<std::size_t>(n) * n);
    for (int c = 0; c < n; ++c)
      for (int e3 = 0; e3 < n; ++e3) {
        const std::size_t ia = static_cast<std::size_t>(a), ic = static_cast<std::size_t>(c),
                          ie = static_cast<std::size_t>(e3);
        cplx d = energy - xb[ia] - xb[ic] - xcb[ie];
        if (d.real() <= 0) positive[ia] = 0;
        cplx f = detail::vertex(in.u_symbol, b[ia], b[ic], b[ie]) / d;
        double phase = 2 * pi * (a + c + e3) / n - phase0;
        tf[ic * n + ie] = f * kernel(phase, r_max);
        th[ic * n + ie] = f * kernel(phase, rh);
      }
    rows_full[static_cast<std::size_t>(a)] = pairwise_sum(tf);
    rows_half[static_cast<std::size_t>(a)] = pairwise_sum(th);
  });
  if (std::find(positive.begin(), positive.end(), 0) != positive.end())
    fail(ErrorKind::numeric_policy, "sigma_gbz_triple: denominator real part not positive on the contour");
  const double norm = -0.25 / (double(n) * n * n);
  out.value = norm * pairwise_sum(rows_full);
  cplx half = norm * pairwise_sum(rows_half);
  out.error_estimate = 0.5 * std::abs(out.value - half);
  out.converged = std::abs(out.value - half) <= opt.convergence_tol * std::abs(out.value);
  return out;
}

// ---- real-space route ---------------------------------------------------

inline Mat bulk_scaled_single(const Mat& x, double rho) { return ThreeParticleResolvent::scale(x, rho); }

// Resolvent built from the pure quadratic blocks (X for a-legs, X* for b).
inline ThreeParticleResolvent realspace_resolvent(const LindbladModel& model, const InteractionSpec& in, double rho) {
  Mat x = build_damping_matrix(model);
  RMat u = interaction_matrix(in.u_symbol, model.n_sites, model.boundary);
  return ThreeParticleResolvent(x, x.conjugate(), u, rho);
}

inline double model_skin_radius(const LindbladModel& model) {
  Mat x = build_damping_matrix(model);
  int m = 0;
  const int mid = model.n_sites / 2;
  for (int j = 0; j < model.n_sites; ++j)
    if (std::abs(x(mid, j)) > 0) m = std::max(m, std::abs(mid - j));
  if (m == 0) return 1.0;
  return skin_radius(LaurentSymbol::from_row(x, mid, m));
}

// ⟨i_a|𝓛_eff^(2)(E)|j_a⟩ = -(1/4) Σ_kl U_ik U_jl ⟨i,k;k|(E - Q𝓛0Q)^{-1}|j,l;l⟩.
inline cplx realspace_effective_element(const LindbladModel& model, const InteractionSpec& in, cplx energy, int i,
                                        int j, int max_sites = 40) {
  in.validate();
  if (model.n_sites > max_sites) fail(ErrorKind::size_guard, "realspace_effective_element: N above size guard");
  if (i < 0 || j < 0 || i >= model.n_sites || j >= model.n_sites)
    fail(ErrorKind::invalid_argument, "realspace_effective_element: site index out of range");
  if (in.u_symbol.empty()) return 0.0;
  double rho = model_skin_radius(model);
  auto res = realspace_resolvent(model, in, rho);
  Vec col = res.effective_scaled_column(energy, j);
  return col(i) * std::pow(rho, i - j);
}

// Σ_r β^{-r} ⟨(i0+r)_a|𝓛_eff^(2)(E)|i0_a⟩ over |r| <= r_max.
inline SelfEnergyValue realspace_laurent(const LindbladModel& model, const InteractionSpec& in, cplx energy,
                                         cplx beta, int i0, int r_max) {
  in.validate();
  SelfEnergyValue out;
  out.method = SigmaMethod::realspace;
  if (in.u_symbol.empty()) return out;
  if (i0 - r_max < 0 || i0 + r_max >= model.n_sites)
    fail(ErrorKind::invalid_argument, "realspace_laurent: r window leaves the chain");
  double rho = model_skin_radius(model);
  auto res = realspace_resolvent(model, in, rho);
  Vec col = res.effective_scaled_column(energy, i0);
  cplx s{}, tail{};
  for (int r = -r_max; r <= r_max; ++r) {
    // ρ^{r} β^{-r} with the scaled element
    cplx term = col(i0 + r) * ipow(cplx(rho) / beta, r);
    s += term;
    if (std::abs(r) == r_max) tail += term;
  }
  out.value = s;
  out.error_estimate = std::abs(tail);
  out.quadrature_points = 2 * r_max + 1;
  return out;
}

// ---- eigenstate weighting -------------------------------------------------

inline cplx weighted_pair(cplx wm, cplx wm1, cplx sm, cplx sm1) {
  cplx den = wm + wm1;
  if (std::abs(den) < 1e-300 || std::abs(den) < 1e-12 * (std::abs(wm) + std::abs(wm1)))
    fail(ErrorKind::singular, "eigenstate_correction: vanishing weight denominator");
  return (wm * sm + wm1 * sm1) / den;
}

// sigma_at_roots is aligned with decomp.roots; only μ = M, M+1 enter.
inline cplx eigenstate_correction(const EigenstateDecomposition& d, const std::vector<cplx>& sigma_at_roots) {
  const std::size_t m = d.roots.size() / 2;
  if (m == 0 || sigma_at_roots.size() != d.roots.size())
    fail(ErrorKind::invalid_argument, "eigenstate_correction: need one value per root");
  return weighted_pair(d.phi_r[m - 1] * d.phi_l[m - 1], d.phi_r[m] * d.phi_l[m], sigma_at_roots[m - 1],
                       sigma_at_roots[m]);
}

struct EigenstateSigma {
  SelfEnergyValue value;
  PairWeights weights;
  cplx sigma_m, sigma_m1;
};

// Σ for the OBC eigenstate at energy E0 from the asymptotic pair weights.
inline EigenstateSigma eigenstate_sigma(const LaurentSymbol& x, const InteractionSpec& in, cplx e0, cplx e_eval,
                                        int grid, const BzOptions& opt = {}) {
  EigenstateSigma out;
  out.weights = asymptotic_pair_weights(x, e0);
  auto s1 = sigma_bz_double(x, in, e_eval, out.weights.beta_m, grid, opt);
  out.sigma_m = s1.value;
  if (std::abs(out.weights.beta_m - out.weights.beta_m1) < 1e-7 * std::abs(out.weights.beta_m)) {
    out.sigma_m1 = s1.value;
    out.value = s1;
    return out;
  }
  auto s2 = sigma_bz_double(x, in, e_eval, out.weights.beta_m1, grid, opt);
  out.sigma_m1 = s2.value;
  out.value = s1;
  out.value.value = weighted_pair(out.weights.w_m, out.weights.w_m1, s1.value, s2.value);
  out.value.error_estimate = std::max(s1.error_estimate, s2.error_estimate);
  out.value.quadrature_points = s1.quadrature_points + s2.quadrature_points;
  return out;
}

// ---- hopping table -------------------------------------------------------

struct HoppingEntry {
  int r;
  cplx coeff;
  double raw_abs;
  double scaled_abs;  // |c_r| ρ^r
};

struct HoppingOptions {
  int n_projection = 64;
  int grid = 128;
  int threads = 1;
};

// c_r = ∮ dβ'/(2πiβ') β'^r Σ(E, β') on the GBZ circle of radius ρ.
inline std::vector<HoppingEntry> realspace_hopping_table(const LaurentSymbol& x, const InteractionSpec& in,
                                                         const GbzCurve& gbz, cplx energy, int r_range,
                                                         const HoppingOptions& opt = {}) {
  in.validate();
  const double rho = gbz.mean_radius();
  const int np = opt.n_projection;
  if (np <= 2 * r_range) fail(ErrorKind::invalid_argument, "realspace_hopping_table: n_projection must exceed 2*r_range");
  std::vector<cplx> sig(static_cast<std::size_t>(np));
  std::vector<cplx> bs(static_cast<std::size_t>(np));
  BzOptions bo;
  bo.threads = 1;
  parallel_for(np, opt.threads, [&](int k) {
    cplx b = std::polar(rho, 2 * pi * k / np);
    bs[static_cast<std::size_t>(k)] = b;
    sig[static_cast<std::size_t>(k)] = in.u_symbol.empty() ? cplx{} : sigma_bz_double(x, in, energy, b, opt.grid, bo).value;
  });
  std::vector<HoppingEntry> out;
  for (int r = -r_range; r <= r_range; ++r) {
    std::vector<cplx> t(static_cast<std::size_t>(np));
    for (int k = 0; k < np; ++k)
      t[static_cast<std::size_t>(k)] = std::polar(1.0, 2 * pi * double(r) * k / np) * sig[static_cast<std::size_t>(k)];
    cplx c = pairwise_sum(t) / double(np) * std::pow(rho, r);
    out.push_back({r, c, std::abs(c), std::abs(c) * std::pow(rho, r)});
  }
  return out;
}

inline cplx evaluate_hopping_table(const std::vector<HoppingEntry>& t, cplx beta) {
  cplx s{};
  for (auto& e : t) s += e.coeff * ipow(beta, -e.r);
  return s;
}

// ---- PBC -------------------------------------------------------------------

struct PbcOptions {
  bool interaction_shifted = true;  // evaluate at E = X(e^{ik}) + first-order shift
  double regulator = 0.0;
  int threads = 1;
};

inline SelfEnergyValue pbc_self_energy(const LaurentSymbol& x, const InteractionSpec& in, double k, int grid,
                                       const PbcOptions& opt = {}) {
  cplx beta = std::polar(1.0, k);
  cplx e = x(beta);
  if (opt.interaction_shifted) e += first_order_shift(in);
  BzOptions bo;
  bo.radius = 1.0;
  bo.cluster_center = k;
  bo.regulator = opt.regulator;
  bo.threads = opt.threads;
  return sigma_bz_double(x, in, e, beta, grid, bo);
}

// ---- Liouvillian gap ---------------------------------------------------------

struct GapOptions {
  int grid = 256;
  bool self_consistent = false;
  int threads = 1;
  NumericPolicy policy{};
};

struct GapResult {
  double gap = 0;
  cplx argmax_beta;
  double argmax_theta = 0;
  std::vector<PerturbedBandPoint> points;
  bool self_consistent_converged = true;
};

// Sweep of eigenstate energies over the GBZ: θ ∈ [0, π] on a circular GBZ,
// every sample otherwise. Each point uses the eigenstate-weighted Σ of the
// modulus-degenerate root pair.
inline GapResult liouvillian_gap(const LaurentSymbol& x, const InteractionSpec& in, const GbzCurve& gbz, int n_angles,
                                 const GapOptions& opt = {}) {
  in.validate();
  std::vector<std::pair<double, cplx>> energies;
  if (gbz.analytic_radius) {
    if (n_angles < 2) fail(ErrorKind::invalid_argument, "liouvillian_gap: need at least 2 angles");
    for (int k = 0; k < n_angles; ++k) {
      double th = pi * k / (n_angles - 1);
      energies.push_back({th, x(std::polar(*gbz.analytic_radius, th))});
    }
  } else {
    for (auto& s : gbz.samples) energies.push_back({std::arg(s.beta), s.energy});
  }
  const cplx s1 = first_order_shift(in);
  GapResult out;
  out.points.resize(energies.size());
  std::vector<int> sc_ok(energies.size(), 1);
  BzOptions bo;
  bo.threads = 1;
  parallel_for(static_cast<int>(energies.size()), opt.threads, [&](int idx) {
    auto [th, e0] = energies[static_cast<std::size_t>(idx)];
    PerturbedBandPoint p;
    p.theta = th;
    p.e0 = e0;
    p.sigma1 = s1;
    auto es = eigenstate_sigma(x, in, e0, e0, opt.grid, bo);
    p.beta = es.weights.beta_m1;
    p.sigma2 = es.value;
    if (opt.self_consistent && !in.u_symbol.empty()) {
      cplx e = e0 + s1 + es.value.value;
      bool ok = false;
      SelfEnergyValue last = es.value;
      for (int it = 0; it < opt.policy.selfconsistent_max_iter; ++it) {
        auto cur = eigenstate_sigma(x, in, e0, e, opt.grid, bo);
        cplx target = e0 + s1 + cur.value.value;
        cplx next = (1.0 - opt.policy.selfconsistent_mixing) * e + opt.policy.selfconsistent_mixing * target;
        last = cur.value;
        if (std::abs(next - e) <= opt.policy.selfconsistent_tol * std::abs(e)) {
          e = next;
          ok = true;
          break;
        }
        e = next;
      }
      if (ok) p.sigma2 = last;
      else sc_ok[static_cast<std::size_t>(idx)] = 0;
    }
    p.e_total = p.e0 + p.sigma1 + p.sigma2.value;
    out.points[static_cast<std::size_t>(idx)] = p;
  });
  double best = -1e300;
  for (std::size_t k = 0; k < out.points.size(); ++k) {
    if (!sc_ok[k]) out.self_consistent_converged = false;
    double re = out.points[k].e_total.real();
    if (re > best + 1e-15) {
      best = re;
      out.argmax_beta = out.points[k].beta;
      out.argmax_theta = out.points[k].theta;
    }
  }
  out.gap = -best;
  return out;
}

}  // namespace nbsigma
