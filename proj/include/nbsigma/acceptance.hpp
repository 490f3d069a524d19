#pragma once

// Acceptance checks shared by the acceptance test binary and `nbsigma --check`.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nbsigma/ed.hpp"
#include "nbsigma/extended.hpp"
#include "nbsigma/self_energy.hpp"
#include "nbsigma/superoperator.hpp"

namespace nbsigma::acceptance {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;  // extra measured values, not part of the verdict
  double seconds = 0;
  double time_limit = 0;
};

inline std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Preset {
  double t = 1.0, gamma = 0.5, u = 0.02;
  double gamma0 = 1.1;
  int threads = 0;
};

inline double relative(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

// Least-squares slope of log|y| against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double lx = std::log(x[k]), ly = std::log(std::abs(y[k]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline CheckResult gbz_radius(const Preset& p) {
  CheckResult c{1, "GBZ radius"};
  c.time_limit = 5;
  auto x = presets::hatano_nelson_symbol(p.t, p.gamma);
  auto gbz = compute_gbz(x, 512);
  const double want = std::sqrt((p.t + p.gamma) / (p.t - p.gamma));
  double dr = gbz.analytic_radius ? std::abs(*gbz.analytic_radius - want) : 1e300;
  double worst = 0;
  for (auto& s : gbz.samples) worst = std::max(worst, std::abs(std::abs(s.beta) - want));
  c.pass = dr < 1e-6 && worst < 1e-4;
  c.detail = fmt("|radius - sqrt(3)| = %.2e (tol 1e-6), max sample deviation %.2e (tol 1e-4)", dr, worst);
  return c;
}

inline CheckResult method_equivalence(const Preset& p) {
  CheckResult c{2, "triple GBZ integral vs BZ double integral"};
  c.time_limit = 60;
  auto x = presets::hatano_nelson_symbol(p.t, p.gamma);
  auto in = InteractionSpec::nearest_neighbour(p.u);
  auto gbz = compute_gbz(x, 512);
  const double rho = *gbz.analytic_radius;
  TripleOptions to;
  to.threads = p.threads;
  BzOptions bo;
  bo.threads = p.threads;
  double worst = 0;
  bool converged = true;
  for (double th : {pi / 4, pi / 2, 3 * pi / 4}) {
    cplx b = std::polar(rho, th);
    auto tri = sigma_gbz_triple(x, in, gbz, x(b), b, 60, 128, to);
    auto dbl = sigma_bz_double(x, in, x(b), b, 256, bo);
    worst = std::max(worst, relative(tri.value, dbl.value));
    converged = converged && tri.converged;
  }
  c.pass = worst < 1e-4;
  c.detail = fmt("max relative difference %.2e (tol 1e-4) at theta in {pi/4, pi/2, 3pi/4}", worst);
  if (!converged) c.notes.push_back("triple integral reported r_max not converged");
  return c;
}

inline CheckResult realspace_equivalence(const Preset& p) {
  CheckResult c{3, "real-space Laurent transform vs BZ double integral"};
  c.time_limit = 300;
  auto x = presets::hatano_nelson_symbol(p.t, p.gamma);
  auto in = InteractionSpec::nearest_neighbour(p.u);
  auto model = presets::hatano_nelson(31, p.t, p.gamma, Boundary::open_toeplitz);
  const double rho = skin_radius(x);
  BzOptions bo;
  bo.threads = p.threads;
  double worst = 0;
  for (double th : {pi / 6, pi / 3, pi / 2, 2 * pi / 3, 5 * pi / 6}) {
    cplx b = std::polar(rho, th);
    auto rs = realspace_laurent(model, in, x(b), b, 15, 12);
    auto dbl = sigma_bz_double(x, in, x(b), b, 256, bo);
    worst = std::max(worst, relative(rs.value, dbl.value));
  }
  c.pass = worst < 1e-3;
  c.detail = fmt("N=31, |r|<=12, 5 GBZ points: max relative difference %.2e (tol 1e-3)", worst);
  return c;
}

struct LadderResult {
  ScalingSeries series;
  cplx intercept;
};

inline LadderResult ed_ladder(const Preset& p, double u, Boundary b, const std::vector<int>& sizes) {
  LadderResult r;
  EdOptions eo;
  eo.threads = p.threads;
  auto in = InteractionSpec::nearest_neighbour(u);
  for (int n : sizes) {
    auto model = presets::hatano_nelson(n, p.t, p.gamma, b);
    auto res = ed_selfenergy(model, in, ed_target_energy(model, pi / 2), eo);
    r.series.sizes.push_back(n);
    r.series.values.push_back(res.shift);
  }
  r.intercept = finite_size_extrapolate(r.series);
  return r;
}

// The ladder runs on the open chain whose damping matrix is the exact Toeplitz
// section of X(β); the line with the defect edge channels is reported as a note.
inline CheckResult ed_benchmark(const Preset& p) {
  CheckResult c{4, "ED finite-size extrapolation at theta=pi/2"};
  c.time_limit = 1800;
  const std::vector<int> sizes{11, 15, 19, 23, 27, 31};
  auto x = presets::hatano_nelson_symbol(p.t, p.gamma);
  auto in = InteractionSpec::nearest_neighbour(p.u);
  const double rho = skin_radius(x);
  cplx b = std::polar(rho, pi / 2);
  BzOptions bo;
  bo.threads = p.threads;
  cplx s1 = first_order_shift(in);
  cplx s2 = sigma_bz_double(x, in, x(b), b, 256, bo).value;
  cplx s2w = eigenstate_sigma(x, in, x(b), x(b), 256, bo).value.value;

  auto lad = ed_ladder(p, p.u, Boundary::open_toeplitz, sizes);
  double res = lad.series.relative_residual;
  double rel_total = relative(lad.intercept, s1 + s2);
  double rel_real = std::abs(lad.intercept.real() - s2w.real()) / std::abs(s2w.real());
  c.pass = res < 0.05 && rel_total < 0.02 && rel_real < 0.02;
  c.detail = fmt("fit residual %.2e (tol 5e-2); intercept (%.6e, %.6e) vs first order + Sigma_BZ (%.6e, %.6e): "
                 "rel %.2e (tol 2e-2); Re intercept vs eigenstate Sigma %.6e: rel %.2e (tol 2e-2)",
                 res, lad.intercept.real(), lad.intercept.imag(), (s1 + s2).real(), (s1 + s2).imag(), rel_total,
                 s2w.real(), rel_real);
  auto open = ed_ladder(p, p.u, Boundary::open, sizes);
  c.notes.push_back(fmt("edge channels j=1..N-1: fit residual %.2e, intercept (%.6e, %.6e), rel to first order + "
                        "Sigma_BZ %.2e",
                        open.series.relative_residual, open.intercept.real(), open.intercept.imag(),
                        relative(open.intercept, s1 + s2)));
  return c;
}

inline CheckResult u2_scaling(const Preset& p) {
  CheckResult c{5, "u^2 scaling of PBC gap opening and OBC ED shift"};
  c.time_limit = 600;
  auto x = presets::hatano_nelson_symbol(p.t, p.gamma);
  const std::vector<double> us{0.005, 0.01, 0.02, 0.04};
  std::vector<double> pbc, ed;
  PbcOptions po;
  po.threads = p.threads;
  EdOptions eo;
  eo.threads = p.threads;
  auto model = presets::hatano_nelson(31, p.t, p.gamma, Boundary::open_toeplitz);
  cplx e0 = ed_target_energy(model, pi / 2);
  for (double u : us) {
    auto in = InteractionSpec::nearest_neighbour(u);
    pbc.push_back(pbc_self_energy(x, in, -pi / 2, 128, po).value.real());
    ed.push_back(ed_selfenergy(model, in, e0, eo).shift.real());
  }
  double sp = loglog_slope(us, pbc), se = loglog_slope(us, ed);
  c.pass = std::abs(sp - 2.0) <= 0.1 && std::abs(se - 2.0) <= 0.1;
  c.detail = fmt("PBC k=-pi/2 slope %.4f, OBC ED (N=31) slope %.4f (target 2.0 +- 0.1)", sp, se);
  return c;
}

inline CheckResult nonreciprocity(const Preset& p) {
  CheckResult c{6, "interaction-induced hopping non-reciprocity"};
  c.time_limit = 120;
  auto x = presets::hatano_nelson_symbol(p.t, p.gamma);
  auto in = InteractionSpec::nearest_neighbour(p.u);
  auto gbz = compute_gbz(x, 512);
  const double rho = *gbz.analytic_radius;
  HoppingOptions ho;
  ho.threads = p.threads;
  bool ok = true;
  std::string d;
  for (double th : {0.0, pi / 2}) {
    auto table = realspace_hopping_table(x, in, gbz, x(std::polar(rho, th)), 4, ho);
    auto at = [&](int r) { return table[static_cast<std::size_t>(r + 4)].scaled_abs; };
    d += fmt("%stheta=%.4f:", d.empty() ? "" : "; ", th);
    for (int r : {2, 3, 4}) {
      ok = ok && at(r) > at(-r);
      d += fmt(" r=%d %.2e>%.2e", r, at(r), at(-r));
    }
  }
  c.pass = ok;
  c.detail = "scaled |c_r| vs |c_-r| at " + d;
  return c;
}

inline CheckResult nnn_transition(const Preset& p) {
  CheckResult c{7, "NNN PT transition of the OBC damping spectrum"};
  c.time_limit = 120;
  auto family = [&](double t2) { return presets::nnn_symbol(p.t, p.gamma, p.gamma0, t2); };
  auto tr = locate_pt_transition(family, 0.04, 0.1, 120, 1e-6, 1e-3);
  double d04 = tr.dev_start, d10 = tr.dev_end;
  double mid = 0.5 * (tr.lo + tr.hi);
  c.pass = d04 < 1e-6 && d10 > 1e-3 && tr.lo >= 0.045 && tr.hi <= 0.065;
  c.detail = fmt("N=120: deviation %.2e at t2=0.04 (<1e-6), %.2e at t2=0.1 (>1e-3); crossing in [%.5f, %.5f] "
                 "(required within [0.045, 0.065])",
                 d04, d10, tr.lo, tr.hi);
  c.notes.push_back(fmt("bisection midpoint t2c = %.4f after %d spectra", mid, tr.evaluations));
  return c;
}

inline LindbladModel random_model(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(2, 9), cd(1, 4);
  std::normal_distribution<double> g;
  LindbladModel m;
  m.n_sites = nd(rng);
  const int n = m.n_sites;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
  m.h = 0.5 * (a + a.adjoint());
  auto fill = [&](int rows) {
    Mat d(rows, n);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = cplx(g(rng), g(rng)) * 0.5;
    return d;
  };
  m.d_loss = fill(cd(rng) + n);
  m.d_gain = fill(cd(rng));
  m.boundary = Boundary::open;
  return m;
}

inline CheckResult structural(const Preset& p) {
  CheckResult c{8, "structural suite"};
  c.time_limit = 60;
  std::mt19937_64 rng(20240611);
  double worst_res = 0, worst_re = -1e300;
  for (int k = 0; k < 50; ++k) {
    auto m = random_model(rng);
    auto blocks = block_diagonalize(m);
    BathMatrices b = build_bath_matrices(m);
    Mat src = 2.0 * b.m_gain.transpose() - 2.0 * b.m_loss;
    worst_res = std::max(worst_res, lyapunov_residual(blocks.x, blocks.z, src));
    Eigen::ComplexEigenSolver<Mat> es(blocks.x, false);
    worst_re = std::max(worst_re, es.eigenvalues().real().maxCoeff());
  }
  for (auto bd : {Boundary::open, Boundary::open_toeplitz, Boundary::periodic}) {
    Eigen::ComplexEigenSolver<Mat> es(build_damping_matrix(presets::hatano_nelson(12, p.t, p.gamma, bd)), false);
    worst_re = std::max(worst_re, es.eigenvalues().real().maxCoeff());
  }
  auto hn4 = presets::hatano_nelson(4, p.t, p.gamma, Boundary::open);
  SpMat l = build_full_superoperator(hn4, presets::nearest_neighbour_interaction(p.u));
  double steady = (l * vectorized_identity(4)).norm();

  auto x = presets::hatano_nelson_symbol(p.t, p.gamma);
  cplx b = std::polar(std::sqrt(3.0), pi / 2);
  cplx zero = sigma_bz_double(x, InteractionSpec::nearest_neighbour(0.0), x(b), b, 64).value;
  cplx s1 = first_order_shift(InteractionSpec::nearest_neighbour(p.u));

  c.pass = worst_res < 1e-10 && worst_re <= 1e-10 && steady < 1e-10 && zero == cplx{} && s1.real() == 0.0 &&
           s1.imag() != 0.0;
  c.detail = fmt("Lyapunov residual %.2e (<1e-10, 50 models); max Re spec(X) %.2e (<=1e-10); ||L|I>|| %.2e "
                 "(<1e-10, N=4); u=0 Sigma (%g, %g); first order (%g, %g)",
                 worst_res, worst_re, steady, zero.real(), zero.imag(), s1.real(), s1.imag());
  return c;
}

using Check = std::function<CheckResult(const Preset&)>;

inline std::vector<Check> all_checks() {
  return {gbz_radius, method_equivalence, realspace_equivalence, ed_benchmark,
          u2_scaling, nonreciprocity,     nnn_transition,        structural};
}

inline CheckResult run_timed(const Check& f, const Preset& p, int id) {
  auto t0 = std::chrono::steady_clock::now();
  CheckResult c;
  try {
    c = f(p);
  } catch (const std::exception& e) {
    c = CheckResult{id, "check aborted"};
    c.detail = std::string("error: ") + e.what();
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (c.time_limit > 0 && c.seconds > c.time_limit) {
    c.pass = false;
    c.notes.push_back(fmt("runtime %.1f s exceeds the %.0f s budget", c.seconds, c.time_limit));
  }
  return c;
}

inline std::string format_line(const CheckResult& c) {
  return fmt("[%s] criterion %d: %s | ", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str()) + c.detail +
         fmt(" | %.1f s", c.seconds);
}

}  // namespace nbsigma::acceptance
