#pragma once

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "config.hpp"
#include "nbsigma/acceptance.hpp"
#include "nbsigma/ed.hpp"
#include "nbsigma/extended.hpp"
#include "nbsigma/self_energy.hpp"

namespace nbsigma::cli {

inline constexpr const char* version = "1.0.0";

namespace fs = std::filesystem;

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& cols) : out_(path), n_(cols.size()) {
    if (!out_) fail(ErrorKind::config, "output: cannot write " + path.string());
    for (std::size_t k = 0; k < cols.size(); ++k) out_ << (k ? "," : "") << cols[k];
    out_ << '\n';
  }

  CsvWriter& operator<<(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return put(buf);
  }
  CsvWriter& operator<<(int v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(long long v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(const std::string& s) { return put(s); }
  CsvWriter& operator<<(cplx z) { return *this << z.real() << z.imag(); }

  void end() {
    if (col_ != n_) fail(ErrorKind::dimension, "csv: row width does not match the header");
    out_ << '\n';
    col_ = 0;
  }

 private:
  CsvWriter& put(const std::string& s) {
    if (col_++) out_ << ',';
    out_ << s;
    return *this;
  }

  std::ofstream out_;
  std::size_t n_, col_ = 0;
};

struct Context {
  RunConfig cfg;
  fs::path out;
  int threads = 1;
  json results = json::object();
  std::vector<std::string> files;

  CsvWriter csv(const std::string& name, const std::vector<std::string>& cols) {
    files.push_back(name);
    return CsvWriter(out / name, cols);
  }
};

inline json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

inline bool is_nnn(const Context& c) { return c.cfg.model.preset == "nnn"; }

inline LaurentSymbol symbol(const ModelConfig& m) {
  return m.preset == "nnn" ? presets::nnn_symbol(m.t, m.gamma, m.gamma0, m.t2)
                           : presets::hatano_nelson_symbol(m.t, m.gamma);
}

inline LindbladModel chain(const ModelConfig& m, int n, Boundary b) {
  return m.preset == "nnn" ? presets::nnn(n, m.t, m.gamma, m.gamma0, m.t2, b) : presets::hatano_nelson(n, m.t, m.gamma, b);
}

inline GbzCurve gbz_for(const Context& c) {
  auto x = symbol(c.cfg.model);
  GbzOptions o;
  o.reference_size = c.cfg.params.reference_size;
  if (is_nnn(c)) o.spectrum = obc_spectrum_quad;
  return compute_gbz(x, c.cfg.params.n_samples, o);
}

// GBZ point whose argument is closest to θ.
inline cplx gbz_point(const GbzCurve& g, double theta) {
  if (g.analytic_radius) return std::polar(*g.analytic_radius, theta);
  cplx best = g.samples.front().beta;
  double bd = 1e300;
  for (auto& s : g.samples) {
    double d = std::abs(std::remainder(std::arg(s.beta) - theta, 2 * pi));
    if (d < bd) {
      bd = d;
      best = s.beta;
    }
  }
  return best;
}

// n angles on the upper half of the GBZ, θ ∈ [0, π].
inline std::vector<std::pair<double, cplx>> half_sweep(const GbzCurve& g, int n) {
  std::vector<std::pair<double, cplx>> pts;
  if (g.analytic_radius) {
    for (int k = 0; k < n; ++k) {
      double th = n == 1 ? pi / 2 : pi * k / (n - 1);
      pts.push_back({th, std::polar(*g.analytic_radius, th)});
    }
    return pts;
  }
  std::vector<cplx> upper;
  for (auto& s : g.samples)
    if (std::arg(s.beta) >= 0) upper.push_back(s.beta);
  if (upper.empty()) fail(ErrorKind::numeric_policy, "sweep: no GBZ samples with arg >= 0");
  for (int k = 0; k < n; ++k) {
    std::size_t idx = n == 1 ? upper.size() / 2 : static_cast<std::size_t>(k) * (upper.size() - 1) / (n - 1);
    pts.push_back({std::arg(upper[idx]), upper[idx]});
  }
  return pts;
}

inline InteractionSpec interaction(double u) { return InteractionSpec::nearest_neighbour(u); }

inline BzOptions bz_options(const Context& c) {
  BzOptions bo;
  bo.threads = c.threads;
  bo.pole_tol = c.cfg.policy.pole_tol;
  return bo;
}

// ---- tasks -------------------------------------------------------------------

inline void task_gbz(Context& c) {
  auto x = symbol(c.cfg.model);
  auto g = gbz_for(c);
  auto w = c.csv("gbz.csv", {"index", "re_beta", "im_beta", "abs_beta", "arg_beta", "re_energy", "im_energy"});
  double mn = 1e300, mx = 0, gap = 0;
  const std::size_t m = static_cast<std::size_t>(x.range());
  for (std::size_t k = 0; k < g.samples.size(); ++k) {
    const auto& s = g.samples[k];
    w << static_cast<int>(k) << s.beta << std::abs(s.beta) << std::arg(s.beta) << s.energy;
    w.end();
    mn = std::min(mn, std::abs(s.beta));
    mx = std::max(mx, std::abs(s.beta));
    auto r = characteristic_roots(x, s.energy);
    gap = std::max(gap, std::abs(std::abs(r[m]) - std::abs(r[m - 1])) / std::abs(r[m - 1]));
  }
  c.results["n_points"] = g.samples.size();
  c.results["analytic_radius"] = g.analytic_radius ? json(*g.analytic_radius) : json(nullptr);
  c.results["skin_radius"] = skin_radius(x);
  c.results["min_abs_beta"] = mn;
  c.results["max_abs_beta"] = mx;
  c.results["max_modulus_gap"] = gap;
  if (c.cfg.params.aux_phi > 0) {
    auto a = auxiliary_gbz(x, c.cfg.params.aux_phi);
    auto wa = c.csv("agbz.csv", {"index", "re_beta", "im_beta", "abs_beta", "re_energy", "im_energy"});
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
      wa << static_cast<int>(k) << a.samples[k].beta << std::abs(a.samples[k].beta) << a.samples[k].energy;
      wa.end();
    }
    c.results["agbz_points"] = a.samples.size();
  }
}

inline void task_spectrum(Context& c) {
  auto x = symbol(c.cfg.model);
  const int n = c.cfg.model.n_sites;
  auto ev = is_nnn(c) ? obc_spectrum_quad(x, n) : obc_spectrum(x, n);
  auto w = c.csv("spectrum.csv", {"index", "re_lambda", "im_lambda", "deviation"});
  double maxre = -1e300, dev = 0;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    double d = std::abs(ev[k].real() - x.coeff(0).real());
    w << static_cast<int>(k) << ev[k] << d;
    w.end();
    maxre = std::max(maxre, ev[k].real());
    dev = std::max(dev, d);
  }
  c.results["n_sites"] = n;
  c.results["max_re_lambda"] = maxre;
  c.results["max_deviation"] = dev;
  if (!c.cfg.params.t2_values.empty()) {
    if (!is_nnn(c)) fail(ErrorKind::config, "config: field 'params.t2_values' needs the nnn preset");
    auto wp = c.csv("pt_scan.csv", {"t2", "max_deviation"});
    for (double t2 : c.cfg.params.t2_values) {
      ModelConfig m = c.cfg.model;
      m.t2 = t2;
      wp << t2 << pt_deviation(symbol(m), n);
      wp.end();
    }
  }
}

// One row per (GBZ point, method).
inline void task_self_energy_sweep(Context& c) {
  auto x = symbol(c.cfg.model);
  auto in = interaction(c.cfg.model.u);
  auto g = gbz_for(c);
  const auto& q = c.cfg.params;
  auto pts = half_sweep(g, q.n_angles);
  std::optional<LindbladModel> rs_model;
  if (std::find(q.methods.begin(), q.methods.end(), "realspace") != q.methods.end())
    rs_model = chain(c.cfg.model, c.cfg.model.n_sites, Boundary::open_toeplitz);
  auto w = c.csv("self_energy.csv", {"theta", "re_beta", "im_beta", "re_e0", "im_e0", "re_sigma1", "im_sigma1",
                                     "re_sigma2", "im_sigma2", "re_total", "im_total", "err_estimate", "method"});
  auto bo = bz_options(c);
  TripleOptions to;
  to.threads = c.threads;
  const cplx s1 = first_order_shift(in);
  for (auto [th, b] : pts) {
    cplx e0 = x(b);
    for (auto& m : q.methods) {
      SelfEnergyValue v;
      if (m == "bz_double") v = sigma_bz_double(x, in, e0, b, q.grid, bo);
      else if (m == "eigenstate") v = eigenstate_sigma(x, in, e0, e0, q.grid, bo).value;
      else if (m == "gbz_triple") v = sigma_gbz_triple(x, in, g, e0, b, q.r_max, q.n_contour, to);
      else v = realspace_laurent(*rs_model, in, e0, b, rs_model->n_sites / 2, q.realspace_r_max);
      w << th << b << e0 << s1 << v.value << e0 + s1 + v.value << v.error_estimate << m;
      w.end();
    }
  }
  c.results["n_points"] = pts.size();
  c.results["first_order_shift"] = cjson(s1);
}

inline void task_hopping_table(Context& c) {
  auto x = symbol(c.cfg.model);
  auto in = interaction(c.cfg.model.u);
  auto g = gbz_for(c);
  const auto& q = c.cfg.params;
  std::vector<double> thetas = q.thetas.empty() ? std::vector<double>{0.0, pi / 2} : q.thetas;
  HoppingOptions ho;
  ho.n_projection = q.n_projection;
  ho.grid = q.grid;
  ho.threads = c.threads;
  auto w = c.csv("hopping.csv", {"theta", "r", "re_coeff", "im_coeff", "abs_coeff", "scaled_abs"});
  json per = json::array();
  for (double th : thetas) {
    cplx b = gbz_point(g, th);
    auto table = realspace_hopping_table(x, in, g, x(b), q.r_range, ho);
    json dom = json::array();
    for (auto& e : table) {
      w << th << e.r << e.coeff << e.raw_abs << e.scaled_abs;
      w.end();
    }
    for (int r = 1; r <= q.r_range; ++r)
      dom.push_back(table[static_cast<std::size_t>(q.r_range + r)].scaled_abs >
                    table[static_cast<std::size_t>(q.r_range - r)].scaled_abs);
    per.push_back({{"theta", th}, {"right_dominates_r1_to_rmax", dom}});
  }
  c.results["radius"] = g.mean_radius();
  c.results["tables"] = per;
}

inline EdResult run_ed(const Context& c, int n, double u, double theta, cplx& e0) {
  auto model = chain(c.cfg.model, n, c.cfg.model.boundary);
  e0 = ed_target_energy(model, theta);
  EdOptions eo;
  eo.solver = c.cfg.params.solver;
  eo.threads = c.threads;
  eo.policy = c.cfg.policy;
  return ed_selfenergy(model, interaction(u), e0, eo);
}

// first order + eigenstate Σ at the GBZ point of angle θ.
inline cplx analytic_shift(const Context& c, const GbzCurve& g, double u, double theta) {
  auto x = symbol(c.cfg.model);
  auto in = interaction(u);
  cplx b = gbz_point(g, theta);
  return first_order_shift(in) + eigenstate_sigma(x, in, x(b), x(b), c.cfg.params.grid, bz_options(c)).value.value;
}

inline void task_ed_compare(Context& c) {
  const auto& q = c.cfg.params;
  std::vector<int> sizes = q.sizes.empty() ? std::vector<int>{c.cfg.model.n_sites} : q.sizes;
  std::vector<double> thetas = q.thetas.empty() ? std::vector<double>{pi / 2} : q.thetas;
  auto g = gbz_for(c);
  const double u = c.cfg.model.u;
  auto w = c.csv("ed_compare.csv", {"n_sites", "u", "theta", "re_shift", "im_shift", "solver", "iterations", "residual",
                                    "boundary", "re_e0", "im_e0", "re_analytic", "im_analytic"});
  double worst = 0;
  for (double th : thetas) {
    cplx an = analytic_shift(c, g, u, th);
    for (int n : sizes) {
      cplx e0;
      auto r = run_ed(c, n, u, th, e0);
      w << n << u << th << r.shift << r.solver << r.iterations << r.residual << to_string(c.cfg.model.boundary) << e0
        << an;
      w.end();
      worst = std::max(worst, std::abs(r.shift - an) / std::abs(an));
    }
  }
  c.results["max_relative_difference"] = worst;
}

inline void task_gap(Context& c) {
  auto x = symbol(c.cfg.model);
  auto in = interaction(c.cfg.model.u);
  auto g = gbz_for(c);
  GapOptions go;
  go.grid = c.cfg.params.grid;
  go.self_consistent = c.cfg.params.self_consistent;
  go.threads = c.threads;
  go.policy = c.cfg.policy;
  auto res = liouvillian_gap(x, in, g, c.cfg.params.n_angles, go);
  auto w = c.csv("gap.csv", {"theta", "re_beta", "im_beta", "re_e0", "im_e0", "re_sigma1", "im_sigma1", "re_sigma2",
                             "im_sigma2", "re_e_total", "im_e_total"});
  double maxre0 = -1e300;
  for (auto& p : res.points) {
    w << p.theta << p.beta << p.e0 << p.sigma1 << p.sigma2.value << p.e_total;
    w.end();
    maxre0 = std::max(maxre0, p.e0.real());
  }
  c.results["gap"] = res.gap;
  c.results["gap_u0"] = -maxre0;
  c.results["argmax_theta"] = res.argmax_theta;
  c.results["argmax_beta"] = cjson(res.argmax_beta);
  c.results["self_consistent"] = go.self_consistent;
  if (go.self_consistent && !res.self_consistent_converged)
    fail(ErrorKind::non_convergence, "gap: self-consistent iteration did not converge");
}

inline void task_pbc_compare(Context& c) {
  auto x = symbol(c.cfg.model);
  auto in = interaction(c.cfg.model.u);
  auto g = gbz_for(c);
  const auto& q = c.cfg.params;
  std::vector<std::string> cols{"index",      "theta",      "re_sigma_pbc", "im_sigma_pbc", "err_pbc",
                                "re_beta_obc", "im_beta_obc", "re_sigma_obc", "im_sigma_obc", "err_obc"};
  std::optional<LindbladModel> rs_model;
  if (q.realspace) {
    cols.insert(cols.end(), {"re_sigma_realspace", "im_sigma_realspace"});
    rs_model = chain(c.cfg.model, c.cfg.model.n_sites, Boundary::open_toeplitz);
  }
  auto w = c.csv("pbc_compare.csv", cols);
  auto bo = bz_options(c);
  PbcOptions po;
  po.threads = c.threads;
  double max_diff = 0;
  for (int k = 0; k < q.n_angles; ++k) {
    double th = -pi + 2 * pi * k / q.n_angles;
    auto pbc = pbc_self_energy(x, in, th, q.grid, po);
    cplx b = gbz_point(g, th);
    auto obc = sigma_bz_double(x, in, x(b), b, q.grid, bo);
    w << k << th << pbc.value << pbc.error_estimate << b << obc.value << obc.error_estimate;
    if (rs_model) {
      w << realspace_laurent(*rs_model, in, x(b), b, rs_model->n_sites / 2, q.realspace_r_max).value;
    }
    w.end();
    max_diff = std::max(max_diff, std::abs(pbc.value - obc.value));
  }
  c.results["max_abs_pbc_obc_difference"] = max_diff;
}

inline void task_scaling(Context& c) {
  const auto& q = c.cfg.params;
  std::vector<int> sizes = q.sizes.empty() ? std::vector<int>{11, 15, 19, 23, 27, 31} : q.sizes;
  std::vector<double> us = q.u_values.empty() ? std::vector<double>{c.cfg.model.u} : q.u_values;
  auto x = symbol(c.cfg.model);
  auto g = gbz_for(c);
  const double th = pi / 2;
  cplx b = gbz_point(g, th);
  auto w = c.csv("scaling.csv", {"n_sites", "u", "theta", "re_shift", "im_shift", "solver", "iterations", "residual",
                                 "inv_n"});
  json fits = json::array();
  std::vector<double> re_intercepts;
  for (double u : us) {
    ScalingSeries s;
    for (int n : sizes) {
      cplx e0;
      auto r = run_ed(c, n, u, th, e0);
      w << n << u << th << r.shift << r.solver << r.iterations << r.residual << 1.0 / n;
      w.end();
      s.sizes.push_back(n);
      s.values.push_back(r.shift);
    }
    cplx a = finite_size_extrapolate(s);
    auto in = interaction(u);
    cplx s1 = first_order_shift(in);
    cplx sbz = sigma_bz_double(x, in, x(b), b, q.grid, bz_options(c)).value;
    cplx seig = analytic_shift(c, g, u, th) - s1;
    fits.push_back({{"u", u},
                    {"intercept", cjson(a)},
                    {"slope", cjson(s.slope)},
                    {"residual", s.residual},
                    {"relative_residual", s.relative_residual},
                    {"first_order_shift", cjson(s1)},
                    {"sigma_bz_double", cjson(sbz)},
                    {"sigma_eigenstate", cjson(seig)},
                    {"relative_to_first_order_plus_bz", std::abs(a - s1 - sbz) / std::abs(s1 + sbz)},
                    {"relative_real_to_eigenstate", std::abs(a.real() - seig.real()) / std::abs(seig.real())}});
    re_intercepts.push_back(a.real());
  }
  json fit{{"theta", th}, {"sizes", sizes}, {"fits", fits}};
  if (us.size() >= 2) fit["loglog_slope_re_intercept"] = acceptance::loglog_slope(us, re_intercepts);
  c.files.push_back("scaling_fit.json");
  std::ofstream(c.out / "scaling_fit.json") << fit.dump(2) << '\n';
  c.results = fit;
}

inline void run_task(Context& c) {
  const std::string& t = c.cfg.task;
  if (t == "gbz") task_gbz(c);
  else if (t == "spectrum") task_spectrum(c);
  else if (t == "self_energy_sweep") task_self_energy_sweep(c);
  else if (t == "hopping_table") task_hopping_table(c);
  else if (t == "ed_compare") task_ed_compare(c);
  else if (t == "gap") task_gap(c);
  else if (t == "pbc_compare") task_pbc_compare(c);
  else if (t == "scaling") task_scaling(c);
  else fail(ErrorKind::config, "unknown task " + t);
}

// Acceptance subset for the preset; returns true when all pass.
inline bool run_checks(Context& c, std::ostream& os) {
  acceptance::Preset p;
  p.t = c.cfg.model.t;
  p.gamma = c.cfg.model.gamma;
  p.gamma0 = c.cfg.model.gamma0;
  p.u = c.cfg.model.u;
  p.threads = c.threads;
  auto checks = acceptance::all_checks();
  std::vector<int> ids = is_nnn(c) ? std::vector<int>{7, 8} : std::vector<int>{1, 2, 3, 4, 5, 6, 8};
  bool ok = true;
  json out = json::array();
  for (int id : ids) {
    auto r = acceptance::run_timed(checks[static_cast<std::size_t>(id - 1)], p, id);
    os << acceptance::format_line(r) << '\n';
    for (auto& n : r.notes) os << "    note: " << n << '\n';
    ok = ok && r.pass;
    out.push_back({{"criterion", id}, {"pass", r.pass}, {"detail", r.detail}});
  }
  c.results["checks"] = out;
  return ok;
}

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument:
    case ErrorKind::dimension:
    case ErrorKind::size_guard: return 2;
    case ErrorKind::numeric_policy:
    case ErrorKind::singular: return 3;
    case ErrorKind::non_convergence: return 4;
  }
  return 1;
}

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  long x = std::strtol(v, &end, 10);
  if (*end || x < 0) fail(ErrorKind::config, std::string("environment: ") + name + " must be a non-negative integer");
  return static_cast<int>(x);
}

inline int run(int argc, char** argv, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  CLI::App app{"Non-Bloch self-energy of interacting open fermion chains"};
  std::string task, config, out;
  bool check = false;
  int grid = 0, threads = -1;
  app.add_option("task", task, "Task to run")->required()->check(CLI::IsMember(task_names()));
  app.add_option("--config", config, "JSON run configuration")->required();
  app.add_option("--out", out, "Output directory (overrides NBSIGMA_OUT and the config)");
  app.add_flag("--check", check, "Run the acceptance checks for the preset after the task");
  app.add_option("--grid", grid, "Quadrature grid override")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, os, es);
    return code == 0 ? 0 : 2;
  }

  Context c;
  auto t0 = std::chrono::steady_clock::now();
  try {
    c.cfg = load_config(config, task);
    if (grid > 0) c.cfg.params.grid = grid;
    const char* env_out = std::getenv("NBSIGMA_OUT");
    if (!out.empty()) c.cfg.output_dir = out;
    else if (env_out && *env_out) c.cfg.output_dir = env_out;
    if (threads >= 0) c.cfg.threads = threads;
    else c.cfg.threads = env_int("NBSIGMA_THREADS", c.cfg.threads);
    c.threads = resolve_threads(c.cfg.threads);
    c.out = c.cfg.output_dir;
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) fail(ErrorKind::config, "output: cannot create " + c.out.string() + ": " + ec.message());

    run_task(c);
    bool ok = true;
    if (check) ok = run_checks(c, os);

    json summary{{"metadata",
                  {{"tool", "nbsigma"},
                   {"version", version},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"timestamp", utc_timestamp()},
                   {"threads", c.threads},
                   {"elapsed_seconds",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}}},
                 {"config", to_json(c.cfg)},
                 {"results", c.results},
                 {"files", c.files}};
    std::ofstream(c.out / "summary.json") << summary.dump(2) << '\n';
    os << c.cfg.task << ": wrote";
    for (auto& f : c.files) os << ' ' << (c.out / f).string();
    os << '\n';
    return ok ? 0 : 1;
  } catch (const Error& e) {
    es << "nbsigma " << (c.cfg.task.empty() ? task : c.cfg.task) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    es << "nbsigma " << task << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace nbsigma::cli
