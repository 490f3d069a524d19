#include <gtest/gtest.h>

#include <random>

#include "nbsigma/self_energy.hpp"

using namespace nbsigma;

namespace {

const LaurentSymbol hn = presets::hatano_nelson_symbol(1.0, 0.5);
const double rho = std::sqrt(3.0);

cplx gbz_beta(double theta) { return std::polar(rho, theta); }

SelfEnergyValue bz(double u, double theta, int grid = 256) {
  cplx b = gbz_beta(theta);
  return sigma_bz_double(hn, InteractionSpec::nearest_neighbour(u), hn(b), b, grid);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::config;
}

}  // namespace

TEST(FirstOrder, Examples) {
  // Single-particle convention -(i/2) Σ_r U_r, fixed by the full-superoperator oracle.
  cplx s = first_order_shift(InteractionSpec::nearest_neighbour(0.02));
  EXPECT_EQ(s.real(), 0.0);
  EXPECT_NEAR(s.imag(), -0.02, 1e-17);
  EXPECT_EQ(first_order_shift(InteractionSpec::nearest_neighbour(0.0)), cplx{});
  InteractionSpec onsite{LaurentSymbol({{0, 1.0}}), 1.0};
  EXPECT_NEAR(std::abs(first_order_shift(onsite) - cplx(0, -0.5)), 0.0, 1e-16);
}

TEST(FirstOrder, PurelyImaginaryForRealSymmetricU) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int k = 0; k < 20; ++k) {
    LaurentSymbol u;
    u.set(0, d(rng));
    for (int r = 1; r <= 3; ++r) {
      double v = d(rng);
      u.set(r, v);
      u.set(-r, v);
    }
    EXPECT_LT(std::abs(first_order_shift({u, 1.0}).real()), 1e-15);
  }
}

TEST(FirstOrder, RejectsAsymmetricInteraction) {
  InteractionSpec bad{LaurentSymbol({{1, 0.1}, {-1, 0.2}}), 0.1};
  EXPECT_EQ(kind_of([&] { first_order_shift(bad); }), ErrorKind::invalid_argument);
}

TEST(BzDouble, ZeroInteraction) {
  auto v = bz(0.0, pi / 2);
  EXPECT_EQ(v.value, cplx{});
  EXPECT_EQ(v.error_estimate, 0.0);
}

// Re Σ is negative on the GBZ; interactions increase the damping.
TEST(BzDouble, SignAndMagnitudeAtQuarterTurn) {
  const double u = 0.02;
  auto fine = bz(u, pi / 2, 512);
  EXPECT_LT(fine.value.real(), 0.0);
  EXPECT_GT(std::abs(fine.value.real()), 0.01 * u * u);
  EXPECT_LT(std::abs(fine.value.real()), 10 * u * u);
  EXPECT_NEAR(fine.value.real(), -7.9575e-5, 1e-8);
  auto coarse = bz(u, pi / 2, 256);
  EXPECT_LT(std::abs(coarse.value - fine.value), 1e-8 * std::abs(fine.value));
}

TEST(BzDouble, ErrorEstimateShrinksUnderRefinement) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> th(-pi, pi);
  for (int k = 0; k < 10; ++k) {
    double t = th(rng);
    double prev = 1e300;
    for (int g : {32, 64, 128, 256}) {
      double e = bz(0.02, t, g).error_estimate;
      EXPECT_LE(e, prev + 1e-14) << "theta=" << t << " grid=" << g;
      prev = e;
    }
    EXPECT_LT(prev, 1e-10);
  }
}

TEST(BzDouble, Errors) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  EXPECT_EQ(kind_of([&] { sigma_bz_double(hn, in, -1.0, 0.0, 64); }), ErrorKind::invalid_argument);
  // Node k1 = k2 = 0 on the unit circle sits exactly on the pole.
  cplx e = 2.0 * hn(1.0) + hn.conj()(1.0);
  EXPECT_EQ(kind_of([&] { sigma_bz_double(hn, in, e, 1.0, 8); }), ErrorKind::numeric_policy);
}

TEST(BzDouble, OnsiteInteractionVanishes) {
  InteractionSpec onsite{LaurentSymbol({{0, 0.3}}), 0.3};
  cplx b = gbz_beta(1.0);
  EXPECT_EQ(sigma_bz_double(hn, onsite, hn(b), b, 64).value, cplx{});
}

// Lower-half GBZ points converge slower in r_max than the upper half.
TEST(Triple, MatchesBzDouble) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  auto g = compute_gbz(hn, 512);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> th(-pi, pi);
  for (int k = 0; k < 10; ++k) {
    cplx b = gbz_beta(th(rng));
    auto t = sigma_gbz_triple(hn, in, g, hn(b), b, 120, 256);
    auto d = sigma_bz_double(hn, in, hn(b), b, 256);
    EXPECT_LE(std::abs(t.value - d.value), std::max(1e-4 * std::abs(d.value), 1e-10)) << "beta=" << b;
  }
}

TEST(Triple, ZeroInteractionAndErrors) {
  auto g = compute_gbz(hn, 512);
  cplx b = gbz_beta(0.4);
  EXPECT_EQ(sigma_gbz_triple(hn, InteractionSpec::nearest_neighbour(0), g, hn(b), b, 20, 48).value, cplx{});
  auto in = InteractionSpec::nearest_neighbour(0.02);
  EXPECT_EQ(kind_of([&] { sigma_gbz_triple(hn, in, g, hn(b), b, 10, 48); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([&] { sigma_gbz_triple(hn, in, g, hn(b), b, 30, 48); }), ErrorKind::invalid_argument);
  EXPECT_EQ(kind_of([&] { sigma_gbz_triple(hn, in, g, cplx(-8.0, 0.0), b, 20, 48); }), ErrorKind::numeric_policy);
}

TEST(GenericZ, ZeroSymbolIsBitIdentical) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  cplx b = gbz_beta(pi / 3);
  auto a = sigma_generic_z(hn, in, LaurentSymbol{}, hn(b), b, 128);
  auto d = sigma_bz_double(hn, in, hn(b), b, 128);
  EXPECT_EQ(a.value, d.value);
}

TEST(GenericZ, ConstantScalesByOneMinusSquare) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  cplx b = gbz_beta(pi / 2);
  cplx base = sigma_bz_double(hn, in, hn(b), b, 128).value;
  for (double c : {0.3, 0.7}) {
    cplx v = sigma_generic_z(hn, in, LaurentSymbol::constant(c), hn(b), b, 128).value;
    EXPECT_LT(std::abs(v - (1 - c * c) * base), 1e-12 * std::abs(base));
  }
  double prev = std::abs(base);
  for (double c : {0.5, 0.9, 0.99}) {
    double a = std::abs(sigma_generic_z(hn, in, LaurentSymbol::constant(c), hn(b), b, 128).value);
    EXPECT_LT(a, prev);
    prev = a;
  }
}

TEST(Realspace, TranslationalInvariance) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  auto m = presets::hatano_nelson(31, 1.0, 0.5);
  cplx e = hn(gbz_beta(pi / 2));
  for (int i = 8; i <= 21; i += 4)
    for (int j : {i - 1, i, i + 1}) {
      if (j < 8 || j + 1 > 22) continue;
      cplx a = realspace_effective_element(m, in, e, i, j);
      cplx c = realspace_effective_element(m, in, e, i + 1, j + 1);
      EXPECT_LT(std::abs(a - c), 1e-6);
      EXPECT_LT(std::abs(a - c), 1e-6 * std::abs(a));
    }
}

TEST(Realspace, ZeroInteractionAndGuards) {
  auto m = presets::hatano_nelson(12, 1.0, 0.5);
  EXPECT_EQ(realspace_effective_element(m, InteractionSpec::nearest_neighbour(0), -1.0, 5, 5), cplx{});
  auto big = presets::hatano_nelson(41, 1.0, 0.5);
  auto in = InteractionSpec::nearest_neighbour(0.02);
  EXPECT_EQ(kind_of([&] { realspace_effective_element(big, in, -1.0, 5, 5); }), ErrorKind::size_guard);
  EXPECT_EQ(kind_of([&] { realspace_laurent(m, in, -1.0, 2.0, 6, 8); }), ErrorKind::invalid_argument);
}

TEST(Realspace, LaurentTransformMatchesBzDouble) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  auto m = presets::hatano_nelson(31, 1.0, 0.5, Boundary::open_toeplitz);
  cplx b = gbz_beta(pi / 2);
  cplx d = sigma_bz_double(hn, in, hn(b), b, 256).value;
  for (int rm : {10, 12}) {
    auto r = realspace_laurent(m, in, hn(b), b, 15, rm);
    EXPECT_LT(std::abs(r.value - d) / std::abs(d), 1e-3) << "r_max=" << rm;
  }
}

TEST(EigenstateCorrection, EqualWeightsGiveMean) {
  auto ev = obc_spectrum(hn, 20);
  auto d = boundary_coefficients(hn, ev[7], 20);
  const cplx a(1.0, 2.0), b(-3.0, 0.5);
  EXPECT_LT(std::abs(eigenstate_correction(d, {a, b}) - 0.5 * (a + b)), 1e-10);
  EXPECT_LT(std::abs(eigenstate_correction(d, {a, a}) - a), 1e-14);
  EXPECT_THROW(eigenstate_correction(d, {a}), Error);

  auto pw = asymptotic_pair_weights(hn, hn(gbz_beta(1.1)));
  EXPECT_LT(std::abs(pw.w_m - pw.w_m1), 1e-12 * std::abs(pw.w_m));
}

TEST(EigenstateCorrection, VanishingDenominator) {
  EXPECT_EQ(kind_of([] { weighted_pair(1.0, -1.0, 1.0, 2.0); }), ErrorKind::singular);
}

TEST(EigenstateCorrection, QuarterTurnValue) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  cplx e = hn(gbz_beta(pi / 2));
  auto s = eigenstate_sigma(hn, in, e, e, 256);
  EXPECT_NEAR(s.value.value.real(), -5.82608e-5, 1e-9);
  EXPECT_LT(std::abs(s.value.value - 0.5 * (s.sigma_m + s.sigma_m1)), 1e-12 * std::abs(s.value.value));
}

TEST(Hopping, RightDominatesLeft) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  auto g = compute_gbz(hn, 512);
  for (double th : {0.0, pi / 2}) {
    auto t = realspace_hopping_table(hn, in, g, hn(gbz_beta(th)), 3);
    for (int r : {2, 3}) EXPECT_GT(t[3 + r].scaled_abs, t[3 - r].scaled_abs) << "theta=" << th << " r=" << r;
    for (auto& e : t) EXPECT_NEAR(e.scaled_abs, e.raw_abs * std::pow(rho, e.r), 1e-12 * e.scaled_abs + 1e-300);
  }
}

TEST(Hopping, ZeroInteraction) {
  auto g = compute_gbz(hn, 512);
  for (auto& e : realspace_hopping_table(hn, InteractionSpec::nearest_neighbour(0), g, -1.0, 4))
    EXPECT_EQ(e.coeff, cplx{});
}

// The discrete projection is an exact inverse on the projection nodes.
TEST(Hopping, RoundTripOnProjectionNodes) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  auto g = compute_gbz(hn, 512);
  cplx e = hn(gbz_beta(pi / 2));
  HoppingOptions ho;
  ho.n_projection = 41;
  ho.grid = 128;
  auto t = realspace_hopping_table(hn, in, g, e, 20, ho);
  for (int k : {0, 7, 20, 33}) {
    cplx b = std::polar(rho, 2 * pi * k / 41);
    cplx want = sigma_bz_double(hn, in, e, b, 128).value;
    EXPECT_LT(std::abs(evaluate_hopping_table(t, b) - want), 1e-6 * std::abs(want));
  }
  EXPECT_EQ(kind_of([&] { realspace_hopping_table(hn, in, g, e, 21, ho); }), ErrorKind::invalid_argument);
}

// Away from k = -π/2 the denominator keeps a positive real part only nearby;
// elsewhere E sits inside the three-particle continuum.
TEST(Pbc, FarPointConverged) {
  for (double k : {-5 * pi / 8, -3 * pi / 8}) {
    auto v = pbc_self_energy(hn, InteractionSpec::nearest_neighbour(0.02), k, 256);
    EXPECT_LT(v.error_estimate, 1e-8) << "k=" << k;
  }
}

TEST(Pbc, GapScalesAsUSquared) {
  std::vector<double> us{0.005, 0.01, 0.02, 0.04}, lx, ly;
  for (double u : us) {
    lx.push_back(std::log(u));
    ly.push_back(std::log(std::abs(pbc_self_energy(hn, InteractionSpec::nearest_neighbour(u), -pi / 2, 128).value.real())));
  }
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < us.size(); ++k) {
    mx += lx[k] / us.size();
    my += ly[k] / us.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < us.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  EXPECT_NEAR(sxy / sxx, 2.0, 0.1);
}

TEST(Pbc, DiffersFromObc) {
  auto in = InteractionSpec::nearest_neighbour(0.02);
  int visible = 0;
  for (double th : {pi / 4, pi / 2, 3 * pi / 4}) {
    cplx p = pbc_self_energy(hn, in, th, 128).value;
    cplx o = bz(0.02, th, 128).value;
    if (std::abs(p - o) > 0.1 * std::abs(o)) ++visible;
  }
  EXPECT_EQ(visible, 3);
}

TEST(Gap, NoninteractingGapIsTwoGamma) {
  auto g = compute_gbz(hn, 512);
  auto r = liouvillian_gap(hn, InteractionSpec::nearest_neighbour(0), g, 17);
  EXPECT_NEAR(r.gap, 1.0, 1e-12);
}

TEST(Gap, ArgmaxAndSelfConsistency) {
  const double u = 0.02;
  auto in = InteractionSpec::nearest_neighbour(u);
  auto g = compute_gbz(hn, 512);
  GapOptions go;
  go.grid = 128;
  auto one = liouvillian_gap(hn, in, g, 17, go);
  EXPECT_NEAR(one.argmax_theta, pi / 2, pi / 16 + 1e-12);
  for (auto& p : one.points) EXPECT_EQ(p.e_total, p.e0 + p.sigma1 + p.sigma2.value);
  go.self_consistent = true;
  auto sc = liouvillian_gap(hn, in, g, 17, go);
  EXPECT_TRUE(sc.self_consistent_converged);
  EXPECT_LT(std::abs(sc.gap - one.gap) / (u * u), 10 * u * u);
}
