#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "nbsigma/lindblad.hpp"
#include "nbsigma/superoperator.hpp"

using namespace nbsigma;

namespace {

Mat random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> g;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * cplx(g(rng), g(rng));
  return m;
}

LindbladModel random_model(std::mt19937_64& rng, int n, bool balanced) {
  std::uniform_int_distribution<int> cd(1, 4);
  LindbladModel m;
  m.n_sites = n;
  Mat a = random_matrix(rng, n, n);
  m.h = 0.5 * (a + a.adjoint());
  m.d_loss = random_matrix(rng, n + cd(rng), n, 0.5);
  m.d_gain = balanced ? Mat(m.d_loss.conjugate()) : random_matrix(rng, cd(rng), n, 0.5);
  return m;
}

// Greedy multiset distance between two eigenvalue lists of equal length.
double multiset_distance(std::vector<cplx> a, std::vector<cplx> b) {
  if (a.size() != b.size()) return 1e300;
  double worst = 0;
  for (cplx x : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](cplx p, cplx q) { return std::abs(p - x) < std::abs(q - x); });
    worst = std::max(worst, std::abs(*it - x));
    b.erase(it);
  }
  return worst;
}

std::vector<cplx> eigenvalues(const Mat& m) {
  Eigen::ComplexEigenSolver<Mat> es(m, false);
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

LindbladModel empty_model(int n) {
  LindbladModel m;
  m.n_sites = n;
  m.h = Mat::Zero(n, n);
  return m;
}

}  // namespace

TEST(BathMatrices, HatanoNelsonGram) {
  auto b = build_bath_matrices(presets::hatano_nelson(5, 1.0, 0.5));
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(std::abs(b.m_loss(i, i) - 0.5), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(b.m_loss(0, 0) - 0.25), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(b.m_loss(4, 4) - 0.25), 0.0, 1e-14);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(std::abs(b.m_loss(i, i + 1)), 0.25, 1e-14);
    EXPECT_NEAR(b.m_loss(i, i + 1).real(), 0.0, 1e-14);
    EXPECT_NEAR(b.m_loss(i, i + 1).imag(), -b.m_loss(i + 1, i).imag(), 1e-14);
  }
  EXPECT_TRUE(is_hermitian(b.m_loss, 1e-14));
  Eigen::SelfAdjointEigenSolver<Mat> es(b.m_loss);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(BathMatrices, ZeroAndSingleChannel) {
  auto z = build_bath_matrices(empty_model(3));
  EXPECT_EQ(max_abs(z.m_loss), 0.0);
  EXPECT_EQ(max_abs(z.m_gain), 0.0);

  auto m = empty_model(3);
  m.d_loss = Mat::Zero(1, 3);
  m.d_loss(0, 0) = 1.0;
  auto b = build_bath_matrices(m);
  Mat want = Mat::Zero(3, 3);
  want(0, 0) = 1.0;
  EXPECT_EQ(max_abs(b.m_loss - want), 0.0);
}

TEST(BathMatrices, DimensionMismatch) {
  auto m = empty_model(3);
  m.d_loss = Mat::Zero(2, 4);
  try {
    build_bath_matrices(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
}

TEST(DampingMatrix, HatanoNelsonEntries) {
  const double t = 1.0, g = 0.5;
  Mat x = build_damping_matrix(presets::hatano_nelson(20, t, g));
  for (int i = 1; i < 19; ++i) EXPECT_NEAR(std::abs(x(i, i) - (-2 * g)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(x(0, 0) - (-g)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(x(19, 19) - (-g)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(x(5, 6)), t - g, 1e-14);
  EXPECT_NEAR(std::abs(x(6, 5)), t + g, 1e-14);
  EXPECT_TRUE(LaurentSymbol::from_bulk(x, 1).approx_equal(presets::hatano_nelson_symbol(t, g), 1e-14));
}

TEST(DampingMatrix, ZeroModel) { EXPECT_EQ(max_abs(build_damping_matrix(empty_model(4))), 0.0); }

TEST(DampingMatrix, ToeplitzBoundaryHasNoEdgeDeficit) {
  auto x = presets::hatano_nelson_symbol(1.0, 0.5);
  Mat m = build_damping_matrix(presets::hatano_nelson(12, 1.0, 0.5, Boundary::open_toeplitz));
  EXPECT_LT(max_abs(m - x.toeplitz(12)), 1e-14);
  Mat p = build_damping_matrix(presets::hatano_nelson(12, 1.0, 0.5, Boundary::periodic));
  EXPECT_LT(max_abs(p - x.circulant(12)), 1e-14);
}

TEST(Nambu, SpectrumPairsWithDampingMatrix) {
  auto m = presets::hatano_nelson(8, 1.0, 0.5);
  Mat x = build_damping_matrix(m);
  auto ev = eigenvalues(assemble_nambu_liouvillian(m));
  auto ex = eigenvalues(x);
  std::vector<cplx> want = ex;
  for (cplx v : ex) want.push_back(-std::conj(v));
  EXPECT_LT(multiset_distance(ev, want), 1e-8);

  std::mt19937_64 rng(7);
  auto r = random_model(rng, 6, false);
  Mat xr = build_damping_matrix(r);
  auto er = eigenvalues(xr);
  std::vector<cplx> wr = er;
  for (cplx v : er) wr.push_back(-std::conj(v));
  EXPECT_LT(multiset_distance(eigenvalues(assemble_nambu_liouvillian(r)), wr), 1e-8);
}

TEST(Nambu, ZeroModel) { EXPECT_EQ(max_abs(assemble_nambu_liouvillian(empty_model(3))), 0.0); }

TEST(Nambu, BalancedHadamardRotation) {
  auto m = presets::hatano_nelson(6, 1.0, 0.5);
  const int n = 6;
  Mat l = assemble_nambu_liouvillian(m);
  Mat s(2 * n, 2 * n);
  Mat id = Mat::Identity(n, n);
  s << id, id, id, -id;
  s /= std::sqrt(2.0);
  Mat r = s * l * s;
  EXPECT_LT(max_abs(r.bottomLeftCorner(n, n)), 1e-14);
  Mat x = build_damping_matrix(m);
  EXPECT_LT(max_abs(r.bottomRightCorner(n, n) - x), 1e-14);
  EXPECT_LT(max_abs(r.topLeftCorner(n, n) + x.adjoint()), 1e-14);
}

TEST(Lyapunov, TrivialCases) {
  Mat x = build_damping_matrix(presets::hatano_nelson(5, 1.0, 0.5));
  EXPECT_EQ(max_abs(solve_lyapunov(x, Mat::Zero(5, 5))), 0.0);

  std::mt19937_64 rng(3);
  Mat a = random_matrix(rng, 4, 4);
  Mat z = solve_lyapunov(-Mat::Identity(4, 4), a);
  EXPECT_LT(max_abs(z + 0.5 * a), 1e-14);
}

TEST(Lyapunov, KroneckerOracle) {
  std::mt19937_64 rng(11);
  const int n = 6;
  auto m = random_model(rng, n, false);
  Mat x = build_damping_matrix(m);
  Mat h = random_matrix(rng, n, n);
  Mat src = h + h.adjoint();
  Mat z = solve_lyapunov(x, src);
  EXPECT_LT(lyapunov_residual(x, z, src), 1e-10);

  // Row-major vec: vec(XZ) = (X ⊗ I) vec Z, vec(Z X^†) = (I ⊗ conj X) vec Z.
  Mat k = Mat::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < n; ++p) {
        k(i * n + j, p * n + j) += x(i, p);
        k(i * n + j, i * n + p) += std::conj(x(j, p));
      }
  Vec rhs(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) rhs(i * n + j) = src(i, j);
  Vec sol = k.partialPivLu().solve(rhs);
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(sol(i * n + j) - z(i, j)));
  EXPECT_LT(worst, 1e-10);
}

TEST(Lyapunov, SingularWhenSpectraTouch) {
  Mat x = Mat::Zero(2, 2);
  x(1, 1) = -1.0;
  try {
    solve_lyapunov(x, Mat::Identity(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::singular);
  }
}

TEST(BlockDiagonalize, RandomModelsStableWithSmallResidual) {
  std::mt19937_64 rng(20240611);
  for (int k = 0; k < 50; ++k) {
    auto m = random_model(rng, 8, false);
    auto blocks = block_diagonalize(m);
    auto b = build_bath_matrices(m);
    Mat src = 2.0 * b.m_gain.transpose() - 2.0 * b.m_loss;
    EXPECT_LT(lyapunov_residual(blocks.x, blocks.z, src), 1e-10);
    for (cplx v : eigenvalues(blocks.x)) EXPECT_LE(v.real(), 1e-10);
  }
}

TEST(BlockDiagonalize, BalancedModelsHaveZeroZ) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) EXPECT_LT(max_abs(block_diagonalize(random_model(rng, 7, true)).z), 1e-12);
  EXPECT_LT(max_abs(block_diagonalize(presets::nnn(10, 1.0, 0.5, 1.1, 0.1)).z), 1e-12);
}

TEST(BlockDiagonalize, TraceShift) {
  auto m = presets::hatano_nelson(6, 1.0, 0.5);
  auto b = build_bath_matrices(m);
  cplx want = -(b.m_loss + b.m_gain.transpose() - I * m.h).trace();
  EXPECT_LT(std::abs(block_diagonalize(m).trace_shift - want), 1e-14);
}

TEST(ModularHamiltonian, TrivialCases) {
  EXPECT_LT(max_abs(modular_hamiltonian(Mat::Zero(4, 4))), 1e-15);
  Mat g = modular_hamiltonian(0.5 * Mat::Identity(3, 3));
  EXPECT_LT(max_abs(g - std::log(1.0 / 3.0) * Mat::Identity(3, 3)), 1e-13);
}

TEST(ModularHamiltonian, RoundTrip) {
  std::mt19937_64 rng(17);
  const int n = 5;
  Mat a = random_matrix(rng, n, n);
  Mat z = a + a.adjoint();
  Eigen::SelfAdjointEigenSolver<Mat> es(z, Eigen::EigenvaluesOnly);
  z *= 0.8 / es.eigenvalues().cwiseAbs().maxCoeff();
  Mat g = modular_hamiltonian(z);
  EXPECT_TRUE(is_hermitian(g, 1e-9));
  Mat id = Mat::Identity(n, n);
  Mat eg = g.exp();
  EXPECT_LT(max_abs((id - z) * (id + z).inverse() - eg), 1e-8);
  EXPECT_LT(max_abs((id - eg) * (id + eg).inverse() - z), 1e-8);
}

TEST(ModularHamiltonian, PureModeIsSingular) {
  Mat z = Mat::Zero(2, 2);
  z(0, 0) = 1.0;
  try {
    modular_hamiltonian(z);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::singular);
  }
}

TEST(LogPartition, Examples) {
  EXPECT_NEAR(std::abs(steady_state_log_partition(Mat::Zero(10, 10)) - 10 * std::log(2.0)), 0.0, 1e-13);
  cplx v = steady_state_log_partition(0.5 * Mat::Identity(4, 4));
  EXPECT_NEAR(std::abs(v - (4 * std::log(2.0) - 4 * std::log(1.5))), 0.0, 1e-13);

  std::mt19937_64 rng(23);
  Mat a = random_matrix(rng, 6, 6, 0.2);
  cplx want = 0;
  for (cplx zk : eigenvalues(a)) want += std::log(1.0 + (1.0 - zk) / (1.0 + zk));
  cplx got = steady_state_log_partition(a);
  EXPECT_NEAR(got.real(), want.real(), 1e-12);
  EXPECT_NEAR(std::remainder(got.imag() - want.imag(), 2 * pi), 0.0, 1e-12);

  Mat s = -Mat::Identity(2, 2);
  EXPECT_THROW(steady_state_log_partition(s), Error);
}

TEST(FullSuperoperator, IdentityIsSteadyForBalancedModel) {
  SpMat l = build_full_superoperator(presets::hatano_nelson(4, 1.0, 0.5), LaurentSymbol{});
  EXPECT_LT((l * vectorized_identity(4)).norm(), 1e-10);
  SpMat li = build_full_superoperator(presets::hatano_nelson(3, 1.0, 0.5), presets::nearest_neighbour_interaction(0.3));
  EXPECT_LT((li * vectorized_identity(3)).norm(), 1e-10);
  for (cplx v : eigenvalues(Mat(li))) EXPECT_LE(v.real(), 1e-9);
}

TEST(FullSuperoperator, ZeroModel) {
  SpMat l = build_full_superoperator(empty_model(3), LaurentSymbol{});
  EXPECT_EQ(Mat(l).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FullSuperoperator, SingleSectorContainsDampingSpectrum) {
  auto m = presets::hatano_nelson(3, 1.0, 0.5);
  SpMat l = build_full_superoperator(m, LaurentSymbol{});
  auto sector = eigenvalues(restrict_dense(l, particle_difference_sector(3, 1)));
  for (cplx v : eigenvalues(build_damping_matrix(m))) {
    double best = 1e300;
    for (cplx w : sector) best = std::min(best, std::abs(w - v));
    EXPECT_LT(best, 1e-9);
  }
}

TEST(FullSuperoperator, SizeGuard) {
  try {
    build_full_superoperator(presets::hatano_nelson(8, 1.0, 0.5), LaurentSymbol{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::size_guard);
  }
}

TEST(LaurentSymbol, MatrixRoundTrip) {
  auto x = presets::nnn_symbol(1.0, 0.5, 1.1, 0.1);
  for (int n : {7, 9, 20}) EXPECT_TRUE(LaurentSymbol::from_bulk(x.toeplitz(n), 2).approx_equal(x, 0.0));
  EXPECT_EQ(x(1.0), x.sum());
  auto u = presets::nearest_neighbour_interaction(0.02);
  RMat um = interaction_matrix(u, 5, Boundary::open);
  EXPECT_EQ(um(2, 1), 0.02);
  EXPECT_EQ(um(2, 3), 0.02);
  EXPECT_EQ(um(0, 4), 0.0);
  EXPECT_EQ(interaction_matrix(u, 5, Boundary::periodic)(0, 4), 0.02);
}

TEST(Boundary, Names) {
  for (auto b : {Boundary::open, Boundary::periodic, Boundary::open_toeplitz})
    EXPECT_EQ(boundary_from_string(to_string(b)), b);
  EXPECT_THROW(boundary_from_string("closed"), Error);
}
