#pragma once

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <string>

#include "nbsigma/core.hpp"
#include "nbsigma/laurent.hpp"

namespace nbsigma {

// open_toeplitz keeps the half channels that straddle the chain ends, so the
// damping matrix is an exact Toeplitz section (no edge deficit).
enum class Boundary { open, periodic, open_toeplitz };

inline std::string to_string(Boundary b) {
  switch (b) {
    case Boundary::open: return "open";
    case Boundary::periodic: return "periodic";
    case Boundary::open_toeplitz: return "open_toeplitz";
  }
  return "open";
}

inline Boundary boundary_from_string(const std::string& s) {
  if (s == "open") return Boundary::open;
  if (s == "periodic") return Boundary::periodic;
  if (s == "open_toeplitz") return Boundary::open_toeplitz;
  fail(ErrorKind::config, "boundary: unknown value '" + s + "'");
}

struct LindbladModel {
  int n_sites = 0;
  Mat h;
  Mat d_loss;  // C_l × N
  Mat d_gain;  // C_g × N
  Boundary boundary = Boundary::open;

  void validate(double herm_tol = default_policy().hermiticity_tol) const {
    if (n_sites <= 0) fail(ErrorKind::dimension, "n_sites must be positive");
    if (h.rows() != n_sites || h.cols() != n_sites)
      fail(ErrorKind::dimension, "h must be n_sites x n_sites");
    if (d_loss.size() != 0 && d_loss.cols() != n_sites)
      fail(ErrorKind::dimension, "d_loss must have n_sites columns");
    if (d_gain.size() != 0 && d_gain.cols() != n_sites)
      fail(ErrorKind::dimension, "d_gain must have n_sites columns");
    if (!is_hermitian(h, herm_tol)) fail(ErrorKind::invalid_argument, "h is not Hermitian");
  }
};

struct BathMatrices {
  Mat m_loss;
  Mat m_gain;
};

struct SimilarityBlocks {
  Mat x;
  Mat z;
  cplx trace_shift;
};

inline BathMatrices build_bath_matrices(const LindbladModel& model) {
  model.validate();
  const int n = model.n_sites;
  BathMatrices b;
  b.m_loss = model.d_loss.size() ? Mat(model.d_loss.adjoint() * model.d_loss) : Mat(Mat::Zero(n, n));
  b.m_gain = model.d_gain.size() ? Mat(model.d_gain.adjoint() * model.d_gain) : Mat(Mat::Zero(n, n));
  return b;
}

// X = -ih - (M^g)^T - M^l
inline Mat build_damping_matrix(const LindbladModel& model) {
  BathMatrices b = build_bath_matrices(model);
  return -I * model.h - b.m_gain.transpose() - b.m_loss;
}

inline Mat assemble_nambu_liouvillian(const LindbladModel& model) {
  BathMatrices b = build_bath_matrices(model);
  const int n = model.n_sites;
  Mat mgt = b.m_gain.transpose();
  Mat l(2 * n, 2 * n);
  l.topLeftCorner(n, n) = -I * model.h + mgt - b.m_loss;
  l.topRightCorner(n, n) = 2.0 * mgt;
  l.bottomLeftCorner(n, n) = 2.0 * b.m_loss;
  l.bottomRightCorner(n, n) = -I * model.h - mgt + b.m_loss;
  return l;
}

// Largest eigenvalue of the Hermitian part; an upper bound on Re spec(X)
// that stays reliable for strongly non-normal X.
inline double numerical_abscissa(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (x + x.adjoint())), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// XZ + ZX^† = source, via the complex Schur form of X.
inline Mat solve_lyapunov(const Mat& x, const Mat& source) {
  const Eigen::Index n = x.rows();
  if (x.cols() != n || source.rows() != n || source.cols() != n)
    fail(ErrorKind::dimension, "solve_lyapunov: dimension mismatch");
  if (n == 0) return Mat(0, 0);
  Eigen::ComplexSchur<Mat> schur(x);
  const Mat& t = schur.matrixT();
  const Mat& q = schur.matrixU();
  Mat s = q.adjoint() * source * q;
  Mat z = Mat::Zero(n, n);
  double scale = std::max(1.0, max_abs(t));
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    Vec rhs = s.col(j);
    if (j + 1 < n) rhs -= z.rightCols(n - j - 1) * t.row(j).tail(n - j - 1).adjoint();
    Mat a = t;
    a.diagonal().array() += std::conj(t(j, j));
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(a(i, i)) < 1e-13 * scale)
        fail(ErrorKind::singular,
             "solve_lyapunov: lambda_m + conj(lambda_n) vanishes (degenerate steady-state manifold)");
    z.col(j) = a.triangularView<Eigen::Upper>().solve(rhs);
  }
  return q * z * q.adjoint();
}

inline double lyapunov_residual(const Mat& x, const Mat& z, const Mat& source) {
  return max_abs(x * z + z * x.adjoint() - source);
}

inline SimilarityBlocks block_diagonalize(const LindbladModel& model, const NumericPolicy& pol = default_policy()) {
  BathMatrices b = build_bath_matrices(model);
  SimilarityBlocks out;
  out.x = -I * model.h - b.m_gain.transpose() - b.m_loss;
  if (numerical_abscissa(out.x) > pol.stability_tol)
    fail(ErrorKind::numeric_policy, "damping matrix is not dissipative");
  Mat src = 2.0 * b.m_gain.transpose() - 2.0 * b.m_loss;
  if (max_abs(src) == 0.0) {
    out.z = Mat::Zero(model.n_sites, model.n_sites);
  } else {
    out.z = solve_lyapunov(out.x, src);
    if (lyapunov_residual(out.x, out.z, src) > pol.residual_tol)
      fail(ErrorKind::numeric_policy, "Lyapunov residual above tolerance");
  }
  out.trace_shift = -(b.m_loss + b.m_gain.transpose() - I * model.h).trace();
  return out;
}

// G = ln[(I - Z)(I + Z)^{-1}], principal branch.
inline Mat modular_hamiltonian(const Mat& z, const NumericPolicy& pol = default_policy()) {
  const Eigen::Index n = z.rows();
  if (z.cols() != n) fail(ErrorKind::dimension, "modular_hamiltonian: Z must be square");
  Eigen::ComplexEigenSolver<Mat> ez(z, false);
  for (Eigen::Index k = 0; k < n; ++k) {
    cplx zk = ez.eigenvalues()(k);
    if (std::abs(1.0 + zk) < pol.log_singular_tol || std::abs(1.0 - zk) < pol.log_singular_tol)
      fail(ErrorKind::singular, "modular_hamiltonian: eigenvalue of Z at +-1 (pure or empty mode)");
  }
  Mat id = Mat::Identity(n, n);
  Mat k = (id - z) * (id + z).inverse();
  Eigen::ComplexEigenSolver<Mat> ek(k, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    cplx v = ek.eigenvalues()(i);
    if (v.real() <= 0.0 && std::abs(v.imag()) <= 1e-14 * std::max(1.0, std::abs(v)))
      fail(ErrorKind::singular, "modular_hamiltonian: eigenvalue on the branch cut of the logarithm");
  }
  return k.log();
}

// ln Z_ss = N ln 2 - ln det(I + Z)
inline cplx steady_state_log_partition(const Mat& z) {
  const Eigen::Index n = z.rows();
  Mat a = Mat::Identity(n, n) + z;
  Eigen::PartialPivLU<Mat> lu(a);
  cplx logdet{};
  const Mat& u = lu.matrixLU();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(u(i, i)) == 0.0) fail(ErrorKind::singular, "steady_state_log_partition: det(I+Z) = 0");
    logdet += std::log(u(i, i));
  }
  if (lu.permutationP().determinant() < 0) logdet += cplx(0.0, pi);
  return double(n) * std::log(2.0) - logdet;
}

// U_ij = U_{i-j} on the chain.
inline RMat interaction_matrix(const LaurentSymbol& u, int n, Boundary b) {
  RMat m = RMat::Zero(n, n);
  for (auto& [r, c] : u.coeffs()) {
    for (int i = 0; i < n; ++i) {
      int j = i - r;
      if (b == Boundary::periodic) m(i, ((j % n) + n) % n) += c.real();
      else if (j >= 0 && j < n) m(i, j) += c.real();
    }
  }
  return m;
}

namespace presets {

// Loss channels L_j = sqrt(γ/2)(c_j - i c_{j+1}); gain channels are their adjoints.
inline void add_hatano_nelson_channels(int n, double gamma, Boundary b, std::vector<Eigen::RowVectorXcd>& loss) {
  const double s = std::sqrt(gamma / 2.0);
  auto row = [n] { return Eigen::RowVectorXcd::Zero(n).eval(); };
  int nch = (b == Boundary::periodic) ? n : n - 1;
  for (int j = 0; j < nch; ++j) {
    auto d = row();
    d(j) += s;
    d((j + 1) % n) += -I * s;
    loss.push_back(d);
  }
  if (b == Boundary::open_toeplitz) {
    auto left = row();
    left(0) = -I * s;
    loss.push_back(left);
    auto right = row();
    right(n - 1) = s;
    loss.push_back(right);
  }
}

inline Mat stack(const std::vector<Eigen::RowVectorXcd>& rows, int n) {
  Mat m(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t k = 0; k < rows.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = rows[k];
  return m;
}

inline void add_hopping(Mat& h, int range, double amp, Boundary b) {
  const int n = static_cast<int>(h.rows());
  for (int i = 0; i < n; ++i) {
    int j = i + range;
    if (b == Boundary::periodic) j %= n;
    else if (j >= n) continue;
    if (j == i) continue;
    h(i, j) += amp;
    h(j, i) += amp;
  }
}

inline LindbladModel hatano_nelson(int n, double t, double gamma, Boundary b = Boundary::open) {
  if (n < 2) fail(ErrorKind::invalid_argument, "hatano_nelson: need at least 2 sites");
  LindbladModel m;
  m.n_sites = n;
  m.boundary = b;
  m.h = Mat::Zero(n, n);
  add_hopping(m.h, 1, t, b);
  std::vector<Eigen::RowVectorXcd> loss;
  add_hatano_nelson_channels(n, gamma, b, loss);
  m.d_loss = stack(loss, n);
  m.d_gain = m.d_loss.conjugate();
  return m;
}

// Extra on-site loss/gain κ = (γ0 - 2γ)/2 each brings the diagonal to -γ0.
inline LindbladModel nnn(int n, double t, double gamma, double gamma0, double t2, Boundary b = Boundary::open) {
  if (n < 3) fail(ErrorKind::invalid_argument, "nnn: need at least 3 sites");
  double kappa = 0.5 * (gamma0 - 2.0 * gamma);
  if (kappa < 0) fail(ErrorKind::invalid_argument, "nnn: gamma0 must be at least 2*gamma");
  LindbladModel m = hatano_nelson(n, t, gamma, b);
  add_hopping(m.h, 2, t2, b);
  if (kappa > 0) {
    std::vector<Eigen::RowVectorXcd> loss;
    for (int k = 0; k < m.d_loss.rows(); ++k) loss.push_back(m.d_loss.row(k));
    for (int j = 0; j < n; ++j) {
      Eigen::RowVectorXcd d = Eigen::RowVectorXcd::Zero(n);
      d(j) = std::sqrt(kappa);
      loss.push_back(d);
    }
    m.d_loss = stack(loss, n);
    m.d_gain = m.d_loss.conjugate();
  }
  return m;
}

// Bulk damping symbols: X(β) = -2γ - i(t-γ)β - i(t+γ)/β and the NNN extension.
inline LaurentSymbol hatano_nelson_symbol(double t, double gamma) {
  return LaurentSymbol({{0, -2.0 * gamma}, {-1, -I * (t - gamma)}, {1, -I * (t + gamma)}});
}

inline LaurentSymbol nnn_symbol(double t, double gamma, double gamma0, double t2) {
  return LaurentSymbol(
      {{0, -gamma0}, {-1, -I * (t - gamma)}, {1, -I * (t + gamma)}, {-2, -I * t2}, {2, -I * t2}});
}

// U(β) = u(β + 1/β)
inline LaurentSymbol nearest_neighbour_interaction(double u) {
  return LaurentSymbol({{1, cplx(u)}, {-1, cplx(u)}});
}

}  // namespace presets

}  // namespace nbsigma
