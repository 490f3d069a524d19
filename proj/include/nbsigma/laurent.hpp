#pragma once

#include <map>
#include <string>

#include "nbsigma/core.hpp"

namespace nbsigma {

// f(β) = Σ_r c_r β^{-r}. For a banded Toeplitz matrix with X_{i,i-r} = c_r
// the plane-wave ansatz ψ_i = β^i gives (Xψ)_i = f(β) ψ_i, so r > 0 is
// hopping to the right.
class LaurentSymbol {
 public:
  LaurentSymbol() = default;
  explicit LaurentSymbol(std::map<int, cplx> coeffs) {
    for (auto& [r, c] : coeffs)
      if (c != cplx{}) coeffs_[r] = c;
  }

  static LaurentSymbol constant(cplx c) { return LaurentSymbol({{0, c}}); }

  const std::map<int, cplx>& coeffs() const { return coeffs_; }
  bool empty() const { return coeffs_.empty(); }

  cplx coeff(int r) const {
    auto it = coeffs_.find(r);
    return it == coeffs_.end() ? cplx{} : it->second;
  }
  void set(int r, cplx c) {
    if (c == cplx{}) coeffs_.erase(r);
    else coeffs_[r] = c;
  }

  int min_offset() const { return coeffs_.empty() ? 0 : coeffs_.begin()->first; }
  int max_offset() const { return coeffs_.empty() ? 0 : coeffs_.rbegin()->first; }
  int range() const { return std::max(std::abs(min_offset()), std::abs(max_offset())); }

  cplx operator()(cplx beta) const {
    cplx s{};
    for (auto& [r, c] : coeffs_) s += c * std::pow(beta, -r);
    return s;
  }

  cplx derivative(cplx beta) const {
    cplx s{};
    for (auto& [r, c] : coeffs_) s += -double(r) * c * std::pow(beta, -r - 1);
    return s;
  }

  cplx sum() const {
    cplx s{};
    for (auto& kv : coeffs_) s += kv.second;
    return s;
  }

  // Coefficient-wise conjugate: X*(β) in the self-energy denominators.
  LaurentSymbol conj() const {
    LaurentSymbol out;
    for (auto& [r, c] : coeffs_) out.coeffs_[r] = std::conj(c);
    return out;
  }

  // f(1/β): symbol of the transposed Toeplitz matrix.
  LaurentSymbol reversed() const {
    LaurentSymbol out;
    for (auto& [r, c] : coeffs_) out.coeffs_[-r] = c;
    return out;
  }

  LaurentSymbol scaled(cplx s) const {
    LaurentSymbol out;
    for (auto& [r, c] : coeffs_) out.set(r, s * c);
    return out;
  }

  LaurentSymbol operator+(const LaurentSymbol& o) const {
    LaurentSymbol out = *this;
    for (auto& [r, c] : o.coeffs_) out.set(r, out.coeff(r) + c);
    return out;
  }

  bool real_symmetric(double tol = 1e-14) const {
    for (auto& [r, c] : coeffs_) {
      if (std::abs(c.imag()) > tol) return false;
      if (std::abs(c - coeff(-r)) > tol) return false;
    }
    return true;
  }

  // N×N open Toeplitz section with X_{i,j} = c_{i-j}.
  Mat toeplitz(int n) const {
    Mat m = Mat::Zero(n, n);
    for (auto& [r, c] : coeffs_)
      for (int i = 0; i < n; ++i) {
        int j = i - r;
        if (j >= 0 && j < n) m(i, j) = c;
      }
    return m;
  }

  // Circulant version (periodic chain).
  Mat circulant(int n) const {
    Mat m = Mat::Zero(n, n);
    for (auto& [r, c] : coeffs_)
      for (int i = 0; i < n; ++i) m(i, ((i - r) % n + n) % n) += c;
    return m;
  }

  // Read the symbol off row i of a banded matrix: c_r = X_{i,i-r}, |r| <= m.
  static LaurentSymbol from_row(const Mat& x, int i, int m, double tol = 0.0) {
    LaurentSymbol out;
    for (int r = -m; r <= m; ++r) {
      int j = i - r;
      if (j < 0 || j >= x.cols()) continue;
      if (std::abs(x(i, j)) > tol) out.coeffs_[r] = x(i, j);
    }
    return out;
  }

  static LaurentSymbol from_bulk(const Mat& x, int m, double tol = 0.0) {
    return from_row(x, static_cast<int>(x.rows()) / 2, m, tol);
  }

  bool approx_equal(const LaurentSymbol& o, double tol) const {
    for (auto& [r, c] : coeffs_)
      if (std::abs(c - o.coeff(r)) > tol) return false;
    for (auto& [r, c] : o.coeffs_)
      if (std::abs(c - coeff(r)) > tol) return false;
    return true;
  }

 private:
  std::map<int, cplx> coeffs_;
};

}  // namespace nbsigma
