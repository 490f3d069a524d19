#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <cstddef>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nbsigma {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

enum class ErrorKind {
  invalid_argument,
  dimension,
  numeric_policy,   // pole proximity, positivity, stability
  singular,
  non_convergence,
  size_guard,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

// Tolerances shared by all modules; overridable from the run config.
struct NumericPolicy {
  double residual_tol = 1e-10;
  double hermiticity_tol = 1e-12;
  double psd_tol = 1e-10;
  double stability_tol = 1e-10;
  double pole_tol = 1e-8;
  double root_pair_tol = 1e-8;
  double log_singular_tol = 1e-12;
  double selfconsistent_tol = 1e-10;
  int selfconsistent_max_iter = 50;
  double selfconsistent_mixing = 0.5;
  double ed_tracking_tol = 1e-12;
  int ed_max_iter = 60;
  double ed_tol = 1e-14;
  int dense_ed_limit = 4000;
  int threads = 0;  // 0: hardware concurrency
};

inline const NumericPolicy& default_policy() {
  static const NumericPolicy p{};
  return p;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Static block partition of [0, n); each index is written by exactly one
// worker, so results do not depend on the thread count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  int nt = std::min(resolve_threads(threads), std::max(n, 1));
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(nt));
  for (int w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w * n / nt; i < (w + 1) * n / nt; ++i) body(i);
      } catch (...) {
        errs[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

// Pairwise summation in a fixed order.
template <class T>
T pairwise_sum(const T* x, std::size_t n) {
  if (n == 0) return T{};
  if (n <= 8) {
    T s = x[0];
    for (std::size_t i = 1; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(v.data(), v.size());
}

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const Mat& m, double tol) {
  return m.rows() == m.cols() && max_abs(m - m.adjoint()) <= tol;
}

// Integer power through log-magnitude/phase, safe for large exponents.
inline cplx ipow(cplx z, int n) {
  if (n == 0) return 1.0;
  return std::polar(std::exp(n * std::log(std::abs(z))), n * std::arg(z));
}

}  // namespace nbsigma
