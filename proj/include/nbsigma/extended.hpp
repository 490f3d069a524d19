#pragma once

// Quad-precision OBC spectra for strongly non-normal symbols (links libquadmath).

#include <boost/multiprecision/float128.hpp>
#include <functional>

#include "nbsigma/nonbloch.hpp"

namespace nbsigma {

inline std::vector<cplx> obc_spectrum_quad(const LaurentSymbol& x, int n) {
  return obc_spectrum_t<boost::multiprecision::float128>(x, n, skin_radius(x));
}

// max |Re λ - Re c_0| over the OBC spectrum: zero while the spectrum stays on
// the vertical line through the on-site term.
inline double pt_deviation(const LaurentSymbol& x, int n) {
  double d = 0;
  for (cplx e : obc_spectrum_quad(x, n)) d = std::max(d, std::abs(e.real() - x.coeff(0).real()));
  return d;
}

struct PtTransition {
  double lo = 0, hi = 0;  // bracket with deviation(lo) <= threshold < deviation(hi)
  double dev_lo = 0, dev_hi = 0;
  double dev_start = 0, dev_end = 0;  // at the initial bracket ends
  int evaluations = 0;
};

inline PtTransition locate_pt_transition(const std::function<LaurentSymbol(double)>& family, double lo, double hi,
                                         int n, double threshold, double tol) {
  PtTransition t;
  t.lo = lo;
  t.hi = hi;
  t.dev_lo = pt_deviation(family(lo), n);
  t.dev_hi = pt_deviation(family(hi), n);
  t.dev_start = t.dev_lo;
  t.dev_end = t.dev_hi;
  t.evaluations = 2;
  if (!(t.dev_lo <= threshold && t.dev_hi > threshold))
    fail(ErrorKind::invalid_argument, "locate_pt_transition: bracket does not straddle the threshold");
  while (t.hi - t.lo > tol) {
    double mid = 0.5 * (t.lo + t.hi);
    double d = pt_deviation(family(mid), n);
    ++t.evaluations;
    if (d > threshold) {
      t.hi = mid;
      t.dev_hi = d;
    } else {
      t.lo = mid;
      t.dev_lo = d;
    }
  }
  return t;
}

}  // namespace nbsigma
