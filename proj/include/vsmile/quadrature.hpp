#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace vsmile {

struct QuadResult {
  double value = 0.0;
  double err = 0.0;  // accumulated error estimate
  bool converged = true;
};

namespace detail {

template <class F>
void simpson_rec(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                 double tol, int depth, QuadResult& out) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double h6 = (b - a) / 12.0;
  const double left = h6 * (fa + 4.0 * flm + fm);
  const double right = h6 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || depth <= 0) {
    out.value += left + right + delta / 15.0;
    out.err += std::abs(delta) / 15.0;
    if (depth <= 0 && std::abs(delta) > 15.0 * tol) out.converged = false;
    return;
  }
  simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, out);
  simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, out);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction. Returns the estimate together
// with the accumulated error bound; converged=false marks depth exhaustion.
template <class F>
QuadResult adaptive_simpson(F&& f, double a, double b, double abs_tol, int max_depth = 48) {
  QuadResult out;
  if (a == b) return out;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  detail::simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth, out);
  return out;
}

template <class F>
double integrate_or_throw(F&& f, double a, double b, double abs_tol, int max_depth = 48) {
  QuadResult r = adaptive_simpson(f, a, b, abs_tol, max_depth);
  if (!r.converged)
    throw std::runtime_error("quadrature did not reach tolerance " + std::to_string(abs_tol) +
                             "; achieved about " + std::to_string(r.err));
  return r.value;
}

}  // namespace vsmile
