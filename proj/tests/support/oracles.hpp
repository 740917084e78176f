#pragma once

// Brute-force references used by the unit suites. Everything here is written
// against the math directly (Riemann sums, series, dense linear algebra) and
// deliberately avoids the library's own closed forms and quadrature.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "vsmile/kernels.hpp"
#include "vsmile/types.hpp"

namespace oracle {

// Midpoint Riemann sum of f over [a, b].
inline double riemann(const std::function<double(double)>& f, double a, double b,
                      std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += f(a + (static_cast<double>(i) + 0.5) * h);
  return acc * h;
}

// Cov(X_s, X_t) as a raw midpoint sum of K(s-u) K(t-u). Exact kinds only need
// modest n; the rough kernel's endpoint singularity leaves a visible bias, so
// callers compare with a loose tolerance there.
inline double covariance_riemann(const vsmile::ModelSpec& spec, double s, double t,
                                 std::size_t n) {
  if (s > t) std::swap(s, t);
  return riemann(
      [&](double u) { return vsmile::kernel_eval(spec, s - u) * vsmile::kernel_eval(spec, t - u); },
      0.0, s, n);
}

// Rough covariance via the power substitution v = y^{1/p} (exact change of
// variables) followed by a plain midpoint sum -- no shared code with the
// library's adaptive rule.
inline double rough_cov_riemann_transformed(double eta, double h, double s, double t,
                                            std::size_t n) {
  if (s > t) std::swap(s, t);
  const double a = h - 0.5, p = a + 1.0, d = t - s;
  const double val =
      riemann([&](double y) { return std::pow(d + std::pow(y, 1.0 / p), a); }, 0.0,
              std::pow(s, p), n);
  return eta * eta * val / p;
}

// L2 integral of the kernel by trapezoid on [t0, t] plus (for the rough kind)
// the power-substituted head on [0, t0].
inline double l2_riemann(const vsmile::ModelSpec& spec, double t, std::size_t n) {
  auto k2 = [&](double u) {
    const double k = vsmile::kernel_eval(spec, u);
    return k * k;
  };
  if (spec.kind == vsmile::KernelKind::Rough && spec.h < 0.5) {
    // head by exact power integral of eta^2 u^{2h-1} over [0, eps0]
    const double eps0 = t / static_cast<double>(n);
    const double head = spec.eta * spec.eta * std::pow(eps0, 2.0 * spec.h) / (2.0 * spec.h);
    return head + riemann(k2, eps0, t, n);
  }
  return riemann(k2, 0.0, t, n);
}

}  // namespace oracle
