#pragma once

#include "vsmile/types.hpp"

namespace vsmile {

// K(t). The rough kernel blows up at t = 0 (for h < 1/2) and throws there.
double kernel_eval(const ModelSpec& spec, double t);

// L2(t) = integral of K(s)^2 over [0, t], in closed form. Parameter points
// h = 0 and h = 1/2 go through explicit limit branches (window 1e-12).
double kernel_l2_integral(const ModelSpec& spec, double t);

// Cov(X_s, X_t) = integral of K(s-u) K(t-u) over [0, min(s, t)].
// Exponential kernels use exact closed forms; rough / path-dependent
// off-diagonals go through adaptive quadrature at 1e-10 absolute tolerance.
double covariance(const ModelSpec& spec, double s, double t);

}  // namespace vsmile
