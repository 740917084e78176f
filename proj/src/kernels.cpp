#include "vsmile/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vsmile/quadrature.hpp"

namespace vsmile {

namespace {

constexpr double kBranchEps = 1e-12;  // window for the h = 0 and h = 1/2 limits
constexpr double kCovTol = 1e-10;

bool near(double a, double b) { return std::abs(a - b) < kBranchEps; }

double lambda_of(double h, double epsilon) { return (0.5 - h) / epsilon; }

// One-factor weight in front of the exponential.
double expo_vol(double eta, double h, double epsilon) {
  return eta * std::pow(epsilon, h - 0.5);
}

// integral over [0, s] of vi e^{-li (s-u)} vj e^{-lj (t-u)} du, s <= t.
double expo_cross_cov(double vi, double li, double vj, double lj, double s, double t) {
  const double lsum = li + lj;
  const double tail = std::exp(-lj * (t - s));
  if (lsum * s < kBranchEps) return vi * vj * tail * s;
  return vi * vj * tail * (-std::expm1(-lsum * s)) / lsum;
}

// Rough off-diagonal: eta^2 * integral over [0, s] of v^a (d + v)^a dv with
// d = t - s > 0 and a = h - 1/2 in (-1/2, 0). The substitution v = y^{1/p},
// p = a + 1, absorbs the endpoint singularity exactly (Jacobi-weight style),
// leaving a bounded integrand for the adaptive rule.
double rough_cov_quad(double eta, double h, double s, double t) {
  const double a = h - 0.5;
  if (near(h, 0.5)) return eta * eta * s;
  const double p = a + 1.0;
  const double d = t - s;
  auto f = [&](double y) { return std::pow(d + std::pow(y, 1.0 / p), a); };
  const double val = integrate_or_throw(f, 0.0, std::pow(s, p), kCovTol, 52);
  return eta * eta * val / p;
}

double pd_cov_quad(double eta, double h, double epsilon, double s, double t) {
  const double a = h - 0.5;
  const double d = t - s;
  auto f = [&](double v) {
    return std::pow(v + epsilon, a) * std::pow(d + v + epsilon, a);
  };
  return eta * eta * integrate_or_throw(f, 0.0, s, kCovTol, 52);
}

}  // namespace

double kernel_eval(const ModelSpec& spec, double t) {
  spec.validate();
  if (t < 0.0) throw std::domain_error("kernel_eval requires t >= 0");
  switch (spec.kind) {
    case KernelKind::Rough:
      if (t == 0.0 && spec.h < 0.5)
        throw std::domain_error("rough kernel is singular at t = 0");
      return spec.eta * std::pow(t, spec.h - 0.5);
    case KernelKind::PathDependent:
      return spec.eta * std::pow(t + spec.epsilon, spec.h - 0.5);
    case KernelKind::OneFactor:
      return expo_vol(spec.eta, spec.h, spec.epsilon) *
             std::exp(-lambda_of(spec.h, spec.epsilon) * t);
    case KernelKind::TwoFactor:
      return expo_vol(spec.eta, spec.h, spec.epsilon) *
                 std::exp(-lambda_of(spec.h, spec.epsilon) * t) +
             expo_vol(spec.eta_l, spec.h_l, spec.epsilon) *
                 std::exp(-lambda_of(spec.h_l, spec.epsilon) * t);
  }
  throw std::logic_error("unreachable");
}

double kernel_l2_integral(const ModelSpec& spec, double t) {
  spec.validate();
  if (t < 0.0) throw std::domain_error("kernel_l2_integral requires t >= 0");
  if (t == 0.0) return 0.0;
  const double eta2 = spec.eta * spec.eta;
  switch (spec.kind) {
    case KernelKind::Rough:
      if (near(spec.h, 0.5)) return eta2 * t;
      return eta2 * std::pow(t, 2.0 * spec.h) / (2.0 * spec.h);
    case KernelKind::PathDependent: {
      if (near(spec.h, 0.0)) return eta2 * std::log((t + spec.epsilon) / spec.epsilon);
      const double e2h = std::pow(spec.epsilon, 2.0 * spec.h);
      return eta2 * (std::pow(t + spec.epsilon, 2.0 * spec.h) - e2h) / (2.0 * spec.h);
    }
    case KernelKind::OneFactor: {
      const double v = expo_vol(spec.eta, spec.h, spec.epsilon);
      if (near(spec.h, 0.5)) return v * v * t;
      const double lam = lambda_of(spec.h, spec.epsilon);
      return v * v * (-std::expm1(-2.0 * lam * t)) / (2.0 * lam);
    }
    case KernelKind::TwoFactor: {
      const double v1 = expo_vol(spec.eta, spec.h, spec.epsilon);
      const double v2 = expo_vol(spec.eta_l, spec.h_l, spec.epsilon);
      const double l1 = lambda_of(spec.h, spec.epsilon);
      const double l2 = lambda_of(spec.h_l, spec.epsilon);
      double total = near(spec.h, 0.5) ? v1 * v1 * t
                                       : v1 * v1 * (-std::expm1(-2.0 * l1 * t)) / (2.0 * l1);
      total += near(spec.h_l, 0.5) ? v2 * v2 * t
                                   : v2 * v2 * (-std::expm1(-2.0 * l2 * t)) / (2.0 * l2);
      const double lsum = l1 + l2;
      total += (lsum * t < kBranchEps)
                   ? 2.0 * v1 * v2 * t
                   : 2.0 * v1 * v2 * (-std::expm1(-lsum * t)) / lsum;
      return total;
    }
  }
  throw std::logic_error("unreachable");
}

double covariance(const ModelSpec& spec, double s, double t) {
  spec.validate();
  if (s < 0.0 || t < 0.0) throw std::domain_error("covariance requires s, t >= 0");
  if (s > t) std::swap(s, t);
  if (s == 0.0) return 0.0;
  if (s == t) return kernel_l2_integral(spec, t);
  switch (spec.kind) {
    case KernelKind::Rough:
      return rough_cov_quad(spec.eta, spec.h, s, t);
    case KernelKind::PathDependent:
      return pd_cov_quad(spec.eta, spec.h, spec.epsilon, s, t);
    case KernelKind::OneFactor: {
      const double v = expo_vol(spec.eta, spec.h, spec.epsilon);
      const double lam = lambda_of(spec.h, spec.epsilon);
      return expo_cross_cov(v, lam, v, lam, s, t);
    }
    case KernelKind::TwoFactor: {
      const double v1 = expo_vol(spec.eta, spec.h, spec.epsilon);
      const double v2 = expo_vol(spec.eta_l, spec.h_l, spec.epsilon);
      const double l1 = lambda_of(spec.h, spec.epsilon);
      const double l2 = lambda_of(spec.h_l, spec.epsilon);
      return expo_cross_cov(v1, l1, v1, l1, s, t) + expo_cross_cov(v1, l1, v2, l2, s, t) +
             expo_cross_cov(v2, l2, v1, l1, s, t) + expo_cross_cov(v2, l2, v2, l2, s, t);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace vsmile
