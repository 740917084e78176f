#include "vsmile/skew.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vsmile {

namespace {

constexpr double kBranchEps = 1e-12;

bool near(double a, double b) { return std::fabs(a - b) < kBranchEps; }

// (e^{-x} - 1 + x) / x^2 on x >= 0; -> 1/2 as x -> 0.
double phi2(double x) {
  if (x < 1e-4) return 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0;
  return (std::expm1(-x) + x) / (x * x);
}

// One exponential factor's first-order skew contribution (without rho / 2).
double one_factor_term(double eta, double h, double eps, double t) {
  const double v = eta * std::pow(eps, h - 0.5);
  const double lambda = (0.5 - h) / eps;
  return v * phi2(lambda * t);
}

}  // namespace

std::string to_string(SkewSource s) {
  switch (s) {
    case SkewSource::Market: return "market";
    case SkewSource::ModelFd: return "model_fd";
    case SkewSource::ModelExpansion: return "model_expansion";
  }
  return "unknown";
}

double skew_expansion(const ModelSpec& spec, double maturity) {
  spec.validate();
  if (!(maturity > 0.0)) throw std::domain_error("skew_expansion: maturity must be positive");
  const double t = maturity;
  const double ar = std::fabs(spec.rho);
  switch (spec.kind) {
    case KernelKind::Rough:
      return ar * spec.eta / (2.0 * (spec.h + 0.5) * (spec.h + 1.5)) *
             std::pow(t, spec.h - 0.5);
    case KernelKind::PathDependent: {
      // (T + eps) * Int (s+eps)^{h-1/2} - Int (s+eps)^{h+1/2} over [0, T],
      // log branches where an exponent crosses zero
      const double a = spec.h + 0.5, b = spec.h + 1.5;
      const double eps = spec.epsilon, te = t + eps;
      const double ia =
          near(a, 0.0) ? std::log(te / eps) : (std::pow(te, a) - std::pow(eps, a)) / a;
      const double ib =
          near(b, 0.0) ? std::log(te / eps) : (std::pow(te, b) - std::pow(eps, b)) / b;
      return ar * spec.eta * (te * ia - ib) / (2.0 * t * t);
    }
    case KernelKind::OneFactor:
      return ar / 2.0 * one_factor_term(spec.eta, spec.h, spec.epsilon, t);
    case KernelKind::TwoFactor:
      return ar / 2.0 * (one_factor_term(spec.eta, spec.h, spec.epsilon, t) +
                         one_factor_term(spec.eta_l, spec.h_l, spec.epsilon, t));
  }
  throw std::logic_error("unreachable kernel kind");
}

double skew_limit_t0(const ModelSpec& spec) {
  spec.validate();
  const double ar = std::fabs(spec.rho);
  switch (spec.kind) {
    case KernelKind::Rough:
      if (spec.h < 0.5 - kBranchEps) return std::numeric_limits<double>::infinity();
      return ar * spec.eta / 4.0;
    case KernelKind::PathDependent:
    case KernelKind::OneFactor:
      return ar * spec.eta * std::pow(spec.epsilon, spec.h - 0.5) / 4.0;
    case KernelKind::TwoFactor:
      return ar *
             (spec.eta * std::pow(spec.epsilon, spec.h - 0.5) +
              spec.eta_l * std::pow(spec.epsilon, spec.h_l - 0.5)) /
             4.0;
  }
  throw std::logic_error("unreachable kernel kind");
}

double model_skew_fd(const IVSurface& surface, double maturity, double dk) {
  if (!(dk > 0.0)) throw std::domain_error("model_skew_fd: dk must be positive");
  const IVSlice* slice = surface.find_slice(maturity);
  if (!slice) {
    throw std::invalid_argument("model_skew_fd: surface has no slice at t=" +
                                std::to_string(maturity));
  }
  const IVPoint* up = nullptr;
  const IVPoint* down = nullptr;
  for (const auto& p : slice->points) {
    if (std::fabs(p.k - dk) <= 1e-12) up = &p;
    if (std::fabs(p.k + dk) <= 1e-12) down = &p;
  }
  if (!up || !down)
    throw std::invalid_argument("model_skew_fd: slice t=" + std::to_string(maturity) +
                                " lacks quotes at k = +-" + std::to_string(dk));
  return std::fabs(up->iv - down->iv) / (2.0 * dk);
}

SkewFit market_skew_fit(const IVSlice& slice) {
  std::vector<double> ks, vols;
  for (const auto& p : slice.points)
    if (p.k >= kSkewWindowLo && p.k <= kSkewWindowHi) {
      ks.push_back(p.k);
      vols.push_back(p.iv);
    }
  const std::size_t n = ks.size();
  if (n < 5)
    throw std::invalid_argument("market_skew: need >= 5 quotes in [" +
                                std::to_string(kSkewWindowLo) + ", " +
                                std::to_string(kSkewWindowHi) + "], have " + std::to_string(n));

  // Cubic least squares via modified Gram-Schmidt QR on a scaled basis
  // (k / s keeps the Vandermonde columns well conditioned).
  double s = 0.0;
  for (double k : ks) s = std::max(s, std::fabs(k));
  if (s == 0.0) s = 1.0;
  constexpr std::size_t m = 4;
  std::vector<double> q(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = ks[i] / s;
    q[i * m + 0] = 1.0;
    q[i * m + 1] = u;
    q[i * m + 2] = u * u;
    q[i * m + 3] = u * u * u;
  }
  double r[m][m] = {};
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t l = 0; l < j; ++l) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += q[i * m + l] * q[i * m + j];
      r[l][j] = dot;
      for (std::size_t i = 0; i < n; ++i) q[i * m + j] -= dot * q[i * m + l];
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += q[i * m + j] * q[i * m + j];
    nrm = std::sqrt(nrm);
    if (nrm < 1e-14)
      throw std::invalid_argument("market_skew: underdetermined cubic fit (degenerate strikes)");
    r[j][j] = nrm;
    for (std::size_t i = 0; i < n; ++i) q[i * m + j] /= nrm;
  }
  double qty[m];
  for (std::size_t j = 0; j < m; ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += q[i * m + j] * vols[i];
    qty[j] = dot;
  }
  double c[m];
  for (std::size_t j = m; j-- > 0;) {
    double v = qty[j];
    for (std::size_t l = j + 1; l < m; ++l) v -= r[j][l] * c[l];
    c[j] = v / r[j][j];
  }

  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = ks[i] / s;
    const double fit = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
    rss += (vols[i] - fit) * (vols[i] - fit);
  }
  // var(c1) = sigma^2 [ (R^T R)^{-1} ]_{11}: solve R^T w = e1, then |R^{-1} w|
  // equivalently via the row of R^{-1}
  double rinv1[m] = {};  // row 1 of R^{-1}: solve x^T R = e1^T
  {
    // R is upper triangular; x^T R = e1^T  =>  forward substitution on columns
    double x[m] = {};
    x[1] = 1.0 / r[1][1];
    for (std::size_t jj = 2; jj < m; ++jj) {
      double acc = 0.0;
      for (std::size_t l = 1; l < jj; ++l) acc += x[l] * r[l][jj];
      x[jj] = -acc / r[jj][jj];
    }
    for (std::size_t jj = 0; jj < m; ++jj) rinv1[jj] = x[jj];
  }
  double g11 = 0.0;
  for (std::size_t jj = 0; jj < m; ++jj) g11 += rinv1[jj] * rinv1[jj];
  const double sigma2 = n > m ? rss / static_cast<double>(n - m) : 0.0;

  SkewFit fit;
  fit.skew = std::fabs(c[1]) / s;
  fit.std_error = std::sqrt(sigma2 * g11) / s;
  fit.n_quotes = n;
  return fit;
}

double market_skew(const IVSlice& slice) { return market_skew_fit(slice).skew; }

SkewCurve expansion_skew_curve(const ModelSpec& spec, const std::vector<double>& maturities) {
  SkewCurve curve;
  curve.source = SkewSource::ModelExpansion;
  curve.notes.push_back("first-order expansion assumes a flat forward-variance curve");
  for (double t : maturities) {
    curve.maturities.push_back(t);
    curve.skew.push_back(skew_expansion(spec, t));
  }
  return curve;
}

SkewCurve fd_skew_curve(const IVSurface& surface, double dk) {
  SkewCurve curve;
  curve.source = SkewSource::ModelFd;
  for (const auto& s : surface.slices) {
    try {
      const double v = model_skew_fd(surface, s.t, dk);
      curve.maturities.push_back(s.t);
      curve.skew.push_back(v);
    } catch (const std::invalid_argument& e) {
      curve.notes.push_back(e.what());
    }
  }
  return curve;
}

SkewCurve market_skew_curve(const IVSurface& surface) {
  SkewCurve curve;
  curve.source = SkewSource::Market;
  for (const auto& s : surface.slices) {
    try {
      const double v = market_skew(s);
      curve.maturities.push_back(s.t);
      curve.skew.push_back(v);
    } catch (const std::invalid_argument& e) {
      std::ostringstream msg;
      msg << "t=" << s.t << ": " << e.what();
      curve.notes.push_back(msg.str());
    }
  }
  return curve;
}

void write_skew_curve(std::ostream& out, const SkewCurve& curve,
                      const std::string& preamble_comment) {
  if (!preamble_comment.empty()) out << "# " << preamble_comment << "\n";
  for (const auto& note : curve.notes) out << "# " << note << "\n";
  out << "maturity_years,skew,source\n";
  char buf[160];
  for (std::size_t i = 0; i < curve.maturities.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s\n", curve.maturities[i], curve.skew[i],
                  to_string(curve.source).c_str());
    out << buf;
  }
}

}  // namespace vsmile
