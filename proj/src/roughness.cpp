#include "vsmile/roughness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vsmile {

namespace {

struct Ols {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

Ols ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::domain_error("degenerate regression: regressor has zero variance");
  Ols f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double ss_res = syy - f.slope * sxy;
  f.r2 = syy > 0.0 ? 1.0 - std::max(0.0, ss_res) / syy : 1.0;
  return f;
}

PowerLawFit fit_regime(const std::vector<double>& ts, const std::vector<double>& skews,
                       PowerLawFit::Regime regime, double tau) {
  if (ts.size() < 3) throw std::invalid_argument("power-law fit needs >= 3 maturities per regime");
  std::vector<double> lx(ts.size()), ly(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(skews[i] > 0.0)) throw std::domain_error("power-law fit requires positive skew values");
    lx[i] = std::log(ts[i]);
    ly[i] = std::log(skews[i]);
  }
  const Ols f = ols_fit(lx, ly);
  PowerLawFit out;
  out.regime = regime;
  out.h_tilde = f.slope + 0.5;
  out.c = std::exp(f.intercept);
  out.r2 = f.r2;
  out.tau = tau;
  return out;
}

void split_curve(const SkewCurve& curve, double tau, std::vector<double>& ts_s,
                 std::vector<double>& sk_s, std::vector<double>& ts_l, std::vector<double>& sk_l) {
  ts_s.clear();
  sk_s.clear();
  ts_l.clear();
  sk_l.clear();
  for (std::size_t i = 0; i < curve.maturities.size(); ++i) {
    if (curve.maturities[i] < tau) {
      ts_s.push_back(curve.maturities[i]);
      sk_s.push_back(curve.skew[i]);
    } else {
      ts_l.push_back(curve.maturities[i]);
      sk_l.push_back(curve.skew[i]);
    }
  }
}

void check_curve(const SkewCurve& curve) {
  if (curve.maturities.size() != curve.skew.size())
    throw std::invalid_argument("skew curve fields have mismatched lengths");
  if (curve.maturities.empty()) throw std::invalid_argument("skew curve is empty");
}

}  // namespace

RVSeries realized_vol(const std::vector<double>& log_s, std::size_t bars_per_day) {
  if (bars_per_day == 0) throw std::invalid_argument("bars_per_day must be positive");
  if (log_s.size() < 2) throw std::invalid_argument("path too short for realized volatility");
  const std::size_t n_incr = log_s.size() - 1;
  if (n_incr % bars_per_day != 0)
    throw std::invalid_argument("path does not divide into whole trading days (ragged final day)");
  RVSeries rv;
  rv.values.resize(n_incr / bars_per_day);
  for (std::size_t day = 0; day < rv.values.size(); ++day) {
    double ss = 0.0;
    for (std::size_t i = 0; i < bars_per_day; ++i) {
      const std::size_t j = day * bars_per_day + i;
      const double d = log_s[j + 1] - log_s[j];
      ss += d * d;
    }
    rv.values[day] = std::sqrt(ss);
  }
  return rv;
}

double q_variation(const RVSeries& rv, double q, std::size_t delta) {
  if (delta == 0) throw std::invalid_argument("delta must be at least one day");
  if (!(q > 0.0)) throw std::invalid_argument("q must be positive");
  const std::size_t n = rv.values.size();
  if (n <= delta) throw std::invalid_argument("series shorter than one lag");
  const std::size_t n_pairs = (n - 1) / delta;
  double sum = 0.0;
  for (std::size_t k = 1; k <= n_pairs; ++k)
    sum += std::pow(std::fabs(rv.values[k * delta] - rv.values[(k - 1) * delta]), q);
  return sum / static_cast<double>(n_pairs);
}

RVSeries log_series(const RVSeries& rv) {
  RVSeries out;
  out.values.reserve(rv.values.size());
  for (double v : rv.values) {
    if (!(v > 0.0))
      throw std::domain_error("log increments need a strictly positive series");
    out.values.push_back(std::log(v));
  }
  return out;
}

HurstEstimate estimate_hurst(const RVSeries& rv, const std::vector<double>& qs,
                             std::size_t max_delta) {
  if (qs.empty()) throw std::invalid_argument("no q exponents given");
  if (max_delta == 0) throw std::invalid_argument("max_delta must be positive");
  if (rv.values.size() < 2 * max_delta)
    throw std::invalid_argument("series too short for the requested lag range");

  HurstEstimate est;
  est.qs = qs;
  std::vector<double> lx(max_delta), ly(max_delta);
  for (std::size_t d = 1; d <= max_delta; ++d) lx[d - 1] = std::log(static_cast<double>(d));
  for (double q : qs) {
    for (std::size_t d = 1; d <= max_delta; ++d) {
      const double m = q_variation(rv, q, d);
      if (!(m > 0.0))
        throw std::domain_error("degenerate regression: q-variation vanishes at some lag");
      ly[d - 1] = std::log(m);
    }
    const Ols f = ols_fit(lx, ly);
    est.zeta.push_back(f.slope);
    est.r2.push_back(f.r2);
  }
  const Ols h = ols_fit(est.qs, est.zeta);
  est.h_hat = h.slope;
  est.intercept = h.intercept;
  est.h_r2 = h.r2;
  return est;
}

HurstEstimate estimate_hurst_log(const RVSeries& rv, const std::vector<double>& qs,
                                 std::size_t max_delta) {
  return estimate_hurst(log_series(rv), qs, max_delta);
}

std::string to_string(PowerLawFit::Regime r) {
  switch (r) {
    case PowerLawFit::Regime::Single: return "single";
    case PowerLawFit::Regime::Short: return "short";
    case PowerLawFit::Regime::Long: return "long";
  }
  throw std::logic_error("unreachable regime");
}

PowerLawFit power_law_fit_window(const SkewCurve& curve) {
  check_curve(curve);
  return fit_regime(curve.maturities, curve.skew, PowerLawFit::Regime::Single, 0.0);
}

std::vector<PowerLawFit> power_law_skew_fit(const SkewCurve& curve, std::optional<double> tau) {
  check_curve(curve);
  std::vector<double> ts_s, sk_s, ts_l, sk_l;
  if (!tau) {
    // sweep cutoffs over the quoted maturities between one month and one year
    double best_tau = 0.0, best_score = -1.0;
    for (double cand : curve.maturities) {
      if (cand < 1.0 / 12.0 - 1e-12 || cand > 1.0 + 1e-12) continue;
      split_curve(curve, cand, ts_s, sk_s, ts_l, sk_l);
      if (ts_s.size() < 3 || ts_l.size() < 3) continue;
      const double score = (fit_regime(ts_s, sk_s, PowerLawFit::Regime::Short, cand).r2 +
                            fit_regime(ts_l, sk_l, PowerLawFit::Regime::Long, cand).r2) /
                           2.0;
      if (score > best_score) {
        best_score = score;
        best_tau = cand;
      }
    }
    if (best_score < 0.0)
      throw std::invalid_argument("no cutoff in [1m, 1y] leaves >= 3 maturities per regime");
    tau = best_tau;
  }
  split_curve(curve, *tau, ts_s, sk_s, ts_l, sk_l);
  return {fit_regime(ts_s, sk_s, PowerLawFit::Regime::Short, *tau),
          fit_regime(ts_l, sk_l, PowerLawFit::Regime::Long, *tau)};
}

void write_qvariation_csv(std::ostream& out, const RVSeries& rv, const std::vector<double>& qs,
                          std::size_t max_delta) {
  out << "q,delta_days,m\n";
  char buf[64];
  for (double q : qs)
    for (std::size_t d = 1; d <= max_delta; ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", q_variation(rv, q, d));
      out << q << ',' << d << ',' << buf << '\n';
    }
}

void write_hurst_csv(std::ostream& out, const HurstEstimate& est) {
  out << "# h_hat=" << est.h_hat << " intercept=" << est.intercept << " r2=" << est.h_r2 << '\n';
  out << "q,zeta_q,r2\n";
  for (std::size_t i = 0; i < est.qs.size(); ++i)
    out << est.qs[i] << ',' << est.zeta[i] << ',' << est.r2[i] << '\n';
}

void write_power_law_csv(std::ostream& out, const std::vector<PowerLawFit>& fits) {
  out << "regime,h_tilde,c,r2,tau\n";
  char buf[64];
  for (const auto& f : fits) {
    out << to_string(f.regime);
    for (double v : {f.h_tilde, f.c, f.r2, f.tau}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace vsmile
