#include "vsmile/forward_variance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "vsmile/chain.hpp"
#include "vsmile/normal.hpp"
#include "vsmile/quadrature.hpp"

namespace vsmile {

void ForwardVarianceCurve::validate() const {
  if (knots.empty() || knots.size() != xi.size())
    throw std::invalid_argument("forward-variance curve needs matching, nonempty knots/xi");
  double prev = 0.0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i] > prev))
      throw std::invalid_argument("forward-variance knots must be strictly increasing and > 0");
    if (!(xi[i] > 0.0) || !std::isfinite(xi[i]))
      throw std::invalid_argument("forward-variance values must be positive and finite");
    prev = knots[i];
  }
}

double ForwardVarianceCurve::at(double t) const {
  if (t < 0.0) throw std::domain_error("forward variance queried at t < 0");
  if (t > knots.back())
    throw std::domain_error("forward variance queried beyond curve support");
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.end()) return xi.back();  // t == knots.back()
  return xi[static_cast<std::size_t>(it - knots.begin())];
}

double ForwardVarianceCurve::integral(double t) const {
  if (t < 0.0) throw std::domain_error("forward variance integral over negative horizon");
  if (t > knots.back() * (1.0 + 1e-12))
    throw std::domain_error("forward variance integral beyond curve support");
  double acc = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double hi = std::min(t, knots[i]);
    if (hi > prev) acc += xi[i] * (hi - prev);
    if (knots[i] >= t) break;
    prev = knots[i];
  }
  return acc;
}

ForwardVarianceCurve ForwardVarianceCurve::flat(double xi0, double t_end) {
  ForwardVarianceCurve c;
  c.knots = {t_end};
  c.xi = {xi0};
  c.validate();
  return c;
}

SmileSection::SmileSection(std::vector<double> k, std::vector<double> total_var, double t)
    : k_(std::move(k)), w_(std::move(total_var)), t_(t) {
  if (k_.size() != w_.size() || k_.size() < 2)
    throw std::invalid_argument("smile section needs >= 2 (k, w) nodes");
  if (!(t_ > 0.0)) throw std::invalid_argument("smile section maturity must be positive");
  for (std::size_t i = 0; i + 1 < k_.size(); ++i)
    if (!(k_[i] < k_[i + 1]))
      throw std::invalid_argument("smile section log-moneyness must be strictly increasing");
  for (double w : w_)
    if (!(w > 0.0)) throw std::invalid_argument("smile section total variance must be positive");

  // Fritsch-Carlson slopes
  const std::size_t n = k_.size();
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = k_[i + 1] - k_[i];
    delta[i] = (w_[i + 1] - w_[i]) / h[i];
  }
  slope_.assign(n, 0.0);
  if (n == 2) {
    slope_[0] = slope_[1] = delta[0];
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        slope_[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        slope_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    auto endpoint = [](double h0, double h1, double d0, double d1) {
      double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (d * d0 <= 0.0) return 0.0;
      if (d0 * d1 < 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return d;
    };
    slope_[0] = endpoint(h[0], h[1], delta[0], delta[1]);
    slope_[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }
}

double SmileSection::total_var(double k) const {
  if (k <= k_.front()) {
    return w_.front();  // flat vol extrapolation handled in vol(); w flat too
  }
  if (k >= k_.back()) {
    return w_.back();
  }
  auto it = std::upper_bound(k_.begin(), k_.end(), k);
  const std::size_t i = static_cast<std::size_t>(it - k_.begin()) - 1;
  const double h = k_[i + 1] - k_[i];
  const double s = (k - k_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * w_[i] + h10 * h * slope_[i] + h01 * w_[i + 1] + h11 * h * slope_[i + 1];
}

double SmileSection::vol(double k) const { return std::sqrt(total_var(k) / t_); }

namespace {

// Forward-units Black values at strike e^k with total vol v = sigma sqrt(t).
double put_fu(double k, double v) {
  const double d1 = -k / v + 0.5 * v, d2 = d1 - v;
  return std::exp(k) * norm_cdf(-d2) - norm_cdf(-d1);
}
double call_fu(double k, double v) {
  const double d1 = -k / v + 0.5 * v, d2 = d1 - v;
  return norm_cdf(d1) - std::exp(k) * norm_cdf(d2);
}

// Closed-form tails of the 1/K^2-weighted strike integrals under flat vol.
// Antiderivative of c(k) e^{-k}: -c e^{-k} + v (d2 Phi(d2) + phi(d2)).
double call_tail(double b, double v) {
  const double d2 = -b / v - 0.5 * v;
  return call_fu(b, v) * std::exp(-b) - v * (d2 * norm_cdf(d2) + norm_pdf(d2));
}
// Antiderivative of p(k) e^{-k}: -p e^{-k} + v ((-d2) Phi(-d2) + phi(d2)).
double put_tail(double b, double v) {
  const double d2 = -b / v - 0.5 * v;
  return -put_fu(b, v) * std::exp(-b) + v * (-d2 * norm_cdf(-d2) + norm_pdf(d2));
}

}  // namespace

double log_contract_total_variance(const SmileSection& smile) {
  const double t = smile.t();
  double sig_max = 0.0;
  for (double k : {smile.k_min(), 0.5 * (smile.k_min() + smile.k_max()), 0.0, smile.k_max()})
    sig_max = std::max(sig_max, smile.vol(k));
  const double pad = 3.0 * sig_max * std::sqrt(t);
  const double k_lo = std::min(smile.k_min(), 0.0) - pad;
  const double k_hi = std::max(smile.k_max(), 0.0) + pad;

  auto integrand_put = [&](double k) { return put_fu(k, smile.vol(k) * std::sqrt(t)) * std::exp(-k); };
  auto integrand_call = [&](double k) { return call_fu(k, smile.vol(k) * std::sqrt(t)) * std::exp(-k); };
  const double core_put = integrate_or_throw(integrand_put, k_lo, 0.0, 2.5e-9);
  const double core_call = integrate_or_throw(integrand_call, 0.0, k_hi, 2.5e-9);
  const double v_lo = smile.vol(k_lo) * std::sqrt(t);
  const double v_hi = smile.vol(k_hi) * std::sqrt(t);
  return 2.0 * (core_put + put_tail(k_lo, v_lo) + core_call + call_tail(k_hi, v_hi));
}

ForwardVarianceCurve extract_fvc(const OptionChain& chain) {
  if (chain.slices.empty()) throw std::invalid_argument("cannot extract curve from empty chain");
  ForwardVarianceCurve curve;
  double lc_prev = 0.0, t_prev = 0.0;
  for (const auto& slice : chain.slices) {
    if (!(slice.t > t_prev))
      throw std::invalid_argument("chain expiries must be strictly increasing for extraction");
    if (slice.quotes.size() < 5)
      throw std::invalid_argument("slice needs >= 5 quotes for extraction");
    std::vector<double> ks, ws;
    ks.reserve(slice.quotes.size());
    for (const auto& q : slice.quotes) {
      if (!ks.empty() && !(q.k > ks.back())) continue;  // drop duplicate strikes
      ks.push_back(q.k);
      ws.push_back(q.mid_iv * q.mid_iv * slice.t);
    }
    if (ks.front() >= 0.0 || ks.back() <= 0.0)
      throw std::invalid_argument("slice quotes must span the forward (k = 0)");
    SmileSection smile(ks, ws, slice.t);
    const double lc = log_contract_total_variance(smile);
    double xi = (lc - lc_prev) / (slice.t - t_prev);
    if (xi < 1e-6) {
      curve.diagnostics.push_back("bucket [" + std::to_string(t_prev) + ", " +
                                  std::to_string(slice.t) +
                                  ") clamped to 1e-6 (calendar-arbitrage signal)");
      xi = 1e-6;
    }
    curve.knots.push_back(slice.t);
    curve.xi.push_back(xi);
    lc_prev = lc;
    t_prev = slice.t;
  }
  curve.validate();
  return curve;
}

void write_fvc(std::ostream& out, const ForwardVarianceCurve& curve) {
  curve.validate();
  for (const auto& d : curve.diagnostics) out << "# " << d << '\n';
  out << "t_start_years,t_end_years,xi\n";
  char buf[96];
  double t_prev = 0.0;
  for (std::size_t i = 0; i < curve.knots.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t_prev, curve.knots[i], curve.xi[i]);
    out << buf;
    t_prev = curve.knots[i];
  }
}

ForwardVarianceCurve parse_fvc(std::istream& in) {
  ForwardVarianceCurve curve;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  double t_prev = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "t_start_years,t_end_years,xi")
        throw std::invalid_argument("forward-variance csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    double t0 = 0.0, t1 = 0.0, xi = 0.0;
    char c1 = 0, c2 = 0;
    if (!(row >> t0 >> c1 >> t1 >> c2 >> xi) || c1 != ',' || c2 != ',')
      throw std::invalid_argument("forward-variance csv: bad row at line " +
                                  std::to_string(line_no));
    if (std::abs(t0 - t_prev) > 1e-12)
      throw std::invalid_argument("forward-variance csv: buckets not contiguous at line " +
                                  std::to_string(line_no));
    curve.knots.push_back(t1);
    curve.xi.push_back(xi);
    t_prev = t1;
  }
  if (!header_seen) throw std::invalid_argument("forward-variance csv: missing header");
  curve.validate();
  return curve;
}

}  // namespace vsmile
