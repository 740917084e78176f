#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vsmile/skew.hpp"

namespace vsmile {

// Daily realized-volatility series (per square-root day).
struct RVSeries {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
};

// Root of the summed squared intraday log returns, one value per trading day.
// The path must split into whole days of `bars_per_day` five-minute intervals.
RVSeries realized_vol(const std::vector<double>& log_s, std::size_t bars_per_day = 78);

// Empirical q-variation over non-overlapping lags of `delta` days.
double q_variation(const RVSeries& rv, double q, std::size_t delta);

// Elementwise log of a strictly positive series. Volatility roughness is
// measured on log-vol increments: with vol lognormal and swinging over
// orders of magnitude, level increments are dominated by the largest
// excursions and the scaling exponents flatten out.
RVSeries log_series(const RVSeries& rv);

struct HurstEstimate {
  std::vector<double> qs;
  std::vector<double> zeta;  // per-q slope of log m(q,.) on log delta
  std::vector<double> r2;    // fit quality of each zeta regression
  double h_hat = 0.0;        // slope of zeta_q on q
  double intercept = 0.0;    // reported intercept of the same regression
  double h_r2 = 0.0;
};

HurstEstimate estimate_hurst(const RVSeries& rv,
                             const std::vector<double>& qs = {0.5, 1.0, 1.5, 2.0, 3.0},
                             std::size_t max_delta = 50);

// The realized-volatility pipeline: estimate_hurst on log RV.
HurstEstimate estimate_hurst_log(const RVSeries& rv,
                                 const std::vector<double>& qs = {0.5, 1.0, 1.5, 2.0, 3.0},
                                 std::size_t max_delta = 50);

struct PowerLawFit {
  enum class Regime { Single, Short, Long };
  Regime regime = Regime::Single;
  double h_tilde = 0.0;  // log-log slope + 1/2
  double c = 0.0;        // level
  double r2 = 0.0;
  double tau = 0.0;      // cutoff (0 for single-regime fits)
};

std::string to_string(PowerLawFit::Regime r);

// Whole-curve fit of skew = c T^(h_tilde - 1/2).
PowerLawFit power_law_fit_window(const SkewCurve& curve);

// Two-regime fit split at tau (short: T < tau, long: T >= tau). Without a
// cutoff, tau is swept over curve maturities between one month and one year
// and the value maximizing the mean R-squared of the two fits is kept.
std::vector<PowerLawFit> power_law_skew_fit(const SkewCurve& curve,
                                            std::optional<double> tau = std::nullopt);

void write_qvariation_csv(std::ostream& out, const RVSeries& rv, const std::vector<double>& qs,
                          std::size_t max_delta);
void write_hurst_csv(std::ostream& out, const HurstEstimate& est);
void write_power_law_csv(std::ostream& out, const std::vector<PowerLawFit>& fits);

}  // namespace vsmile
