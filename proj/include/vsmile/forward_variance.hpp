#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vsmile {

struct OptionChain;

// Piecewise-constant (cadlag) forward-variance curve. Bucket i covers
// [knots[i-1], knots[i]) with knots[-1] := 0.
struct ForwardVarianceCurve {
  std::vector<double> knots;
  std::vector<double> xi;
  std::vector<std::string> diagnostics;  // e.g. clamped buckets from extraction

  void validate() const;
  // Step evaluation; the right edge knots.back() maps onto the last bucket so
  // a simulation grid may end exactly at the curve's support boundary.
  double at(double t) const;
  // Exact integral of the step function over [0, t]; t beyond support throws.
  double integral(double t) const;
  double t_max() const { return knots.empty() ? 0.0 : knots.back(); }

  static ForwardVarianceCurve flat(double xi0, double t_end);
};

// Shape-preserving (Fritsch-Carlson) cubic in total implied variance
// w(k) = sigma^2 t over log-moneyness; flat vol extrapolation outside the
// quoted range.
class SmileSection {
 public:
  SmileSection(std::vector<double> k, std::vector<double> total_var, double t);

  double total_var(double k) const;
  double vol(double k) const;
  double t() const { return t_; }
  double k_min() const { return k_.front(); }
  double k_max() const { return k_.back(); }

 private:
  std::vector<double> k_, w_, slope_;
  double t_;
};

// Log-contract total variance 2 * [ int_0^F P/K^2 dK + int_F^inf C/K^2 dK ]
// in forward units: adaptive Simpson on log-strike over the quoted window
// (padded by 3 sigma sqrt(t)) plus closed-form flat-vol tails.
double log_contract_total_variance(const SmileSection& smile);

// Differences log-contract values across maturities into forward-variance
// buckets. Nonpositive buckets are clamped at 1e-6 and flagged.
ForwardVarianceCurve extract_fvc(const OptionChain& chain);

// CSV round trip: "t_start_years,t_end_years,xi" rows, '#' comment lines
// preserved on write as diagnostics.
void write_fvc(std::ostream& out, const ForwardVarianceCurve& curve);
ForwardVarianceCurve parse_fvc(std::istream& in);

}  // namespace vsmile
