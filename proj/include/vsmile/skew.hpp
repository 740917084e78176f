#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vsmile/chain.hpp"
#include "vsmile/types.hpp"

namespace vsmile {

enum class SkewSource { Market, ModelFd, ModelExpansion };
std::string to_string(SkewSource s);

// Absolute ATM skew |d sigma / dk at k=0| per maturity, from one source.
struct SkewCurve {
  std::vector<double> maturities;
  std::vector<double> skew;
  SkewSource source = SkewSource::Market;
  std::vector<std::string> notes;  // skipped slices, modelling assumptions
};

// Near-the-money fit window shared by the market-skew fit and the
// skew-augmented calibration objective.
constexpr double kSkewWindowLo = -0.05;
constexpr double kSkewWindowHi = 0.03;

// First-order (in vol-of-vol) closed-form ATM skew, flat forward variance
// assumed. Always reported as an absolute value.
double skew_expansion(const ModelSpec& spec, double maturity);

// T -> 0 limit of skew_expansion; +infinity for the singular kernel with
// h < 1/2 (the skew explodes), finite for all smoothed kernels.
double skew_limit_t0(const ModelSpec& spec);

// Central finite difference |sigma(T, dk) - sigma(T, -dk)| / (2 dk); the
// surface must carry quotes at exactly +-dk for that maturity.
double model_skew_fd(const IVSurface& surface, double maturity, double dk = 0.005);

struct SkewFit {
  double skew = 0.0;       // |linear coefficient| of the local cubic
  double std_error = 0.0;  // OLS standard error of that coefficient
  std::size_t n_quotes = 0;
};

// Least-squares cubic in k over [kSkewWindowLo, kSkewWindowHi]; needs at
// least five quotes in the window.
SkewFit market_skew_fit(const IVSlice& slice);
double market_skew(const IVSlice& slice);

SkewCurve expansion_skew_curve(const ModelSpec& spec, const std::vector<double>& maturities);
SkewCurve fd_skew_curve(const IVSurface& surface, double dk = 0.005);
SkewCurve market_skew_curve(const IVSurface& surface);

// CSV: maturity_years,skew,source
void write_skew_curve(std::ostream& out, const SkewCurve& curve,
                      const std::string& preamble_comment = "");

}  // namespace vsmile
