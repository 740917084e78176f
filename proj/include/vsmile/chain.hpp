#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace vsmile {

struct Quote {
  double strike = 0.0;
  double k = 0.0;  // log(strike / forward)
  double bid_iv = 0.0;
  double ask_iv = 0.0;
  double mid_iv = 0.0;
};

struct ChainSlice {
  double t = 0.0;        // expiry in years
  double forward = 0.0;  // forward for this expiry
  std::vector<Quote> quotes;
};

struct OptionChain {
  std::string date;  // ISO yyyy-mm-dd
  std::vector<ChainSlice> slices;  // sorted by t
};

struct ParseReport {
  std::size_t n_rows = 0;
  std::size_t n_rejected = 0;
  std::vector<std::string> messages;  // one line per rejected row, with line numbers
};

// Implied-vol surface shared by market data and model output. Optional fields
// (bid / ask band, Monte Carlo standard error) are NaN when absent.
struct IVPoint {
  double k = 0.0;
  double iv = 0.0;
  double bid = std::numeric_limits<double>::quiet_NaN();
  double ask = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
};

struct IVSlice {
  double t = 0.0;
  std::vector<IVPoint> points;  // sorted by k
};

struct IVSurface {
  std::string date;
  std::vector<IVSlice> slices;  // sorted by t

  void validate() const;  // ordering + positive finite vols
  const IVSlice* find_slice(double t, double tol = 1e-9) const;
};

IVSurface surface_from_chain(const OptionChain& chain);

// CSV: date,maturity_years,log_moneyness,iv_mid[,iv_bid,iv_ask,std_error];
// the long layout is used when every point carries band and error data.
void write_surface(std::ostream& out, const IVSurface& surface,
                   const std::string& preamble_comment = "");
IVSurface parse_surface(std::istream& in);

// Reads the quote CSV (header: date,expiry_years,strike,forward,bid_iv,ask_iv,mid_iv).
// Leading '#' lines are treated as comments. A malformed header or an
// inconsistent forward within one expiry aborts with std::runtime_error;
// individually bad rows are rejected and reported.
std::pair<OptionChain, ParseReport> parse_chain(std::istream& in);
std::pair<OptionChain, ParseReport> parse_chain_file(const std::string& path);

void write_chain(std::ostream& out, const OptionChain& chain,
                 const std::string& preamble_comment = "");

}  // namespace vsmile
