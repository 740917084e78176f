#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsmile/chain.hpp"
#include "vsmile/forward_variance.hpp"
#include "vsmile/simulation.hpp"
#include "vsmile/types.hpp"

namespace vsmile {

// Undiscounted Black prices on a forward. sigma = 0 returns intrinsic value.
double black_call(double f, double k, double sigma, double t);
double black_put(double f, double k, double sigma, double t);
double black_vega(double f, double k, double sigma, double t);

// Inverts black_call / black_put. Throws std::domain_error when the price
// sits outside the static no-arbitrage bounds, quoting them in the message.
// Safeguarded Newton, terminal accuracy 1e-10 in volatility.
double implied_vol(double price, double f, double k, double t, bool is_call = true);

enum class Estimator { Mixing, Plain };

struct SliceRequest {
  double t = 1.0;
  std::vector<double> ks;  // log-moneyness ln(K/F)
};

struct McConfig {
  std::size_t n_paths = 1 << 17;
  std::uint64_t seed = 1234;
  Estimator estimator = Estimator::Mixing;
  bool antithetic = true;
  bool control_variate = true;
  // Paths simulated per batch; estimates do not depend on this (accumulation
  // follows global path order), it only bounds peak memory.
  std::size_t batch_paths = 1 << 13;
  std::size_t n_steps = 0;  // 0 = default_pricing_grid policy on max maturity
};

struct QuoteEstimate {
  double t_req = 0.0, t_eff = 0.0;  // requested maturity, grid-snapped maturity
  double k = 0.0;
  double price = 0.0, price_se = 0.0;  // out-of-the-money side (call for k >= 0), forward units
  double iv = 0.0, iv_se = 0.0;
  bool iv_ok = false;
  std::string flag;  // non-empty when something was snapped or failed
};

struct SurfaceResult {
  ModelSpec spec;
  McConfig config;
  TimeGrid grid;
  std::vector<QuoteEstimate> quotes;  // request order: slice-major, then strike
  std::vector<std::string> warnings;
};

// Prices every requested (t, k) from one set of simulated paths. Mixing
// estimator: per path F_eff = exp(rho sum sqrt(V) dW - rho^2/2 sum V dt),
// v_eff = (1 - rho^2) sum V dt, quote value = Black(F_eff, e^k, v_eff); the
// control variate is F_eff (respectively S_T for the plain payoff), whose
// expectation is exactly 1 under the scheme.
SurfaceResult mc_surface(const ModelSpec& spec, const ForwardVarianceCurve& xi0,
                         const std::vector<SliceRequest>& slices, const McConfig& cfg);

// Collapses a Monte Carlo result into the shared surface form (slices merged
// by effective maturity, strikes sorted). Quotes whose implied vol could not
// be recovered are dropped; their flags land in the returned warnings.
IVSurface to_iv_surface(const SurfaceResult& res, std::vector<std::string>* dropped = nullptr);

}  // namespace vsmile
