#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "vsmile/pricing.hpp"

using namespace vsmile;

namespace {

ModelSpec rough_spec(double eta, double rho, double h) {
  ModelSpec s;
  s.kind = KernelKind::Rough;
  s.eta = eta;
  s.rho = rho;
  s.h = h;
  return s;
}

}  // namespace

TEST_CASE("black: reference value, parity, shape, degenerate cases") {
  // independently computed: F = K = 100, sigma = 0.2, t = 1
  CHECK(black_call(100.0, 100.0, 0.2, 1.0) == doctest::Approx(7.9655674554057963).epsilon(1e-13));
  // vega = F phi(d1) sqrt(t), d1 = 0.1
  CHECK(black_vega(100.0, 100.0, 0.2, 1.0) == doctest::Approx(39.695254747701178).epsilon(1e-13));

  for (double k : {60.0, 95.0, 100.0, 120.0, 180.0}) {
    const double c = black_call(100.0, k, 0.35, 1.7);
    const double p = black_put(100.0, k, 0.35, 1.7);
    CHECK(c - p == doctest::Approx(100.0 - k).epsilon(1e-12));
    CHECK(c > std::max(100.0 - k, 0.0));
    CHECK(c < 100.0);
  }

  // increasing in volatility
  double prev = 0.0;
  for (double sigma : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    const double c = black_call(100.0, 110.0, sigma, 0.5);
    CHECK(c > prev);
    prev = c;
  }

  CHECK(black_call(100.0, 80.0, 0.0, 1.0) == 20.0);  // intrinsic at sigma = 0
  CHECK(black_call(100.0, 120.0, 0.0, 1.0) == 0.0);
  CHECK(black_vega(100.0, 80.0, 0.0, 1.0) == 0.0);

  CHECK_THROWS_AS(black_call(-1.0, 100.0, 0.2, 1.0), std::domain_error);
  CHECK_THROWS_AS(black_call(100.0, 0.0, 0.2, 1.0), std::domain_error);
  CHECK_THROWS_AS(black_call(100.0, 100.0, -0.2, 1.0), std::domain_error);
  CHECK_THROWS_AS(black_call(100.0, 100.0, 0.2, 0.0), std::domain_error);
}

TEST_CASE("implied_vol: round trips across the surface to 1e-9") {
  for (double sigma : {0.01, 0.2, 1.5, 3.0})
    for (double k : {-2.0, -0.5, 0.0, 0.5, 2.0})
      for (double t : {1.0 / 52.0, 1.0, 5.0}) {
        const double strike = std::exp(k);
        const double price = black_call(1.0, strike, sigma, t);
        const double tv = price - std::max(1.0 - strike, 0.0);
        if (tv < 1e-13) continue;  // below representable time value, skip
        CAPTURE(sigma);
        CAPTURE(k);
        CAPTURE(t);
        CHECK(implied_vol(price, 1.0, strike, t) == doctest::Approx(sigma).epsilon(1e-9));
        const double put = black_put(1.0, strike, sigma, t);
        CHECK(implied_vol(put, 1.0, strike, t, false) == doctest::Approx(sigma).epsilon(1e-9));
      }
}

TEST_CASE("implied_vol: deep out-of-the-money puts keep relative precision") {
  // k = -0.3 one week out is ~11 sigma: the call is indistinguishable from
  // intrinsic in doubles there, but the put carries the whole time value.
  const double strike = std::exp(-0.3);
  const double t = 1.0 / 52.0;
  const double put = black_put(1.0, strike, 0.2, t);
  CHECK(put > 0.0);
  CHECK(put < 1e-25);
  CHECK(implied_vol(put, 1.0, strike, t, false) == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("implied_vol: bound violations carry the attainable range") {
  CHECK_THROWS_WITH_AS(implied_vol(1.01, 1.0, std::exp(-0.1), 1.0),
                       doctest::Contains("outside the attainable range"), std::domain_error);
  CHECK_THROWS_AS(implied_vol(0.05, 1.0, std::exp(-0.1), 1.0), std::domain_error);  // < intrinsic
  CHECK_THROWS_AS(implied_vol(-0.01, 1.0, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(implied_vol(0.1, 1.0, 1.0, -1.0), std::domain_error);
  CHECK(implied_vol(std::max(1.0 - std::exp(-0.1), 0.0), 1.0, std::exp(-0.1), 1.0) == 0.0);
}

TEST_CASE("mc_surface: vanishing vol-of-vol reproduces Black exactly") {
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  std::vector<SliceRequest> req = {{0.5, {-0.3, -0.1, 0.0, 0.1, 0.3}},
                                   {1.0, {-0.3, -0.1, 0.0, 0.1, 0.3}}};
  McConfig cfg;
  cfg.n_paths = 1 << 12;
  cfg.seed = 777;
  cfg.n_steps = 64;

  SUBCASE("rho = 0: conditionally exact, zero variance") {
    const auto res = mc_surface(rough_spec(1e-8, 0.0, 0.1), xi0, req, cfg);
    for (const auto& q : res.quotes) {
      REQUIRE(q.iv_ok);
      CHECK(q.iv == doctest::Approx(0.2).epsilon(1e-7));
      CHECK(q.price_se < 1e-10);
    }
  }
  SUBCASE("rho = -0.7: the mixing identity integrates out the spot factor") {
    const auto res = mc_surface(rough_spec(1e-8, -0.7, 0.1), xi0, req, cfg);
    for (const auto& q : res.quotes) {
      REQUIRE(q.iv_ok);
      CHECK(q.iv_se < 2.5e-3);
      CHECK(std::fabs(q.iv - 0.2) < std::max(5.0 * q.iv_se, 1e-7));
    }
  }
}

TEST_CASE("mc_surface: mixing beats the plain payoff estimator everywhere tested") {
  const auto spec = rough_spec(1.0, -0.7, 0.1);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  const std::vector<SliceRequest> req = {{1.0, {-0.2, 0.0, 0.2}}};
  McConfig cfg;
  cfg.n_paths = 1 << 12;
  cfg.seed = 31;
  cfg.n_steps = 64;

  auto cfg_mix = cfg, cfg_plain = cfg;
  cfg_plain.estimator = Estimator::Plain;
  const auto mix = mc_surface(spec, xi0, req, cfg_mix);
  const auto plain = mc_surface(spec, xi0, req, cfg_plain);
  REQUIRE(mix.quotes.size() == plain.quotes.size());
  for (std::size_t i = 0; i < mix.quotes.size(); ++i) {
    CAPTURE(mix.quotes[i].k);
    CHECK(mix.quotes[i].price_se < plain.quotes[i].price_se);
    REQUIRE(mix.quotes[i].iv_ok);
    REQUIRE(plain.quotes[i].iv_ok);
    const double tol =
        4.0 * std::sqrt(mix.quotes[i].iv_se * mix.quotes[i].iv_se +
                        plain.quotes[i].iv_se * plain.quotes[i].iv_se);
    CHECK(std::fabs(mix.quotes[i].iv - plain.quotes[i].iv) < tol);
  }
}

TEST_CASE("mc_surface: far out-of-the-money value survives only under mixing") {
  // At k = -3 no sampled path ends anywhere near the strike, so the plain
  // payoff prices an exact zero; the conditional-Black estimator keeps the
  // sliver of genuine value and still inverts to a sane volatility.
  const auto spec = rough_spec(0.6, -0.6, 0.15);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  const std::vector<SliceRequest> req = {{1.0, {-3.0}}};
  McConfig cfg;
  cfg.n_paths = 1 << 10;
  cfg.seed = 5;
  cfg.n_steps = 32;

  const auto mix = mc_surface(spec, xi0, req, cfg);
  REQUIRE(mix.quotes[0].iv_ok);
  CHECK(mix.quotes[0].price > 0.0);
  CHECK(mix.quotes[0].price < 1e-6);
  CHECK(mix.quotes[0].iv > 0.1);
  CHECK(mix.quotes[0].iv < 1.5);

  auto cfg_plain = cfg;
  cfg_plain.estimator = Estimator::Plain;
  const auto plain = mc_surface(spec, xi0, req, cfg_plain);
  CHECK(plain.quotes[0].price == 0.0);
  CHECK(plain.quotes[0].price_se == 0.0);
  CHECK(plain.quotes[0].iv == 0.0);  // a zero price is exactly intrinsic
}

TEST_CASE("mc_surface: strike monotonicity, parity reconstruction, CLT scaling") {
  const auto spec = rough_spec(0.8, -0.65, 0.12);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  std::vector<double> ks;
  for (double k = -0.25; k <= 0.251; k += 0.05) ks.push_back(k);
  const std::vector<SliceRequest> req = {{0.5, ks}};
  McConfig cfg;
  cfg.n_paths = 1 << 12;
  cfg.seed = 2024;
  cfg.n_steps = 64;
  const auto res = mc_surface(spec, xi0, req, cfg);

  // the quoted side is out-of-the-money; the in-the-money side is defined
  // through parity, so the call curve reconstructs as put + (F - K) below
  // the forward and must be nonincreasing in strike
  std::vector<double> call, se;
  for (const auto& q : res.quotes) {
    call.push_back(q.k < 0.0 ? q.price + (1.0 - std::exp(q.k)) : q.price);
    se.push_back(q.price_se);
  }
  for (std::size_t i = 0; i + 1 < call.size(); ++i)
    CHECK(call[i + 1] <= call[i] + 2.0 * (se[i] + se[i + 1]));

  // quadrupling the paths must halve the reported errors, within 20%
  auto cfg4 = cfg;
  cfg4.n_paths = cfg.n_paths * 4;
  const auto res4 = mc_surface(spec, xi0, req, cfg4);
  for (std::size_t i = 0; i < res.quotes.size(); ++i) {
    CAPTURE(res.quotes[i].k);
    const double ratio = res.quotes[i].price_se / res4.quotes[i].price_se;
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.4);
  }
}

TEST_CASE("mc_surface: deterministic, batch-size independent, seed sensitive") {
  const auto spec = rough_spec(0.8, -0.6, 0.2);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 2.0);
  const std::vector<SliceRequest> req = {{0.7, {-0.1, 0.0}}, {2.0, {0.0, 0.15}}};
  McConfig cfg;
  cfg.n_paths = 1 << 11;
  cfg.seed = 99;
  cfg.n_steps = 50;
  cfg.batch_paths = 512;

  const auto a = mc_surface(spec, xi0, req, cfg);
  const auto b = mc_surface(spec, xi0, req, cfg);
  auto cfg_big = cfg;
  cfg_big.batch_paths = 2048;
  const auto c = mc_surface(spec, xi0, req, cfg_big);
  auto cfg_seed = cfg;
  cfg_seed.seed = 100;
  const auto d = mc_surface(spec, xi0, req, cfg_seed);

  REQUIRE(a.quotes.size() == 4);
  for (std::size_t i = 0; i < a.quotes.size(); ++i) {
    CHECK(a.quotes[i].price == b.quotes[i].price);
    CHECK(a.quotes[i].price == c.quotes[i].price);  // accumulation order is path order
    CHECK(a.quotes[i].price_se == c.quotes[i].price_se);
    CHECK(a.quotes[i].price != d.quotes[i].price);
  }
}

TEST_CASE("mc_surface: maturity snapping is reported, warnings propagate") {
  const auto spec = rough_spec(0.5, -0.5, 0.2);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  McConfig cfg;
  cfg.n_paths = 64;
  cfg.n_steps = 10;
  const auto res = mc_surface(spec, xi0, {{0.55, {0.0}}, {1.0, {0.0}}}, cfg);
  CHECK(res.quotes[0].t_eff == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(res.quotes[0].flag.find("snapped") != std::string::npos);
  CHECK(res.quotes[1].t_eff == 1.0);
  CHECK(res.quotes[1].flag.empty());

  ModelSpec pd = spec;
  pd.kind = KernelKind::PathDependent;
  pd.h = -0.5;
  const auto coarse = mc_surface(pd, xi0, {{1.0, {0.0}}}, cfg);  // dt = 0.1 > 1/52
  REQUIRE(!coarse.warnings.empty());
  CHECK(coarse.warnings[0].find("epsilon") != std::string::npos);
}

TEST_CASE("mc_surface: request validation") {
  const auto spec = rough_spec(0.5, -0.5, 0.2);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  McConfig cfg;
  cfg.n_paths = 64;
  CHECK_THROWS_AS(mc_surface(spec, xi0, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(mc_surface(spec, xi0, {{1.0, {}}}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(mc_surface(spec, xi0, {{-1.0, {0.0}}}, cfg), std::invalid_argument);
  McConfig tiny = cfg;
  tiny.n_paths = 1;
  CHECK_THROWS_AS(mc_surface(spec, xi0, {{1.0, {0.0}}}, tiny), std::invalid_argument);
}
