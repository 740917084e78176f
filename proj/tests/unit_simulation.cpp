#include <cmath>
#include <stdexcept>
#include <cstring>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "vsmile/kernels.hpp"
#include "vsmile/rng.hpp"
#include "vsmile/simulation.hpp"

using namespace vsmile;

namespace {

ModelSpec spec_of(KernelKind kind, double eta, double rho, double h, double eta_l = 0.0) {
  ModelSpec s;
  s.kind = kind;
  s.eta = eta;
  s.rho = rho;
  s.h = h;
  s.eta_l = eta_l;
  return s;
}

double sample_mean(const std::vector<double>& a, std::size_t n_paths, std::size_t stride,
                   std::size_t col) {
  double m = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) m += a[p * stride + col];
  return m / static_cast<double>(n_paths);
}

double sample_cov(const std::vector<double>& a, std::size_t n_paths, std::size_t stride,
                  std::size_t col1, std::size_t col2) {
  const double m1 = sample_mean(a, n_paths, stride, col1);
  const double m2 = sample_mean(a, n_paths, stride, col2);
  double c = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p)
    c += (a[p * stride + col1] - m1) * (a[p * stride + col2] - m2);
  return c / static_cast<double>(n_paths - 1);
}

}  // namespace

TEST_CASE("ou_step: exact one-step law and argument checks") {
  const double lambda = 2.0, dt = 0.25, vol = 0.8, z = 0.3, x0 = 1.5;
  const double expect =
      std::exp(-lambda * dt) * x0 + vol * std::sqrt(-std::expm1(-2.0 * lambda * dt) / (2.0 * lambda)) * z;
  CHECK(ou_step(x0, lambda, dt, vol, z) == doctest::Approx(expect).epsilon(1e-15));
  CHECK_THROWS_AS(ou_step(x0, 0.0, dt, vol, z), std::domain_error);
  CHECK_THROWS_AS(ou_step(x0, -1.0, dt, vol, z), std::domain_error);
  CHECK_THROWS_AS(ou_step(x0, lambda, 0.0, vol, z), std::domain_error);
}

TEST_CASE("noise layout: channels, antithetic mirror, offset slicing") {
  CHECK(noise_channels(KernelKind::Rough) == 3);
  CHECK(noise_channels(KernelKind::PathDependent) == 2);
  CHECK(noise_channels(KernelKind::OneFactor) == 2);
  CHECK(noise_channels(KernelKind::TwoFactor) == 2);

  const std::size_t n_steps = 16, stride = n_steps * 3;
  auto noise = make_noise(KernelKind::Rough, 8, n_steps, 99, {true, 0});
  REQUIRE(noise.size() == 8 * stride);
  for (std::size_t q = 0; q < 4; ++q)
    for (std::size_t i = 0; i < stride; ++i)
      CHECK(noise[(2 * q + 1) * stride + i] == -noise[2 * q * stride + i]);

  // a batch starting at path 4 reproduces rows 4..7 of the full run
  auto tail = make_noise(KernelKind::Rough, 4, n_steps, 99, {true, 4});
  CHECK(std::memcmp(tail.data(), noise.data() + 4 * stride, 4 * stride * sizeof(double)) == 0);

  // non-antithetic rows come straight from the per-path substream
  auto plain = make_noise(KernelKind::OneFactor, 4, n_steps, 7, {false, 0});
  Rng rng(7, 3);
  for (std::size_t i = 0; i < n_steps * 2; ++i)
    CHECK(plain[3 * n_steps * 2 + i] == rng.next_gaussian());

  CHECK_THROWS_AS(make_noise(KernelKind::Rough, 3, 8, 1, {true, 0}), std::invalid_argument);
  CHECK_THROWS_AS(make_noise(KernelKind::Rough, 4, 8, 1, {true, 1}), std::invalid_argument);
}

TEST_CASE("simulate: determinism, batch equivalence, noise-buffer equivalence") {
  const auto spec = spec_of(KernelKind::Rough, 0.8, -0.6, 0.2);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  const TimeGrid grid{1.0, 32};

  const auto a = simulate(spec, xi0, grid, 64, 42);
  const auto b = simulate(spec, xi0, grid, 64, 42);
  CHECK(a.x == b.x);
  CHECK(a.v == b.v);
  CHECK(a.log_s == b.log_s);

  const auto c = simulate(spec, xi0, grid, 64, 43);
  CHECK(a.x != c.x);

  // two half-runs with offsets stitch into the full run bit for bit
  const auto lo = simulate(spec, xi0, grid, 32, 42, {true, 0});
  const auto hi = simulate(spec, xi0, grid, 32, 42, {true, 32});
  CHECK(std::memcmp(a.x.data(), lo.x.data(), lo.x.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.x.data() + lo.x.size(), hi.x.data(), hi.x.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.log_s.data() + lo.log_s.size(), hi.log_s.data(),
                    hi.log_s.size() * sizeof(double)) == 0);

  // pre-drawn noise gives the same paths
  const auto noise = make_noise(spec.kind, 64, grid.n_steps, 42, {true, 0});
  const auto d = simulate_with_noise(spec, xi0, grid, 64, 42, noise);
  CHECK(a.x == d.x);
  CHECK(a.dw == d.dw);
  CHECK(a.log_s == d.log_s);
}

TEST_CASE("simulate: antithetic pairs mirror the Gaussian layer") {
  for (auto kind : {KernelKind::Rough, KernelKind::PathDependent, KernelKind::OneFactor,
                    KernelKind::TwoFactor}) {
    const auto spec = spec_of(kind, 0.5, -0.5, kind == KernelKind::Rough ? 0.1 : -0.3, 0.7);
    const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
    const TimeGrid grid{1.0, 16};
    const auto ps = simulate(spec, xi0, grid, 4, 5);
    // X is linear in the draws and every float op is sign-symmetric, so the
    // mirror is exact, not approximate.
    for (std::size_t i = 0; i < grid.n_steps; ++i) CHECK(ps.dw_row(1)[i] == -ps.dw_row(0)[i]);
    for (std::size_t i = 0; i <= grid.n_steps; ++i) CHECK(ps.x_row(1)[i] == -ps.x_row(0)[i]);
  }
}

TEST_CASE("simulate: argument validation and step-size warning") {
  const auto spec = spec_of(KernelKind::PathDependent, 0.5, -0.5, 0.0);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  CHECK_THROWS_AS(simulate(spec, xi0, TimeGrid{1.0, 16}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate(spec, xi0, TimeGrid{1.0, 16}, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate(spec, xi0, TimeGrid{1.5, 16}, 4, 1), std::domain_error);
  CHECK_THROWS_AS(
      simulate_with_noise(spec, xi0, TimeGrid{1.0, 16}, 4, 1, std::vector<double>(7)),
      std::invalid_argument);

  const auto coarse = simulate(spec, xi0, TimeGrid{1.0, 26}, 2, 1);  // dt = 2 epsilon
  REQUIRE(coarse.warnings.size() == 1);
  CHECK(coarse.warnings[0].find("epsilon") != std::string::npos);
  CHECK(simulate(spec, xi0, TimeGrid{1.0, 104}, 2, 1).warnings.empty());
  // the singular kernel has no smoothing scale, so no warning applies
  CHECK(simulate(spec_of(KernelKind::Rough, 0.5, -0.5, 0.1), xi0, TimeGrid{1.0, 26}, 2, 1)
            .warnings.empty());
}

TEST_CASE("simulate: variance of X matches the closed-form kernel L2 at every horizon") {
  // The cell weights are variance-matched, so any gap here is pure sampling
  // noise: for Gaussian X, SD(sample var) = L2 sqrt(2 / (n - 1)).
  const std::size_t n_paths = 40000;
  const TimeGrid grid{1.0, 128};
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  SimOptions opts;
  opts.antithetic = false;

  const std::vector<ModelSpec> specs = {
      spec_of(KernelKind::Rough, 1.0, -0.7, 0.1),
      spec_of(KernelKind::PathDependent, 0.0256, -0.688, -1.276),
      spec_of(KernelKind::OneFactor, 0.756, -0.684, -0.364),
      spec_of(KernelKind::TwoFactor, 0.430, -0.685, -0.497, 0.984),
  };
  for (const auto& spec : specs) {
    const std::string kind_name = to_string(spec.kind);
    CAPTURE(kind_name);
    const auto ps = simulate(spec, xi0, grid, n_paths, 2024, opts);
    for (std::size_t node : {32u, 64u, 128u}) {
      const double l2 = kernel_l2_integral(spec, grid.time(node));
      const double sv = sample_cov(ps.x, n_paths, grid.n_steps + 1, node, node);
      const double se = l2 * std::sqrt(2.0 / static_cast<double>(n_paths - 1));
      CAPTURE(node);
      CHECK(std::fabs(sv - l2) < 3.5 * se);
    }
    // off-diagonal covariance: statistically exact up to a small O(dt)
    // near-cell discretization term, absorbed in the allowance
    const std::size_t m = 64, M = 128;
    const double c = covariance(spec, grid.time(m), grid.time(M));
    const double css = kernel_l2_integral(spec, grid.time(m));
    const double ctt = kernel_l2_integral(spec, grid.time(M));
    const double sc = sample_cov(ps.x, n_paths, grid.n_steps + 1, m, M);
    const double se = std::sqrt((css * ctt + c * c) / static_cast<double>(n_paths - 1));
    CHECK(std::fabs(sc - c) < 4.0 * se + 0.015 * std::fabs(c));
  }
}

TEST_CASE("simulate: V is the exponential martingale of X and S is a martingale") {
  const std::size_t n_paths = 20000;
  const TimeGrid grid{1.0, 104};
  const double xi_flat = 0.04;
  const auto xi0 = ForwardVarianceCurve::flat(xi_flat, 1.0);

  const std::vector<ModelSpec> specs = {
      spec_of(KernelKind::Rough, 0.3, -0.7, 0.1),
      spec_of(KernelKind::PathDependent, 0.002, -0.688, -1.276),
      spec_of(KernelKind::OneFactor, 0.3, -0.684, -0.364),
      spec_of(KernelKind::TwoFactor, 0.2, -0.685, -0.497, 0.4),
  };
  for (const auto& spec : specs) {
    const std::string kind_name = to_string(spec.kind);
    CAPTURE(kind_name);
    const auto ps = simulate(spec, xi0, grid, n_paths, 7, {true, 0});
    const std::size_t stride = grid.n_steps + 1;

    // node-level identity: v = xi * exp(x - L2 / 2), checked on a few nodes
    for (std::size_t node : {1u, 50u, 104u}) {
      const double l2 = kernel_l2_integral(spec, grid.time(node));
      for (std::size_t p : {0u, 123u}) {
        const double expect = xi_flat * std::exp(ps.x_row(p)[node] - 0.5 * l2);
        CHECK(ps.v_row(p)[node] == doctest::Approx(expect).epsilon(1e-12));
      }
    }

    for (std::size_t node : {26u, 104u}) {
      const double l2 = kernel_l2_integral(spec, grid.time(node));
      const double mean_v = sample_mean(ps.v, n_paths, stride, node);
      const double se_v = xi_flat * std::sqrt(std::expm1(l2) / static_cast<double>(n_paths));
      CAPTURE(node);
      CHECK(std::fabs(mean_v - xi_flat) < 3.5 * se_v);
    }

    std::vector<double> s_t(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) s_t[p] = std::exp(ps.log_s_row(p)[grid.n_steps]);
    const double mean_s = sample_mean(s_t, n_paths, 1, 0);
    const double var_s = sample_cov(s_t, n_paths, 1, 0, 0);
    CHECK(std::fabs(mean_s - 1.0) < 4.0 * std::sqrt(var_s / static_cast<double>(n_paths)));
  }
}

TEST_CASE("simulate: convolution path agrees with the explicit weight formula") {
  // Path-dependent kernel, long grid (FFT route) and short grid (direct
  // route) against a brute-force sum rebuilt from first principles.
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 1.0);
  const double eps = 1.0 / 52.0;
  for (std::size_t n_steps : {96u, 1500u}) {
    const auto spec = spec_of(KernelKind::PathDependent, 0.7, -0.5, -0.8);
    const TimeGrid grid{1.0, n_steps};
    const double dt = grid.dt();
    const auto ps = simulate(spec, xi0, grid, 2, 11);

    std::vector<double> w(n_steps);
    for (std::size_t d = 0; d < n_steps; ++d) {
      const double a = d * dt + eps, b = a + dt;
      const double th = 2.0 * spec.h;
      w[d] = spec.eta * std::sqrt((std::pow(b, th) - std::pow(a, th)) / (th * dt));
    }
    const double* dw = ps.dw_row(0);
    const double* x = ps.x_row(0);
    double max_err = 0.0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < k; ++d) s += w[d] * dw[k - 1 - d];
      max_err = std::max(max_err, std::fabs(s - x[k]));
    }
    CHECK(max_err < 1e-10);
  }

  // Rough kernel: singular cell handled exactly, the rest via matched weights.
  const auto rspec = spec_of(KernelKind::Rough, 1.2, -0.5, 0.15);
  const TimeGrid rgrid{0.5, 1500};
  const double dt = rgrid.dt();
  const auto noise = make_noise(rspec.kind, 2, rgrid.n_steps, 13);
  const auto rps = simulate_with_noise(rspec, xi0, rgrid, 2, 13, noise);
  std::vector<double> w(rgrid.n_steps, 0.0);
  for (std::size_t d = 1; d < rgrid.n_steps; ++d) {
    const double a = d * dt, b = a + dt;
    const double th = 2.0 * rspec.h;
    w[d] = rspec.eta * std::sqrt((std::pow(b, th) - std::pow(a, th)) / (th * dt));
  }
  const double hp = rspec.h + 0.5;
  const double c1 = rspec.eta * std::pow(dt, rspec.h - 0.5) / hp;
  const double c2 =
      rspec.eta * std::pow(dt, rspec.h) * std::sqrt(1.0 / (2.0 * rspec.h) - 1.0 / (hp * hp));
  const double* dw = rps.dw_row(0);
  const double* x = rps.x_row(0);
  double max_err = 0.0;
  for (std::size_t k = 1; k <= rgrid.n_steps; ++k) {
    double s = c1 * dw[k - 1] + c2 * noise[(k - 1) * 3 + 2];
    for (std::size_t d = 1; d < k; ++d) s += w[d] * dw[k - 1 - d];
    max_err = std::max(max_err, std::fabs(s - x[k]));
  }
  CHECK(max_err < 1e-10);

  // exact-cell variance identity: c1^2 dt + c2^2 = eta^2 dt^{2h} / (2h)
  CHECK(c1 * c1 * dt + c2 * c2 ==
        doctest::Approx(rspec.eta * rspec.eta * std::pow(dt, 2.0 * rspec.h) / (2.0 * rspec.h))
            .epsilon(1e-13));
}

TEST_CASE("simulate: spot increments tie out against the stored variance path") {
  const auto spec = spec_of(KernelKind::TwoFactor, 0.4, -0.6, -0.5, 0.9);
  const auto xi0 = ForwardVarianceCurve::flat(0.09, 1.0);
  const TimeGrid grid{1.0, 64};
  const auto noise = make_noise(spec.kind, 2, grid.n_steps, 3);
  const auto ps = simulate_with_noise(spec, xi0, grid, 2, 3, noise);
  const double dt = grid.dt(), sq = std::sqrt(dt);
  const double rho = spec.rho, rp = std::sqrt(1.0 - rho * rho);
  const double* v = ps.v_row(0);
  const double* dw = ps.dw_row(0);
  const double* ls = ps.log_s_row(0);
  CHECK(ls[0] == 0.0);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const double dperp = sq * noise[k * 2 + 1];
    const double expect = ls[k] - 0.5 * v[k] * dt + std::sqrt(v[k]) * (rho * dw[k] + rp * dperp);
    CHECK(ls[k + 1] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("path dump: save / load round trip is bit-exact") {
  const auto spec = spec_of(KernelKind::Rough, 0.9, -0.65, 0.12);
  const auto xi0 = ForwardVarianceCurve::flat(0.04, 0.5);
  const TimeGrid grid{0.5, 16};
  const auto ps = simulate(spec, xi0, grid, 8, 21);

  std::stringstream buf;
  save_paths(buf, ps);
  const auto back = load_paths(buf);
  CHECK(back.n_paths == ps.n_paths);
  CHECK(back.seed == ps.seed);
  CHECK(back.grid.n_steps == ps.grid.n_steps);
  CHECK(back.grid.t_end == ps.grid.t_end);
  CHECK(back.spec.kind == ps.spec.kind);
  CHECK(back.spec.eta == ps.spec.eta);
  CHECK(back.dw == ps.dw);
  CHECK(back.x == ps.x);
  CHECK(back.v == ps.v);
  CHECK(back.log_s == ps.log_s);

  std::stringstream junk("{\"magic\":\"something-else\"}\n");
  CHECK_THROWS_AS(load_paths(junk), std::runtime_error);
  const std::string full = buf.str();
  std::stringstream trunc(full.substr(0, full.find('\n') + 33));  // header + a sliver of data
  CHECK_THROWS_AS(load_paths(trunc), std::runtime_error);
}
