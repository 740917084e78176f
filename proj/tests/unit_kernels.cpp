#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "vsmile/kernels.hpp"
#include "vsmile/normal.hpp"
#include "vsmile/quadrature.hpp"
#include "vsmile/types.hpp"

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

ModelSpec pd_spec(double eta, double rho, double h) {
  ModelSpec s;
  s.kind = KernelKind::PathDependent;
  s.eta = eta;
  s.rho = rho;
  s.h = h;
  return s;
}

ModelSpec of_spec(double eta, double rho, double h) {
  ModelSpec s;
  s.kind = KernelKind::OneFactor;
  s.eta = eta;
  s.rho = rho;
  s.h = h;
  return s;
}

ModelSpec tf_spec(double eta, double eta_l, double rho, double h) {
  ModelSpec s;
  s.kind = KernelKind::TwoFactor;
  s.eta = eta;
  s.eta_l = eta_l;
  s.rho = rho;
  s.h = h;
  return s;
}

}  // namespace

TEST_CASE("kernel_eval pointwise values") {
  // path-dependent at t = 0: 0.0256 * 52^1.776 evaluated independently
  auto pd = pd_spec(0.0256, -0.688, -1.276);
  CHECK(kernel_eval(pd, 0.0) == doctest::Approx(28.566820349129833).epsilon(1e-12));

  auto of = of_spec(0.756, -0.684, -0.364);
  const double lam = (0.5 - of.h) * 52.0;
  const double v = 0.756 * std::pow(52.0, 0.864);
  CHECK(kernel_eval(of, 0.3) == doctest::Approx(v * std::exp(-lam * 0.3)).epsilon(1e-13));

  auto tf = tf_spec(0.43, 0.984, -0.685, -0.497);
  const double t = 0.07;
  const double f1 = 0.43 * std::pow(52.0, 0.997) * std::exp(-(0.5 + 0.497) * 52.0 * t);
  const double f2 = 0.984 * std::pow(52.0, 0.05) * std::exp(-(0.5 - 0.45) * 52.0 * t);
  CHECK(kernel_eval(tf, t) == doctest::Approx(f1 + f2).epsilon(1e-13));

  // rough: power law, singular at the origin for h < 1/2
  auto rg = rough_spec(1.28, -0.94, 0.079);
  CHECK(kernel_eval(rg, 0.25) == doctest::Approx(1.28 * std::pow(0.25, -0.421)).epsilon(1e-13));
  CHECK_THROWS_AS(kernel_eval(rg, 0.0), std::domain_error);
  CHECK(kernel_eval(rough_spec(0.9, -1.0, 0.5), 0.0) == doctest::Approx(0.9));
}

TEST_CASE("parameter domains are enforced per kind") {
  CHECK_THROWS_AS(rough_spec(1.0, -0.7, 0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(rough_spec(1.0, -0.7, 0.6).validate(), std::invalid_argument);
  CHECK_THROWS_AS(rough_spec(1.0, -0.7, -0.2).validate(), std::invalid_argument);
  CHECK_NOTHROW(pd_spec(1.0, -0.7, -2.5).validate());
  CHECK_THROWS_AS(pd_spec(1.0, -0.7, 0.51).validate(), std::invalid_argument);
  CHECK_THROWS_AS(of_spec(-1.0, -0.7, 0.1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(of_spec(1.0, -1.7, 0.1).validate(), std::invalid_argument);
  // two-factor requires eta_l
  ModelSpec tf;
  tf.kind = KernelKind::TwoFactor;
  tf.eta_l = 0.0;
  CHECK_THROWS_AS(tf.validate(), std::invalid_argument);
  try {
    rough_spec(1.0, -0.7, 0.7).validate();
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("(0, 1/2]") != std::string::npos);
  }
}

TEST_CASE("kernel_l2_integral closed forms match references") {
  CHECK(kernel_l2_integral(rough_spec(1.0, -0.7, 0.1), 1.0) ==
        doctest::Approx(5.0).epsilon(1e-13));
  CHECK(kernel_l2_integral(rough_spec(1.28, -0.94, 0.079), 1.0 / 12.0) ==
        doctest::Approx(7.0024854558197419).epsilon(1e-13));
  CHECK(kernel_l2_integral(pd_spec(0.0256, -0.688, -1.276), 0.5) ==
        doctest::Approx(6.1481320984746139).epsilon(1e-13));
  CHECK(kernel_l2_integral(of_spec(0.756, -0.684, -0.364), 0.25) ==
        doctest::Approx(5.8715165173854099).epsilon(1e-13));
  CHECK(kernel_l2_integral(tf_spec(0.43, 0.984, -0.685, -0.497), 0.25) ==
        doctest::Approx(5.8831826884987226).epsilon(1e-12));

  // Riemann cross-checks
  auto of = of_spec(0.756, -0.684, -0.364);
  CHECK(kernel_l2_integral(of, 0.25) ==
        doctest::Approx(oracle::l2_riemann(of, 0.25, 2000000)).epsilon(1e-7));
  auto rg = rough_spec(1.0, -0.7, 0.3);
  CHECK(kernel_l2_integral(rg, 0.8) ==
        doctest::Approx(oracle::l2_riemann(rg, 0.8, 2000000)).epsilon(1e-5));
}

TEST_CASE("l2 limit branches connect continuously") {
  // h -> 0 (path-dependent log branch)
  auto a = pd_spec(0.7, -0.5, 0.0);
  auto b = pd_spec(0.7, -0.5, 1e-9);
  CHECK(kernel_l2_integral(a, 0.3) == doctest::Approx(kernel_l2_integral(b, 0.3)).epsilon(1e-7));
  CHECK(kernel_l2_integral(a, 0.3) ==
        doctest::Approx(0.49 * std::log((0.3 + 1.0 / 52.0) * 52.0)).epsilon(1e-13));
  // h -> 1/2 for rough and one-factor
  CHECK(kernel_l2_integral(rough_spec(0.9, -0.5, 0.5), 0.7) ==
        doctest::Approx(0.81 * 0.7).epsilon(1e-13));
  CHECK(kernel_l2_integral(rough_spec(0.9, -0.5, 0.5 - 1e-10), 0.7) ==
        doctest::Approx(0.81 * 0.7).epsilon(1e-7));
  CHECK(kernel_l2_integral(of_spec(0.9, -0.5, 0.5), 0.7) ==
        doctest::Approx(0.81 * 0.7).epsilon(1e-13));
  CHECK(kernel_l2_integral(of_spec(0.9, -0.5, 0.5 - 1e-10), 0.7) ==
        doctest::Approx(0.81 * 0.7).epsilon(1e-7));
}

TEST_CASE("l2 integral is nondecreasing and differentiates back to K^2") {
  const ModelSpec specs[] = {rough_spec(1.28, -0.94, 0.079), pd_spec(0.0256, -0.688, -1.276),
                             of_spec(0.756, -0.684, -0.364), tf_spec(0.43, 0.984, -0.685, -0.497)};
  for (const auto& s : specs) {
    double prev = 0.0;
    for (int i = 1; i <= 40; ++i) {
      const double t = 0.025 * i;
      const double cur = kernel_l2_integral(s, t);
      CHECK(cur >= prev);
      prev = cur;
    }
    for (double t : {0.05, 0.2, 0.6}) {
      const double dt = 1e-6;
      const double fd =
          (kernel_l2_integral(s, t + dt) - kernel_l2_integral(s, t - dt)) / (2.0 * dt);
      const double k = kernel_eval(s, t);
      CHECK(fd == doctest::Approx(k * k).epsilon(1e-5));
    }
  }
}

TEST_CASE("covariance agrees with quadrature and Riemann references") {
  // rough: frozen high-precision value for eta=1, h=0.3, (s,t)=(0.5,1.0)
  auto rg = rough_spec(1.0, -0.7, 0.3);
  CHECK(covariance(rg, 0.5, 1.0) == doctest::Approx(0.77015781782843674).epsilon(1e-9));
  CHECK(covariance(rg, 0.5, 1.0) ==
        doctest::Approx(oracle::rough_cov_riemann_transformed(1.0, 0.3, 0.5, 1.0, 1000000))
            .epsilon(1e-6));
  // raw midpoint keeps a visible endpoint bias; loose comparison only
  CHECK(covariance(rg, 0.5, 1.0) ==
        doctest::Approx(oracle::covariance_riemann(rg, 0.5, 1.0, 1000000)).epsilon(1e-4));

  auto pd = pd_spec(0.0256, -0.688, -1.276);
  CHECK(covariance(pd, 0.2, 0.5) == doctest::Approx(0.098808735377325656).epsilon(1e-9));
  CHECK(covariance(pd, 0.2, 0.5) ==
        doctest::Approx(oracle::covariance_riemann(pd, 0.2, 0.5, 1000000)).epsilon(1e-7));

  auto of = of_spec(0.756, -0.684, -0.364);
  CHECK(covariance(of, 0.1, 0.4) ==
        doctest::Approx(oracle::covariance_riemann(of, 0.1, 0.4, 1000000)).epsilon(1e-8));

  auto tf = tf_spec(0.43, 0.984, -0.685, -0.497);
  CHECK(covariance(tf, 0.1, 0.3) == doctest::Approx(0.3548429837688678).epsilon(1e-12));
  CHECK(covariance(tf, 0.1, 0.3) ==
        doctest::Approx(oracle::covariance_riemann(tf, 0.1, 0.3, 1000000)).epsilon(1e-8));

  // symmetry, diagonal, degenerate edge
  for (const ModelSpec& s : {rg, pd, of, tf}) {
    CHECK(covariance(s, 0.3, 0.7) == doctest::Approx(covariance(s, 0.7, 0.3)).epsilon(1e-14));
    CHECK(covariance(s, 0.4, 0.4) ==
          doctest::Approx(kernel_l2_integral(s, 0.4)).epsilon(1e-14));
    CHECK(covariance(s, 0.0, 0.9) == 0.0);
  }
}

TEST_CASE("covariance matrices are positive semidefinite") {
  const ModelSpec specs[] = {rough_spec(1.28, -0.94, 0.079), pd_spec(0.0256, -0.688, -1.276),
                             of_spec(0.756, -0.684, -0.364), tf_spec(0.43, 0.984, -0.685, -0.497)};
  std::vector<double> times;
  for (int i = 1; i <= 10; ++i) times.push_back(0.05 * i);
  for (const auto& s : specs) {
    const int n = static_cast<int>(times.size());
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = covariance(s, times[i], times[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * c.trace());
  }
}

TEST_CASE("path-dependent kernel converges to rough as epsilon -> 0") {
  auto pd = pd_spec(1.0, -0.7, 0.3);
  pd.epsilon = 1e-9;
  auto rg = rough_spec(1.0, -0.7, 0.3);
  CHECK(kernel_eval(pd, 0.2) == doctest::Approx(kernel_eval(rg, 0.2)).epsilon(1e-6));
  CHECK(kernel_l2_integral(pd, 0.6) ==
        doctest::Approx(kernel_l2_integral(rg, 0.6)).epsilon(1e-5));
}

TEST_CASE("model spec record round trip") {
  auto tf = tf_spec(0.43, 0.984, -0.685, -0.497);
  auto rec = tf.to_record();
  CHECK(rec.at("model") == "two-factor");
  auto back = ModelSpec::from_record(rec);
  CHECK(back.eta == tf.eta);
  CHECK(back.eta_l == tf.eta_l);
  CHECK(back.rho == tf.rho);
  CHECK(back.h == tf.h);
  CHECK(back.h_l == tf.h_l);
  CHECK(back.epsilon == tf.epsilon);
  CHECK(kernel_kind_from_string(to_string(KernelKind::PathDependent)) ==
        KernelKind::PathDependent);
  CHECK_THROWS_AS(kernel_kind_from_string("cubic"), std::invalid_argument);
  std::map<std::string, std::string> missing{{"model", "rough"}, {"eta", "1.0"}};
  CHECK_THROWS_AS(ModelSpec::from_record(missing), std::invalid_argument);
}

TEST_CASE("normal distribution helpers") {
  // frozen references
  CHECK(norm_cdf(0.1) == doctest::Approx(0.53982783727702898).epsilon(1e-15));
  CHECK(norm_cdf(-5.0) == doctest::Approx(2.8665157187919391e-7).epsilon(1e-13));
  CHECK(norm_cdf(2.0) == doctest::Approx(0.97724986805182079).epsilon(1e-15));
  CHECK(norm_cdf(0.5) == doctest::Approx(0.6914624612740131).epsilon(1e-15));
  CHECK(norm_cdf(-1.75) == doctest::Approx(0.04005915686381709).epsilon(1e-14));
  // positive probes stop at 4: beyond that the spacing of doubles near p = 1
  // caps the attainable round-trip accuracy, regardless of algorithm
  for (double x : {-8.0, -3.0, -1.0, -0.25, 0.0, 0.4, 1.5, 4.0}) {
    CHECK(norm_cdf(x) + norm_cdf(-x) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(norm_ppf(norm_cdf(x)) == doctest::Approx(x).epsilon(1e-11));
  }
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    CHECK(norm_cdf(norm_ppf(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(norm_ppf(0.5) == doctest::Approx(0.0));
}

TEST_CASE("time grid validation and default resolution") {
  TimeGrid g{0.25, 63};
  CHECK_NOTHROW(g.validate());
  CHECK(g.dt() == doctest::Approx(0.25 / 63.0));
  CHECK_THROWS_AS((TimeGrid{0.0, 10}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((TimeGrid{1.0, 0}.validate()), std::invalid_argument);
  auto daily = default_pricing_grid(0.25);
  CHECK(daily.n_steps == 63);
  auto coarse = default_pricing_grid(3.0);
  CHECK(coarse.n_steps == 378);
}

TEST_CASE("quadrature failure reports achieved tolerance") {
  auto nasty = [](double x) { return std::pow(std::abs(x - 0.3141592653589793), -0.95); };
  CHECK_THROWS_AS((void)vsmile::integrate_or_throw(nasty, 0.0, 1.0, 1e-13, 8),
                  std::runtime_error);
}
