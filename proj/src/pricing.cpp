#include "vsmile/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vsmile/normal.hpp"

namespace vsmile {

namespace {

void check_black_args(double f, double k, double sigma, double t) {
  if (!(f > 0.0) || !std::isfinite(f)) throw std::domain_error("black: forward must be positive");
  if (!(k > 0.0) || !std::isfinite(k)) throw std::domain_error("black: strike must be positive");
  if (!(t > 0.0) || !std::isfinite(t)) throw std::domain_error("black: maturity must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::domain_error("black: volatility must be non-negative");
}

// Total-vol form, v = sigma * sqrt(t).
double black_call_total(double f, double k, double v) {
  if (v <= 0.0) return std::max(f - k, 0.0);
  const double d1 = std::log(f / k) / v + 0.5 * v;
  return f * norm_cdf(d1) - k * norm_cdf(d1 - v);
}

// Complementary form: full relative precision for out-of-the-money puts,
// where call-minus-parity would absorb the value into the intrinsic part.
double black_put_total(double f, double k, double v) {
  if (v <= 0.0) return std::max(k - f, 0.0);
  const double d1 = std::log(f / k) / v + 0.5 * v;
  return k * norm_cdf(v - d1) - f * norm_cdf(-d1);
}

struct OnlineCov {
  std::size_t n = 0;
  double my = 0.0, mc = 0.0, syy = 0.0, scc = 0.0, syc = 0.0;

  void push(double y, double c) {
    ++n;
    const double dy = y - my;
    const double dc = c - mc;
    my += dy / static_cast<double>(n);
    mc += dc / static_cast<double>(n);
    syy += dy * (y - my);
    scc += dc * (c - mc);
    syc += dy * (c - mc);
  }
};

}  // namespace

double black_call(double f, double k, double sigma, double t) {
  check_black_args(f, k, sigma, t);
  return black_call_total(f, k, sigma * std::sqrt(t));
}

double black_put(double f, double k, double sigma, double t) {
  check_black_args(f, k, sigma, t);
  return black_put_total(f, k, sigma * std::sqrt(t));
}

double black_vega(double f, double k, double sigma, double t) {
  check_black_args(f, k, sigma, t);
  const double v = sigma * std::sqrt(t);
  if (v <= 0.0) return 0.0;
  const double d1 = std::log(f / k) / v + 0.5 * v;
  return f * norm_pdf(d1) * std::sqrt(t);
}

double implied_vol(double price, double f, double k, double t, bool is_call) {
  if (!(f > 0.0) || !(k > 0.0) || !(t > 0.0))
    throw std::domain_error("implied_vol: forward, strike and maturity must be positive");
  if (!std::isfinite(price)) throw std::domain_error("implied_vol: price is not finite");
  const double intrinsic = is_call ? std::max(f - k, 0.0) : std::max(k - f, 0.0);
  const double upper = is_call ? f : k;
  if (price < intrinsic || price >= upper) {
    std::ostringstream msg;
    msg << "implied_vol: price " << price << " outside the attainable range [" << intrinsic << ", "
        << upper << ") for " << (is_call ? "call" : "put") << " f=" << f << " k=" << k
        << " t=" << t;
    throw std::domain_error(msg.str());
  }
  if (price == intrinsic) return 0.0;

  // Solve on the quoted side. Mapping puts through parity first would round
  // deep out-of-the-money value into the intrinsic part and lose the vol.
  const auto side_price = [&](double sigma) {
    return is_call ? black_call(f, k, sigma, t) : black_put(f, k, sigma, t);
  };
  double lo = 0.0, hi = 1.0;
  while (side_price(hi) < price) {
    hi *= 2.0;
    if (hi > 1e4) throw std::domain_error("implied_vol: no volatility below 1e4 matches price");
  }
  double x = 0.5 * hi;
  for (int it = 0; it < 100; ++it) {
    const double diff = side_price(x) - price;
    if (diff > 0.0)
      hi = x;
    else
      lo = x;
    const double vega = black_vega(f, k, x, t);
    double x_new = (vega > 1e-14) ? x - diff / vega : 0.5 * (lo + hi);
    if (!(x_new > lo) || !(x_new < hi)) x_new = 0.5 * (lo + hi);
    const double step = std::fabs(x_new - x);
    x = x_new;
    if (step < 1e-12 * std::max(1.0, x)) break;
  }
  return x;
}

SurfaceResult mc_surface(const ModelSpec& spec, const ForwardVarianceCurve& xi0,
                         const std::vector<SliceRequest>& slices, const McConfig& cfg) {
  spec.validate();
  xi0.validate();
  if (slices.empty()) throw std::invalid_argument("mc_surface: no maturities requested");
  double t_max = 0.0;
  for (const auto& s : slices) {
    if (!(s.t > 0.0) || !std::isfinite(s.t))
      throw std::invalid_argument("mc_surface: maturities must be positive");
    if (s.ks.empty()) throw std::invalid_argument("mc_surface: a maturity has no strikes");
    for (double k : s.ks)
      if (!std::isfinite(k)) throw std::invalid_argument("mc_surface: non-finite log-moneyness");
    t_max = std::max(t_max, s.t);
  }
  if (cfg.n_paths < 2) throw std::invalid_argument("mc_surface: need at least two paths");

  SurfaceResult res;
  res.spec = spec;
  res.config = cfg;
  res.grid = cfg.n_steps > 0 ? TimeGrid{t_max, cfg.n_steps} : default_pricing_grid(t_max);
  res.grid.validate();
  const TimeGrid& grid = res.grid;
  const double dt = grid.dt();

  std::size_t batch = std::max<std::size_t>(2, cfg.batch_paths);
  if (cfg.antithetic && batch % 2 != 0) ++batch;
  std::size_t n_paths = cfg.n_paths;
  if (cfg.antithetic && n_paths % 2 != 0) ++n_paths;

  // Grid nodes backing each slice, and the quote table in request order.
  std::vector<std::size_t> node_of_slice(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const auto idx = static_cast<std::size_t>(std::llround(slices[i].t / dt));
    node_of_slice[i] = std::min(std::max<std::size_t>(idx, 1), grid.n_steps);
  }
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const double t_eff = grid.time(node_of_slice[i]);
    for (double k : slices[i].ks) {
      QuoteEstimate q;
      q.t_req = slices[i].t;
      q.t_eff = t_eff;
      q.k = k;
      if (std::fabs(t_eff - q.t_req) > 1e-12 * std::max(1.0, q.t_req)) {
        std::ostringstream f;
        f << "maturity snapped to grid node (" << q.t_req << " -> " << t_eff << ")";
        q.flag = f.str();
      }
      res.quotes.push_back(q);
    }
  }
  std::vector<OnlineCov> acc(res.quotes.size());

  const double rho = spec.rho;
  const double rho2 = rho * rho;
  const bool mixing = cfg.estimator == Estimator::Mixing;

  // Per-path statistic at each slice node: (F_eff, v_eff) or (S_T, S_T).
  std::vector<double> stat_f(slices.size()), stat_v(slices.size());
  std::vector<double> pair_y, pair_c;

  // Slices in increasing node order, so one pass over the grid serves all.
  std::vector<std::size_t> order(slices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return node_of_slice[l] < node_of_slice[r]; });

  SimOptions opts;
  opts.antithetic = cfg.antithetic;
  bool warned = false;

  for (std::size_t start = 0; start < n_paths; start += batch) {
    const std::size_t nb = std::min(batch, n_paths - start);
    opts.path_offset = start;
    const PathSet ps = simulate(spec, xi0, grid, nb, cfg.seed, opts);
    if (!warned) {
      res.warnings = ps.warnings;
      warned = true;
    }

    const std::size_t group = cfg.antithetic ? 2 : 1;
    for (std::size_t p0 = 0; p0 < nb; p0 += group) {
      pair_y.assign(res.quotes.size(), 0.0);
      pair_c.assign(res.quotes.size(), 0.0);
      for (std::size_t g = 0; g < group; ++g) {
        const std::size_t p = p0 + g;
        const double* dw = ps.dw_row(p);
        const double* v = ps.v_row(p);
        const double* ls = ps.log_s_row(p);
        double a = 0.0, q = 0.0;
        std::size_t oi = 0;
        for (std::size_t node = 0; node < grid.n_steps && oi < order.size(); ++node) {
          a += std::sqrt(v[node]) * dw[node];
          q += v[node] * dt;
          while (oi < order.size() && node_of_slice[order[oi]] == node + 1) {
            const std::size_t i = order[oi];
            if (mixing) {
              stat_f[i] = std::exp(rho * a - 0.5 * rho2 * q);
              stat_v[i] = (1.0 - rho2) * q;
            } else {
              stat_f[i] = std::exp(ls[node + 1]);
              stat_v[i] = 0.0;
            }
            ++oi;
          }
        }
        std::size_t qi = 0;
        for (std::size_t i = 0; i < slices.size(); ++i) {
          for (double k : slices[i].ks) {
            const double strike = std::exp(k);
            // Quote the out-of-the-money side: the in-the-money price is
            // intrinsic plus a value that can be too small to survive the
            // subtraction, which destroys the implied vol on inversion.
            const bool call_side = k >= 0.0;
            double y, c;
            if (mixing) {
              const double sv = std::sqrt(stat_v[i]);
              y = call_side ? black_call_total(stat_f[i], strike, sv)
                            : black_put_total(stat_f[i], strike, sv);
              c = stat_f[i];
            } else {
              y = call_side ? std::max(stat_f[i] - strike, 0.0)
                            : std::max(strike - stat_f[i], 0.0);
              c = stat_f[i];
            }
            pair_y[qi] += y;
            pair_c[qi] += c;
            ++qi;
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(group);
      for (std::size_t qi = 0; qi < acc.size(); ++qi)
        acc[qi].push(pair_y[qi] * inv, pair_c[qi] * inv);
    }
  }

  for (std::size_t qi = 0; qi < res.quotes.size(); ++qi) {
    QuoteEstimate& q = res.quotes[qi];
    const OnlineCov& a = acc[qi];
    const double n = static_cast<double>(a.n);
    double est = a.my;
    double svar = a.syy;
    if (cfg.control_variate && a.scc > 1e-300 * n) {
      const double beta = a.syc / a.scc;
      est = a.my - beta * (a.mc - 1.0);
      svar = std::max(0.0, a.syy - a.syc * a.syc / a.scc);
    }
    q.price = est;
    q.price_se = a.n > 1 ? std::sqrt(svar / (n - 1.0) / n) : 0.0;
    try {
      q.iv = implied_vol(q.price, 1.0, std::exp(q.k), q.t_eff, /*is_call=*/q.k >= 0.0);
      q.iv_ok = true;
      const double vega = black_vega(1.0, std::exp(q.k), q.iv, q.t_eff);
      q.iv_se = vega > 1e-14 ? q.price_se / vega : std::numeric_limits<double>::quiet_NaN();
    } catch (const std::domain_error& e) {
      q.iv = std::numeric_limits<double>::quiet_NaN();
      q.iv_se = std::numeric_limits<double>::quiet_NaN();
      q.iv_ok = false;
      if (!q.flag.empty()) q.flag += "; ";
      q.flag += e.what();
    }
  }
  return res;
}

IVSurface to_iv_surface(const SurfaceResult& res, std::vector<std::string>* dropped) {
  std::map<double, std::map<double, IVPoint>> grid;
  for (const auto& q : res.quotes) {
    if (!q.iv_ok) {
      if (dropped) {
        std::ostringstream msg;
        msg << "dropped quote t=" << q.t_req << " k=" << q.k << ": " << q.flag;
        dropped->push_back(msg.str());
      }
      continue;
    }
    IVPoint p;
    p.k = q.k;
    p.iv = q.iv;
    p.se = q.iv_se;
    grid[q.t_eff][q.k] = p;
  }
  IVSurface surf;
  for (auto& [t, points] : grid) {
    IVSlice slice;
    slice.t = t;
    for (auto& [k, p] : points) slice.points.push_back(p);
    surf.slices.push_back(std::move(slice));
  }
  return surf;
}

}  // namespace vsmile
