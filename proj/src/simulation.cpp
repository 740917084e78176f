#include "vsmile/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"
#include "vsmile/kernels.hpp"
#include "vsmile/rng.hpp"

namespace vsmile {

namespace {

constexpr double kBranchEps = 1e-12;
// Below this step count a fused O(n^2) convolution beats FFT (the transform
// only pays for itself once n log n is well under n^2 / 2 per path).
constexpr std::size_t kFftThreshold = 1024;

bool near(double a, double b) { return std::fabs(a - b) < kBranchEps; }

using cplx = std::complex<double>;

// Iterative radix-2 Cooley-Tukey, in place; size must be a power of two.
void fft_inplace(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k];
        const cplx t = w * a[i + k + len / 2];
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& z : a) z *= inv;
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// One mean-reverting factor of the exponential kernels, stepped exactly.
struct OuFactor {
  double lambda = 0.0;
  double decay = 1.0;  // e^{-lambda dt}
  double scale = 0.0;  // vol * sqrt((1 - e^{-2 lambda dt}) / (2 lambda))
};

OuFactor make_factor(double vol, double lambda, double dt) {
  OuFactor f;
  f.lambda = lambda;
  f.decay = std::exp(-lambda * dt);
  if (near(lambda, 0.0))
    f.scale = vol * std::sqrt(dt);
  else
    f.scale = vol * std::sqrt(-std::expm1(-2.0 * lambda * dt) / (2.0 * lambda));
  return f;
}

// Everything that depends on (spec, grid) but not on the draws.
struct SimPlan {
  KernelKind kind;
  std::size_t n = 0;
  double dt = 0.0, sqrt_dt = 0.0, rho = 0.0, rho_perp = 1.0;

  // Convolution kernels (rough / path-dependent): X_k = (u * dW)[k-1]
  // (+ the exact singular-cell term for rough). u[d] multiplies the
  // increment d steps in the past.
  std::vector<double> u;
  double c1 = 0.0, c2 = 0.0;  // rough nearest cell: c1 dW_k + c2 Z_k
  bool use_fft = false;
  std::vector<cplx> u_spec;  // FFT of padded u
  std::size_t fft_len = 0;

  std::vector<OuFactor> factors;  // one-factor / two-factor

  std::vector<double> comp;     // 0.5 * L2(t_k) at every node
  std::vector<double> xi_node;  // forward variance at every node
};

// Mean square of (s + eps)^(h - 1/2) over one step cell, i.e.
// (1/dt) * Int_{(j-1)dt}^{jdt} (s + eps)^{2h-1} ds; eps = 0 gives the rough
// cells. Choosing cell weights this way reproduces Var X_k = L2(t_k) exactly
// at every node, which a plain left-point rule misses badly for small h.
double cell_mean_square(double a, double b, double eps, double h) {
  const double lo = a + eps, hi = b + eps;
  if (near(h, 0.0)) return (std::log(hi) - std::log(lo)) / (b - a);
  const double th = 2.0 * h;
  return (std::pow(hi, th) - std::pow(lo, th)) / (th * (b - a));
}

SimPlan make_plan(const ModelSpec& spec, const ForwardVarianceCurve& xi0, const TimeGrid& grid) {
  SimPlan plan;
  plan.kind = spec.kind;
  plan.n = grid.n_steps;
  plan.dt = grid.dt();
  plan.sqrt_dt = std::sqrt(plan.dt);
  plan.rho = spec.rho;
  plan.rho_perp = std::sqrt(std::max(0.0, 1.0 - spec.rho * spec.rho));

  const std::size_t n = plan.n;
  const double dt = plan.dt;

  switch (spec.kind) {
    case KernelKind::Rough: {
      plan.u.assign(n, 0.0);
      for (std::size_t d = 1; d < n; ++d) {
        const double a = static_cast<double>(d) * dt, b = a + dt;
        plan.u[d] = spec.eta * std::sqrt(cell_mean_square(a, b, 0.0, spec.h));
      }
      const double hp = spec.h + 0.5;
      plan.c1 = spec.eta * std::pow(dt, spec.h - 0.5) / hp;
      const double var_rest = 1.0 / (2.0 * spec.h) - 1.0 / (hp * hp);
      plan.c2 = spec.eta * std::pow(dt, spec.h) * std::sqrt(std::max(0.0, var_rest));
      break;
    }
    case KernelKind::PathDependent: {
      plan.u.assign(n, 0.0);
      for (std::size_t d = 0; d < n; ++d) {
        const double a = static_cast<double>(d) * dt, b = a + dt;
        plan.u[d] = spec.eta * std::sqrt(cell_mean_square(a, b, spec.epsilon, spec.h));
      }
      break;
    }
    case KernelKind::OneFactor: {
      plan.factors.push_back(make_factor(spec.eta * std::pow(spec.epsilon, spec.h - 0.5),
                                         (0.5 - spec.h) / spec.epsilon, dt));
      break;
    }
    case KernelKind::TwoFactor: {
      plan.factors.push_back(make_factor(spec.eta * std::pow(spec.epsilon, spec.h - 0.5),
                                         (0.5 - spec.h) / spec.epsilon, dt));
      plan.factors.push_back(make_factor(spec.eta_l * std::pow(spec.epsilon, spec.h_l - 0.5),
                                         (0.5 - spec.h_l) / spec.epsilon, dt));
      break;
    }
  }

  if (!plan.u.empty() && n > kFftThreshold) {
    plan.use_fft = true;
    plan.fft_len = next_pow2(2 * n);
    plan.u_spec.assign(plan.fft_len, cplx(0.0, 0.0));
    for (std::size_t d = 0; d < n; ++d) plan.u_spec[d] = cplx(plan.u[d], 0.0);
    fft_inplace(plan.u_spec, false);
  }

  plan.comp.resize(n + 1);
  plan.xi_node.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double tk = grid.time(k);
    plan.comp[k] = 0.5 * kernel_l2_integral(spec, tk);
    plan.xi_node[k] = xi0.at(std::min(tk, xi0.knots.back()));
  }
  return plan;
}

// Scratch reused across paths of one simulate call.
struct Scratch {
  std::vector<double> conv;
  std::vector<cplx> buf;
};

// z points at n_steps blocks of noise_channels values for this path.
void build_path(const SimPlan& plan, const double* z, double* dw, double* x, double* v,
                double* ls) {
  const std::size_t n = plan.n;
  const int ch = plan.kind == KernelKind::Rough ? 3 : 2;
  for (std::size_t k = 0; k < n; ++k) dw[k] = plan.sqrt_dt * z[k * ch];

  x[0] = 0.0;
  switch (plan.kind) {
    case KernelKind::Rough:
    case KernelKind::PathDependent: {
      static thread_local Scratch scratch;
      if (plan.use_fft) {
        auto& buf = scratch.buf;
        buf.assign(plan.fft_len, cplx(0.0, 0.0));
        for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(dw[i], 0.0);
        fft_inplace(buf, false);
        for (std::size_t i = 0; i < plan.fft_len; ++i) buf[i] *= plan.u_spec[i];
        fft_inplace(buf, true);
        for (std::size_t k = 1; k <= n; ++k) x[k] = buf[k - 1].real();
      } else {
        auto& conv = scratch.conv;
        conv.assign(n, 0.0);
        for (std::size_t k = 1; k <= n; ++k) {
          double s = 0.0;
          for (std::size_t d = plan.kind == KernelKind::Rough ? 1 : 0; d < k; ++d)
            s += plan.u[d] * dw[k - 1 - d];
          conv[k - 1] = s;
        }
        for (std::size_t k = 1; k <= n; ++k) x[k] = conv[k - 1];
      }
      if (plan.kind == KernelKind::Rough)
        for (std::size_t k = 1; k <= n; ++k)
          x[k] += plan.c1 * dw[k - 1] + plan.c2 * z[(k - 1) * ch + 2];
      break;
    }
    case KernelKind::OneFactor: {
      const OuFactor& f = plan.factors[0];
      double s = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        s = f.decay * s + f.scale * z[(k - 1) * ch];
        x[k] = s;
      }
      break;
    }
    case KernelKind::TwoFactor: {
      const OuFactor& f1 = plan.factors[0];
      const OuFactor& f2 = plan.factors[1];
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        const double zk = z[(k - 1) * ch];
        s1 = f1.decay * s1 + f1.scale * zk;
        s2 = f2.decay * s2 + f2.scale * zk;
        x[k] = s1 + s2;
      }
      break;
    }
  }

  for (std::size_t k = 0; k <= n; ++k) v[k] = plan.xi_node[k] * std::exp(x[k] - plan.comp[k]);

  ls[0] = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double sv = std::sqrt(v[k]);
    const double dperp = plan.sqrt_dt * z[k * ch + 1];
    ls[k + 1] = ls[k] - 0.5 * v[k] * plan.dt + sv * (plan.rho * dw[k] + plan.rho_perp * dperp);
  }
}

void check_args(const ModelSpec& spec, const ForwardVarianceCurve& xi0, const TimeGrid& grid,
                std::size_t n_paths, const SimOptions& opts) {
  spec.validate();
  grid.validate();
  xi0.validate();
  if (grid.t_end > xi0.knots.back() * (1.0 + 1e-12))
    throw std::domain_error("simulate: time grid extends beyond forward-variance support (t_end=" +
                            std::to_string(grid.t_end) + ", support ends at " +
                            std::to_string(xi0.knots.back()) + ")");
  if (n_paths == 0) throw std::invalid_argument("simulate: n_paths must be positive");
  if (opts.antithetic && (n_paths % 2 != 0))
    throw std::invalid_argument("simulate: antithetic sampling needs an even n_paths");
  if (opts.antithetic && (opts.path_offset % 2 != 0))
    throw std::invalid_argument("simulate: antithetic sampling needs an even path_offset");
}

PathSet make_path_set(const ModelSpec& spec, const TimeGrid& grid, std::size_t n_paths,
                      std::uint64_t seed, const SimOptions& opts) {
  PathSet ps;
  ps.spec = spec;
  ps.grid = grid;
  ps.seed = seed;
  ps.antithetic = opts.antithetic;
  ps.n_paths = n_paths;
  ps.dw.resize(n_paths * grid.n_steps);
  ps.x.resize(n_paths * (grid.n_steps + 1));
  ps.v.resize(n_paths * (grid.n_steps + 1));
  ps.log_s.resize(n_paths * (grid.n_steps + 1));
  if (spec.kind != KernelKind::Rough && grid.dt() > spec.epsilon) {
    std::ostringstream w;
    w << "time step " << grid.dt() << " exceeds kernel smoothing scale epsilon=" << spec.epsilon
      << "; features near the origin are under-resolved";
    ps.warnings.push_back(w.str());
  }
  return ps;
}

}  // namespace

double ou_step(double prev_x, double lambda, double dt, double vol, double z) {
  if (!(lambda > 0.0))
    throw std::domain_error("ou_step: lambda must be positive (got " + std::to_string(lambda) +
                            ")");
  if (!(dt > 0.0)) throw std::domain_error("ou_step: dt must be positive");
  const double decay = std::exp(-lambda * dt);
  const double scale = vol * std::sqrt(-std::expm1(-2.0 * lambda * dt) / (2.0 * lambda));
  return decay * prev_x + scale * z;
}

int noise_channels(KernelKind kind) { return kind == KernelKind::Rough ? 3 : 2; }

std::vector<double> make_noise(KernelKind kind, std::size_t n_paths, std::size_t n_steps,
                               std::uint64_t seed, const SimOptions& opts) {
  const int ch = noise_channels(kind);
  const std::size_t stride = n_steps * static_cast<std::size_t>(ch);
  std::vector<double> noise(n_paths * stride);
  if (opts.antithetic) {
    if (n_paths % 2 != 0 || opts.path_offset % 2 != 0)
      throw std::invalid_argument("make_noise: antithetic sampling needs even n_paths/path_offset");
    for (std::size_t q = 0; q < n_paths / 2; ++q) {
      Rng rng(seed, opts.path_offset / 2 + q);
      double* even = noise.data() + 2 * q * stride;
      double* odd = even + stride;
      for (std::size_t i = 0; i < stride; ++i) {
        even[i] = rng.next_gaussian();
        odd[i] = -even[i];
      }
    }
  } else {
    for (std::size_t p = 0; p < n_paths; ++p) {
      Rng rng(seed, opts.path_offset + p);
      double* row = noise.data() + p * stride;
      for (std::size_t i = 0; i < stride; ++i) row[i] = rng.next_gaussian();
    }
  }
  return noise;
}

PathSet simulate(const ModelSpec& spec, const ForwardVarianceCurve& xi0, const TimeGrid& grid,
                 std::size_t n_paths, std::uint64_t seed, const SimOptions& opts) {
  check_args(spec, xi0, grid, n_paths, opts);
  const SimPlan plan = make_plan(spec, xi0, grid);
  PathSet ps = make_path_set(spec, grid, n_paths, seed, opts);

  const int ch = noise_channels(spec.kind);
  const std::size_t stride = grid.n_steps * static_cast<std::size_t>(ch);
  std::vector<double> z(stride);
  const std::size_t n_nodes = grid.n_steps + 1;

  auto run = [&](std::size_t p) {
    build_path(plan, z.data(), ps.dw.data() + p * grid.n_steps, ps.x.data() + p * n_nodes,
               ps.v.data() + p * n_nodes, ps.log_s.data() + p * n_nodes);
  };

  if (opts.antithetic) {
    for (std::size_t q = 0; q < n_paths / 2; ++q) {
      Rng rng(seed, opts.path_offset / 2 + q);
      for (std::size_t i = 0; i < stride; ++i) z[i] = rng.next_gaussian();
      run(2 * q);
      for (std::size_t i = 0; i < stride; ++i) z[i] = -z[i];
      run(2 * q + 1);
    }
  } else {
    for (std::size_t p = 0; p < n_paths; ++p) {
      Rng rng(seed, opts.path_offset + p);
      for (std::size_t i = 0; i < stride; ++i) z[i] = rng.next_gaussian();
      run(p);
    }
  }
  return ps;
}

PathSet simulate_with_noise(const ModelSpec& spec, const ForwardVarianceCurve& xi0,
                            const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                            const std::vector<double>& noise, const SimOptions& opts) {
  check_args(spec, xi0, grid, n_paths, opts);
  const int ch = noise_channels(spec.kind);
  const std::size_t stride = grid.n_steps * static_cast<std::size_t>(ch);
  if (noise.size() != n_paths * stride)
    throw std::invalid_argument("simulate_with_noise: noise buffer has " +
                                std::to_string(noise.size()) + " values, expected " +
                                std::to_string(n_paths * stride));
  const SimPlan plan = make_plan(spec, xi0, grid);
  PathSet ps = make_path_set(spec, grid, n_paths, seed, opts);
  const std::size_t n_nodes = grid.n_steps + 1;
  for (std::size_t p = 0; p < n_paths; ++p)
    build_path(plan, noise.data() + p * stride, ps.dw.data() + p * grid.n_steps,
               ps.x.data() + p * n_nodes, ps.v.data() + p * n_nodes, ps.log_s.data() + p * n_nodes);
  return ps;
}

void save_paths(std::ostream& out, const PathSet& ps) {
  nlohmann::json hdr;
  hdr["magic"] = "vsmile-paths";
  hdr["version"] = 1;
  hdr["spec"] = ps.spec.to_record();
  hdr["t_end"] = ps.grid.t_end;
  hdr["n_steps"] = ps.grid.n_steps;
  hdr["seed"] = ps.seed;
  hdr["antithetic"] = ps.antithetic;
  hdr["n_paths"] = ps.n_paths;
  hdr["warnings"] = ps.warnings;
  const std::string line = hdr.dump();
  out << line << '\n';
  auto dump = [&](const std::vector<double>& a) {
    out.write(reinterpret_cast<const char*>(a.data()),
              static_cast<std::streamsize>(a.size() * sizeof(double)));
  };
  dump(ps.dw);
  dump(ps.x);
  dump(ps.v);
  dump(ps.log_s);
  if (!out) throw std::runtime_error("save_paths: write failed");
}

PathSet load_paths(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_paths: missing header line");
  nlohmann::json hdr = nlohmann::json::parse(line);
  if (hdr.value("magic", "") != std::string("vsmile-paths"))
    throw std::runtime_error("load_paths: bad magic, not a path dump");
  PathSet ps;
  ps.spec = ModelSpec::from_record(hdr.at("spec").get<std::map<std::string, std::string>>());
  ps.grid.t_end = hdr.at("t_end").get<double>();
  ps.grid.n_steps = hdr.at("n_steps").get<std::size_t>();
  ps.seed = hdr.at("seed").get<std::uint64_t>();
  ps.antithetic = hdr.at("antithetic").get<bool>();
  ps.n_paths = hdr.at("n_paths").get<std::size_t>();
  ps.warnings = hdr.at("warnings").get<std::vector<std::string>>();
  ps.dw.resize(ps.n_paths * ps.grid.n_steps);
  const std::size_t nn = ps.n_paths * (ps.grid.n_steps + 1);
  ps.x.resize(nn);
  ps.v.resize(nn);
  ps.log_s.resize(nn);
  auto slurp = [&](std::vector<double>& a) {
    in.read(reinterpret_cast<char*>(a.data()),
            static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != a.size() * sizeof(double))
      throw std::runtime_error("load_paths: truncated data block");
  };
  slurp(ps.dw);
  slurp(ps.x);
  slurp(ps.v);
  slurp(ps.log_s);
  return ps;
}

void save_paths_file(const std::string& path, const PathSet& ps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_paths: cannot open " + path);
  save_paths(out, ps);
}

PathSet load_paths_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_paths: cannot open " + path);
  return load_paths(in);
}

}  // namespace vsmile
