#include "vsmile/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vsmile {

namespace {

constexpr double kPenalty = 1e6;  // deterministic stand-in for failed evaluations

bool same_time(double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(a)); }
bool same_k(double a, double b) { return std::fabs(a - b) <= 1e-12; }

const IVSlice* find_slice_ptr(const IVSurface& s, double t) {
  for (const auto& sl : s.slices)
    if (same_time(t, sl.t)) return &sl;
  return nullptr;
}

const IVPoint* find_point(const IVSlice& slice, double k) {
  for (const auto& p : slice.points)
    if (same_k(p.k, k)) return &p;
  return nullptr;
}

// ---- parameter box and sine transform ------------------------------------

struct Box {
  std::vector<double> lo, hi;
  std::size_t dim() const { return lo.size(); }
};

Box make_box(const CalibrationProblem& problem) {
  const bool rough = problem.spec_template.kind == KernelKind::Rough;
  const bool two = problem.spec_template.kind == KernelKind::TwoFactor;
  Box b;
  b.lo = {1e-6, -1.0, rough ? 1e-4 : -3.0};
  b.hi = {problem.eta_max, 0.0, 0.5};
  if (two) {
    b.lo.push_back(1e-6);
    b.hi.push_back(problem.eta_max);
  }
  return b;
}

std::vector<double> decode(const Box& b, const std::vector<double>& u) {
  std::vector<double> x(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i)
    x[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * 0.5 * (std::sin(u[i]) + 1.0);
  return x;
}

ModelSpec theta_from(const CalibrationProblem& problem, const std::vector<double>& x) {
  ModelSpec s = problem.spec_template;
  s.eta = x[0];
  s.rho = x[1];
  s.h = x[2];
  if (s.kind == KernelKind::TwoFactor) s.eta_l = x[3];
  return s;
}

double halton(std::size_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

// ---- objective plumbing ---------------------------------------------------

struct EvalContext {
  const CalibrationProblem* problem = nullptr;
  McConfig mc;                        // problem.mc with the problem seed applied
  IVSurface market;                   // horizon-restricted
  std::vector<SliceRequest> request;  // model quote grid, one entry per market slice
  SkewCurve market_skews;             // skew-augmented only
  std::vector<std::string> notes;
};

EvalContext build_context(const CalibrationProblem& problem) {
  EvalContext ctx;
  ctx.problem = &problem;
  ctx.mc = problem.mc;
  ctx.mc.seed = problem.seed;
  ctx.market = restrict_to_horizon(problem.market, problem.horizon);
  if (ctx.market.slices.empty())
    throw std::invalid_argument("no market slices inside the calibration horizon");
  const double t_last = problem.fvc.knots.back();
  const bool augmented = problem.objective == Objective::SkewAugmented;
  ctx.market_skews.source = SkewSource::Market;

  for (const auto& slice : ctx.market.slices) {
    if (slice.t > t_last * (1.0 + 1e-12))
      throw std::invalid_argument("market maturity beyond forward-variance support");
    SliceRequest req;
    req.t = slice.t;
    for (const auto& p : slice.points) {
      const bool keep = augmented
                            ? (p.k >= kSkewWindowLo && p.k <= kSkewWindowHi)
                            : problem.filter.contains(slice.t, p.k);
      if (keep) req.ks.push_back(p.k);
    }
    if (augmented) {
      for (double k : {-problem.fd_dk, problem.fd_dk}) {
        bool present = false;
        for (double existing : req.ks) present = present || same_k(existing, k);
        if (!present) req.ks.push_back(k);
      }
      std::sort(req.ks.begin(), req.ks.end());
      try {
        const SkewFit fit = market_skew_fit(slice);
        if (!(fit.skew > 0.0)) throw std::domain_error("nonpositive market skew");
        ctx.market_skews.maturities.push_back(slice.t);
        ctx.market_skews.skew.push_back(fit.skew);
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "slice t=" << slice.t << " excluded from the skew term: " << e.what();
        ctx.notes.push_back(msg.str());
      }
    }
    if (!req.ks.empty()) ctx.request.push_back(std::move(req));
  }
  if (ctx.request.empty())
    throw std::invalid_argument("empty index set: no quotes survive the moneyness filter");
  if (augmented && ctx.market_skews.maturities.empty())
    throw std::invalid_argument("no market slice admits a skew fit");
  return ctx;
}

// Model surface on the requested grid, slices keyed by the requested maturity
// (snapping to simulation nodes is a pricer detail the comparison ignores).
IVSurface model_surface_at(const EvalContext& ctx, const ModelSpec& theta) {
  const SurfaceResult sr = mc_surface(theta, ctx.problem->fvc, ctx.request, ctx.mc);
  IVSurface out;
  std::map<double, IVSlice> by_t;
  for (const auto& q : sr.quotes) {
    if (!q.iv_ok) throw std::runtime_error("model quote failed implied-vol inversion: " + q.flag);
    auto& slice = by_t[q.t_req];
    slice.t = q.t_req;
    IVPoint p;
    p.k = q.k;
    p.iv = q.iv;
    p.se = q.iv_se;
    slice.points.push_back(p);
  }
  for (auto& [t, slice] : by_t) {
    std::sort(slice.points.begin(), slice.points.end(),
              [](const IVPoint& a, const IVPoint& b) { return a.k < b.k; });
    out.slices.push_back(std::move(slice));
  }
  return out;
}

double evaluate_raw(const EvalContext& ctx, const ModelSpec& theta) {
  const IVSurface model = model_surface_at(ctx, theta);
  if (ctx.problem->objective == Objective::SurfaceRmse)
    return surface_rmse(model, ctx.market, ctx.problem->filter);
  SkewCurve model_skews;
  model_skews.source = SkewSource::ModelFd;
  for (double t : ctx.market_skews.maturities) {
    model_skews.maturities.push_back(t);
    model_skews.skew.push_back(model_skew_fd(model, t, ctx.problem->fd_dk));
  }
  return skew_objective(model, model_skews, ctx.market, ctx.market_skews);
}

double evaluate_penalized(const EvalContext& ctx, const ModelSpec& theta) {
  try {
    return evaluate_raw(ctx, theta);
  } catch (const std::exception&) {
    return kPenalty;
  }
}

// ---- Nelder--Mead on the unconstrained transform --------------------------

struct NmOutcome {
  std::vector<double> u;
  double f = kPenalty;
  double f_init = kPenalty;
  int evals = 0;
};

NmOutcome nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                      const std::vector<double>& u0, double step, int max_evals) {
  const std::size_t d = u0.size();
  NmOutcome out;
  std::vector<std::vector<double>> v(d + 1, u0);
  std::vector<double> fv(d + 1, kPenalty);
  for (std::size_t i = 1; i <= d; ++i) v[i][i - 1] += step;
  for (std::size_t i = 0; i <= d && out.evals < max_evals; ++i) {
    fv[i] = f(v[i]);
    ++out.evals;
    if (i == 0) out.f_init = fv[0];
  }

  auto order = [&]() {
    std::vector<std::size_t> idx(d + 1);
    for (std::size_t i = 0; i <= d; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> v2(d + 1);
    std::vector<double> f2(d + 1);
    for (std::size_t i = 0; i <= d; ++i) {
      v2[i] = v[idx[i]];
      f2[i] = fv[idx[i]];
    }
    v.swap(v2);
    fv.swap(f2);
  };

  while (out.evals < max_evals) {
    order();
    if (fv[d] - fv[0] < 1e-12 * (1.0 + std::fabs(fv[0]))) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) centroid[j] += v[i][j] / static_cast<double>(d);
    auto blend = [&](double coef) {
      std::vector<double> p(d);
      for (std::size_t j = 0; j < d; ++j) p[j] = centroid[j] + coef * (v[d][j] - centroid[j]);
      return p;
    };

    const auto refl = blend(-1.0);
    const double f_refl = f(refl);
    ++out.evals;
    if (f_refl < fv[0] && out.evals < max_evals) {
      const auto expand = blend(-2.0);
      const double f_exp = f(expand);
      ++out.evals;
      if (f_exp < f_refl) {
        v[d] = expand;
        fv[d] = f_exp;
      } else {
        v[d] = refl;
        fv[d] = f_refl;
      }
      continue;
    }
    if (f_refl < fv[d - 1]) {
      v[d] = refl;
      fv[d] = f_refl;
      continue;
    }
    if (out.evals >= max_evals) break;
    const bool outside = f_refl < fv[d];
    const auto contr = blend(outside ? -0.5 : 0.5);
    const double f_con = f(contr);
    ++out.evals;
    if (f_con < std::min(f_refl, fv[d])) {
      v[d] = contr;
      fv[d] = f_con;
      continue;
    }
    for (std::size_t i = 1; i <= d && out.evals < max_evals; ++i) {  // shrink
      for (std::size_t j = 0; j < d; ++j) v[i][j] = v[0][j] + 0.5 * (v[i][j] - v[0][j]);
      fv[i] = f(v[i]);
      ++out.evals;
    }
  }
  order();
  out.u = v[0];
  out.f = fv[0];
  return out;
}

}  // namespace

// ---- moneyness filter -----------------------------------------------------

MoneynessFilter MoneynessFilter::standard() {
  MoneynessFilter f;
  const double inf = std::numeric_limits<double>::infinity();
  f.bands = {
      {2.0 / 52.0, -0.15, 0.03}, {1.0 / 12.0, -0.25, 0.03}, {1.0 / 6.0, -0.30, 0.04},
      {0.25, -0.40, 0.15},       {0.5, -0.60, 0.15},        {1.0, -0.80, 0.20},
      {inf, -1.50, 0.30},
  };
  return f;
}

void MoneynessFilter::validate() const {
  if (bands.empty()) throw std::invalid_argument("moneyness filter has no bands");
  double prev = 0.0;
  for (const auto& b : bands) {
    if (!(b.t_max > prev)) throw std::invalid_argument("filter maturity edges must increase");
    if (!(b.k_min < b.k_max)) throw std::invalid_argument("filter band has empty k-window");
    prev = b.t_max;
  }
  if (!std::isinf(bands.back().t_max))
    throw std::invalid_argument("last filter band must cover all remaining maturities");
}

const MoneynessFilter::Band& MoneynessFilter::band_for(double t) const {
  if (!(t > 0.0)) throw std::domain_error("maturity must be positive");
  for (const auto& b : bands)
    if (t < b.t_max) return b;
  return bands.back();
}

bool MoneynessFilter::contains(double t, double k) const {
  const Band& b = band_for(t);
  return k >= b.k_min && k <= b.k_max;
}

MoneynessFilter MoneynessFilter::from_csv(std::istream& in) {
  MoneynessFilter f;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "t_max_years,k_min,k_max")
        throw std::runtime_error("filter csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    Band b;
    double* fields[3] = {&b.t_max, &b.k_min, &b.k_max};
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(row, cell, ','))
        throw std::runtime_error("filter csv line " + std::to_string(line_no) + ": expected 3 fields");
      *fields[i] = std::stod(cell);
    }
    f.bands.push_back(b);
  }
  if (!header_seen) throw std::runtime_error("filter csv: missing header");
  f.validate();
  return f;
}

// ---- enums ----------------------------------------------------------------

std::string to_string(Objective o) {
  return o == Objective::SurfaceRmse ? "surface_rmse" : "skew_augmented";
}
std::string to_string(Horizon h) { return h == Horizon::Short ? "short" : "short_and_long"; }

Objective objective_from_string(const std::string& s) {
  if (s == "surface_rmse") return Objective::SurfaceRmse;
  if (s == "skew_augmented") return Objective::SkewAugmented;
  throw std::invalid_argument("unknown objective '" + s + "' (surface_rmse|skew_augmented)");
}

Horizon horizon_from_string(const std::string& s) {
  if (s == "short") return Horizon::Short;
  if (s == "short_and_long") return Horizon::ShortAndLong;
  throw std::invalid_argument("unknown horizon '" + s + "' (short|short_and_long)");
}

std::pair<double, double> horizon_range(Horizon h) {
  return h == Horizon::Short ? std::make_pair(1.0 / 52.0, 0.25) : std::make_pair(1.0 / 52.0, 3.0);
}

IVSurface restrict_to_horizon(const IVSurface& surface, Horizon h) {
  const auto [lo, hi] = horizon_range(h);
  IVSurface out;
  out.date = surface.date;
  for (const auto& slice : surface.slices)
    if (slice.t >= lo * (1.0 - 1e-9) && slice.t <= hi * (1.0 + 1e-9)) out.slices.push_back(slice);
  return out;
}

// ---- objectives -----------------------------------------------------------

double surface_rmse(const IVSurface& model, const IVSurface& market,
                    const MoneynessFilter& filter) {
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& slice : market.slices) {
    const IVSlice* m = nullptr;
    for (const auto& p : slice.points) {
      if (!filter.contains(slice.t, p.k)) continue;
      if (!m) {
        m = find_slice_ptr(model, slice.t);
        if (!m) {
          std::ostringstream msg;
          msg << "quote grids differ after filtering: model has no slice at t=" << slice.t;
          throw std::invalid_argument(msg.str());
        }
      }
      const IVPoint* q = find_point(*m, p.k);
      if (!q) {
        std::ostringstream msg;
        msg << "quote grids differ after filtering: missing k=" << p.k << " at t=" << slice.t;
        throw std::invalid_argument(msg.str());
      }
      const double d = q->iv - p.iv;
      ss += d * d;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("empty index set: no quotes survive the moneyness filter");
  return std::sqrt(ss / static_cast<double>(n));
}

double skew_objective(const IVSurface& model, const SkewCurve& model_skew,
                      const IVSurface& market, const SkewCurve& market_skew) {
  double vol_ss = 0.0;
  std::size_t n_vol = 0;
  for (const auto& slice : market.slices) {
    const IVSlice* m = nullptr;
    for (const auto& p : slice.points) {
      if (p.k < kSkewWindowLo || p.k > kSkewWindowHi) continue;
      if (!m) {
        m = find_slice_ptr(model, slice.t);
        if (!m) {
          std::ostringstream msg;
          msg << "model surface has no slice at t=" << slice.t;
          throw std::invalid_argument(msg.str());
        }
      }
      const IVPoint* q = find_point(*m, p.k);
      if (!q) {
        std::ostringstream msg;
        msg << "model surface missing k=" << p.k << " at t=" << slice.t;
        throw std::invalid_argument(msg.str());
      }
      const double d = q->iv - p.iv;
      vol_ss += d * d;
      ++n_vol;
    }
  }
  if (n_vol == 0) throw std::invalid_argument("no quotes inside the skew window");

  if (market_skew.maturities.size() != market_skew.skew.size() ||
      model_skew.maturities.size() != model_skew.skew.size())
    throw std::invalid_argument("skew curve fields have mismatched lengths");
  if (market_skew.maturities.empty()) throw std::invalid_argument("market skew curve is empty");
  double skew_ss = 0.0;
  for (std::size_t i = 0; i < market_skew.maturities.size(); ++i) {
    const double t = market_skew.maturities[i];
    const double s_mkt = market_skew.skew[i];
    double s_mod = -1.0;
    for (std::size_t j = 0; j < model_skew.maturities.size(); ++j)
      if (same_time(t, model_skew.maturities[j])) {
        s_mod = model_skew.skew[j];
        break;
      }
    if (s_mod < 0.0) {
      std::ostringstream msg;
      msg << "model skew curve has no entry at t=" << t;
      throw std::invalid_argument(msg.str());
    }
    if (!(s_mkt > 0.0) || !(s_mod > 0.0)) throw std::domain_error("nonpositive skew in objective");
    const double d = std::log(s_mkt) - std::log(s_mod);
    skew_ss += d * d;
  }
  return std::sqrt(vol_ss / static_cast<double>(n_vol) +
                   skew_ss / static_cast<double>(market_skew.maturities.size()));
}

// ---- calibrate ------------------------------------------------------------

double evaluate_objective(const CalibrationProblem& problem, const ModelSpec& theta) {
  return evaluate_penalized(build_context(problem), theta);
}

CalibrationResult calibrate(const CalibrationProblem& problem) {
  if (problem.budget < 1 || problem.n_starts < 1)
    throw std::invalid_argument("budget and n_starts must be positive");
  const EvalContext ctx = build_context(problem);
  const Box box = make_box(problem);
  const std::size_t d = box.dim();
  static const unsigned bases[4] = {2, 3, 5, 7};

  CalibrationResult result;
  result.notes = ctx.notes;
  double best_f = std::numeric_limits<double>::infinity();
  double best_init = std::numeric_limits<double>::infinity();
  std::vector<double> best_u;

  auto objective = [&](const std::vector<double>& u) {
    return evaluate_penalized(ctx, theta_from(problem, decode(box, u)));
  };

  for (int start = 0; start < problem.n_starts; ++start) {
    std::vector<double> u0(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double p = halton(static_cast<std::size_t>(start) + 1, bases[j]);
      u0[j] = std::asin(std::clamp(2.0 * p - 1.0, -1.0, 1.0));
    }
    const NmOutcome nm = nelder_mead(objective, u0, 0.5, problem.budget);
    result.n_evals += nm.evals;
    best_init = std::min(best_init, nm.f_init);
    if (nm.f < best_f) {
      best_f = nm.f;
      best_u = nm.u;
      result.best_start = start;
    }
  }

  result.theta_star = theta_from(problem, decode(box, best_u));
  result.objective_value = best_f;
  result.converged = best_f < best_init;

  // per-maturity vol residuals at the optimum, over the objective's own quotes
  try {
    const IVSurface model = model_surface_at(ctx, result.theta_star);
    for (const auto& slice : ctx.market.slices) {
      const IVSlice* m = find_slice_ptr(model, slice.t);
      if (!m) continue;
      double ss = 0.0;
      std::size_t n = 0;
      for (const auto& p : slice.points) {
        const bool keep = problem.objective == Objective::SkewAugmented
                              ? (p.k >= kSkewWindowLo && p.k <= kSkewWindowHi)
                              : problem.filter.contains(slice.t, p.k);
        if (!keep) continue;
        const IVPoint* q = find_point(*m, p.k);
        if (!q) continue;
        ss += (q->iv - p.iv) * (q->iv - p.iv);
        ++n;
      }
      if (n > 0) result.residuals.emplace_back(slice.t, std::sqrt(ss / static_cast<double>(n)));
    }
  } catch (const std::exception& e) {
    result.notes.push_back(std::string("residual pass failed: ") + e.what());
  }
  return result;
}

std::string result_jsonl(const CalibrationProblem& problem, const CalibrationResult& result,
                         const std::string& date) {
  nlohmann::json theta = {
      {"eta", result.theta_star.eta},
      {"rho", result.theta_star.rho},
      {"h", result.theta_star.h},
  };
  if (result.theta_star.kind != KernelKind::Rough) theta["epsilon"] = result.theta_star.epsilon;
  if (result.theta_star.kind == KernelKind::TwoFactor) {
    theta["eta_l"] = result.theta_star.eta_l;
    theta["h_l"] = result.theta_star.h_l;
  }
  nlohmann::json j = {
      {"date", date},
      {"model", to_string(result.theta_star.kind)},
      {"theta", theta},
      {"objective", result.objective_value},
      {"objective_kind", to_string(problem.objective)},
      {"horizon", to_string(problem.horizon)},
      {"n_evals", result.n_evals},
      {"converged", result.converged},
      {"seed", problem.seed},
  };
  return j.dump();
}

}  // namespace vsmile
