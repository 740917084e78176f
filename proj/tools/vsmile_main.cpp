#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "vsmile/backtest.hpp"
#include "vsmile/calibration.hpp"
#include "vsmile/chain.hpp"
#include "vsmile/forward_variance.hpp"
#include "vsmile/pricing.hpp"
#include "vsmile/roughness.hpp"
#include "vsmile/simulation.hpp"
#include "vsmile/skew.hpp"
#include "vsmile/svg.hpp"
#include "vsmile/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vsmile;

namespace {

std::string g_command = "";  // active subcommand, for the error record

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Canonical flag snapshot hashed into every artifact, so an output file can be
// traced back to the exact configuration (and seed) that produced it.
struct RunConfig {
  std::string command;
  std::map<std::string, std::string> values;  // sorted by key
  std::uint64_t seed = 0;

  void set(const std::string& key, const std::string& v) { values[key] = v; }
  void set(const std::string& key, double v) { values[key] = fmt17(v); }
  void set(const std::string& key, std::uint64_t v) { values[key] = std::to_string(v); }
  void set(const std::string& key, int v) { values[key] = std::to_string(v); }
  void set(const std::string& key, const std::vector<double>& v) {
    std::string joined;
    for (double x : v) {
      if (!joined.empty()) joined += ' ';
      joined += fmt17(x);
    }
    values[key] = joined;
  }

  std::string hash_hex() const {
    std::string canon = command;
    for (const auto& [k, v] : values) canon += ';' + k + '=' + v;
    canon += ";seed=" + std::to_string(seed);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
    return buf;
  }
  std::string stamp() const {
    return "config_hash=" + hash_hex() + " seed=" + std::to_string(seed);
  }
};

int thread_budget() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* s = std::getenv("VSMILE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end == s || *end != '\0' || v < 1 || v > 64)
      throw std::invalid_argument("VSMILE_THREADS must be an integer in [1, 64]");
    n = static_cast<int>(v);
  }
  return n;
}

// Splits independent work items over the (env-capped) worker pool. Results
// must be written into pre-sized slots keyed by index, which keeps every
// output independent of the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_budget()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

// ---- shared option bundles ----------------------------------------------

struct ModelOpts {
  std::string kind = "rough";
  double eta = 0.0, rho = 0.0, h = 0.0;
  double eta_l = 0.0;
  double epsilon = 1.0 / 52.0;
  double h_l = 0.45;
};

void add_model_opts(CLI::App* sc, ModelOpts& m) {
  sc->add_option("--model", m.kind, "kernel kind: rough|path-dependent|one-factor|two-factor")
      ->required();
  sc->add_option("--eta", m.eta, "vol-of-vol")->required();
  sc->add_option("--rho", m.rho, "spot-vol correlation in [-1, 1]")->required();
  sc->add_option("--h", m.h, "roughness index");
  sc->add_option("--eta-l", m.eta_l, "slow-factor vol-of-vol (two-factor kernel)");
  sc->add_option("--epsilon", m.epsilon, "kernel smoothing scale in years")->capture_default_str();
}

ModelSpec to_spec(const ModelOpts& m) {
  ModelSpec spec;
  spec.kind = kernel_kind_from_string(m.kind);
  spec.eta = m.eta;
  spec.rho = m.rho;
  spec.h = m.h;
  spec.eta_l = m.eta_l;
  spec.epsilon = m.epsilon;
  spec.h_l = m.h_l;
  spec.validate();
  return spec;
}

void config_add_spec(RunConfig& cfg, const ModelSpec& spec) {
  for (const auto& [k, v] : spec.to_record()) cfg.set("model." + k, v);
}

std::vector<SliceRequest> make_requests(const std::vector<double>& maturities,
                                        const std::vector<double>& ks) {
  if (maturities.empty()) throw std::invalid_argument("no maturities requested");
  if (ks.empty()) throw std::invalid_argument("no strikes requested");
  std::vector<SliceRequest> req;
  req.reserve(maturities.size());
  for (double t : maturities) req.push_back({t, ks});
  return req;
}

Objective objective_from_cli(const std::string& s) {
  if (s == "surface") return Objective::SurfaceRmse;
  if (s == "skew") return Objective::SkewAugmented;
  return objective_from_string(s);  // accept the long spellings too
}

Horizon horizon_from_cli(const std::string& s) {
  if (s == "long") return Horizon::ShortAndLong;
  return horizon_from_string(s);
}

SkewCurve parse_skew_csv(std::istream& in) {
  SkewCurve curve;
  std::string line;
  bool header_seen = false;
  bool source_set = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "maturity_years,skew,source")
        throw std::invalid_argument("skew csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string t_s, skew_s, source_s;
    if (!std::getline(row, t_s, ',') || !std::getline(row, skew_s, ',') ||
        !std::getline(row, source_s))
      throw std::invalid_argument("skew csv: bad row at line " + std::to_string(line_no));
    curve.maturities.push_back(std::stod(t_s));
    curve.skew.push_back(std::stod(skew_s));
    if (!source_set) {
      if (source_s == "market")
        curve.source = SkewSource::Market;
      else if (source_s == "model_fd")
        curve.source = SkewSource::ModelFd;
      else if (source_s == "model_expansion")
        curve.source = SkewSource::ModelExpansion;
      else
        throw std::invalid_argument("skew csv: unknown source '" + source_s + "'");
      source_set = true;
    }
  }
  if (!header_seen) throw std::invalid_argument("skew csv: missing header");
  if (curve.maturities.empty()) throw std::invalid_argument("skew csv: no rows");
  return curve;
}

// ---- synth / surface -----------------------------------------------------

struct SurfaceOpts {
  ModelOpts model;
  std::vector<double> maturities{1.0 / 52, 1.0 / 26, 1.0 / 12, 1.0 / 6, 0.25};
  std::vector<double> ks{-0.2, -0.15, -0.1, -0.05, -0.02, 0.0, 0.02, 0.05};
  double xi = 0.04;
  std::string fvc_file;
  std::size_t paths = 1 << 14;
  std::size_t steps = 0;
  std::uint64_t seed = 4321;
  std::string date = "2020-01-02";
  std::string out = "out";
};

void add_surface_opts(CLI::App* sc, SurfaceOpts& o, bool with_fvc_input) {
  add_model_opts(sc, o.model);
  sc->add_option("--maturities", o.maturities, "slice maturities in years (comma separated)")
      ->delimiter(',');
  sc->add_option("--ks", o.ks, "log-moneyness grid (comma separated)")->delimiter(',');
  sc->add_option("--xi", o.xi, "flat forward-variance level")->capture_default_str();
  if (with_fvc_input)
    sc->add_option("--fvc", o.fvc_file, "forward-variance csv (overrides --xi)");
  sc->add_option("--paths", o.paths, "Monte Carlo paths")->capture_default_str();
  sc->add_option("--steps", o.steps, "time steps (0 = default grid policy)")->capture_default_str();
  sc->add_option("--seed", o.seed, "random seed")->capture_default_str();
  sc->add_option("--date", o.date, "quote date stamped into the csv")->capture_default_str();
  sc->add_option("--out", o.out, "output directory")->capture_default_str();
}

RunConfig surface_config(const char* command, const SurfaceOpts& o, const ModelSpec& spec) {
  RunConfig cfg;
  cfg.command = command;
  cfg.seed = o.seed;
  config_add_spec(cfg, spec);
  cfg.set("maturities", o.maturities);
  cfg.set("ks", o.ks);
  if (o.fvc_file.empty())
    cfg.set("xi", o.xi);
  else
    cfg.set("fvc", o.fvc_file);
  cfg.set("paths", static_cast<std::uint64_t>(o.paths));
  cfg.set("steps", static_cast<std::uint64_t>(o.steps));
  cfg.set("date", o.date);
  return cfg;
}

SurfaceResult price_surface(const SurfaceOpts& o, const ModelSpec& spec,
                            const ForwardVarianceCurve& fvc) {
  McConfig mc;
  mc.n_paths = o.paths;
  mc.seed = o.seed;
  mc.n_steps = o.steps;
  return mc_surface(spec, fvc, make_requests(o.maturities, o.ks), mc);
}

ForwardVarianceCurve surface_fvc(const SurfaceOpts& o) {
  if (!o.fvc_file.empty()) {
    auto in = open_input(o.fvc_file);
    return parse_fvc(in);
  }
  const double t_end = std::max(3.0, *std::max_element(o.maturities.begin(), o.maturities.end()));
  return ForwardVarianceCurve::flat(o.xi, t_end);
}

void run_surface(const SurfaceOpts& o) {
  const ModelSpec spec = to_spec(o.model);
  const RunConfig cfg = surface_config("surface", o, spec);
  const ForwardVarianceCurve fvc = surface_fvc(o);
  const SurfaceResult res = price_surface(o, spec, fvc);
  std::vector<std::string> dropped;
  IVSurface surface = to_iv_surface(res, &dropped);
  surface.date = o.date;

  std::ostringstream os;
  std::string preamble = cfg.stamp();
  for (const auto& w : res.warnings) preamble += "\n" + w;
  for (const auto& w : dropped) preamble += "\n" + w;
  write_surface(os, surface, preamble);
  write_file(fs::path(o.out) / "surface.csv", os.str());
  std::cout << "wrote " << (fs::path(o.out) / "surface.csv").string() << " ("
            << surface.slices.size() << " slices, " << cfg.stamp() << ")\n";
}

void run_synth(const SurfaceOpts& o) {
  const ModelSpec spec = to_spec(o.model);
  RunConfig cfg = surface_config("synth", o, spec);
  const ForwardVarianceCurve fvc = surface_fvc(o);
  const SurfaceResult res = price_surface(o, spec, fvc);
  std::vector<std::string> dropped;
  IVSurface surface = to_iv_surface(res, &dropped);
  surface.date = o.date;

  std::string preamble = cfg.stamp();
  for (const auto& w : res.warnings) preamble += "\n" + w;
  for (const auto& w : dropped) preamble += "\n" + w;

  std::ostringstream ss;
  write_surface(ss, surface, preamble);
  write_file(fs::path(o.out) / "market_surface.csv", ss.str());

  // quote the surface as a chain fixture: strike = F e^k, spread from the
  // Monte Carlo error (floored at 5 bp so bid < ask always holds)
  OptionChain chain;
  chain.date = o.date;
  for (const auto& slice : surface.slices) {
    ChainSlice cs;
    cs.t = slice.t;
    cs.forward = 1.0;
    for (const auto& p : slice.points) {
      Quote q;
      q.k = p.k;
      q.strike = std::exp(p.k);
      const double half = std::max(5e-4, std::isfinite(p.se) ? p.se : 0.0);
      q.mid_iv = p.iv;
      q.bid_iv = p.iv - half;
      q.ask_iv = p.iv + half;
      cs.quotes.push_back(q);
    }
    chain.slices.push_back(std::move(cs));
  }
  std::ostringstream cs_os;
  write_chain(cs_os, chain, cfg.stamp());
  write_file(fs::path(o.out) / "market_chain.csv", cs_os.str());

  std::ostringstream fvc_os;
  fvc_os << "# " << cfg.stamp() << '\n';
  write_fvc(fvc_os, fvc);
  write_file(fs::path(o.out) / "fvc.csv", fvc_os.str());

  std::cout << "wrote market_chain.csv, market_surface.csv, fvc.csv under " << o.out << " ("
            << cfg.stamp() << ")\n";
}

// ---- skew ----------------------------------------------------------------

struct SkewOpts {
  std::string source = "expansion";
  ModelOpts model;
  std::vector<double> maturities{1.0 / 52, 1.0 / 26, 1.0 / 12, 1.0 / 6, 0.25, 0.5, 1.0};
  std::string surface_file;
  double dk = 0.005;
  double xi = 0.04;
  std::size_t paths = 1 << 15;
  std::size_t steps = 0;
  std::uint64_t seed = 4321;
  std::string out = "out";
};

void run_skew(const SkewOpts& o) {
  RunConfig cfg;
  cfg.command = "skew";
  cfg.seed = o.seed;
  cfg.set("source", o.source);
  SkewCurve curve;
  if (o.source == "market") {
    if (o.surface_file.empty())
      throw std::invalid_argument("--source market needs --surface FILE");
    cfg.set("surface", o.surface_file);
    auto in = open_input(o.surface_file);
    curve = market_skew_curve(parse_surface(in));
  } else if (o.source == "expansion" || o.source == "fd") {
    const ModelSpec spec = to_spec(o.model);
    config_add_spec(cfg, spec);
    cfg.set("maturities", o.maturities);
    if (o.source == "expansion") {
      curve = expansion_skew_curve(spec, o.maturities);
    } else {
      cfg.set("dk", o.dk);
      cfg.set("xi", o.xi);
      cfg.set("paths", static_cast<std::uint64_t>(o.paths));
      cfg.set("steps", static_cast<std::uint64_t>(o.steps));
      const double t_max = *std::max_element(o.maturities.begin(), o.maturities.end());
      McConfig mc;
      mc.n_paths = o.paths;
      mc.seed = o.seed;
      mc.n_steps = o.steps;
      const SurfaceResult res =
          mc_surface(spec, ForwardVarianceCurve::flat(o.xi, std::max(3.0, t_max)),
                     make_requests(o.maturities, {-o.dk, 0.0, o.dk}), mc);
      curve = fd_skew_curve(to_iv_surface(res), o.dk);
    }
  } else {
    throw std::invalid_argument("unknown skew source '" + o.source +
                                "' (expansion|fd|market)");
  }
  if (curve.maturities.empty()) throw std::runtime_error("skew curve came out empty");

  std::ostringstream os;
  write_skew_curve(os, curve, cfg.stamp());
  write_file(fs::path(o.out) / "skew.csv", os.str());

  SvgSeries series{to_string(curve.source), curve.maturities, curve.skew};
  SvgOptions svg;
  svg.title = "ATM skew (" + to_string(curve.source) + ")";
  svg.x_label = "maturity (years)";
  svg.y_label = "|dsigma/dk|";
  svg.log_x = true;
  svg.log_y = *std::min_element(curve.skew.begin(), curve.skew.end()) > 0.0;
  write_file(fs::path(o.out) / "skew.svg",
             "<!-- " + cfg.stamp() + " -->\n" + render_svg_lines({series}, svg));
  std::cout << "wrote skew.csv, skew.svg under " << o.out << " (" << cfg.stamp() << ")\n";
}

// ---- fvc -----------------------------------------------------------------

struct FvcOpts {
  std::string chain_file;
  std::string out = "out";
};

void run_fvc(const FvcOpts& o) {
  RunConfig cfg;
  cfg.command = "fvc";
  cfg.set("chain", o.chain_file);
  auto [chain, report] = parse_chain_file(o.chain_file);
  const ForwardVarianceCurve fvc = extract_fvc(chain);
  std::ostringstream os;
  os << "# " << cfg.stamp() << '\n';
  os << "# chain date " << chain.date << ", " << report.n_rows << " rows, " << report.n_rejected
     << " rejected\n";
  for (const auto& m : report.messages) os << "# " << m << '\n';
  write_fvc(os, fvc);
  write_file(fs::path(o.out) / "fvc.csv", os.str());
  std::cout << "wrote " << (fs::path(o.out) / "fvc.csv").string() << " (" << fvc.knots.size()
            << " buckets, " << cfg.stamp() << ")\n";
}

// ---- calibrate -----------------------------------------------------------

struct CalibrateOpts {
  std::string model = "rough";
  std::string chain_file, surface_file, fvc_file, filter_file;
  std::string objective = "surface";
  std::string horizon = "short";
  double epsilon = 1.0 / 52.0;
  std::size_t paths = 1 << 12;
  std::size_t steps = 0;
  std::uint64_t seed = 777;
  int budget = 400;
  int starts = 8;
  std::string date;
  std::string out = "out";
};

CalibrationProblem build_problem(const CalibrateOpts& o, std::string* date_out) {
  if (o.chain_file.empty() == o.surface_file.empty())
    throw std::invalid_argument("calibrate needs exactly one of --chain or --surface");
  CalibrationProblem problem;
  problem.spec_template.kind = kernel_kind_from_string(o.model);
  problem.spec_template.epsilon = o.epsilon;
  std::string date = o.date;
  if (!o.chain_file.empty()) {
    auto [chain, report] = parse_chain_file(o.chain_file);
    for (const auto& m : report.messages) std::cerr << "# " << m << '\n';
    problem.market = surface_from_chain(chain);
    problem.fvc = o.fvc_file.empty() ? extract_fvc(chain) : [&] {
      auto in = open_input(o.fvc_file);
      return parse_fvc(in);
    }();
    if (date.empty()) date = chain.date;
  } else {
    auto in = open_input(o.surface_file);
    problem.market = parse_surface(in);
    if (o.fvc_file.empty())
      throw std::invalid_argument(
          "calibrating from a surface csv needs --fvc (no chain to extract it from)");
    auto fin = open_input(o.fvc_file);
    problem.fvc = parse_fvc(fin);
    if (date.empty()) date = problem.market.date;
  }
  if (date.empty()) date = "0000-00-00";
  problem.objective = objective_from_cli(o.objective);
  problem.horizon = horizon_from_cli(o.horizon);
  if (!o.filter_file.empty()) {
    auto in = open_input(o.filter_file);
    problem.filter = MoneynessFilter::from_csv(in);
  }
  problem.seed = o.seed;
  problem.budget = o.budget;
  problem.n_starts = o.starts;
  problem.mc.n_paths = o.paths;
  problem.mc.batch_paths = o.paths;
  problem.mc.n_steps = o.steps;
  problem.mc.seed = o.seed;
  if (date_out) *date_out = date;
  return problem;
}

void run_calibrate(const CalibrateOpts& o) {
  RunConfig cfg;
  cfg.command = "calibrate";
  cfg.seed = o.seed;
  cfg.set("model", o.model);
  cfg.set("objective", o.objective);
  cfg.set("horizon", o.horizon);
  if (!o.chain_file.empty()) cfg.set("chain", o.chain_file);
  if (!o.surface_file.empty()) cfg.set("surface", o.surface_file);
  if (!o.fvc_file.empty()) cfg.set("fvc", o.fvc_file);
  if (!o.filter_file.empty()) cfg.set("filter_table", o.filter_file);
  cfg.set("epsilon", o.epsilon);
  cfg.set("paths", static_cast<std::uint64_t>(o.paths));
  cfg.set("steps", static_cast<std::uint64_t>(o.steps));
  cfg.set("budget", o.budget);
  cfg.set("starts", o.starts);
  if (!o.date.empty()) cfg.set("date", o.date);

  std::string date;
  const CalibrationProblem problem = build_problem(o, &date);
  const CalibrationResult result = calibrate(problem);

  json line = json::parse(result_jsonl(problem, result, date));
  line["config_hash"] = cfg.hash_hex();
  const std::string out_line = line.dump() + "\n";
  write_file(fs::path(o.out) / "calibration.jsonl", out_line);
  std::cout << out_line;
}

// ---- backtest ------------------------------------------------------------

struct BacktestOpts {
  std::string manifest_file, result_file, filter_file;
  int horizon_days = 20;
  std::size_t paths = 1 << 12;
  std::size_t steps = 0;
  std::uint64_t seed = 777;
  std::string out = "out";
};

struct ManifestRow {
  std::string date, chain, fvc;
};

std::vector<ManifestRow> parse_manifest(const std::string& path) {
  auto in = open_input(path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line == "date,chain" || line == "date,chain,fvc") continue;  // optional header
    std::istringstream row(line);
    ManifestRow r;
    std::getline(row, r.date, ',');
    std::getline(row, r.chain, ',');
    std::getline(row, r.fvc, ',');
    if (r.date.empty() || r.chain.empty())
      throw std::invalid_argument("manifest: bad row at line " + std::to_string(line_no));
    r.chain = (base / r.chain).string();
    if (!r.fvc.empty()) r.fvc = (base / r.fvc).string();
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::invalid_argument("manifest '" + path + "' lists no days");
  return rows;
}

ModelSpec theta_from_json(const json& j) {
  ModelSpec theta;
  theta.kind = kernel_kind_from_string(j.at("model").get<std::string>());
  const json& t = j.at("theta");
  theta.eta = t.at("eta").get<double>();
  theta.rho = t.at("rho").get<double>();
  theta.h = t.at("h").get<double>();
  if (t.contains("epsilon")) theta.epsilon = t.at("epsilon").get<double>();
  if (t.contains("eta_l")) theta.eta_l = t.at("eta_l").get<double>();
  if (t.contains("h_l")) theta.h_l = t.at("h_l").get<double>();
  theta.validate();
  return theta;
}

void run_backtest(const BacktestOpts& o) {
  RunConfig cfg;
  cfg.command = "backtest";
  cfg.seed = o.seed;
  cfg.set("manifest", o.manifest_file);
  cfg.set("result", o.result_file);
  if (!o.filter_file.empty()) cfg.set("filter_table", o.filter_file);
  cfg.set("horizon_days", o.horizon_days);
  cfg.set("paths", static_cast<std::uint64_t>(o.paths));
  cfg.set("steps", static_cast<std::uint64_t>(o.steps));

  BacktestInput input;
  input.horizon_days = o.horizon_days;

  // anchors from calibration output (one JSON line per day)
  auto rin = open_input(o.result_file);
  std::string line;
  std::string objective, horizon;
  while (std::getline(rin, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    BacktestAnchor anchor;
    anchor.date = j.at("date").get<std::string>();
    anchor.theta = theta_from_json(j);
    anchor.objective_value = j.at("objective").get<double>();
    if (input.anchors.empty()) {
      objective = j.at("objective_kind").get<std::string>();
      horizon = j.at("horizon").get<std::string>();
      input.eval.spec_template = anchor.theta;
    } else if (input.eval.spec_template.kind != anchor.theta.kind) {
      throw std::invalid_argument("anchors mix kernel kinds; backtest one model at a time");
    }
    input.anchors.push_back(std::move(anchor));
  }
  if (input.anchors.empty())
    throw std::invalid_argument("result file '" + o.result_file + "' has no calibration lines");
  input.eval.objective = objective_from_string(objective);
  input.eval.horizon = horizon_from_string(horizon);
  if (!o.filter_file.empty()) {
    auto in = open_input(o.filter_file);
    input.eval.filter = MoneynessFilter::from_csv(in);
  }
  input.eval.seed = o.seed;
  input.eval.mc.n_paths = o.paths;
  input.eval.mc.batch_paths = o.paths;
  input.eval.mc.n_steps = o.steps;
  input.eval.mc.seed = o.seed;

  // market days load in parallel (worker pool capped by VSMILE_THREADS);
  // slot-per-day keeps the result schedule-independent
  const std::vector<ManifestRow> rows = parse_manifest(o.manifest_file);
  input.days.resize(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    auto [chain, report] = parse_chain_file(rows[i].chain);
    (void)report;
    MarketDay day;
    day.date = rows[i].date;
    day.surface = surface_from_chain(chain);
    if (rows[i].fvc.empty()) {
      day.fvc = extract_fvc(chain);
    } else {
      auto in = open_input(rows[i].fvc);
      day.fvc = parse_fvc(in);
    }
    input.days[i] = std::move(day);
  });

  const BacktestOutput output = run_backtest(input);
  const std::vector<BoxSummary> summary = summarize_backtest(output.records);

  const std::string model = to_string(input.eval.spec_template.kind);
  std::ostringstream rec_os;
  rec_os << "# " << cfg.stamp() << '\n';
  for (const auto& s : output.skipped) rec_os << "# skipped: " << s << '\n';
  write_backtest_csv(rec_os, output.records, model);
  write_file(fs::path(o.out) / "backtest_records.csv", rec_os.str());

  std::ostringstream sum_os;
  sum_os << "# " << cfg.stamp() << '\n';
  write_backtest_summary_csv(sum_os, summary);
  write_file(fs::path(o.out) / "backtest_summary.csv", sum_os.str());

  if (!summary.empty()) {
    SvgOptions svg;
    svg.title = "parameter stability: surface RMSE vs horizon (" + model + ")";
    svg.x_label = "business days after calibration";
    svg.y_label = "vol RMSE";
    write_file(fs::path(o.out) / "backtest.svg",
               "<!-- " + cfg.stamp() + " -->\n" + render_svg_boxes(summary, svg));
  }
  std::cout << "wrote backtest_records.csv (" << output.records.size() << " records, "
            << output.skipped.size() << " skipped), backtest_summary.csv under " << o.out << " ("
            << cfg.stamp() << ")\n";
}

// ---- roughness -----------------------------------------------------------

struct RoughnessOpts {
  ModelOpts model;
  bool have_model = false;
  double xi = 0.04;
  double years = 10.0;
  std::size_t max_delta = 50;
  std::vector<double> qs{0.5, 1.0, 1.5, 2.0, 3.0};
  std::string increments = "log";
  std::string rv_file, skew_file;
  double tau = 0.0;  // 0 = sweep
  std::uint64_t seed = 8888;
  std::string out = "out";
};

void run_roughness(const RoughnessOpts& o) {
  RunConfig cfg;
  cfg.command = "roughness";
  cfg.seed = o.seed;

  if (!o.skew_file.empty()) {
    // power-law mode: fit |skew|(T) = c T^(h - 1/2) on an ATM skew curve
    cfg.set("skew_curve", o.skew_file);
    if (o.tau > 0.0) cfg.set("tau", o.tau);
    auto in = open_input(o.skew_file);
    const SkewCurve curve = parse_skew_csv(in);
    const std::optional<double> tau =
        o.tau > 0.0 ? std::optional<double>(o.tau) : std::nullopt;
    const std::vector<PowerLawFit> fits = power_law_skew_fit(curve, tau);
    std::ostringstream os;
    os << "# " << cfg.stamp() << '\n';
    write_power_law_csv(os, fits);
    write_file(fs::path(o.out) / "power_law.csv", os.str());

    std::vector<SvgSeries> series{{"skew", curve.maturities, curve.skew}};
    for (const auto& f : fits) {
      SvgSeries fit_line{"fit " + to_string(f.regime), {}, {}};
      for (std::size_t i = 0; i < curve.maturities.size(); ++i) {
        const double t = curve.maturities[i];
        const bool in_regime = f.regime == PowerLawFit::Regime::Single ||
                               (f.regime == PowerLawFit::Regime::Short ? t < f.tau : t >= f.tau);
        if (!in_regime) continue;
        fit_line.x.push_back(t);
        fit_line.y.push_back(f.c * std::pow(t, f.h_tilde - 0.5));
      }
      if (!fit_line.x.empty()) series.push_back(std::move(fit_line));
    }
    SvgOptions svg;
    svg.title = "ATM skew power law";
    svg.x_label = "maturity (years)";
    svg.y_label = "|skew|";
    svg.log_x = svg.log_y = true;
    write_file(fs::path(o.out) / "power_law.svg",
               "<!-- " + cfg.stamp() + " -->\n" + render_svg_lines(series, svg));
    std::cout << "wrote power_law.csv, power_law.svg under " << o.out << " (" << cfg.stamp()
              << ")\n";
    return;
  }

  RVSeries rv;
  if (!o.rv_file.empty()) {
    cfg.set("rv", o.rv_file);
    auto in = open_input(o.rv_file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      rv.values.push_back(std::stod(line));
    }
    if (rv.values.empty()) throw std::invalid_argument("rv file has no values");
  } else {
    if (!o.have_model)
      throw std::invalid_argument("roughness needs --model ... , --rv FILE or --skew-curve FILE");
    const ModelSpec spec = to_spec(o.model);
    config_add_spec(cfg, spec);
    cfg.set("xi", o.xi);
    cfg.set("years", o.years);
    const long n_days = std::lround(o.years * kTradingDaysPerYear);
    if (n_days < 10) throw std::invalid_argument("simulation horizon too short (< 10 days)");
    TimeGrid grid;
    grid.t_end = static_cast<double>(n_days) / kTradingDaysPerYear;
    grid.n_steps = static_cast<std::size_t>(n_days) * kBarsPerDay;
    SimOptions opts;
    opts.antithetic = false;  // one genuine path
    const PathSet ps =
        simulate(spec, ForwardVarianceCurve::flat(o.xi, grid.t_end), grid, 1, o.seed, opts);
    std::vector<double> log_s(ps.log_s_row(0), ps.log_s_row(0) + ps.n_nodes());
    rv = realized_vol(log_s, kBarsPerDay);
    std::ostringstream rv_os;
    rv_os << "# " << cfg.stamp() << "\nday,rv\n";
    for (std::size_t i = 0; i < rv.values.size(); ++i)
      rv_os << i << ',' << fmt17(rv.values[i]) << '\n';
    write_file(fs::path(o.out) / "rv.csv", rv_os.str());
  }
  cfg.set("max_delta", static_cast<std::uint64_t>(o.max_delta));
  cfg.set("qs", o.qs);
  cfg.set("increments", o.increments);

  if (o.increments != "log" && o.increments != "level")
    throw std::invalid_argument("--increments takes log or level");
  // roughness of volatility is read off log-vol increments; the level mode
  // regresses the raw series instead
  const RVSeries fitted = o.increments == "log" ? log_series(rv) : rv;
  const HurstEstimate est = estimate_hurst(fitted, o.qs, o.max_delta);

  std::ostringstream qv_os;
  qv_os << "# " << cfg.stamp() << '\n';
  qv_os << "# " << o.increments << " increments\n";
  write_qvariation_csv(qv_os, fitted, o.qs, o.max_delta);
  write_file(fs::path(o.out) / "qvariation.csv", qv_os.str());

  std::ostringstream h_os;
  h_os << "# " << cfg.stamp() << '\n';
  write_hurst_csv(h_os, est);
  write_file(fs::path(o.out) / "hurst.csv", h_os.str());

  std::vector<SvgSeries> series;
  for (double q : o.qs) {
    SvgSeries s{"q=" + fmt_g(q), {}, {}};
    for (std::size_t d = 1; d <= o.max_delta; ++d) {
      s.x.push_back(static_cast<double>(d));
      s.y.push_back(q_variation(fitted, q, d));
    }
    series.push_back(std::move(s));
  }
  SvgOptions svg;
  svg.title = "realized-vol q-variation, h_hat=" + fmt_g(est.h_hat);
  svg.x_label = "lag (days)";
  svg.y_label = "m(q, lag)";
  svg.log_x = svg.log_y = true;
  write_file(fs::path(o.out) / "roughness.svg",
             "<!-- " + cfg.stamp() + " -->\n" + render_svg_lines(series, svg));
  std::cout << "h_hat=" << est.h_hat << " (fit r2=" << est.h_r2 << "); wrote qvariation.csv, "
            << "hurst.csv, roughness.svg under " << o.out << " (" << cfg.stamp() << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volterra Bergomi toolkit: simulation, pricing, calibration, diagnostics"};
  // --h is the roughness index, so help keeps only its long spelling
  app.set_help_flag("--help", "print help and exit");
  app.require_subcommand(1);

  SurfaceOpts surface_opts;
  auto* sc_surface = app.add_subcommand("surface", "price a model implied-vol surface");
  add_surface_opts(sc_surface, surface_opts, true);
  sc_surface->callback([&] { g_command = "surface", run_surface(surface_opts); });

  SurfaceOpts synth_opts;
  auto* sc_synth =
      app.add_subcommand("synth", "generate a synthetic market (chain + surface + fvc fixtures)");
  add_surface_opts(sc_synth, synth_opts, false);
  sc_synth->callback([&] { g_command = "synth", run_synth(synth_opts); });

  SkewOpts skew_opts;
  auto* sc_skew = app.add_subcommand("skew", "ATM skew term structure");
  sc_skew->add_option("--source", skew_opts.source, "expansion|fd|market")->capture_default_str();
  sc_skew->add_option("--model", skew_opts.model.kind,
                      "kernel kind: rough|path-dependent|one-factor|two-factor");
  sc_skew->add_option("--eta", skew_opts.model.eta, "vol-of-vol");
  sc_skew->add_option("--rho", skew_opts.model.rho, "spot-vol correlation");
  sc_skew->add_option("--h", skew_opts.model.h, "roughness index");
  sc_skew->add_option("--eta-l", skew_opts.model.eta_l, "slow-factor vol-of-vol");
  sc_skew->add_option("--epsilon", skew_opts.model.epsilon, "kernel smoothing scale")->capture_default_str();
  sc_skew->add_option("--maturities", skew_opts.maturities, "curve maturities in years")
      ->delimiter(',');
  sc_skew->add_option("--surface", skew_opts.surface_file, "surface csv (market source)");
  sc_skew->add_option("--dk", skew_opts.dk, "finite-difference half-step")->capture_default_str();
  sc_skew->add_option("--xi", skew_opts.xi, "flat forward variance (fd source)")->capture_default_str();
  sc_skew->add_option("--paths", skew_opts.paths, "Monte Carlo paths (fd source)")->capture_default_str();
  sc_skew->add_option("--steps", skew_opts.steps, "time steps (0 = default policy)")->capture_default_str();
  sc_skew->add_option("--seed", skew_opts.seed, "random seed")->capture_default_str();
  sc_skew->add_option("--out", skew_opts.out, "output directory")->capture_default_str();
  sc_skew->callback([&] { g_command = "skew", run_skew(skew_opts); });

  FvcOpts fvc_opts;
  auto* sc_fvc = app.add_subcommand("fvc", "extract the forward-variance curve from a chain");
  sc_fvc->add_option("--chain", fvc_opts.chain_file, "quote chain csv")->required();
  sc_fvc->add_option("--out", fvc_opts.out, "output directory")->capture_default_str();
  sc_fvc->callback([&] { g_command = "fvc", run_fvc(fvc_opts); });

  CalibrateOpts cal_opts;
  auto* sc_cal = app.add_subcommand("calibrate", "fit kernel parameters to a market surface");
  sc_cal->add_option("--model", cal_opts.model,
                     "kernel kind: rough|path-dependent|one-factor|two-factor")
      ->required();
  sc_cal->add_option("--chain", cal_opts.chain_file, "quote chain csv");
  sc_cal->add_option("--surface", cal_opts.surface_file, "surface csv (needs --fvc)");
  sc_cal->add_option("--fvc", cal_opts.fvc_file, "forward-variance csv");
  sc_cal->add_option("--objective", cal_opts.objective, "surface|skew")->capture_default_str();
  sc_cal->add_option("--horizon", cal_opts.horizon, "short|long")->capture_default_str();
  sc_cal->add_option("--filter-table", cal_opts.filter_file,
                     "moneyness filter csv (default: built-in table)");
  sc_cal->add_option("--epsilon", cal_opts.epsilon, "kernel smoothing scale")->capture_default_str();
  sc_cal->add_option("--paths", cal_opts.paths, "Monte Carlo paths per evaluation")->capture_default_str();
  sc_cal->add_option("--steps", cal_opts.steps, "time steps (0 = default policy)")->capture_default_str();
  sc_cal->add_option("--seed", cal_opts.seed, "common-random-number seed")->capture_default_str();
  sc_cal->add_option("--budget", cal_opts.budget, "objective evaluations per start")->capture_default_str();
  sc_cal->add_option("--starts", cal_opts.starts, "multistart count")->capture_default_str();
  sc_cal->add_option("--date", cal_opts.date, "date stamped into the result line");
  sc_cal->add_option("--out", cal_opts.out, "output directory")->capture_default_str();
  sc_cal->callback([&] { g_command = "calibrate", run_calibrate(cal_opts); });

  BacktestOpts bt_opts;
  auto* sc_bt = app.add_subcommand("backtest", "re-score frozen parameters forward in time");
  sc_bt->add_option("--manifest", bt_opts.manifest_file, "csv: date,chain[,fvc] per day")
      ->required();
  sc_bt->add_option("--result", bt_opts.result_file, "calibration.jsonl with anchor fits")
      ->required();
  sc_bt->add_option("--filter-table", bt_opts.filter_file, "moneyness filter csv");
  sc_bt->add_option("--horizon-days", bt_opts.horizon_days, "business days per anchor")->capture_default_str();
  sc_bt->add_option("--paths", bt_opts.paths, "Monte Carlo paths per evaluation")->capture_default_str();
  sc_bt->add_option("--steps", bt_opts.steps, "time steps (0 = default policy)")->capture_default_str();
  sc_bt->add_option("--seed", bt_opts.seed, "common-random-number seed")->capture_default_str();
  sc_bt->add_option("--out", bt_opts.out, "output directory")->capture_default_str();
  sc_bt->callback([&] { g_command = "backtest", run_backtest(bt_opts); });

  RoughnessOpts rough_opts;
  auto* sc_rough =
      app.add_subcommand("roughness", "realized-vol roughness / skew power-law estimation");
  auto* model_opt = sc_rough->add_option("--model", rough_opts.model.kind,
                                         "kernel kind (simulate a fresh path)");
  sc_rough->add_option("--eta", rough_opts.model.eta, "vol-of-vol");
  sc_rough->add_option("--rho", rough_opts.model.rho, "spot-vol correlation");
  sc_rough->add_option("--h", rough_opts.model.h, "roughness index");
  sc_rough->add_option("--eta-l", rough_opts.model.eta_l, "slow-factor vol-of-vol");
  sc_rough->add_option("--epsilon", rough_opts.model.epsilon, "kernel smoothing scale")->capture_default_str();
  sc_rough->add_option("--xi", rough_opts.xi, "flat forward variance")->capture_default_str();
  sc_rough->add_option("--years", rough_opts.years, "simulated history length")->capture_default_str();
  sc_rough->add_option("--rv", rough_opts.rv_file, "realized-vol series, one value per line");
  sc_rough->add_option("--skew-curve", rough_opts.skew_file, "skew csv for power-law fits");
  sc_rough->add_option("--tau", rough_opts.tau, "fixed regime cutoff (0 = sweep)")->capture_default_str();
  sc_rough->add_option("--max-delta", rough_opts.max_delta, "largest lag in days")->capture_default_str();
  sc_rough->add_option("--qs", rough_opts.qs, "moment orders")->delimiter(',');
  sc_rough->add_option("--increments", rough_opts.increments, "regress log or level increments")
      ->capture_default_str();
  sc_rough->add_option("--seed", rough_opts.seed, "random seed")->capture_default_str();
  sc_rough->add_option("--out", rough_opts.out, "output directory")->capture_default_str();
  sc_rough->callback([&] {
    g_command = "roughness";
    rough_opts.have_model = model_opt->count() > 0;
    run_roughness(rough_opts);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const json err = {{"command", g_command}, {"error", std::string("argument error: ") + e.what()}};
    std::cerr << err.dump() << '\n';
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  } catch (const std::exception& e) {
    const json err = {{"command", g_command}, {"error", e.what()}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
