#include "vsmile/types.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vsmile {

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Rough: return "rough";
    case KernelKind::PathDependent: return "path-dependent";
    case KernelKind::OneFactor: return "one-factor";
    case KernelKind::TwoFactor: return "two-factor";
  }
  throw std::logic_error("unreachable kernel kind");
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "rough") return KernelKind::Rough;
  if (s == "path-dependent") return KernelKind::PathDependent;
  if (s == "one-factor") return KernelKind::OneFactor;
  if (s == "two-factor") return KernelKind::TwoFactor;
  throw std::invalid_argument("unknown kernel kind '" + s +
                              "' (expected rough|path-dependent|one-factor|two-factor)");
}

void ModelSpec::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw std::invalid_argument("eta must be positive and finite");
  if (!(rho >= -1.0 && rho <= 1.0))
    throw std::invalid_argument("rho must lie in [-1, 1]");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("epsilon must be positive");
  if (!std::isfinite(h))
    throw std::invalid_argument("h must be finite");
  switch (kind) {
    case KernelKind::Rough:
      if (!(h > 0.0 && h <= 0.5))
        throw std::invalid_argument("rough kernel requires h in (0, 1/2]");
      break;
    case KernelKind::PathDependent:
    case KernelKind::OneFactor:
      if (!(h <= 0.5))
        throw std::invalid_argument(to_string(kind) + " kernel requires h in (-inf, 1/2]");
      break;
    case KernelKind::TwoFactor:
      if (!(h <= 0.5))
        throw std::invalid_argument("two-factor kernel requires h in (-inf, 1/2]");
      if (!(eta_l > 0.0) || !std::isfinite(eta_l))
        throw std::invalid_argument("two-factor kernel requires eta_l > 0");
      if (!(h_l <= 0.5))
        throw std::invalid_argument("two-factor kernel requires h_l in (-inf, 1/2]");
      break;
  }
}

static std::string fmt_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::map<std::string, std::string> ModelSpec::to_record() const {
  std::map<std::string, std::string> rec;
  rec["model"] = to_string(kind);
  rec["eta"] = fmt_g17(eta);
  rec["rho"] = fmt_g17(rho);
  rec["h"] = fmt_g17(h);
  rec["epsilon"] = fmt_g17(epsilon);
  if (kind == KernelKind::TwoFactor) {
    rec["eta_l"] = fmt_g17(eta_l);
    rec["h_l"] = fmt_g17(h_l);
  }
  return rec;
}

ModelSpec ModelSpec::from_record(const std::map<std::string, std::string>& rec) {
  auto want = [&](const std::string& key) -> std::string {
    auto it = rec.find(key);
    if (it == rec.end()) throw std::invalid_argument("model record missing key '" + key + "'");
    return it->second;
  };
  auto opt = [&](const std::string& key, double dflt) -> double {
    auto it = rec.find(key);
    return it == rec.end() ? dflt : std::stod(it->second);
  };
  ModelSpec s;
  s.kind = kernel_kind_from_string(want("model"));
  s.eta = std::stod(want("eta"));
  s.rho = std::stod(want("rho"));
  s.h = std::stod(want("h"));
  s.epsilon = opt("epsilon", 1.0 / 52.0);
  s.eta_l = opt("eta_l", 0.0);
  s.h_l = opt("h_l", 0.45);
  s.validate();
  return s;
}

void TimeGrid::validate() const {
  if (!(t_end > 0.0)) throw std::invalid_argument("grid t_end must be positive");
  if (n_steps < 1) throw std::invalid_argument("grid needs at least one step");
}

TimeGrid default_pricing_grid(double t_max) {
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  const double day = 1.0 / kTradingDaysPerYear;
  double dt = (t_max <= 0.25 + 1e-12) ? day : 2.0 * day;
  auto n = static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
  if (n < 1) n = 1;
  return TimeGrid{t_max, n};
}

}  // namespace vsmile
