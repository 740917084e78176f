#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

namespace vsmile {

enum class KernelKind { Rough, PathDependent, OneFactor, TwoFactor };

std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);

// Variance-kernel parameters. eta_l / h_l participate only for TwoFactor;
// epsilon and h_l are structural constants (1/52 and 0.45) and are not
// calibrated, but remain overridable for experiments.
struct ModelSpec {
  KernelKind kind = KernelKind::Rough;
  double eta = 1.0;
  double rho = -0.7;
  double h = 0.1;
  double eta_l = 0.0;
  double epsilon = 1.0 / 52.0;
  double h_l = 0.45;

  void validate() const;  // throws std::invalid_argument with the legal interval

  // Flat key-value form used by the CLI config and result records.
  std::map<std::string, std::string> to_record() const;
  static ModelSpec from_record(const std::map<std::string, std::string>& rec);
};

// Uniform grid on [0, t_end] with n_steps intervals (n_steps + 1 nodes).
struct TimeGrid {
  double t_end = 1.0;
  std::size_t n_steps = 1;

  double dt() const { return t_end / static_cast<double>(n_steps); }
  double time(std::size_t i) const {
    return t_end * static_cast<double>(i) / static_cast<double>(n_steps);
  }
  void validate() const;
};

// Default step-size policy: daily resolution up to three months, a two-day
// step beyond (bounds memory on multi-year horizons), 5-minute bars for the
// realized-volatility experiments.
constexpr double kTradingDaysPerYear = 252.0;
constexpr int kBarsPerDay = 78;

TimeGrid default_pricing_grid(double t_max);

}  // namespace vsmile
