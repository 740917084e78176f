#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "vsmile/pricing.hpp"
#include "vsmile/skew.hpp"

namespace vsmile {

// Maturity-banded log-moneyness windows used to select calibration quotes.
// Bands are keyed by an exclusive maturity upper edge: a quote with maturity t
// falls in the first band with t < t_max, and the k-window is closed on both
// sides.
struct MoneynessFilter {
  struct Band {
    double t_max = 0.0;  // exclusive upper edge in years; +inf for the last band
    double k_min = 0.0;
    double k_max = 0.0;
  };
  std::vector<Band> bands;

  static MoneynessFilter standard();
  static MoneynessFilter from_csv(std::istream& in);

  const Band& band_for(double t) const;
  bool contains(double t, double k) const;
  void validate() const;
};

enum class Objective { SurfaceRmse, SkewAugmented };
enum class Horizon { Short, ShortAndLong };

std::string to_string(Objective o);
std::string to_string(Horizon h);
Objective objective_from_string(const std::string& s);
Horizon horizon_from_string(const std::string& s);

// [t_min, t_max] maturity range selected by a horizon, in years.
std::pair<double, double> horizon_range(Horizon h);
IVSurface restrict_to_horizon(const IVSurface& surface, Horizon h);

// Plain RMSE between matching quotes after the moneyness filter. The model
// surface must provide a quote at every filtered market point.
double surface_rmse(const IVSurface& model, const IVSurface& market,
                    const MoneynessFilter& filter);

// Skew-augmented objective: near-the-money vol RMSE (window [kSkewWindowLo,
// kSkewWindowHi]) plus the mean squared log-ratio of ATM skews, under a joint
// square root. Skew curves are matched by maturity; both sides must be
// strictly positive.
double skew_objective(const IVSurface& model, const SkewCurve& model_skew,
                      const IVSurface& market, const SkewCurve& market_skew);

struct CalibrationProblem {
  ModelSpec spec_template;  // kind and fixed fields (epsilon, h_l); free fields ignored
  IVSurface market;
  ForwardVarianceCurve fvc = ForwardVarianceCurve{{1.0}, {0.04}, {}};
  Objective objective = Objective::SurfaceRmse;
  Horizon horizon = Horizon::Short;
  MoneynessFilter filter = MoneynessFilter::standard();
  std::uint64_t seed = 777;
  int budget = 400;    // objective evaluations per start
  int n_starts = 8;
  double eta_max = 5.0;
  double fd_dk = 0.005;  // model-skew step for the skew-augmented objective
  McConfig mc;           // pricing backend settings for objective evaluations

  CalibrationProblem() {
    mc.n_paths = 1 << 12;
    mc.batch_paths = 1 << 12;
  }
};

struct CalibrationResult {
  ModelSpec theta_star;
  double objective_value = 0.0;
  int n_evals = 0;
  bool converged = false;
  int best_start = -1;
  std::vector<std::pair<double, double>> residuals;  // (maturity, per-slice vol RMSE)
  std::vector<std::string> notes;
};

// Objective value at a fixed parameter point, using the problem's common
// random numbers; calibrate() reports values consistent with this function.
double evaluate_objective(const CalibrationProblem& problem, const ModelSpec& theta);

CalibrationResult calibrate(const CalibrationProblem& problem);

// One JSON line per calibrated day, for batch output.
std::string result_jsonl(const CalibrationProblem& problem, const CalibrationResult& result,
                         const std::string& date);

}  // namespace vsmile
