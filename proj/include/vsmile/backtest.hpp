#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vsmile/calibration.hpp"

namespace vsmile {

// ---- weekday-calendar date helpers (ISO "YYYY-MM-DD") ---------------------

// Days since 1970-01-01; validates the calendar date.
std::int64_t days_from_date(const std::string& iso);
std::string date_from_days(std::int64_t days);
bool is_weekend(const std::string& iso);
// n >= 0 business days forward on a Saturday/Sunday-skipping calendar; a
// weekend start first rolls to the next Monday.
std::string add_business_days(const std::string& iso, int n);

// ---- prediction-quality experiment ----------------------------------------

struct MarketDay {
  std::string date;
  IVSurface surface;
  ForwardVarianceCurve fvc = ForwardVarianceCurve{{1.0}, {0.04}, {}};
};

struct BacktestAnchor {
  std::string date;
  ModelSpec theta;            // frozen parameters
  double objective_value = 0.0;  // stored calibration objective at the anchor
};

struct BacktestRecord {
  std::string anchor_date;
  int horizon_day = 0;  // 1..horizon
  double rmse = 0.0;
};

struct BacktestInput {
  std::vector<MarketDay> days;
  std::vector<BacktestAnchor> anchors;
  // Evaluation settings (objective kind, horizon, filter, seed, mc); the
  // market and fvc fields are replaced day by day.
  CalibrationProblem eval;
  int horizon_days = 20;
};

struct BacktestOutput {
  std::vector<BacktestRecord> records;  // ordered by (anchor, horizon_day)
  std::vector<std::string> skipped;     // missing or unusable days, one note each
};

// Holds each anchor's theta fixed, refreshes the forward-variance curve from
// the target day, and records that day's objective value. Missing business
// days are reported in `skipped`, never interpolated.
BacktestOutput run_backtest(const BacktestInput& input);

// ---- box-plot summary ------------------------------------------------------

struct BoxSummary {
  int horizon_day = 0;
  int n = 0;
  double p25 = 0.0, p50 = 0.0, p75 = 0.0;
  double whisker_lo = 0.0, whisker_hi = 0.0;  // Tukey 1.5 IQR fences, clipped to data
};

std::vector<BoxSummary> summarize_backtest(const std::vector<BacktestRecord>& records);

void write_backtest_csv(std::ostream& out, const std::vector<BacktestRecord>& records,
                        const std::string& model);
void write_backtest_summary_csv(std::ostream& out, const std::vector<BoxSummary>& summary);

}  // namespace vsmile
