#include "vsmile/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vsmile {

namespace {

// civil <-> serial conversion on the proleptic Gregorian calendar
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

int weekday(std::int64_t z) {  // 0 = Monday .. 6 = Sunday
  return static_cast<int>(z >= -3 ? (z + 3) % 7 : (z + 4) % 7 + 6);
}

double quantile7(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::int64_t days_from_date(const std::string& iso) {
  int y = 0, m = 0, d = 0;
  char sep1 = 0, sep2 = 0;
  std::istringstream in(iso);
  if (!(in >> y >> sep1 >> m >> sep2 >> d) || sep1 != '-' || sep2 != '-' || !in.eof() ||
      iso.size() != 10)
    throw std::invalid_argument("bad date '" + iso + "' (expected YYYY-MM-DD)");
  if (m < 1 || m > 12 || d < 1) throw std::invalid_argument("bad date '" + iso + "'");
  const std::int64_t z = days_from_civil(y, m, d);
  int y2;
  unsigned m2, d2;
  civil_from_days(z, y2, m2, d2);
  if (y2 != y || static_cast<int>(m2) != m || static_cast<int>(d2) != d)
    throw std::invalid_argument("bad date '" + iso + "' (no such calendar day)");
  return z;
}

std::string date_from_days(std::int64_t days) {
  int y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
  return buf;
}

bool is_weekend(const std::string& iso) { return weekday(days_from_date(iso)) >= 5; }

std::string add_business_days(const std::string& iso, int n) {
  if (n < 0) throw std::invalid_argument("business-day offset must be nonnegative");
  std::int64_t z = days_from_date(iso);
  while (weekday(z) >= 5) ++z;
  for (int i = 0; i < n; ++i) {
    ++z;
    while (weekday(z) >= 5) ++z;
  }
  return date_from_days(z);
}

BacktestOutput run_backtest(const BacktestInput& input) {
  if (input.horizon_days < 1) throw std::invalid_argument("horizon must be at least one day");
  std::map<std::string, const MarketDay*> by_date;
  for (const auto& day : input.days) {
    if (!by_date.emplace(day.date, &day).second)
      throw std::invalid_argument("duplicate market day " + day.date);
  }

  BacktestOutput out;
  for (const auto& anchor : input.anchors) {
    for (int h = 1; h <= input.horizon_days; ++h) {
      const std::string date = add_business_days(anchor.date, h);
      const auto it = by_date.find(date);
      if (it == by_date.end()) {
        out.skipped.push_back("anchor " + anchor.date + " day " + std::to_string(h) + " (" +
                              date + "): no market data");
        continue;
      }
      CalibrationProblem problem = input.eval;
      problem.market = it->second->surface;
      problem.fvc = it->second->fvc;
      try {
        const double rmse = evaluate_objective(problem, anchor.theta);
        out.records.push_back({anchor.date, h, rmse});
      } catch (const std::exception& e) {
        out.skipped.push_back("anchor " + anchor.date + " day " + std::to_string(h) + " (" +
                              date + "): " + e.what());
      }
    }
  }
  return out;
}

std::vector<BoxSummary> summarize_backtest(const std::vector<BacktestRecord>& records) {
  std::map<int, std::vector<double>> by_h;
  for (const auto& r : records) by_h[r.horizon_day].push_back(r.rmse);
  std::vector<BoxSummary> out;
  for (auto& [h, values] : by_h) {
    std::sort(values.begin(), values.end());
    BoxSummary s;
    s.horizon_day = h;
    s.n = static_cast<int>(values.size());
    s.p25 = quantile7(values, 0.25);
    s.p50 = quantile7(values, 0.50);
    s.p75 = quantile7(values, 0.75);
    const double iqr = s.p75 - s.p25;
    const double lo_fence = s.p25 - 1.5 * iqr;
    const double hi_fence = s.p75 + 1.5 * iqr;
    s.whisker_lo = values.back();
    s.whisker_hi = values.front();
    for (double v : values) {
      if (v >= lo_fence) s.whisker_lo = std::min(s.whisker_lo, v);
      if (v <= hi_fence) s.whisker_hi = std::max(s.whisker_hi, v);
    }
    out.push_back(s);
  }
  return out;
}

void write_backtest_csv(std::ostream& out, const std::vector<BacktestRecord>& records,
                        const std::string& model) {
  out << "anchor_date,model,horizon_day,rmse\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.rmse);
    out << r.anchor_date << ',' << model << ',' << r.horizon_day << ',' << buf << '\n';
  }
}

void write_backtest_summary_csv(std::ostream& out, const std::vector<BoxSummary>& summary) {
  out << "horizon_day,n,p25,p50,p75,whisker_lo,whisker_hi\n";
  char buf[64];
  for (const auto& s : summary) {
    out << s.horizon_day << ',' << s.n;
    for (double v : {s.p25, s.p50, s.p75, s.whisker_lo, s.whisker_hi}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace vsmile
