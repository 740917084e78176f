#include <cmath>
#include <stdexcept>
#include <sstream>

#include "doctest.h"
#include "vsmile/backtest.hpp"

using namespace vsmile;

namespace {

IVSurface alternating_surface(const std::vector<double>& ts, const std::vector<double>& ks,
                              double mid, double amp, double shift = 0.0) {
  IVSurface s;
  for (double t : ts) {
    IVSlice slice;
    slice.t = t;
    int sign = 1;
    for (double k : ks) {
      IVPoint p;
      p.k = k;
      p.iv = mid + sign * amp + shift;
      sign = -sign;
      slice.points.push_back(p);
    }
    s.slices.push_back(slice);
  }
  return s;
}

BacktestInput base_input() {
  BacktestInput in;
  const std::vector<double> ts = {1.0 / 12.0, 1.0 / 6.0};
  const std::vector<double> ks = {-0.1, -0.05, 0.0, 0.03};
  for (const char* date : {"2022-10-03", "2022-10-04", "2022-10-05", "2022-10-06", "2022-10-07",
                           "2022-10-10"}) {
    MarketDay day;
    day.date = date;
    day.surface = alternating_surface(ts, ks, 0.2, 0.01);
    day.fvc = ForwardVarianceCurve{{1.0}, {0.04}, {}};
    in.days.push_back(day);
  }
  BacktestAnchor anchor;
  anchor.date = "2022-10-03";
  anchor.theta.kind = KernelKind::OneFactor;
  anchor.theta.eta = 1e-8;
  anchor.theta.rho = -0.5;
  anchor.theta.h = -0.2;
  in.anchors.push_back(anchor);
  in.horizon_days = 5;
  in.eval.mc.n_paths = 512;
  in.eval.mc.n_steps = 8;
  return in;
}

}  // namespace

TEST_CASE("business-day calendar") {
  CHECK(days_from_date("1970-01-01") == 0);
  CHECK(date_from_days(days_from_date("2022-10-03")) == "2022-10-03");
  CHECK(add_business_days("2022-10-03", 1) == "2022-10-04");
  CHECK(add_business_days("2022-10-07", 1) == "2022-10-10");  // Friday -> Monday
  CHECK(add_business_days("2022-10-08", 0) == "2022-10-10");  // weekend start rolls forward
  CHECK(add_business_days("2022-10-03", 20) == "2022-10-31");
  CHECK(add_business_days("2022-12-30", 1) == "2023-01-02");  // year boundary
  CHECK(is_weekend("2022-10-09"));
  CHECK(!is_weekend("2022-10-10"));
  CHECK_THROWS_AS(days_from_date("2022-02-30"), std::invalid_argument);
  CHECK_THROWS_AS(days_from_date("2022/10/03"), std::invalid_argument);
  CHECK_THROWS_AS(days_from_date("not-a-date"), std::invalid_argument);
  CHECK_THROWS_AS(add_business_days("2022-10-03", -1), std::invalid_argument);
}

TEST_CASE("run_backtest: frozen market repeats the anchor objective") {
  auto in = base_input();
  CalibrationProblem anchor_problem = in.eval;
  anchor_problem.market = in.days[0].surface;
  anchor_problem.fvc = in.days[0].fvc;
  const double stored = evaluate_objective(anchor_problem, in.anchors[0].theta);
  in.anchors[0].objective_value = stored;
  CHECK(stored == doctest::Approx(0.01).epsilon(1e-3));  // +/-1 vol-point residuals

  const auto out = run_backtest(in);
  REQUIRE(out.records.size() == 5);
  CHECK(out.skipped.empty());
  for (const auto& r : out.records) {
    CHECK(r.anchor_date == "2022-10-03");
    CHECK(r.rmse == stored);  // identical surface, fvc and common random numbers
  }
  CHECK(out.records.front().horizon_day == 1);
  CHECK(out.records.back().horizon_day == 5);
}

TEST_CASE("run_backtest: missing days are skipped and reported") {
  auto in = base_input();
  in.days.erase(in.days.begin() + 3);  // drop 2022-10-06 (horizon day 3)
  const auto out = run_backtest(in);
  REQUIRE(out.records.size() == 4);
  for (const auto& r : out.records) CHECK(r.horizon_day != 3);
  REQUIRE(out.skipped.size() == 1);
  CHECK(out.skipped[0].find("2022-10-06") != std::string::npos);
  CHECK(out.skipped[0].find("no market data") != std::string::npos);

  auto dup = base_input();
  dup.days.push_back(dup.days.front());
  CHECK_THROWS_AS(run_backtest(dup), std::invalid_argument);
  auto bad = base_input();
  bad.horizon_days = 0;
  CHECK_THROWS_AS(run_backtest(bad), std::invalid_argument);
}

TEST_CASE("run_backtest: uniform vol shock adds in quadrature") {
  auto in = base_input();
  const std::vector<double> ts = {1.0 / 12.0, 1.0 / 6.0};
  const std::vector<double> ks = {-0.1, -0.05, 0.0, 0.03};
  in.days[3].surface = alternating_surface(ts, ks, 0.2, 0.01, 0.05);  // 2022-10-06

  const auto out = run_backtest(in);
  REQUIRE(out.records.size() == 5);
  for (const auto& r : out.records) {
    if (r.horizon_day == 3)
      CHECK(r.rmse == doctest::Approx(std::sqrt(0.01 * 0.01 + 0.05 * 0.05)).epsilon(2e-3));
    else
      CHECK(r.rmse == doctest::Approx(0.01).epsilon(1e-3));
  }
}

TEST_CASE("summarize_backtest: quantiles and whiskers") {
  std::vector<BacktestRecord> records;
  for (int i = 1; i <= 8; ++i) records.push_back({"2022-10-03", 1, static_cast<double>(i)});
  for (double v : {1.0, 2.0, 3.0, 4.0, 100.0}) records.push_back({"2022-10-04", 2, v});

  const auto summary = summarize_backtest(records);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].n == 8);
  CHECK(summary[0].p25 == doctest::Approx(2.75));
  CHECK(summary[0].p50 == doctest::Approx(4.5));
  CHECK(summary[0].p75 == doctest::Approx(6.25));
  CHECK(summary[0].whisker_lo == 1.0);
  CHECK(summary[0].whisker_hi == 8.0);
  // the outlier at 100 sits beyond the upper fence and is excluded
  CHECK(summary[1].p50 == 3.0);
  CHECK(summary[1].whisker_hi == 4.0);
  CHECK(summary[1].whisker_lo == 1.0);

  std::ostringstream rec_csv, sum_csv;
  write_backtest_csv(rec_csv, records, "one-factor");
  CHECK(rec_csv.str().find("anchor_date,model,horizon_day,rmse\n") == 0);
  CHECK(rec_csv.str().find("2022-10-03,one-factor,1,1\n") != std::string::npos);
  write_backtest_summary_csv(sum_csv, summary);
  CHECK(sum_csv.str().find("horizon_day,n,p25,p50,p75,whisker_lo,whisker_hi\n") == 0);
  CHECK(sum_csv.str().find("2,5,2,3,4,1,4\n") != std::string::npos);
}
