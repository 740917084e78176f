#include "vsmile/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vsmile {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

const char* kHeader = "date,expiry_years,strike,forward,bid_iv,ask_iv,mid_iv";

}  // namespace

std::pair<OptionChain, ParseReport> parse_chain(std::istream& in) {
  OptionChain chain;
  ParseReport report;
  std::string line;
  std::size_t line_no = 0;

  // header (comments may precede it)
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    std::string stripped = line;
    while (!stripped.empty() && (stripped.back() == '\r' || stripped.back() == '\n'))
      stripped.pop_back();
    if (stripped != kHeader)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": malformed header, expected '" + kHeader + "'");
    have_header = true;
    break;
  }
  if (!have_header) throw std::runtime_error("empty chain: no header found");

  std::map<double, ChainSlice> slices;  // expiry -> slice, ordered
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    ++report.n_rows;
    auto reject = [&](const std::string& why) {
      ++report.n_rejected;
      report.messages.push_back("line " + std::to_string(line_no) + ": " + why);
    };
    auto fields = split_csv(line);
    if (fields.size() != 7) {
      reject("expected 7 fields, got " + std::to_string(fields.size()));
      continue;
    }
    double t, strike, fwd, bid, ask, mid;
    try {
      t = std::stod(fields[1]);
      strike = std::stod(fields[2]);
      fwd = std::stod(fields[3]);
      bid = std::stod(fields[4]);
      ask = std::stod(fields[5]);
      mid = std::stod(fields[6]);
    } catch (const std::exception&) {
      reject("non-numeric field");
      continue;
    }
    if (chain.date.empty()) chain.date = fields[0];
    if (!(t > 0.0)) {
      reject("expiry_years must be positive");
      continue;
    }
    if (!(strike > 0.0) || !(fwd > 0.0)) {
      reject("strike and forward must be positive");
      continue;
    }
    if (!(mid > 0.0)) {
      reject("mid_iv must be positive");
      continue;
    }
    auto it = slices.find(t);
    if (it == slices.end()) {
      ChainSlice s;
      s.t = t;
      s.forward = fwd;
      it = slices.emplace(t, std::move(s)).first;
    } else if (std::abs(it->second.forward - fwd) > 1e-9 * it->second.forward) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": inconsistent forward for expiry " + fields[1]);
    }
    Quote q;
    q.strike = strike;
    q.k = std::log(strike / fwd);
    q.bid_iv = bid;
    q.ask_iv = ask;
    q.mid_iv = mid;
    it->second.quotes.push_back(q);
  }

  for (auto& [t, s] : slices) {
    std::sort(s.quotes.begin(), s.quotes.end(),
              [](const Quote& a, const Quote& b) { return a.k < b.k; });
    chain.slices.push_back(std::move(s));
  }
  return {std::move(chain), std::move(report)};
}

std::pair<OptionChain, ParseReport> parse_chain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chain file: " + path);
  return parse_chain(in);
}

void IVSurface::validate() const {
  double t_prev = 0.0;
  for (const auto& s : slices) {
    if (!(s.t > t_prev)) throw std::invalid_argument("surface maturities must strictly increase");
    if (s.points.empty()) throw std::invalid_argument("surface slice has no points");
    double k_prev = -std::numeric_limits<double>::infinity();
    for (const auto& p : s.points) {
      if (!(p.k > k_prev))
        throw std::invalid_argument("surface log-moneyness must strictly increase per slice");
      if (!(p.iv > 0.0) || !std::isfinite(p.iv))
        throw std::invalid_argument("surface implied vols must be positive and finite");
      k_prev = p.k;
    }
    t_prev = s.t;
  }
}

const IVSlice* IVSurface::find_slice(double t, double tol) const {
  for (const auto& s : slices)
    if (std::abs(s.t - t) <= tol * std::max(1.0, std::abs(t))) return &s;
  return nullptr;
}

IVSurface surface_from_chain(const OptionChain& chain) {
  IVSurface surf;
  surf.date = chain.date;
  for (const auto& s : chain.slices) {
    IVSlice slice;
    slice.t = s.t;
    for (const auto& q : s.quotes) {
      IVPoint p;
      p.k = q.k;
      p.iv = q.mid_iv;
      p.bid = q.bid_iv;
      p.ask = q.ask_iv;
      slice.points.push_back(p);
    }
    surf.slices.push_back(std::move(slice));
  }
  return surf;
}

void write_surface(std::ostream& out, const IVSurface& surface,
                   const std::string& preamble_comment) {
  bool full = !surface.slices.empty();
  for (const auto& s : surface.slices)
    for (const auto& p : s.points)
      if (std::isnan(p.bid) || std::isnan(p.ask) || std::isnan(p.se)) full = false;
  if (!preamble_comment.empty()) out << "# " << preamble_comment << "\n";
  out << (full ? "date,maturity_years,log_moneyness,iv_mid,iv_bid,iv_ask,std_error"
               : "date,maturity_years,log_moneyness,iv_mid")
      << "\n";
  char buf[320];
  for (const auto& s : surface.slices)
    for (const auto& p : s.points) {
      if (full)
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      surface.date.c_str(), s.t, p.k, p.iv, p.bid, p.ask, p.se);
      else
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g\n", surface.date.c_str(), s.t, p.k,
                      p.iv);
      out << buf;
    }
}

IVSurface parse_surface(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool full = false, have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    std::string stripped = line;
    while (!stripped.empty() && (stripped.back() == '\r' || stripped.back() == '\n'))
      stripped.pop_back();
    if (stripped == "date,maturity_years,log_moneyness,iv_mid") {
      full = false;
    } else if (stripped == "date,maturity_years,log_moneyness,iv_mid,iv_bid,iv_ask,std_error") {
      full = true;
    } else {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": malformed surface header '" + stripped + "'");
    }
    have_header = true;
    break;
  }
  if (!have_header) throw std::runtime_error("empty surface file: no header found");

  IVSurface surf;
  std::map<double, IVSlice> slices;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv(line);
    const std::size_t want = full ? 7 : 4;
    if (fields.size() != want)
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(want) + " fields");
    try {
      const double t = std::stod(fields[1]);
      IVPoint p;
      p.k = std::stod(fields[2]);
      p.iv = std::stod(fields[3]);
      if (full) {
        p.bid = std::stod(fields[4]);
        p.ask = std::stod(fields[5]);
        p.se = std::stod(fields[6]);
      }
      if (surf.date.empty()) surf.date = fields[0];
      auto& slice = slices[t];
      slice.t = t;
      slice.points.push_back(p);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": non-numeric field");
    }
  }
  for (auto& [t, s] : slices) {
    std::sort(s.points.begin(), s.points.end(),
              [](const IVPoint& a, const IVPoint& b) { return a.k < b.k; });
    surf.slices.push_back(std::move(s));
  }
  surf.validate();
  return surf;
}

void write_chain(std::ostream& out, const OptionChain& chain, const std::string& preamble_comment) {
  if (!preamble_comment.empty()) out << "# " << preamble_comment << "\n";
  out << kHeader << "\n";
  char buf[256];
  for (const auto& s : chain.slices)
    for (const auto& q : s.quotes) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    chain.date.c_str(), s.t, q.strike, s.forward, q.bid_iv, q.ask_iv, q.mid_iv);
      out << buf;
    }
}

}  // namespace vsmile
