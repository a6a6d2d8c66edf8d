#include "fascl/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

namespace fascl {

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  int m = (s[5] - '0') * 10 + (s[6] - '0');
  int d = (s[8] - '0') * 10 + (s[9] - '0');
  return m >= 1 && m <= 12 && d >= 1 && d <= 31;
}

long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  long long era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = static_cast<unsigned>(y - era * 400);
  unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                 static_cast<unsigned>(d) - 1u;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + doe - 719468LL;
}

std::string date_from_days(long long z) {
  z += 719468;
  long long era = (z >= 0 ? z : z - 146096) / 146097;
  unsigned doe = static_cast<unsigned>(z - era * 146097);
  unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  long long y = static_cast<long long>(yoe) + era * 400;
  unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  unsigned mp = (5 * doy + 2) / 153;
  unsigned d = doy - (153 * mp + 2) / 5 + 1;
  unsigned m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", y, m, d);
  return buf;
}

long long parse_date_days(const std::string& iso) {
  if (!is_iso_date(iso)) throw ParseError("invalid date '" + iso + "'", 0);
  int y = std::stoi(iso.substr(0, 4));
  int m = std::stoi(iso.substr(5, 2));
  int d = std::stoi(iso.substr(8, 2));
  return days_from_civil(y, m, d);
}

std::vector<std::string> weekday_calendar(const std::string& start, int days) {
  if (days <= 0) throw ConfigError("calendar length must be positive");
  long long z = parse_date_days(start);
  std::vector<std::string> out;
  out.reserve(days);
  while (static_cast<int>(out.size()) < days) {
    int wd = static_cast<int>(((z % 7) + 11) % 7);  // 0 = Sunday
    if (wd >= 1 && wd <= 5) out.push_back(date_from_days(z));
    ++z;
  }
  return out;
}

void SplitSpec::validate() const {
  for (const DateRange* r : {&train, &valid, &test}) {
    if (!is_iso_date(r->start) || !is_iso_date(r->end))
      throw ConfigError("split: malformed date in range");
    if (r->start > r->end) throw ConfigError("split: range start after end");
  }
  if (!(train.end < valid.start && valid.end < test.start))
    throw ConfigError("split: ranges must be disjoint and ordered train < valid < test");
  if (embargo_days < 0) throw ConfigError("split: embargo_days must be >= 0");
}

// ---------------------------------------------------------------------------
// AssetPanel
// ---------------------------------------------------------------------------

std::size_t AssetPanel::ticker_index(const std::string& ticker) const {
  auto it = std::lower_bound(tickers.begin(), tickers.end(), ticker);
  if (it == tickers.end() || *it != ticker)
    throw NotFoundError("unknown ticker '" + ticker + "'");
  return static_cast<std::size_t>(it - tickers.begin());
}

int AssetPanel::calendar_index(const std::string& date) const {
  auto it = std::lower_bound(calendar.begin(), calendar.end(), date);
  if (it == calendar.end() || *it != date) return -1;
  return static_cast<int>(it - calendar.begin());
}

void AssetPanel::validate() const {
  for (std::size_t i = 1; i < calendar.size(); ++i)
    if (calendar[i] <= calendar[i - 1])
      throw DataError("calendar not strictly increasing at " + calendar[i]);
  if (tickers.size() != features.size() || tickers.size() != first_index.size() ||
      tickers.size() != sectors.size() || tickers.size() != exchanges.size())
    throw DataError("panel: per-ticker vectors out of sync");
  for (std::size_t ti = 0; ti < tickers.size(); ++ti) {
    if (features[ti].cols() != kFeatureCount) throw DataError("panel: bad feature width");
    if (first_index[ti] < 0 || last_index(ti) >= static_cast<int>(calendar.size()))
      throw DataError("panel: span out of calendar for " + tickers[ti]);
    for (int r = 0; r < features[ti].rows(); ++r) {
      if (!(features[ti](r, kClose) > 0.0))
        throw DataError("panel: non-positive close for " + tickers[ti]);
      if (features[ti](r, kVolume) < 0.0)
        throw DataError("panel: negative volume for " + tickers[ti]);
    }
  }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace {

struct RawRow {
  int cal_idx = 0;
  double v[kFeatureCount];
};

double parse_number(const std::string& s, std::size_t line_no) {
  if (s.empty()) throw ParseError("empty numeric field", line_no);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v))
    throw ParseError("bad numeric field '" + s + "'", line_no);
  return v;
}

}  // namespace

AssetPanel load_panel(const std::string& path, const LoadOptions& opts, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};

  std::string line;
  std::size_t line_no = 0;

  // Header (first non-comment line).
  std::unordered_map<std::string, int> col;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = static_cast<int>(i);
    break;
  }
  for (const char* required : {"date", "ticker", "open", "high", "low", "close", "volume", "sector"})
    if (!col.count(required))
      throw ParseError(std::string("missing required column '") + required + "'", line_no);
  const bool has_value = col.count("value") > 0;
  const std::size_t ncols = col.size();

  struct TickerRows {
    std::vector<std::pair<std::string, std::array<double, kFeatureCount>>> rows;
    std::string sector;
  };
  std::map<std::string, TickerRows> by_ticker;
  std::set<std::string> dates;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto f = split_csv_line(line);
    if (f.size() != ncols) throw ParseError("expected " + std::to_string(ncols) + " fields, got " +
                                            std::to_string(f.size()), line_no);
    const std::string& date = f[col["date"]];
    if (!is_iso_date(date)) throw ParseError("bad date '" + date + "'", line_no);
    const std::string& ticker = f[col["ticker"]];
    if (ticker.empty()) throw ParseError("empty ticker", line_no);

    std::array<double, kFeatureCount> v{};
    v[kOpen] = parse_number(f[col["open"]], line_no);
    v[kHigh] = parse_number(f[col["high"]], line_no);
    v[kLow] = parse_number(f[col["low"]], line_no);
    v[kClose] = parse_number(f[col["close"]], line_no);
    v[kVolume] = parse_number(f[col["volume"]], line_no);
    if (has_value && !f[col["value"]].empty())
      v[kValue] = parse_number(f[col["value"]], line_no);
    else
      v[kValue] = v[kClose] * v[kVolume];

    if (!(v[kClose] > 0.0) || v[kVolume] < 0.0) {
      ++rep.rows_rejected;
      continue;
    }

    auto& tr = by_ticker[ticker];
    const std::string& sector = f[col["sector"]];
    if (tr.rows.empty())
      tr.sector = sector;
    else if (tr.sector != sector)
      throw DataError("ticker '" + ticker + "' has conflicting sector labels");
    tr.rows.emplace_back(date, v);
    dates.insert(date);
  }

  AssetPanel panel;
  panel.calendar.assign(dates.begin(), dates.end());
  std::unordered_map<std::string, int> cal_idx;
  for (std::size_t i = 0; i < panel.calendar.size(); ++i)
    cal_idx[panel.calendar[i]] = static_cast<int>(i);

  for (auto& [ticker, tr] : by_ticker) {
    std::sort(tr.rows.begin(), tr.rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < tr.rows.size(); ++i)
      if (tr.rows[i].first == tr.rows[i - 1].first)
        throw DataError("duplicate row for " + ticker + " on " + tr.rows[i].first);

    // Longest contiguous run on the shared calendar; earliest run wins ties.
    std::size_t best_start = 0, best_len = 1, run_start = 0;
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
      if (cal_idx[tr.rows[i].first] != cal_idx[tr.rows[i - 1].first] + 1) run_start = i;
      std::size_t len = i - run_start + 1;
      if (len > best_len) {
        best_len = len;
        best_start = run_start;
      }
    }
    rep.rows_trimmed += tr.rows.size() - best_len;
    if (static_cast<int>(best_len) < opts.min_span) {
      ++rep.tickers_dropped;
      continue;
    }

    Eigen::MatrixXd feat(best_len, kFeatureCount);
    for (std::size_t i = 0; i < best_len; ++i)
      for (int c = 0; c < kFeatureCount; ++c) feat(i, c) = tr.rows[best_start + i].second[c];

    panel.tickers.push_back(ticker);
    panel.first_index.push_back(cal_idx[tr.rows[best_start].first]);
    panel.features.push_back(std::move(feat));
    panel.sectors.push_back(tr.sector);
    panel.exchanges.push_back("NA");
  }
  panel.validate();
  return panel;
}

void save_panel(const AssetPanel& panel, const std::string& path,
                const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  if (!provenance.empty()) out << "# fascl panel " << provenance << "\n";
  out << "date,ticker,open,high,low,close,volume,value,sector\n";
  for (std::size_t ti = 0; ti < panel.tickers.size(); ++ti) {
    const auto& feat = panel.features[ti];
    for (int r = 0; r < feat.rows(); ++r) {
      out << panel.calendar[panel.first_index[ti] + r] << ',' << panel.tickers[ti];
      for (int c = 0; c < kFeatureCount; ++c) out << ',' << format_double(feat(r, c));
      out << ',' << panel.sectors[ti] << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

void SynthSpec::validate() const {
  if (m < 2) throw ConfigError("synth: m must be >= 2");
  if (sectors < 1 || sectors > m) throw ConfigError("synth: sectors must be in [1, m]");
  if (days < 2) throw ConfigError("synth: days must be >= 2");
  if (!(market_vol > 0.0) || !(sector_vol > 0.0) || !(idio_vol > 0.0))
    throw ConfigError("synth: volatilities must be positive");
  if (!(beta_min > 0.0) || beta_max < beta_min)
    throw ConfigError("synth: need 0 < beta_min <= beta_max");
  if (!(range_base > 0.0) || range_amp < 0.0 || range_amp >= 1.0 || range_noise < 0.0)
    throw ConfigError("synth: bad range signature parameters");
  if (!is_iso_date(start_date)) throw ConfigError("synth: bad start_date");
}

SynthSpec synth_spec_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(std::string("synth spec: ") + e.what(), 0);
  }
  SynthSpec s;
  s.m = j.value("m", s.m);
  s.sectors = j.value("sectors", s.sectors);
  s.days = j.value("days", s.days);
  s.market_vol = j.value("market_vol", s.market_vol);
  s.sector_vol = j.value("sector_vol", s.sector_vol);
  s.idio_vol = j.value("idio_vol", s.idio_vol);
  s.beta_min = j.value("beta_min", s.beta_min);
  s.beta_max = j.value("beta_max", s.beta_max);
  s.seed = j.value("seed", s.seed);
  s.start_date = j.value("start_date", s.start_date);
  s.range_base = j.value("range_base", s.range_base);
  s.range_amp = j.value("range_amp", s.range_amp);
  s.range_noise = j.value("range_noise", s.range_noise);
  s.validate();
  return s;
}

namespace {

double round_to(double v, double step) { return std::round(v / step) * step; }

// Per-sector waveform on the shared calendar: distinct period and phase per
// sector so any 64-day slice identifies the sector.
double sector_wave(int sector, int n_sectors, int day) {
  static constexpr double periods[] = {8.0, 10.0, 12.0, 14.0, 16.0, 20.0, 24.0, 28.0};
  double period = periods[sector % 8] * (1.0 + sector / 8);
  double phase = 6.283185307179586 * sector / std::max(1, n_sectors);
  return std::sin(6.283185307179586 * day / period + phase);
}

}  // namespace

AssetPanel synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  const int M = spec.m, S = spec.sectors, D = spec.days;

  // Per-ticker statics, drawn in ticker order.
  std::vector<double> beta(M), p0(M), vol0(M);
  for (int i = 0; i < M; ++i) {
    beta[i] = rng.uniform(spec.beta_min, spec.beta_max);
    p0[i] = rng.uniform(20.0, 200.0);
    vol0[i] = rng.uniform(1e5, 1e6);
  }

  // Factor paths: market first, then one per sector, day-major.
  Eigen::MatrixXd common(D, S);  // market + sector factor, per sector
  for (int d = 0; d < D; ++d) {
    double f = spec.market_vol * rng.normal();
    for (int s = 0; s < S; ++s) common(d, s) = f + spec.sector_vol * rng.normal();
  }

  AssetPanel panel;
  panel.calendar = weekday_calendar(spec.start_date, D);

  int width = std::max(4, static_cast<int>(std::to_string(M).size()));
  for (int i = 0; i < M; ++i) {
    char name[24];
    std::snprintf(name, sizeof(name), "SYN%0*d", width, i + 1);
    int sector = i % S;

    Eigen::MatrixXd feat(D, kFeatureCount);
    double close = p0[i];
    double prev_close = close;
    for (int d = 0; d < D; ++d) {
      if (d > 0) {
        double r = beta[i] * common(d, sector) + spec.idio_vol * rng.normal();
        r = std::max(r, -0.95);
        prev_close = close;
        close *= 1.0 + r;
      }
      double open = (d == 0) ? close : prev_close;
      double spread = spec.range_base *
                      (1.0 + spec.range_amp * sector_wave(sector, S, d)) *
                      std::exp(spec.range_noise * rng.normal());
      double high = std::max(open, close) * (1.0 + 0.5 * spread);
      double low = std::min(open, close) * (1.0 - 0.5 * spread);
      double volume = std::round(vol0[i] * std::exp(0.3 * rng.normal()));

      feat(d, kOpen) = round_to(open, 1e-6);
      feat(d, kHigh) = round_to(high, 1e-6);
      feat(d, kLow) = round_to(low, 1e-6);
      feat(d, kClose) = round_to(close, 1e-6);
      feat(d, kVolume) = volume;
      feat(d, kValue) = feat(d, kClose) * volume;
    }

    panel.tickers.push_back(name);
    panel.first_index.push_back(0);
    panel.features.push_back(std::move(feat));
    panel.sectors.push_back("SEC" + std::to_string(sector));
    panel.exchanges.push_back("SYNTH");
  }
  panel.validate();
  return panel;
}

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

Eigen::VectorXd compute_daily_returns(const AssetPanel& panel, const std::string& ticker) {
  std::size_t ti = panel.ticker_index(ticker);
  const auto& feat = panel.features[ti];
  if (feat.rows() < 2) throw InsufficientDataError("ticker '" + ticker + "' has < 2 observations");
  Eigen::VectorXd r(feat.rows() - 1);
  for (int d = 1; d < feat.rows(); ++d)
    r(d - 1) = feat(d, kClose) / feat(d - 1, kClose) - 1.0;
  return r;
}

WindowSample make_window(const AssetPanel& panel, const std::string& ticker,
                         const std::string& anchor, int T, int H) {
  if (T < 2 || H < 1) throw ConfigError("make_window: need T >= 2 and H >= 1");
  std::size_t ti = panel.ticker_index(ticker);
  int a = panel.calendar_index(anchor);
  if (a < 0 || !panel.observed(ti, a))
    throw CoverageError("ticker '" + ticker + "' not observed on " + anchor);
  int local = a - panel.first_index[ti];
  if (local < T - 1)
    throw CoverageError("history: ticker '" + ticker + "' has only " +
                        std::to_string(local + 1) + " days up to " + anchor +
                        ", need " + std::to_string(T));
  int remaining = panel.span_len(ti) - 1 - local;
  if (remaining < H)
    throw CoverageError("future: ticker '" + ticker + "' has only " +
                        std::to_string(remaining) + " days after " + anchor + ", need " +
                        std::to_string(H));

  WindowSample w;
  w.ticker = ticker;
  w.anchor = anchor;
  w.history = panel.features[ti].middleRows(local - T + 1, T);
  w.future_returns.resize(H);
  const auto& feat = panel.features[ti];
  for (int d = 1; d <= H; ++d)
    w.future_returns(d - 1) = feat(local + d, kClose) / feat(local + d - 1, kClose) - 1.0;
  for (int h : kHorizons) {
    if (h > H) continue;
    double acc = 1.0;
    for (int d = 0; d < h; ++d) acc *= 1.0 + w.future_returns(d);
    w.horizon_returns[h] = acc - 1.0;
  }
  return w;
}

Eigen::MatrixXd znorm(const Eigen::MatrixXd& window) {
  if (window.rows() < 2) throw ShapeError("znorm: need T >= 2");
  Eigen::MatrixXd out(window.rows(), window.cols());
  const double n = static_cast<double>(window.rows());
  for (int c = 0; c < window.cols(); ++c) {
    double mean = window.col(c).mean();
    double var = (window.col(c).array() - mean).square().sum() / n;
    double sd = std::sqrt(var);
    if (sd < 1e-8)
      out.col(c).setZero();
    else
      out.col(c) = (window.col(c).array() - mean) / sd;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cohorts
// ---------------------------------------------------------------------------

std::vector<EvalCohort> build_cohorts(const AssetPanel& panel, const SplitSpec& split,
                                      SplitRange which, int T, int H, int k_max) {
  split.validate();
  const DateRange& range = which == SplitRange::Train   ? split.train
                           : which == SplitRange::Valid ? split.valid
                                                        : split.test;
  auto lo = std::lower_bound(panel.calendar.begin(), panel.calendar.end(), range.start);
  auto hi = std::upper_bound(panel.calendar.begin(), panel.calendar.end(), range.end);
  if (lo >= hi) throw ConfigError("build_cohorts: range contains no trading dates");
  int lo_idx = static_cast<int>(lo - panel.calendar.begin());
  int hi_idx = static_cast<int>(hi - panel.calendar.begin());  // exclusive

  std::map<std::string, std::vector<std::string>> anchors;  // anchor -> tickers
  for (std::size_t ti = 0; ti < panel.tickers.size(); ++ti) {
    int first_ok = std::max(lo_idx, panel.first_index[ti] + T - 1);
    int last_ok = std::min(hi_idx - 1, panel.last_index(ti) - H);
    if (first_ok > last_ok) continue;
    anchors[panel.calendar[first_ok]].push_back(panel.tickers[ti]);
    if (last_ok != first_ok) anchors[panel.calendar[last_ok]].push_back(panel.tickers[ti]);
  }

  std::vector<EvalCohort> cohorts;
  for (auto& [anchor, ticks] : anchors) {
    if (static_cast<int>(ticks.size()) < k_max + 2) continue;
    EvalCohort c;
    c.anchor = anchor;
    c.samples.reserve(ticks.size());
    for (const auto& t : ticks) c.samples.push_back(make_window(panel, t, anchor, T, H));
    cohorts.push_back(std::move(c));
  }
  return cohorts;
}

}  // namespace fascl
