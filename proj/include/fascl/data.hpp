#pragma once

#include "fascl/util.hpp"

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Dates. ISO-8601 strings throughout; lexicographic order == chronological.
// ---------------------------------------------------------------------------

bool is_iso_date(const std::string& s);
long long days_from_civil(int y, int m, int d);
std::string date_from_days(long long z);
long long parse_date_days(const std::string& iso);

// Mon-Fri trading calendar of `days` dates starting at `start` (moved forward
// to the next weekday if it falls on a weekend).
std::vector<std::string> weekday_calendar(const std::string& start, int days);

struct DateRange {
  std::string start;
  std::string end;  // inclusive
  bool contains(const std::string& d) const { return d >= start && d <= end; }
};

struct SplitSpec {
  DateRange train;
  DateRange valid;
  DateRange test;
  int embargo_days = 0;

  // Ranges must be non-empty, disjoint, ordered train < valid < test.
  void validate() const;
};

// ---------------------------------------------------------------------------
// AssetPanel: the universe. Per-ticker features are stored as a contiguous
// span_len x 6 matrix aligned to the shared trading calendar.
// ---------------------------------------------------------------------------

inline constexpr int kFeatureCount = 6;
enum FeatureColumn { kOpen = 0, kHigh = 1, kLow = 2, kClose = 3, kVolume = 4, kValue = 5 };

inline constexpr std::array<int, 4> kHorizons{1, 5, 20, 60};

struct AssetPanel {
  std::vector<std::string> calendar;  // strictly increasing
  std::vector<std::string> tickers;   // sorted ascending
  std::vector<int> first_index;       // per ticker: calendar index of first observation
  std::vector<Eigen::MatrixXd> features;  // per ticker: span_len x kFeatureCount
  std::vector<std::string> sectors;       // per ticker
  std::vector<std::string> exchanges;     // per ticker

  std::size_t ticker_index(const std::string& ticker) const;  // NotFoundError
  // Index into calendar, or -1 when the date is not a trading date.
  int calendar_index(const std::string& date) const;
  int span_len(std::size_t ti) const { return static_cast<int>(features[ti].rows()); }
  int last_index(std::size_t ti) const { return first_index[ti] + span_len(ti) - 1; }
  bool observed(std::size_t ti, int cal_idx) const {
    return cal_idx >= first_index[ti] && cal_idx <= last_index(ti);
  }
  double feature(std::size_t ti, int cal_idx, FeatureColumn c) const {
    return features[ti](cal_idx - first_index[ti], c);
  }
  void validate() const;
};

// ---------------------------------------------------------------------------
// CSV ingestion. Header: date,ticker,open,high,low,close,volume,value,sector
// (`value` optional; backfilled as close*volume). Lines starting with '#' are
// skipped. Rows with non-positive close or negative volume are rejected and
// counted; structurally malformed rows raise ParseError with the line number.
// ---------------------------------------------------------------------------

struct LoadOptions {
  // Tickers whose contiguous span is shorter than this are dropped (callers
  // pass T+H).
  int min_span = 0;
};

struct LoadReport {
  std::size_t rows_rejected = 0;   // bad close/volume values
  std::size_t rows_trimmed = 0;    // outside the longest contiguous run
  std::size_t tickers_dropped = 0; // span below min_span
};

AssetPanel load_panel(const std::string& path, const LoadOptions& opts = {},
                      LoadReport* report = nullptr);
void save_panel(const AssetPanel& panel, const std::string& path,
                const std::string& provenance = "");

// ---------------------------------------------------------------------------
// Synthetic universe: linear factor model r = beta*(f_mkt + f_sector) + eps
// integrated into gapless OHLCV price paths. Each sector carries a
// deterministic periodic signature in the relative intraday range
// (high-low spread), a forward-looking co-movement cue that close-to-close
// history alone reveals only noisily.
// ---------------------------------------------------------------------------

struct SynthSpec {
  int m = 400;
  int sectors = 8;
  int days = 1000;
  double market_vol = 0.002;
  double sector_vol = 0.009;
  double idio_vol = 0.025;
  double beta_min = 0.7;
  double beta_max = 1.3;
  std::uint64_t seed = 42;
  std::string start_date = "2015-01-05";

  // Intraday-range signature parameters.
  double range_base = 0.02;   // mean relative high-low spread
  double range_amp = 0.8;     // sector-waveform modulation depth
  double range_noise = 0.25;  // lognormal noise sigma on the spread

  void validate() const;
};

SynthSpec synth_spec_from_json(const std::string& path);
AssetPanel synth_generate(const SynthSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Windows and supervision.
// ---------------------------------------------------------------------------

struct WindowSample {
  std::string ticker;
  std::string anchor;              // last day of the history window
  Eigen::MatrixXd history;         // T x kFeatureCount, raw
  Eigen::VectorXd future_returns;  // H daily simple returns after the anchor
  std::map<int, double> horizon_returns;  // h -> compounded return, h in kHorizons, h <= H
};

// Simple returns close_d / close_{d-1} - 1, aligned to the later date.
Eigen::VectorXd compute_daily_returns(const AssetPanel& panel, const std::string& ticker);

WindowSample make_window(const AssetPanel& panel, const std::string& ticker,
                         const std::string& anchor, int T, int H);

// Per-column z-score over the time dimension, population std; columns with
// std below 1e-8 become all zeros.
Eigen::MatrixXd znorm(const Eigen::MatrixXd& window);

// ---------------------------------------------------------------------------
// Evaluation cohorts: per ticker the first and last admissible anchors inside
// the chosen split range, grouped by anchor date. Cohorts smaller than
// k_max + 2 are dropped.
// ---------------------------------------------------------------------------

struct EvalCohort {
  std::string anchor;
  std::vector<WindowSample> samples;  // sorted by ticker, unique tickers
};

enum class SplitRange { Train, Valid, Test };

std::vector<EvalCohort> build_cohorts(const AssetPanel& panel, const SplitSpec& split,
                                      SplitRange which, int T, int H, int k_max = 20);

}  // namespace fascl
