#pragma once

#include "fascl/metrics.hpp"

#include <map>
#include <optional>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Spread-trading signal-quality backtest: spread construction, mean-reversion
// P&L, annualized Sharpe, tracking error. No transaction costs by
// construction.
// ---------------------------------------------------------------------------

struct BacktestReport {
  std::vector<int> k_list;
  std::map<int, std::optional<double>> sharpe;  // flagged-undefined when P&L std ~ 0
  std::map<int, double> tracking_error;
  std::map<int, std::size_t> query_count;
  std::map<int, std::size_t> day_count;

  std::string to_json() const;
  std::string to_csv() const;  // k,sharpe,tracking_error,queries,days
};

// s_d = r_query,d - mean_k r_peer_k,d.
Eigen::VectorXd spread_series(const Eigen::VectorXd& query_returns,
                              const Eigen::MatrixXd& peer_returns);

// Trades against the cumulative spread: position_{d+1} = -sign(sum_{d'<=d} s),
// sign(0) := +1. P&L defined for days 2..H (length H-1).
Eigen::VectorXd mean_reversion_pnl(const Eigen::VectorXd& spread);

struct PortfolioStats {
  std::optional<double> sharpe;  // mean/std * sqrt(252), sample std
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t days = 0;
};

// Cross-query mean P&L per day, then annualized Sharpe of that series.
PortfolioStats portfolio_stats(const std::vector<Eigen::VectorXd>& pnl_per_query);

// Annualized sample std of all pooled per-query daily spread returns.
double tracking_error(const std::vector<Eigen::VectorXd>& spreads);

BacktestReport run_backtest(const std::vector<CohortEval>& evals,
                            const std::vector<int>& k_list);

}  // namespace fascl
