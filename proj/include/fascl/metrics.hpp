#pragma once

#include "fascl/data.hpp"
#include "fascl/retrieval.hpp"

#include <map>
#include <string>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Evaluation protocol: TC@K, FRC@K, IC@K, SP@K pooled over all queries
// across cohorts.
// ---------------------------------------------------------------------------

// One evaluated cohort: samples plus the retrievals computed on it. Query
// order inside retrievals refers to tickers; samples are looked up by ticker.
struct CohortEval {
  const EvalCohort* cohort = nullptr;
  CohortRetrievals retrievals;
};

struct MetricReport {
  std::vector<int> k_list;
  std::vector<int> horizons;
  std::map<int, std::map<int, double>> tc;  // K -> h -> value
  std::map<int, double> frc;                // K -> value
  std::map<int, std::map<int, double>> ic;  // K -> h -> value
  std::map<int, double> sp;                 // K -> value
  std::size_t query_count = 0;
  std::size_t cohort_count = 0;

  std::string to_json() const;
  std::string to_csv() const;  // metric,k,horizon,value
};

// Fraction of top-K peers whose horizon-h cumulative return sign matches the
// query's; sign(0) := +1.
double trend_consistency(const std::vector<CohortEval>& evals, int k, int horizon);

// Mean Pearson correlation between query and peer H-day future return series.
double future_return_correlation(const std::vector<CohortEval>& evals, int k);

// Spearman rank correlation between consensus (mean peer horizon return) and
// actual query returns, pooled cross-sectionally over all queries.
double information_coefficient(const std::vector<CohortEval>& evals, int k, int horizon);

// Fraction of top-K peers sharing the query's sector.
double sector_precision(const std::vector<CohortEval>& evals, int k,
                        const std::map<std::string, std::string>& sectors);

// Pearson correlation of average-ranked values; ties get average ranks.
// Constant inputs yield a quiet NaN (flagged-undefined).
double spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

MetricReport evaluate(const std::vector<CohortEval>& evals, const std::vector<int>& k_list,
                      const std::vector<int>& horizons,
                      const std::map<std::string, std::string>& sectors);

std::map<std::string, std::string> sector_map(const AssetPanel& panel);

}  // namespace fascl
