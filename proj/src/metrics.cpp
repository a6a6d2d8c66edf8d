#include "fascl/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace fascl {

namespace {

double sign_plus(double x) { return x >= 0.0 ? 1.0 : -1.0; }  // sign(0) := +1

int k_index(const CohortRetrievals& r, int k) {
  for (std::size_t i = 0; i < r.k_list.size(); ++i)
    if (r.k_list[i] == k) return static_cast<int>(i);
  throw ConfigError("retrievals do not carry K=" + std::to_string(k));
}

// Sample lookup by ticker within one cohort.
std::unordered_map<std::string, const WindowSample*> sample_index(const EvalCohort& c) {
  std::unordered_map<std::string, const WindowSample*> idx;
  idx.reserve(c.samples.size());
  for (const auto& s : c.samples) idx[s.ticker] = &s;
  return idx;
}

double horizon_return(const WindowSample& s, int h) {
  auto it = s.horizon_returns.find(h);
  if (it == s.horizon_returns.end())
    throw DataError("sample " + s.ticker + "@" + s.anchor + " lacks horizon " +
                    std::to_string(h));
  return it->second;
}

}  // namespace

double trend_consistency(const std::vector<CohortEval>& evals, int k, int horizon) {
  double total = 0.0;
  std::size_t queries = 0;
  for (const auto& ce : evals) {
    auto idx = sample_index(*ce.cohort);
    const auto& results = ce.retrievals.per_k[k_index(ce.retrievals, k)];
    for (const auto& r : results) {
      double q_sign = sign_plus(horizon_return(*idx.at(r.query), horizon));
      int match = 0;
      for (const auto& peer : r.ranked)
        if (sign_plus(horizon_return(*idx.at(peer.ticker), horizon)) == q_sign) ++match;
      total += static_cast<double>(match) / static_cast<double>(r.ranked.size());
      ++queries;
    }
  }
  if (queries == 0) throw InsufficientDataError("trend_consistency: no queries");
  return total / static_cast<double>(queries);
}

double future_return_correlation(const std::vector<CohortEval>& evals, int k) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (const auto& ce : evals) {
    auto idx = sample_index(*ce.cohort);
    const auto& results = ce.retrievals.per_k[k_index(ce.retrievals, k)];
    for (const auto& r : results) {
      const auto& rq = idx.at(r.query)->future_returns;
      for (const auto& peer : r.ranked) {
        total += pearson_correlation(rq, idx.at(peer.ticker)->future_returns);
        ++pairs;
      }
    }
  }
  if (pairs == 0) throw InsufficientDataError("future_return_correlation: no pairs");
  return total / static_cast<double>(pairs);
}

double spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw ShapeError("spearman: length mismatch");
  const int n = static_cast<int>(x.size());
  if (n < 3) throw InsufficientDataError("spearman: need at least 3 observations");

  auto ranks = [n](const Eigen::VectorXd& v) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v(a) < v(b); });
    Eigen::VectorXd r(n);
    int i = 0;
    while (i < n) {
      int j = i;
      while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
      double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
      for (int t = i; t <= j; ++t) r(order[t]) = avg;
      i = j + 1;
    }
    return r;
  };

  Eigen::VectorXd rx = ranks(x), ry = ranks(y);
  Eigen::VectorXd cx = rx.array() - rx.mean();
  Eigen::VectorXd cy = ry.array() - ry.mean();
  double nx = cx.norm(), ny = cy.norm();
  if (nx < 1e-12 || ny < 1e-12) return std::numeric_limits<double>::quiet_NaN();
  return cx.dot(cy) / (nx * ny);
}

double information_coefficient(const std::vector<CohortEval>& evals, int k, int horizon) {
  std::vector<double> consensus, actual;
  for (const auto& ce : evals) {
    auto idx = sample_index(*ce.cohort);
    const auto& results = ce.retrievals.per_k[k_index(ce.retrievals, k)];
    for (const auto& r : results) {
      double sum = 0.0;
      for (const auto& peer : r.ranked) sum += horizon_return(*idx.at(peer.ticker), horizon);
      consensus.push_back(sum / static_cast<double>(r.ranked.size()));
      actual.push_back(horizon_return(*idx.at(r.query), horizon));
    }
  }
  if (consensus.size() < 3)
    throw InsufficientDataError("information_coefficient: need >= 3 queries");
  Eigen::VectorXd c = Eigen::Map<Eigen::VectorXd>(consensus.data(), consensus.size());
  Eigen::VectorXd a = Eigen::Map<Eigen::VectorXd>(actual.data(), actual.size());
  return spearman(c, a);
}

double sector_precision(const std::vector<CohortEval>& evals, int k,
                        const std::map<std::string, std::string>& sectors) {
  auto sector_of = [&sectors](const std::string& ticker) -> const std::string& {
    auto it = sectors.find(ticker);
    if (it == sectors.end()) throw DataError("missing sector label for '" + ticker + "'");
    return it->second;
  };
  double total = 0.0;
  std::size_t queries = 0;
  for (const auto& ce : evals) {
    const auto& results = ce.retrievals.per_k[k_index(ce.retrievals, k)];
    for (const auto& r : results) {
      const std::string& qs = sector_of(r.query);
      int match = 0;
      for (const auto& peer : r.ranked)
        if (sector_of(peer.ticker) == qs) ++match;
      total += static_cast<double>(match) / static_cast<double>(r.ranked.size());
      ++queries;
    }
  }
  if (queries == 0) throw InsufficientDataError("sector_precision: no queries");
  return total / static_cast<double>(queries);
}

MetricReport evaluate(const std::vector<CohortEval>& evals, const std::vector<int>& k_list,
                      const std::vector<int>& horizons,
                      const std::map<std::string, std::string>& sectors) {
  MetricReport rep;
  rep.k_list = k_list;
  rep.horizons = horizons;
  rep.cohort_count = evals.size();
  for (const auto& ce : evals)
    if (!ce.retrievals.per_k.empty()) rep.query_count += ce.retrievals.per_k[0].size();
  for (int k : k_list) {
    rep.frc[k] = future_return_correlation(evals, k);
    rep.sp[k] = sector_precision(evals, k, sectors);
    for (int h : horizons) {
      rep.tc[k][h] = trend_consistency(evals, k, h);
      rep.ic[k][h] = information_coefficient(evals, k, h);
    }
  }
  return rep;
}

std::map<std::string, std::string> sector_map(const AssetPanel& panel) {
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < panel.tickers.size(); ++i) m[panel.tickers[i]] = panel.sectors[i];
  return m;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["query_count"] = query_count;
  j["cohort_count"] = cohort_count;
  auto put_nested = [](nlohmann::json& dst, const std::map<int, std::map<int, double>>& src) {
    for (const auto& [k, by_h] : src)
      for (const auto& [h, v] : by_h) {
        if (std::isnan(v))
          dst[std::to_string(k)][std::to_string(h)] = nullptr;
        else
          dst[std::to_string(k)][std::to_string(h)] = v;
      }
  };
  nlohmann::json tc_j = nlohmann::json::object(), ic_j = nlohmann::json::object();
  put_nested(tc_j, tc);
  put_nested(ic_j, ic);
  j["tc"] = tc_j;
  j["ic"] = ic_j;
  nlohmann::json frc_j = nlohmann::json::object(), sp_j = nlohmann::json::object();
  for (const auto& [k, v] : frc) frc_j[std::to_string(k)] = v;
  for (const auto& [k, v] : sp) sp_j[std::to_string(k)] = v;
  j["frc"] = frc_j;
  j["sp"] = sp_j;
  return j.dump(2);
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "metric,k,horizon,value\n";
  for (const auto& [k, v] : frc) out << "frc," << k << ",," << format_double(v) << "\n";
  for (const auto& [k, v] : sp) out << "sp," << k << ",," << format_double(v) << "\n";
  for (const auto& [k, by_h] : tc)
    for (const auto& [h, v] : by_h) out << "tc," << k << ',' << h << ',' << format_double(v) << "\n";
  for (const auto& [k, by_h] : ic)
    for (const auto& [h, v] : by_h)
      out << "ic," << k << ',' << h << ',' << (std::isnan(v) ? "nan" : format_double(v)) << "\n";
  return out.str();
}

}  // namespace fascl
