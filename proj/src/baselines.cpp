#include "fascl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fascl {

EmbeddingMatrix random_embeddings(const EvalCohort& cohort, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("random_embeddings: dim must be positive");
  Rng rng(seed);
  EmbeddingMatrix emb;
  emb.anchor = cohort.anchor;
  emb.vectors.resize(static_cast<int>(cohort.samples.size()), dim);
  for (std::size_t i = 0; i < cohort.samples.size(); ++i) {
    emb.tickers.push_back(cohort.samples[i].ticker);
    for (int d = 0; d < dim; ++d) emb.vectors(static_cast<int>(i), d) = rng.normal();
  }
  return emb;
}

PearsonEmbeddings pearson_embeddings(const EvalCohort& cohort) {
  PearsonEmbeddings pe;
  pe.emb.anchor = cohort.anchor;
  const int t = cohort.samples.empty() ? 0 : static_cast<int>(cohort.samples[0].history.rows());
  pe.emb.vectors.resize(static_cast<int>(cohort.samples.size()), std::max(0, t - 1));
  pe.degenerate.resize(cohort.samples.size(), false);
  for (std::size_t i = 0; i < cohort.samples.size(); ++i) {
    const auto& hist = cohort.samples[i].history;
    pe.emb.tickers.push_back(cohort.samples[i].ticker);
    Eigen::VectorXd r(t - 1);
    for (int d = 1; d < t; ++d) r(d - 1) = hist(d, kClose) / hist(d - 1, kClose) - 1.0;
    Eigen::VectorXd centered = r.array() - r.mean();
    if (centered.norm() / std::sqrt(static_cast<double>(t - 1)) < 1e-12) {
      pe.degenerate[i] = true;
      pe.emb.vectors.row(static_cast<int>(i)).setZero();
    } else {
      pe.emb.vectors.row(static_cast<int>(i)) = centered.transpose();
    }
  }
  return pe;
}

CohortRetrievals pearson_retrieve_all(const PearsonEmbeddings& pe,
                                      const std::vector<int>& k_list) {
  const int m = static_cast<int>(pe.emb.vectors.rows());
  CohortRetrievals out;
  out.anchor = pe.emb.anchor;
  out.k_list = k_list;
  out.per_k.resize(k_list.size());
  if (k_list.empty() || m == 0) return out;
  int k_max = *std::max_element(k_list.begin(), k_list.end());
  if (k_max > m - 1) throw ConfigError("pearson_retrieve_all: max K exceeds cohort size - 1");

  // Cosine of centered vectors == Pearson of raw returns. Degenerate rows
  // score below any true cosine so they rank last.
  Eigen::MatrixXd unit = pe.emb.vectors;
  for (int i = 0; i < m; ++i) {
    double n = unit.row(i).norm();
    if (!pe.degenerate[i] && n > 0) unit.row(i) /= n;
  }
  Eigen::MatrixXd sim(m, m);
  sim.noalias() = unit * unit.transpose();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (pe.degenerate[i] || pe.degenerate[j]) sim(i, j) = -2.0;

  std::vector<RetrievalResult> full;
  std::vector<int> queries;
  for (int q = 0; q < m; ++q)
    if (!pe.degenerate[q]) queries.push_back(q);
  full.resize(queries.size());
  parallel_for(queries.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      full[i] = rank_row(sim.row(queries[i]).transpose(), pe.emb.tickers, queries[i], k_max);
  });
  for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
    out.per_k[ki].resize(full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
      RetrievalResult r;
      r.query = full[i].query;
      r.ranked.assign(full[i].ranked.begin(), full[i].ranked.begin() + k_list[ki]);
      out.per_k[ki][i] = std::move(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// DTW
// ---------------------------------------------------------------------------

double dtw_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                    const DtwConfig& config) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(y.size());
  if (n == 0 || m == 0) throw ShapeError("dtw: empty series");
  if (config.band_radius && *config.band_radius < 0)
    throw ConfigError("dtw: band_radius must be >= 0");
  const double inf = std::numeric_limits<double>::infinity();
  const int band = config.band_radius ? *config.band_radius : std::max(n, m);

  std::vector<double> prev(m, inf), cur(m, inf);
  for (int i = 0; i < n; ++i) {
    int j_lo = std::max(0, i - band);
    int j_hi = std::min(m - 1, i + band);
    std::fill(cur.begin(), cur.end(), inf);
    for (int j = j_lo; j <= j_hi; ++j) {
      double cost = std::abs(x(i) - y(j));
      if (i == 0 && j == 0) {
        cur[j] = cost;
        continue;
      }
      double best = inf;
      if (i > 0) best = std::min(best, prev[j]);
      if (j > 0) best = std::min(best, cur[j - 1]);
      if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
      cur[j] = cost + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

Eigen::VectorXd znormed_close(const WindowSample& sample) {
  return znorm(sample.history).col(kClose);
}

CohortRetrievals dtw_retrieve_all(const EvalCohort& cohort, const std::vector<int>& k_list,
                                  const DtwConfig& config) {
  const int m = static_cast<int>(cohort.samples.size());
  CohortRetrievals out;
  out.anchor = cohort.anchor;
  out.k_list = k_list;
  out.per_k.resize(k_list.size());
  if (k_list.empty() || m == 0) return out;
  int k_max = *std::max_element(k_list.begin(), k_list.end());
  if (k_max > m - 1) throw ConfigError("dtw_retrieve_all: max K exceeds cohort size - 1");

  std::vector<Eigen::VectorXd> series(m);
  std::vector<std::string> tickers(m);
  for (int i = 0; i < m; ++i) {
    series[i] = znormed_close(cohort.samples[i]);
    tickers[i] = cohort.samples[i].ticker;
  }

  // Unordered pairs, parallel, assembled symmetrically.
  Eigen::MatrixXd sim = Eigen::MatrixXd::Zero(m, m);
  const std::size_t n_pairs = static_cast<std::size_t>(m) * (m - 1) / 2;
  parallel_for(n_pairs, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      // Unrank pair index p -> (i, j), i < j.
      std::size_t i = static_cast<std::size_t>(
          m - 2 - std::floor(std::sqrt(static_cast<double>(
                      (2 * static_cast<std::size_t>(m) - 1) * (2 * static_cast<std::size_t>(m) - 1) -
                      8 * p - 7)) /
                             2.0 -
                         0.5));
      // Guard against floating-point unranking drift.
      while (i + 1 < static_cast<std::size_t>(m) &&
             p >= (i + 1) * (2 * static_cast<std::size_t>(m) - i - 2) / 2)
        ++i;
      while (i > 0 && p < i * (2 * static_cast<std::size_t>(m) - i - 1) / 2) --i;
      std::size_t before = i * (2 * static_cast<std::size_t>(m) - i - 1) / 2;
      std::size_t j = i + 1 + (p - before);
      double d = dtw_distance(series[i], series[j], config);
      sim(static_cast<int>(i), static_cast<int>(j)) = -d;
      sim(static_cast<int>(j), static_cast<int>(i)) = -d;
    }
  });

  std::vector<RetrievalResult> full(m);
  parallel_for(m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q < hi; ++q)
      full[q] = rank_row(sim.row(q).transpose(), tickers, static_cast<int>(q), k_max);
  });
  for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
    out.per_k[ki].resize(m);
    for (int q = 0; q < m; ++q) {
      RetrievalResult r;
      r.query = full[q].query;
      r.ranked.assign(full[q].ranked.begin(), full[q].ranked.begin() + k_list[ki]);
      out.per_k[ki][q] = std::move(r);
    }
  }
  return out;
}

}  // namespace fascl
