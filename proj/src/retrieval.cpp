#include "fascl/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace fascl {

EmbeddingMatrix embed_cohort(const EvalCohort& cohort, const EncoderParams& params) {
  EmbeddingMatrix emb;
  emb.anchor = cohort.anchor;
  emb.tickers.reserve(cohort.samples.size());
  std::vector<Eigen::MatrixXd> windows;
  windows.reserve(cohort.samples.size());
  for (const auto& s : cohort.samples) {
    emb.tickers.push_back(s.ticker);
    windows.push_back(znorm(s.history));
  }
  emb.vectors = encode(windows, params, false);
  for (int i = 0; i < emb.vectors.rows(); ++i) {
    if (!emb.vectors.row(i).allFinite())
      throw DegenerateError("non-finite embedding for " + emb.tickers[i]);
    if (emb.vectors.row(i).norm() < 1e-12)
      throw DegenerateError("zero-norm embedding for " + emb.tickers[i]);
  }
  return emb;
}

Eigen::MatrixXd similarity_matrix(const EmbeddingMatrix& emb) {
  const int m = static_cast<int>(emb.vectors.rows());
  Eigen::MatrixXd unit = emb.vectors;
  for (int i = 0; i < m; ++i) {
    double n = unit.row(i).norm();
    if (n < 1e-12) throw DegenerateError("zero-norm embedding row " + std::to_string(i));
    unit.row(i) /= n;
  }
  Eigen::MatrixXd sim(m, m);
  sim.noalias() = unit * unit.transpose();
  sim.diagonal().setOnes();
  return sim;
}

RetrievalResult rank_row(const Eigen::VectorXd& sims, const std::vector<std::string>& tickers,
                         int self_index, int k) {
  const int m = static_cast<int>(sims.size());
  if (k < 1 || k > m - 1)
    throw ConfigError("top_k: K=" + std::to_string(k) + " needs 1 <= K <= cohort size - 1 (" +
                      std::to_string(m - 1) + ")");
  std::vector<int> order;
  order.reserve(m - 1);
  for (int j = 0; j < m; ++j)
    if (j != self_index) order.push_back(j);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    if (sims(a) != sims(b)) return sims(a) > sims(b);
    return tickers[a] < tickers[b];
  });
  RetrievalResult r;
  r.query = tickers[self_index];
  r.ranked.reserve(k);
  for (int i = 0; i < k; ++i) r.ranked.push_back({tickers[order[i]], sims(order[i])});
  return r;
}

RetrievalResult top_k(int query_index, const EmbeddingMatrix& emb, int k) {
  if (query_index < 0 || query_index >= emb.vectors.rows())
    throw ConfigError("top_k: query index out of range");
  Eigen::MatrixXd sim = similarity_matrix(emb);
  return rank_row(sim.row(query_index).transpose(), emb.tickers, query_index, k);
}

CohortRetrievals retrieve_all(const EmbeddingMatrix& emb, const std::vector<int>& k_list) {
  const int m = static_cast<int>(emb.vectors.rows());
  CohortRetrievals out;
  out.anchor = emb.anchor;
  out.k_list = k_list;
  out.per_k.resize(k_list.size());
  if (k_list.empty()) return out;
  int k_max = *std::max_element(k_list.begin(), k_list.end());
  if (k_max > m - 1)
    throw ConfigError("retrieve_all: max K exceeds cohort size - 1");

  Eigen::MatrixXd sim = similarity_matrix(emb);
  // Rank once to k_max per query; every smaller K is a prefix.
  std::vector<RetrievalResult> full(m);
  parallel_for(m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q < hi; ++q)
      full[q] = rank_row(sim.row(q).transpose(), emb.tickers, static_cast<int>(q), k_max);
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

void export_embeddings_csv(const std::vector<EmbeddingMatrix>& embs, const std::string& path,
                           const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  if (!provenance.empty()) out << "# fascl embeddings " << provenance << "\n";
  int dim = embs.empty() ? 0 : static_cast<int>(embs[0].vectors.cols());
  out << "anchor,ticker";
  for (int d = 0; d < dim; ++d) out << ",dim" << d;
  out << "\n";
  for (const auto& e : embs)
    for (int i = 0; i < e.vectors.rows(); ++i) {
      out << e.anchor << ',' << e.tickers[i];
      for (int d = 0; d < dim; ++d) out << ',' << format_double(e.vectors(i, d));
      out << '\n';
    }
  if (!out) throw DataError("write failed for '" + path + "'");
}

void export_retrievals_csv(const std::vector<CohortRetrievals>& retrievals,
                           const std::string& path, const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  if (!provenance.empty()) out << "# fascl retrievals " << provenance << "\n";
  out << "anchor,query,k,rank,peer,score\n";
  for (const auto& cr : retrievals)
    for (std::size_t ki = 0; ki < cr.k_list.size(); ++ki)
      for (const auto& r : cr.per_k[ki])
        for (std::size_t rank = 0; rank < r.ranked.size(); ++rank)
          out << cr.anchor << ',' << r.query << ',' << cr.k_list[ki] << ',' << rank + 1 << ','
              << r.ranked[rank].ticker << ',' << format_double(r.ranked[rank].score) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace fascl
