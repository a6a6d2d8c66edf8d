#pragma once

#include "fascl/data.hpp"
#include "fascl/encoder.hpp"

#include <string>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Cohort embedding and exact dense top-K cosine retrieval. Retrieval never
// crosses cohorts: every structure here is scoped to one anchor date.
// ---------------------------------------------------------------------------

struct EmbeddingMatrix {
  std::string anchor;
  std::vector<std::string> tickers;  // row order
  Eigen::MatrixXd vectors;           // M_c x D
};

struct ScoredPeer {
  std::string ticker;
  double score;
};

struct RetrievalResult {
  std::string query;
  std::vector<ScoredPeer> ranked;  // length K, scores non-increasing
};

EmbeddingMatrix embed_cohort(const EvalCohort& cohort, const EncoderParams& params);

// Full cosine similarity matrix of the embedding rows (unit diagonal). Both
// top_k and retrieve_all rank from this same computation, so their results
// agree bit for bit.
Eigen::MatrixXd similarity_matrix(const EmbeddingMatrix& emb);

// Rank one similarity row: self excluded, scores descending, ties broken by
// ascending ticker. Returns the K best.
RetrievalResult rank_row(const Eigen::VectorXd& sims, const std::vector<std::string>& tickers,
                         int self_index, int k);

RetrievalResult top_k(int query_index, const EmbeddingMatrix& emb, int k);

struct CohortRetrievals {
  std::string anchor;
  std::vector<int> k_list;
  // per_k[ki][q]: result for query q (ordered as the embedding rows) at k_list[ki]
  std::vector<std::vector<RetrievalResult>> per_k;
};

CohortRetrievals retrieve_all(const EmbeddingMatrix& emb, const std::vector<int>& k_list);

// CSV exports (anchor,ticker,dim0..dimD-1) and (anchor,query,rank,peer,score).
void export_embeddings_csv(const std::vector<EmbeddingMatrix>& embs, const std::string& path,
                           const std::string& provenance);
void export_retrievals_csv(const std::vector<CohortRetrievals>& retrievals,
                           const std::string& path, const std::string& provenance);

}  // namespace fascl
