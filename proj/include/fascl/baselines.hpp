#pragma once

#include "fascl/data.hpp"
#include "fascl/retrieval.hpp"

#include <optional>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Train-free baselines: Random, Pearson-on-history, DTW.
// ---------------------------------------------------------------------------

// I.i.d. standard-normal embeddings, deterministic under seed.
EmbeddingMatrix random_embeddings(const EvalCohort& cohort, int dim, std::uint64_t seed);

// Mean-centered historical close-return vectors (length T-1); cosine of the
// centered vectors equals Pearson correlation of the raw return vectors.
// Constant-price windows are flagged degenerate (zero vector).
struct PearsonEmbeddings {
  EmbeddingMatrix emb;
  std::vector<bool> degenerate;
};

PearsonEmbeddings pearson_embeddings(const EvalCohort& cohort);

// Retrieval over Pearson embeddings honoring the degeneracy rule: flagged
// tickers are excluded as queries and ranked last as candidates.
CohortRetrievals pearson_retrieve_all(const PearsonEmbeddings& pe,
                                      const std::vector<int>& k_list);

// ---------------------------------------------------------------------------
// Dynamic time warping on z-normalized close series.
// ---------------------------------------------------------------------------

struct DtwConfig {
  std::optional<int> band_radius;  // Sakoe-Chiba |i-j| <= radius; absent = full
};

// Classic O(T^2) dynamic program, symmetric match/insert/delete steps,
// |x_i - y_j| local cost, no path-length normalization.
double dtw_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                    const DtwConfig& config = {});

// The close column of a window after z-normalization.
Eigen::VectorXd znormed_close(const WindowSample& sample);

// Pairwise DTW distances (computed once, symmetric), ranked by negated
// distance with the standard self-exclusion and ticker tie-break.
CohortRetrievals dtw_retrieve_all(const EvalCohort& cohort, const std::vector<int>& k_list,
                                  const DtwConfig& config = {});

}  // namespace fascl
