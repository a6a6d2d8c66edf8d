#pragma once

#include "fascl/util.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Soft contrastive objective: KL between a correlation-derived target
// distribution and the embedding cosine-similarity distribution, plus the
// ablation losses. All softmaxes are max-shifted and kept in log space.
// ---------------------------------------------------------------------------

enum class TargetSource { FutureReturns, Observation };

struct BatchTargets {
  Eigen::MatrixXd corr;         // B x B similarity source (Pearson or cosine)
  Eigen::MatrixXd target_dist;  // row-stochastic, zero diagonal
  Eigen::MatrixXd log_target;   // log off-diagonal probabilities (diag zeroed)
  double tau_t = 0.05;
  TargetSource source = TargetSource::FutureReturns;
};

struct PredictedDist {
  Eigen::MatrixXd sim;        // cosine similarities, unit diagonal
  Eigen::MatrixXd pred_dist;  // row-stochastic, zero diagonal
  Eigen::MatrixXd log_pred;   // log off-diagonal probabilities (diag zeroed)
  Eigen::MatrixXd unit;       // row-normalized embeddings
  Eigen::VectorXd norms;      // embedding row norms
  double tau = 0.01;
};

// Pairwise Pearson correlation of the rows of a B x H return matrix.
// Degenerate rows (std < 1e-12) correlate 0 with everything; diagonal is 1.
// Exactly symmetric by construction.
Eigen::MatrixXd pairwise_future_correlation(const Eigen::MatrixXd& returns);

// Temperature-scaled softmax over each row's off-diagonal entries.
BatchTargets target_distribution(const Eigen::MatrixXd& corr, double tau_t);

// Same softmax over embedding cosine similarities.
PredictedDist predicted_distribution(const Eigen::MatrixXd& embeddings, double tau);

// KL(p || q) averaged over anchors, computed from stored log-probabilities.
double soft_contrastive_loss(const BatchTargets& targets, const PredictedDist& pred);

// Reference form on plain row-stochastic matrices (0*log0 = 0).
double soft_contrastive_loss(const Eigen::MatrixXd& target, const Eigen::MatrixXd& pred);

// d(KL loss)/d(embeddings), flowing through cosine similarity and softmax.
Eigen::MatrixXd soft_contrastive_grad(const BatchTargets& targets, const PredictedDist& pred);

// Standard one-positive InfoNCE; the positive for anchor i is
// argmax_{j != i} corr(i, j), ties to the lowest index.
double hard_infonce_loss(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& corr,
                         double tau);
// Same loss with gradient; `pred` must come from the same embeddings.
double hard_infonce_loss_grad(const Eigen::MatrixXd& corr, const PredictedDist& pred,
                              Eigen::MatrixXd& d_embeddings);

// Soft targets from input-space cosine similarity of flattened windows.
BatchTargets observation_aligned_targets(const std::vector<Eigen::MatrixXd>& windows,
                                         double tau_t);

// Multi-horizon return regression head (affine D -> 4) and its MSE loss.
struct RegressionHead {
  Eigen::MatrixXd w;     // D x 4
  Eigen::RowVectorXd b;  // 4
};

double multi_horizon_regression_loss(const Eigen::MatrixXd& embeddings,
                                     const RegressionHead& head,
                                     const Eigen::MatrixXd& horizon_returns);
double multi_horizon_regression_loss_grad(const Eigen::MatrixXd& embeddings,
                                          const RegressionHead& head,
                                          const Eigen::MatrixXd& horizon_returns,
                                          Eigen::MatrixXd& d_embeddings,
                                          RegressionHead& d_head);

// Shannon entropy of one distribution row (natural log), diag excluded.
double row_entropy(const Eigen::MatrixXd& dist, int row);

}  // namespace fascl
