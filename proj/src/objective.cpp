#include "fascl/objective.hpp"

#include <cmath>

namespace fascl {

namespace {

// Max-shifted softmax over each row's off-diagonal entries of `logits`.
// Fills `dist` (zero diagonal) and `logd` (log probabilities, diagonal 0).
void offdiag_softmax(const Eigen::MatrixXd& logits, Eigen::MatrixXd& dist,
                     Eigen::MatrixXd& logd) {
  const int B = static_cast<int>(logits.rows());
  if (B < 2) throw ShapeError("softmax: need batch size >= 2");
  dist = Eigen::MatrixXd::Zero(B, B);
  logd = Eigen::MatrixXd::Zero(B, B);
  for (int i = 0; i < B; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < B; ++j)
      if (j != i) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (int j = 0; j < B; ++j)
      if (j != i) sum += std::exp(logits(i, j) - mx);
    double lse = std::log(sum);
    for (int j = 0; j < B; ++j) {
      if (j == i) continue;
      logd(i, j) = logits(i, j) - mx - lse;
      dist(i, j) = std::exp(logd(i, j));
    }
  }
}

}  // namespace

Eigen::MatrixXd pairwise_future_correlation(const Eigen::MatrixXd& returns) {
  const int B = static_cast<int>(returns.rows());
  const int H = static_cast<int>(returns.cols());
  if (H < 2) throw ShapeError("pairwise correlation: need H >= 2");
  if (B < 1) throw ShapeError("pairwise correlation: empty batch");

  Eigen::MatrixXd centered = returns;
  Eigen::VectorXd norms(B);
  std::vector<bool> degenerate(B, false);
  const double h = static_cast<double>(H);
  for (int i = 0; i < B; ++i) {
    centered.row(i).array() -= returns.row(i).mean();
    norms(i) = centered.row(i).norm();
    if (norms(i) / std::sqrt(h) < 1e-12) degenerate[i] = true;
  }

  Eigen::MatrixXd corr(B, B);
  for (int i = 0; i < B; ++i) {
    corr(i, i) = 1.0;
    for (int j = i + 1; j < B; ++j) {
      double c = 0.0;
      if (!degenerate[i] && !degenerate[j])
        c = centered.row(i).dot(centered.row(j)) / (norms(i) * norms(j));
      corr(i, j) = c;
      corr(j, i) = c;  // mirrored, exact symmetry
    }
  }
  return corr;
}

BatchTargets target_distribution(const Eigen::MatrixXd& corr, double tau_t) {
  if (!(tau_t > 0.0)) throw ConfigError("target temperature must be positive");
  if (corr.rows() != corr.cols()) throw ShapeError("target_distribution: corr must be square");
  BatchTargets t;
  t.corr = corr;
  t.tau_t = tau_t;
  offdiag_softmax(corr / tau_t, t.target_dist, t.log_target);
  return t;
}

PredictedDist predicted_distribution(const Eigen::MatrixXd& embeddings, double tau) {
  if (!(tau > 0.0)) throw ConfigError("embedding temperature must be positive");
  const int B = static_cast<int>(embeddings.rows());
  if (B < 2) throw ShapeError("predicted_distribution: need batch size >= 2");

  PredictedDist p;
  p.tau = tau;
  p.norms.resize(B);
  p.unit.resizeLike(embeddings);
  for (int i = 0; i < B; ++i) {
    double n = embeddings.row(i).norm();
    if (n < 1e-12)
      throw DegenerateError("zero-norm embedding at row " + std::to_string(i));
    p.norms(i) = n;
    p.unit.row(i) = embeddings.row(i) / n;
  }
  p.sim.resize(B, B);
  for (int i = 0; i < B; ++i) {
    p.sim(i, i) = 1.0;
    for (int j = i + 1; j < B; ++j) {
      double s = p.unit.row(i).dot(p.unit.row(j));
      p.sim(i, j) = s;
      p.sim(j, i) = s;
    }
  }
  offdiag_softmax(p.sim / tau, p.pred_dist, p.log_pred);
  return p;
}

double soft_contrastive_loss(const BatchTargets& targets, const PredictedDist& pred) {
  const int B = static_cast<int>(targets.target_dist.rows());
  if (pred.pred_dist.rows() != B || pred.pred_dist.cols() != targets.target_dist.cols())
    throw ShapeError("soft_contrastive_loss: shape mismatch");
  double loss = 0.0;
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < B; ++j) {
      if (j == i) continue;
      double pij = targets.target_dist(i, j);
      if (pij > 0.0) loss += pij * (targets.log_target(i, j) - pred.log_pred(i, j));
    }
  return loss / static_cast<double>(B);
}

double soft_contrastive_loss(const Eigen::MatrixXd& target, const Eigen::MatrixXd& pred) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols() ||
      target.rows() != target.cols())
    throw ShapeError("soft_contrastive_loss: shape mismatch");
  const int B = static_cast<int>(target.rows());
  double loss = 0.0;
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < B; ++j) {
      if (j == i) continue;
      double pij = target(i, j);
      if (pij > 0.0) loss += pij * (std::log(pij) - std::log(pred(i, j)));
    }
  return loss / static_cast<double>(B);
}

namespace {

// Backward through cosine similarity: given dL/d sim as G (zero diagonal),
// returns dL/d embeddings. Uses sim = U U^T with U the unit rows.
Eigen::MatrixXd cosine_backward(const PredictedDist& pred, const Eigen::MatrixXd& g) {
  Eigen::MatrixXd s = g + g.transpose();  // both (i,j) and (j,i) feed z_i
  Eigen::MatrixXd su = s * pred.unit;
  Eigen::VectorXd rowdot = (s.cwiseProduct(pred.sim)).rowwise().sum();
  Eigen::MatrixXd dz = su - rowdot.asDiagonal() * pred.unit;
  return pred.norms.cwiseInverse().asDiagonal() * dz;
}

}  // namespace

Eigen::MatrixXd soft_contrastive_grad(const BatchTargets& targets, const PredictedDist& pred) {
  const double b = static_cast<double>(targets.target_dist.rows());
  Eigen::MatrixXd g = (pred.pred_dist - targets.target_dist) / (b * pred.tau);
  return cosine_backward(pred, g);
}

namespace {

std::vector<int> infonce_positives(const Eigen::MatrixXd& corr) {
  const int B = static_cast<int>(corr.rows());
  if (B < 2) throw ShapeError("hard InfoNCE: need batch size >= 2");
  std::vector<int> pos(B);
  for (int i = 0; i < B; ++i) {
    int best = -1;
    double best_c = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < B; ++j) {
      if (j == i) continue;
      if (corr(i, j) > best_c) {
        best_c = corr(i, j);
        best = j;
      }
    }
    pos[i] = best;
  }
  return pos;
}

}  // namespace

double hard_infonce_loss(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& corr,
                         double tau) {
  PredictedDist pred = predicted_distribution(embeddings, tau);
  auto pos = infonce_positives(corr);
  double loss = 0.0;
  for (int i = 0; i < static_cast<int>(pos.size()); ++i) loss -= pred.log_pred(i, pos[i]);
  return loss / static_cast<double>(pos.size());
}

double hard_infonce_loss_grad(const Eigen::MatrixXd& corr, const PredictedDist& pred,
                              Eigen::MatrixXd& d_embeddings) {
  auto pos = infonce_positives(corr);
  const int B = static_cast<int>(pos.size());
  double loss = 0.0;
  Eigen::MatrixXd g = pred.pred_dist / (static_cast<double>(B) * pred.tau);
  for (int i = 0; i < B; ++i) {
    loss -= pred.log_pred(i, pos[i]);
    g(i, pos[i]) -= 1.0 / (static_cast<double>(B) * pred.tau);
  }
  d_embeddings = cosine_backward(pred, g);
  return loss / static_cast<double>(B);
}

BatchTargets observation_aligned_targets(const std::vector<Eigen::MatrixXd>& windows,
                                         double tau_t) {
  const int B = static_cast<int>(windows.size());
  if (B < 2) throw ShapeError("observation targets: need batch size >= 2");
  const Eigen::Index numel = windows[0].size();
  Eigen::MatrixXd flat(B, numel);
  for (int i = 0; i < B; ++i) {
    if (windows[i].size() != numel) throw ShapeError("observation targets: ragged windows");
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < windows[i].rows(); ++r)
      for (Eigen::Index c = 0; c < windows[i].cols(); ++c) flat(i, k++) = windows[i](r, c);
    double n = flat.row(i).norm();
    if (n < 1e-12)
      throw DegenerateError("zero-norm flattened window at index " + std::to_string(i));
    flat.row(i) /= n;
  }
  Eigen::MatrixXd cos(B, B);
  for (int i = 0; i < B; ++i) {
    cos(i, i) = 1.0;
    for (int j = i + 1; j < B; ++j) {
      double s = flat.row(i).dot(flat.row(j));
      cos(i, j) = s;
      cos(j, i) = s;
    }
  }
  BatchTargets t = target_distribution(cos, tau_t);
  t.source = TargetSource::Observation;
  return t;
}

double multi_horizon_regression_loss(const Eigen::MatrixXd& embeddings,
                                     const RegressionHead& head,
                                     const Eigen::MatrixXd& horizon_returns) {
  if (embeddings.cols() != head.w.rows() || head.w.cols() != horizon_returns.cols() ||
      embeddings.rows() != horizon_returns.rows())
    throw ShapeError("multi-horizon regression: shape mismatch");
  Eigen::MatrixXd pred = embeddings * head.w;
  pred.rowwise() += head.b;
  return (pred - horizon_returns).squaredNorm() /
         static_cast<double>(horizon_returns.size());
}

double multi_horizon_regression_loss_grad(const Eigen::MatrixXd& embeddings,
                                          const RegressionHead& head,
                                          const Eigen::MatrixXd& horizon_returns,
                                          Eigen::MatrixXd& d_embeddings,
                                          RegressionHead& d_head) {
  if (embeddings.cols() != head.w.rows() || head.w.cols() != horizon_returns.cols() ||
      embeddings.rows() != horizon_returns.rows())
    throw ShapeError("multi-horizon regression: shape mismatch");
  Eigen::MatrixXd pred = embeddings * head.w;
  pred.rowwise() += head.b;
  Eigen::MatrixXd err = pred - horizon_returns;
  const double scale = 2.0 / static_cast<double>(horizon_returns.size());
  d_head.w = scale * embeddings.transpose() * err;
  d_head.b = scale * err.colwise().sum();
  d_embeddings = scale * err * head.w.transpose();
  return err.squaredNorm() / static_cast<double>(horizon_returns.size());
}

double row_entropy(const Eigen::MatrixXd& dist, int row) {
  double h = 0.0;
  for (int j = 0; j < dist.cols(); ++j) {
    if (j == row) continue;
    double p = dist(row, j);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace fascl
