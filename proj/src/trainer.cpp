#include "fascl/trainer.hpp"

#include "fascl/metrics.hpp"
#include "fascl/retrieval.hpp"

#include <algorithm>
#include <cmath>

namespace fascl {

LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "soft_contrastive") return LossVariant::SoftContrastive;
  if (s == "hard_infonce") return LossVariant::HardInfonce;
  if (s == "observation_aligned") return LossVariant::ObservationAligned;
  if (s == "multi_horizon") return LossVariant::MultiHorizon;
  throw ConfigError("unknown loss_variant '" + s + "'");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::SoftContrastive: return "soft_contrastive";
    case LossVariant::HardInfonce: return "hard_infonce";
    case LossVariant::ObservationAligned: return "observation_aligned";
    case LossVariant::MultiHorizon: return "multi_horizon";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs < 0 || steps_per_epoch < 1) throw ConfigError("train: bad epochs/steps_per_epoch");
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (warmup_epochs < 0 || (epochs > 0 && warmup_epochs >= epochs))
    throw ConfigError("train: warmup_epochs must be < epochs");
  if (!(peak_lr > 0.0) || min_lr < 0.0 || min_lr > peak_lr)
    throw ConfigError("train: need 0 <= min_lr <= peak_lr, peak_lr > 0");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("train: grad_clip_norm must be positive");
  if (!(tau > 0.0) || !(tau_t > 0.0)) throw ConfigError("train: temperatures must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("train: betas must be in [0, 1)");
  if (T < 2 || H < 1) throw ConfigError("train: bad window protocol");
}

int train_anchor_limit(const AssetPanel& panel, const SplitSpec& split, int H) {
  // Supervision must end before the validation range: a + H + embargo < vs.
  auto it = std::lower_bound(panel.calendar.begin(), panel.calendar.end(), split.valid.start);
  int vs = static_cast<int>(it - panel.calendar.begin());
  return vs - 1 - H - split.embargo_days;
}

namespace {

struct Eligibility {
  int lo = 0, hi = -1;                  // admissible anchor calendar index range
  std::vector<int> counts;              // eligible tickers per anchor in [lo, hi]
  // per-ticker admissible anchor interval
  std::vector<int> tick_lo, tick_hi;
};

Eligibility compute_eligibility(const AssetPanel& panel, const SplitSpec& split, int T, int H) {
  split.validate();
  Eligibility e;
  auto lo_it = std::lower_bound(panel.calendar.begin(), panel.calendar.end(), split.train.start);
  auto hi_it = std::upper_bound(panel.calendar.begin(), panel.calendar.end(), split.train.end);
  int lo = static_cast<int>(lo_it - panel.calendar.begin());
  int hi = static_cast<int>(hi_it - panel.calendar.begin()) - 1;
  hi = std::min(hi, train_anchor_limit(panel, split, H));
  e.lo = lo;
  e.hi = hi;
  const std::size_t M = panel.tickers.size();
  e.tick_lo.assign(M, 0);
  e.tick_hi.assign(M, -1);
  if (lo > hi) return e;
  e.counts.assign(hi - lo + 1, 0);
  for (std::size_t ti = 0; ti < M; ++ti) {
    int a_lo = std::max(lo, panel.first_index[ti] + T - 1);
    int a_hi = std::min(hi, panel.last_index(ti) - H);
    e.tick_lo[ti] = a_lo;
    e.tick_hi[ti] = a_hi;
    for (int a = a_lo; a <= a_hi; ++a) ++e.counts[a - lo];
  }
  return e;
}

TrainBatch sample_batch_from(const AssetPanel& panel, const Eligibility& e, int B, int T, int H,
                             Rng& rng) {
  if (e.lo > e.hi) throw DataError("no admissible training dates");
  // Admissible: >= B eligible tickers; if no date reaches B, any with >= 2.
  std::vector<int> candidates;
  for (int a = e.lo; a <= e.hi; ++a)
    if (e.counts[a - e.lo] >= B) candidates.push_back(a);
  if (candidates.empty())
    for (int a = e.lo; a <= e.hi; ++a)
      if (e.counts[a - e.lo] >= 2) candidates.push_back(a);
  if (candidates.empty()) throw DataError("no admissible training dates");

  int anchor_idx = candidates[rng.uniform_index(candidates.size())];
  std::vector<std::size_t> eligible;
  for (std::size_t ti = 0; ti < panel.tickers.size(); ++ti)
    if (anchor_idx >= e.tick_lo[ti] && anchor_idx <= e.tick_hi[ti]) eligible.push_back(ti);

  std::size_t take = std::min<std::size_t>(B, eligible.size());
  auto picks = rng.sample_without_replacement(eligible.size(), take);
  std::vector<std::size_t> chosen;
  chosen.reserve(take);
  for (auto p : picks) chosen.push_back(eligible[p]);
  std::sort(chosen.begin(), chosen.end());

  TrainBatch batch;
  batch.anchor = panel.calendar[anchor_idx];
  batch.samples.reserve(take);
  for (auto ti : chosen)
    batch.samples.push_back(make_window(panel, panel.tickers[ti], batch.anchor, T, H));
  return batch;
}

}  // namespace

TrainBatch sample_same_period_batch(const AssetPanel& panel, const SplitSpec& split, int B,
                                    int T, int H, Rng& rng) {
  Eligibility e = compute_eligibility(panel, split, T, H);
  return sample_batch_from(panel, e, B, T, H, rng);
}

double lr_at(long long step, const TrainConfig& config) {
  if (step < 0) throw ConfigError("lr_at: negative step");
  const long long warm = static_cast<long long>(config.warmup_epochs) * config.steps_per_epoch;
  const long long total = static_cast<long long>(config.epochs) * config.steps_per_epoch;
  if (step < warm)
    return config.peak_lr * static_cast<double>(step) / static_cast<double>(warm);
  if (step >= total) return config.min_lr;
  double progress = static_cast<double>(step - warm) / static_cast<double>(total - warm);
  return config.min_lr +
         (config.peak_lr - config.min_lr) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void adamw_update(std::vector<Eigen::MatrixXd>& params,
                  const std::vector<Eigen::MatrixXd>& grads, std::vector<Eigen::MatrixXd>& m,
                  std::vector<Eigen::MatrixXd>& v, const std::vector<bool>& decay,
                  long long t, double lr, double weight_decay, double beta1, double beta2,
                  double eps) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size() ||
      params.size() != decay.size())
    throw ShapeError("adamw: tensor list mismatch");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
    Eigen::ArrayXXd mhat = m[i].array() / bc1;
    Eigen::ArrayXXd vhat = v[i].array() / bc2;
    Eigen::ArrayXXd update = mhat / (vhat.sqrt() + eps);
    if (decay[i]) update += weight_decay * params[i].array();
    params[i].array() -= lr * update;
  }
}

TrainState TrainState::init(const EncoderConfig& cfg, const TrainConfig& tcfg) {
  TrainState s;
  s.m = EncoderParams::zeros_like(cfg);
  s.v = EncoderParams::zeros_like(cfg);
  s.rng = Rng(tcfg.seed);
  const int out = cfg.out_dim();
  s.head.w = Eigen::MatrixXd::Zero(out, static_cast<int>(kHorizons.size()));
  s.head.b = Eigen::RowVectorXd::Zero(static_cast<int>(kHorizons.size()));
  s.head_m = s.head;
  s.head_v = s.head;
  return s;
}

double train_step(EncoderParams& params, TrainState& state, const TrainBatch& batch,
                  const TrainConfig& config) {
  const std::size_t B = batch.samples.size();
  if (B < 2) throw DataError("train_step: batch needs at least 2 samples");

  std::vector<Eigen::MatrixXd> windows(B);
  Eigen::MatrixXd returns(B, config.H);
  Eigen::MatrixXd horizon(B, static_cast<int>(kHorizons.size()));
  for (std::size_t i = 0; i < B; ++i) {
    windows[i] = znorm(batch.samples[i].history);
    returns.row(i) = batch.samples[i].future_returns.transpose();
    for (std::size_t h = 0; h < kHorizons.size(); ++h)
      horizon(i, h) = batch.samples[i].horizon_returns.at(kHorizons[h]);
  }

  std::vector<SampleTape> tapes;
  std::uint64_t drop_seed = config.seed ^ (0x9e3779b97f4a7c15ull * (state.step + 1));
  Eigen::MatrixXd z = encode_forward(windows, params, true, drop_seed, tapes);

  double loss = 0.0;
  Eigen::MatrixXd dz;
  RegressionHead dhead;
  const bool multi = config.loss_variant == LossVariant::MultiHorizon;
  switch (config.loss_variant) {
    case LossVariant::SoftContrastive: {
      BatchTargets targets = target_distribution(pairwise_future_correlation(returns), config.tau_t);
      PredictedDist pred = predicted_distribution(z, config.tau);
      loss = soft_contrastive_loss(targets, pred);
      dz = soft_contrastive_grad(targets, pred);
      break;
    }
    case LossVariant::HardInfonce: {
      Eigen::MatrixXd corr = pairwise_future_correlation(returns);
      PredictedDist pred = predicted_distribution(z, config.tau);
      loss = hard_infonce_loss_grad(corr, pred, dz);
      break;
    }
    case LossVariant::ObservationAligned: {
      BatchTargets targets = observation_aligned_targets(windows, config.tau_t);
      PredictedDist pred = predicted_distribution(z, config.tau);
      loss = soft_contrastive_loss(targets, pred);
      dz = soft_contrastive_grad(targets, pred);
      break;
    }
    case LossVariant::MultiHorizon: {
      loss = multi_horizon_regression_loss_grad(z, state.head, horizon, dz, dhead);
      break;
    }
  }

  if (!std::isfinite(loss)) {
    std::string ticks;
    for (const auto& s : batch.samples) ticks += s.ticker + " ";
    throw TrainAbort("non-finite loss at step " + std::to_string(state.step) + ", anchor " +
                     batch.anchor + ", tickers: " + ticks);
  }

  EncoderParams grads = EncoderParams::zeros_like(params.config);
  encode_backward(dz, tapes, params, grads);

  double sq = grads.squared_norm();
  if (multi) sq += dhead.w.squaredNorm() + dhead.b.squaredNorm();
  double gnorm = std::sqrt(sq);
  if (gnorm > config.grad_clip_norm) {
    double scale = config.grad_clip_norm / gnorm;
    for (auto& g : grads.t) g *= scale;
    if (multi) {
      dhead.w *= scale;
      dhead.b *= scale;
    }
  }

  const double lr = lr_at(state.step, config);
  auto specs = tensor_layout(params.config);
  std::vector<bool> decay(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) decay[i] = specs[i].decay;
  adamw_update(params.t, grads.t, state.m.t, state.v.t, decay, state.step + 1, lr,
               config.weight_decay, config.beta1, config.beta2);

  if (multi) {
    std::vector<Eigen::MatrixXd> hp{state.head.w, state.head.b};
    std::vector<Eigen::MatrixXd> hg{dhead.w, dhead.b};
    std::vector<Eigen::MatrixXd> hm{state.head_m.w, state.head_m.b};
    std::vector<Eigen::MatrixXd> hv{state.head_v.w, state.head_v.b};
    adamw_update(hp, hg, hm, hv, {true, false}, state.step + 1, lr, config.weight_decay,
                 config.beta1, config.beta2);
    state.head.w = hp[0];
    state.head.b = hp[1];
    state.head_m.w = hm[0];
    state.head_m.b = hm[1];
    state.head_v.w = hv[0];
    state.head_v.b = hv[1];
  }

  ++state.step;
  return loss;
}

namespace {

// Validation FRC@10 plus the companion eval-log metrics.
EvalLog validation_metrics(int epoch, const std::vector<EvalCohort>& cohorts,
                           const EncoderParams& params,
                           const std::map<std::string, std::string>& sectors) {
  std::vector<CohortEval> evals;
  evals.reserve(cohorts.size());
  for (const auto& c : cohorts) {
    CohortEval ce;
    ce.cohort = &c;
    ce.retrievals = retrieve_all(embed_cohort(c, params), {10});
    evals.push_back(std::move(ce));
  }
  EvalLog log;
  log.epoch = epoch;
  log.frc10 = future_return_correlation(evals, 10);
  log.tc10_1d = trend_consistency(evals, 10, 1);
  log.sp10 = sector_precision(evals, 10, sectors);
  return log;
}

}  // namespace

TrainResult fit(const AssetPanel& panel, const SplitSpec& split, const EncoderConfig& enc_cfg,
                const TrainConfig& train_cfg) {
  enc_cfg.validate();
  train_cfg.validate();
  if (enc_cfg.T != train_cfg.T)
    throw ConfigError("fit: encoder T and training window T disagree");

  TrainResult result;
  result.params = init_params(enc_cfg, train_cfg.seed);
  result.state = TrainState::init(enc_cfg, train_cfg);
  if (train_cfg.epochs == 0) return result;

  Eligibility elig = compute_eligibility(panel, split, train_cfg.T, train_cfg.H);
  auto sectors = sector_map(panel);
  std::vector<EvalCohort> valid_cohorts;  // built lazily on first eval
  bool cohorts_ready = false;

  for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    for (int s = 0; s < train_cfg.steps_per_epoch; ++s) {
      TrainBatch batch = sample_batch_from(panel, elig, train_cfg.batch_size, train_cfg.T,
                                           train_cfg.H, result.state.rng);
      double lr = lr_at(result.state.step, train_cfg);
      double loss = train_step(result.params, result.state, batch, train_cfg);
      result.steps.push_back({result.state.step - 1, lr, loss});
    }
    if (train_cfg.eval_every > 0 && epoch % train_cfg.eval_every == 0) {
      if (!cohorts_ready) {
        valid_cohorts = build_cohorts(panel, split, SplitRange::Valid, train_cfg.T, train_cfg.H);
        cohorts_ready = true;
      }
      if (!valid_cohorts.empty()) {
        EvalLog log = validation_metrics(epoch, valid_cohorts, result.params, sectors);
        result.evals.push_back(log);
        if (log.frc10 > result.state.best_frc10) {
          result.state.best_frc10 = log.frc10;
          result.state.best_params = result.params;
          result.state.best_epoch = epoch;
        }
      }
    }
  }
  return result;
}

}  // namespace fascl
