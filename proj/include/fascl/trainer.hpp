#pragma once

#include "fascl/data.hpp"
#include "fascl/encoder.hpp"
#include "fascl/objective.hpp"
#include "fascl/util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Same-period batch sampling and the AdamW training loop.
// ---------------------------------------------------------------------------

enum class LossVariant { SoftContrastive, HardInfonce, ObservationAligned, MultiHorizon };

LossVariant loss_variant_from_string(const std::string& s);
std::string to_string(LossVariant v);

struct TrainConfig {
  int epochs = 10;
  int steps_per_epoch = 100;
  int batch_size = 128;
  double peak_lr = 1e-3;
  double min_lr = 1e-6;
  int warmup_epochs = 1;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 7;
  LossVariant loss_variant = LossVariant::SoftContrastive;
  int eval_every = 2;  // epochs between validation passes; 0 disables
  double tau = 0.01;
  double tau_t = 0.05;
  int T = 64;
  int H = 64;

  void validate() const;
};

struct TrainBatch {
  std::string anchor;
  std::vector<WindowSample> samples;  // sorted by ticker; size <= batch_size
};

// Uniformly samples an admissible anchor date (one with >= B eligible
// tickers; if no date reaches B, any date with >= 2), then B distinct
// eligible tickers without replacement. Eligible means: full T-day history,
// full H-day future, and the supervision window ends before the validation
// range start minus the embargo.
TrainBatch sample_same_period_batch(const AssetPanel& panel, const SplitSpec& split, int B,
                                    int T, int H, Rng& rng);

// Last calendar index usable as a training anchor.
int train_anchor_limit(const AssetPanel& panel, const SplitSpec& split, int H);

// ---------------------------------------------------------------------------
// Optimizer.
// ---------------------------------------------------------------------------

// Decoupled-weight-decay Adam step over a flat tensor list; `t` is 1-based.
void adamw_update(std::vector<Eigen::MatrixXd>& params,
                  const std::vector<Eigen::MatrixXd>& grads, std::vector<Eigen::MatrixXd>& m,
                  std::vector<Eigen::MatrixXd>& v, const std::vector<bool>& decay,
                  long long t, double lr, double weight_decay, double beta1, double beta2,
                  double eps = 1e-8);

// Linear warmup to peak_lr, cosine decay to min_lr, constant afterwards.
double lr_at(long long step, const TrainConfig& config);

struct TrainState {
  long long step = 0;
  EncoderParams m, v;  // AdamW moments, shaped like the params
  RegressionHead head, head_m, head_v;  // multi-horizon variant only
  Rng rng{0};
  double best_frc10 = -1e300;
  std::optional<EncoderParams> best_params;
  int best_epoch = -1;

  static TrainState init(const EncoderConfig& cfg, const TrainConfig& tcfg);
};

// One optimization step: forward, loss per variant, clip, AdamW. Returns the
// scalar loss. Aborts (TrainAbort) on non-finite loss with diagnostics.
double train_step(EncoderParams& params, TrainState& state, const TrainBatch& batch,
                  const TrainConfig& config);

// ---------------------------------------------------------------------------
// Full loop.
// ---------------------------------------------------------------------------

struct StepLog {
  long long step;
  double lr;
  double loss;
};

struct EvalLog {
  int epoch;
  double frc10;
  double tc10_1d;
  double sp10;
};

struct TrainResult {
  EncoderParams params;      // final
  TrainState state;          // includes best checkpoint reference
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
};

TrainResult fit(const AssetPanel& panel, const SplitSpec& split, const EncoderConfig& enc_cfg,
                const TrainConfig& train_cfg);

}  // namespace fascl
