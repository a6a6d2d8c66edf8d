#pragma once

#include "fascl/util.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Patch-based pre-norm Transformer encoder: T x C window -> D-dim embedding.
// All math in double precision.
// ---------------------------------------------------------------------------

enum class Pooling { MeanPatches, Cls };

struct EncoderConfig {
  int T = 64;
  int C = 6;
  int P = 4;   // patch length
  int D = 64;  // token / embedding dim
  int L = 2;   // blocks
  int n_heads = 4;
  int ffn_ratio = 4;
  double dropout_rate = 0.0;
  Pooling pooling = Pooling::MeanPatches;
  bool use_projection_head = false;
  int proj_hidden = 64;
  int proj_out = 32;

  static constexpr double kLnEps = 1e-5;

  int patches() const { return T / P; }
  int tokens() const { return patches() + 1; }  // [CLS] + patches
  int head_dim() const { return D / n_heads; }
  int ffn_dim() const { return D * ffn_ratio; }
  int out_dim() const { return use_projection_head ? proj_out : D; }
  void validate() const;
};

// The paper-scale configuration (selectable from the CLI).
EncoderConfig paper_encoder_config();

// ---------------------------------------------------------------------------
// Parameters live in a flat, named tensor list so the optimizer, gradient
// clipping and finite-difference checks can iterate uniformly. Layout is a
// pure function of the config.
// ---------------------------------------------------------------------------

enum class Init { TruncNormal, Zero, One };

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  bool decay = false;  // participates in weight decay
  Init init = Init::Zero;
};

std::vector<TensorSpec> tensor_layout(const EncoderConfig& config);

struct EncoderParams {
  EncoderConfig config;
  std::vector<Eigen::MatrixXd> t;

  // Fixed slots.
  static constexpr int kPatchW = 0, kPatchB = 1, kPatchLnG = 2, kPatchLnB = 3,
                       kCls = 4, kPos = 5, kBase = 6;
  // Per-block slots, offset from block_base(l).
  static constexpr int kLn1G = 0, kLn1B = 1, kWq = 2, kBq = 3, kWk = 4, kBk = 5,
                       kWv = 6, kBv = 7, kWo = 8, kBo = 9, kLn2G = 10, kLn2B = 11,
                       kW1 = 12, kB1 = 13, kW2 = 14, kB2 = 15, kPerBlock = 16;

  int block_base(int l) const { return kBase + l * kPerBlock; }
  int final_ln_g() const { return kBase + config.L * kPerBlock; }
  int final_ln_b() const { return final_ln_g() + 1; }
  int proj_w1() const { return final_ln_b() + 1; }
  int proj_b1() const { return proj_w1() + 1; }
  int proj_w2() const { return proj_w1() + 2; }
  int proj_b2() const { return proj_w1() + 3; }

  // Zero-filled parameter set with the layout of `config`.
  static EncoderParams zeros_like(const EncoderConfig& config);

  void set_zero();
  std::size_t tensor_count() const { return t.size(); }
  double squared_norm() const;
};

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);
std::size_t count_params(const EncoderParams& params);

// ---------------------------------------------------------------------------
// Forward / backward.
// ---------------------------------------------------------------------------

// Per-sample activation record; reused as scratch in forward-only mode.
struct SampleTape {
  Eigen::MatrixXd xp;       // N x (P*C) flattened patches
  Eigen::MatrixXd tok_pre;  // N x D pre patch-LN
  Eigen::VectorXd pln_mean, pln_inv;
  Eigen::MatrixXd h0;  // S x D block-0 input

  struct Block {
    Eigen::MatrixXd h_in;  // S x D
    Eigen::VectorXd ln1_mean, ln1_inv;
    Eigen::MatrixXd a;  // LN1 output
    Eigen::MatrixXd q, k, v;
    std::vector<Eigen::MatrixXd> attn;       // per head, pre-dropout softmax
    std::vector<Eigen::MatrixXd> attn_mask;  // dropout keep masks (train only)
    Eigen::MatrixXd o;      // concatenated head outputs
    Eigen::MatrixXd h_mid;  // post-attention residual
    Eigen::VectorXd ln2_mean, ln2_inv;
    Eigen::MatrixXd b1;  // LN2 output
    Eigen::MatrixXd f1;  // pre-GELU
    Eigen::MatrixXd g;   // post-GELU (post-dropout)
    Eigen::MatrixXd ffn_mask;
  };
  std::vector<Block> blocks;

  Eigen::MatrixXd h_last;  // input to final LN
  Eigen::VectorXd fln_mean, fln_inv;
  Eigen::MatrixXd hf;       // final LN output
  Eigen::VectorXd pooled;   // D
  Eigen::VectorXd ph1_pre;  // projection head hidden pre-activation
};

// Forward a single z-normalized window. When `tape` is kept the caller may
// run encode_backward_sample afterwards. `drop_rng` is consulted only when
// train_mode && dropout_rate > 0.
Eigen::VectorXd encode_sample(const Eigen::MatrixXd& window, const EncoderParams& params,
                              bool train_mode, SampleTape& tape, Rng* drop_rng = nullptr);

// Accumulates parameter gradients for one sample given d(loss)/d(output).
void encode_backward_sample(const Eigen::VectorXd& d_out, const SampleTape& tape,
                            const EncoderParams& params, EncoderParams& grads);

// Batch forward, parallel over samples, deterministic per sample regardless
// of batch size or ordering. Returns B x out_dim.
Eigen::MatrixXd encode(const std::vector<Eigen::MatrixXd>& windows,
                       const EncoderParams& params, bool train_mode = false,
                       std::uint64_t dropout_seed = 0);

// Batch forward retaining tapes (training path).
Eigen::MatrixXd encode_forward(const std::vector<Eigen::MatrixXd>& windows,
                               const EncoderParams& params, bool train_mode,
                               std::uint64_t dropout_seed, std::vector<SampleTape>& tapes);

// Batch backward; accumulates into `grads` (zeroed by caller if desired).
void encode_backward(const Eigen::MatrixXd& d_out, const std::vector<SampleTape>& tapes,
                     const EncoderParams& params, EncoderParams& grads);

// ---------------------------------------------------------------------------
// Checkpoints: self-describing JSON container.
// ---------------------------------------------------------------------------

void save_checkpoint(const EncoderParams& params, const std::string& path,
                     std::uint64_t seed, const std::string& config_hash);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace fascl
