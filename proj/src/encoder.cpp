#include "fascl/encoder.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace fascl {

void EncoderConfig::validate() const {
  if (T < 2 || C < 1 || P < 1 || D < 1 || L < 1 || n_heads < 1 || ffn_ratio < 1)
    throw ConfigError("encoder: dimensions must be positive");
  if (T % P != 0) throw ConfigError("encoder: T must be divisible by P");
  if (D % n_heads != 0) throw ConfigError("encoder: D must be divisible by n_heads");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("encoder: dropout_rate must be in [0, 1)");
  if (use_projection_head && (proj_hidden < 1 || proj_out < 1))
    throw ConfigError("encoder: projection head dims must be positive");
}

EncoderConfig paper_encoder_config() {
  EncoderConfig c;
  c.T = 64;
  c.C = 6;
  c.P = 4;
  c.D = 384;
  c.L = 8;
  c.n_heads = 8;
  c.ffn_ratio = 4;
  c.proj_hidden = 384;
  c.proj_out = 128;
  return c;
}

std::vector<TensorSpec> tensor_layout(const EncoderConfig& cfg) {
  cfg.validate();
  const int D = cfg.D, F = cfg.ffn_dim(), S = cfg.tokens();
  std::vector<TensorSpec> specs;
  specs.push_back({"patch_w", cfg.P * cfg.C, D, true, Init::TruncNormal});
  specs.push_back({"patch_b", 1, D, false, Init::Zero});
  specs.push_back({"patch_ln_g", 1, D, false, Init::One});
  specs.push_back({"patch_ln_b", 1, D, false, Init::Zero});
  specs.push_back({"cls", 1, D, false, Init::TruncNormal});
  specs.push_back({"pos", S, D, false, Init::TruncNormal});
  for (int l = 0; l < cfg.L; ++l) {
    std::string p = "block" + std::to_string(l) + ".";
    specs.push_back({p + "ln1_g", 1, D, false, Init::One});
    specs.push_back({p + "ln1_b", 1, D, false, Init::Zero});
    specs.push_back({p + "wq", D, D, true, Init::TruncNormal});
    specs.push_back({p + "bq", 1, D, false, Init::Zero});
    specs.push_back({p + "wk", D, D, true, Init::TruncNormal});
    specs.push_back({p + "bk", 1, D, false, Init::Zero});
    specs.push_back({p + "wv", D, D, true, Init::TruncNormal});
    specs.push_back({p + "bv", 1, D, false, Init::Zero});
    specs.push_back({p + "wo", D, D, true, Init::TruncNormal});
    specs.push_back({p + "bo", 1, D, false, Init::Zero});
    specs.push_back({p + "ln2_g", 1, D, false, Init::One});
    specs.push_back({p + "ln2_b", 1, D, false, Init::Zero});
    specs.push_back({p + "w1", D, F, true, Init::TruncNormal});
    specs.push_back({p + "b1", 1, F, false, Init::Zero});
    specs.push_back({p + "w2", F, D, true, Init::TruncNormal});
    specs.push_back({p + "b2", 1, D, false, Init::Zero});
  }
  specs.push_back({"final_ln_g", 1, D, false, Init::One});
  specs.push_back({"final_ln_b", 1, D, false, Init::Zero});
  if (cfg.use_projection_head) {
    specs.push_back({"proj_w1", D, cfg.proj_hidden, true, Init::TruncNormal});
    specs.push_back({"proj_b1", 1, cfg.proj_hidden, false, Init::Zero});
    specs.push_back({"proj_w2", cfg.proj_hidden, cfg.proj_out, true, Init::TruncNormal});
    specs.push_back({"proj_b2", 1, cfg.proj_out, false, Init::Zero});
  }
  return specs;
}

EncoderParams EncoderParams::zeros_like(const EncoderConfig& cfg) {
  EncoderParams p;
  p.config = cfg;
  for (const auto& s : tensor_layout(cfg)) p.t.push_back(Eigen::MatrixXd::Zero(s.rows, s.cols));
  return p;
}

void EncoderParams::set_zero() {
  for (auto& m : t) m.setZero();
}

double EncoderParams::squared_norm() const {
  double s = 0.0;
  for (const auto& m : t) s += m.squaredNorm();
  return s;
}

EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  auto specs = tensor_layout(cfg);
  Rng rng(seed);
  EncoderParams p;
  p.config = cfg;
  p.t.reserve(specs.size());
  for (const auto& s : specs) {
    Eigen::MatrixXd m(s.rows, s.cols);
    switch (s.init) {
      case Init::TruncNormal:
        for (int i = 0; i < m.rows(); ++i)
          for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.trunc_normal(0.02, 2.0);
        break;
      case Init::Zero:
        m.setZero();
        break;
      case Init::One:
        m.setOnes();
        break;
    }
    p.t.push_back(std::move(m));
  }
  return p;
}

std::size_t count_params(const EncoderParams& params) {
  std::size_t n = 0;
  for (const auto& m : params.t) n += static_cast<std::size_t>(m.size());
  return n;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace {

constexpr double kLnEps = EncoderConfig::kLnEps;

// Row-wise layer norm: out = (x - mean) * inv ⊙ g + b, inv = 1/sqrt(var+eps).
void layer_norm(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& g,
                const Eigen::RowVectorXd& b, Eigen::MatrixXd& out,
                Eigen::VectorXd& mean, Eigen::VectorXd& inv) {
  const int rows = static_cast<int>(x.rows());
  const double d = static_cast<double>(x.cols());
  mean.resize(rows);
  inv.resize(rows);
  out.resize(x.rows(), x.cols());
  for (int r = 0; r < rows; ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().sum() / d;
    double iv = 1.0 / std::sqrt(var + kLnEps);
    mean(r) = mu;
    inv(r) = iv;
    out.row(r) = ((x.row(r).array() - mu) * iv) * g.array() + b.array();
  }
}

// Backward of layer_norm; accumulates dg/db, writes dx.
void layer_norm_backward(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& g,
                         const Eigen::VectorXd& mean, const Eigen::VectorXd& inv,
                         const Eigen::MatrixXd& dy, Eigen::MatrixXd& dx,
                         Eigen::MatrixXd& dg, Eigen::MatrixXd& db) {
  const int rows = static_cast<int>(x.rows());
  const double d = static_cast<double>(x.cols());
  dx.resize(x.rows(), x.cols());
  for (int r = 0; r < rows; ++r) {
    Eigen::ArrayXd xhat = (x.row(r).array() - mean(r)) * inv(r);
    Eigen::ArrayXd dyr = dy.row(r).array();
    dg.row(0).array() += (dyr * xhat).transpose();
    db.row(0).array() += dyr.transpose();
    Eigen::ArrayXd dxh = dyr * g.array().transpose();
    double m1 = dxh.mean();
    double m2 = (dxh * xhat).sum() / d;
    dx.row(r) = (inv(r) * (dxh - m1 - xhat * m2)).transpose();
  }
}

void softmax_rows(Eigen::MatrixXd& m) {
  for (int r = 0; r < m.rows(); ++r) {
    double mx = m.row(r).maxCoeff();
    Eigen::ArrayXd e = (m.row(r).array() - mx).exp();
    m.row(r) = e / e.sum();
  }
}

void dropout_mask(Eigen::MatrixXd& mask, Eigen::Index rows, Eigen::Index cols, double rate,
                  Rng& rng) {
  mask.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = rng.u01() >= rate ? 1.0 : 0.0;
}

}  // namespace

Eigen::VectorXd encode_sample(const Eigen::MatrixXd& window, const EncoderParams& params,
                              bool train_mode, SampleTape& tape, Rng* drop_rng) {
  const EncoderConfig& cfg = params.config;
  if (window.rows() != cfg.T || window.cols() != cfg.C)
    throw ShapeError("encode: window is " + std::to_string(window.rows()) + "x" +
                     std::to_string(window.cols()) + ", config wants " +
                     std::to_string(cfg.T) + "x" + std::to_string(cfg.C));
  const int N = cfg.patches(), S = cfg.tokens(), D = cfg.D, P = cfg.P, C = cfg.C;
  const int heads = cfg.n_heads, dh = cfg.head_dim(), F = cfg.ffn_dim();
  const double drop = cfg.dropout_rate;
  const bool use_drop = train_mode && drop > 0.0;
  if (use_drop && !drop_rng) throw ConfigError("encode: dropout requires an rng in train mode");
  const double keep_scale = use_drop ? 1.0 / (1.0 - drop) : 1.0;

  // Flatten non-overlapping patches, time-major within each patch.
  tape.xp.resize(N, P * C);
  for (int n = 0; n < N; ++n)
    for (int tp = 0; tp < P; ++tp)
      for (int c = 0; c < C; ++c) tape.xp(n, tp * C + c) = window(n * P + tp, c);

  tape.tok_pre.resize(N, D);
  tape.tok_pre.noalias() = tape.xp * params.t[EncoderParams::kPatchW];
  tape.tok_pre.rowwise() += params.t[EncoderParams::kPatchB].row(0);

  Eigen::MatrixXd tok;
  layer_norm(tape.tok_pre, params.t[EncoderParams::kPatchLnG].row(0),
             params.t[EncoderParams::kPatchLnB].row(0), tok, tape.pln_mean, tape.pln_inv);

  tape.h0.resize(S, D);
  tape.h0.row(0) = params.t[EncoderParams::kCls].row(0);
  tape.h0.bottomRows(N) = tok;
  tape.h0 += params.t[EncoderParams::kPos];

  tape.blocks.resize(cfg.L);
  Eigen::MatrixXd h = tape.h0;
  for (int l = 0; l < cfg.L; ++l) {
    auto& blk = tape.blocks[l];
    const int base = params.block_base(l);
    blk.h_in = h;

    layer_norm(blk.h_in, params.t[base + EncoderParams::kLn1G].row(0),
               params.t[base + EncoderParams::kLn1B].row(0), blk.a, blk.ln1_mean, blk.ln1_inv);

    blk.q.resize(S, D);
    blk.q.noalias() = blk.a * params.t[base + EncoderParams::kWq];
    blk.q.rowwise() += params.t[base + EncoderParams::kBq].row(0);
    blk.k.resize(S, D);
    blk.k.noalias() = blk.a * params.t[base + EncoderParams::kWk];
    blk.k.rowwise() += params.t[base + EncoderParams::kBk].row(0);
    blk.v.resize(S, D);
    blk.v.noalias() = blk.a * params.t[base + EncoderParams::kWv];
    blk.v.rowwise() += params.t[base + EncoderParams::kBv].row(0);

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    blk.attn.resize(heads);
    if (use_drop)
      blk.attn_mask.resize(heads);
    else
      blk.attn_mask.clear();
    blk.o.resize(S, D);
    for (int hd = 0; hd < heads; ++hd) {
      auto qh = blk.q.middleCols(hd * dh, dh);
      auto kh = blk.k.middleCols(hd * dh, dh);
      auto vh = blk.v.middleCols(hd * dh, dh);
      Eigen::MatrixXd& w = blk.attn[hd];
      w.resize(S, S);
      w.noalias() = qh * kh.transpose();
      w *= scale;
      softmax_rows(w);
      if (use_drop) {
        dropout_mask(blk.attn_mask[hd], S, S, drop, *drop_rng);
        blk.o.middleCols(hd * dh, dh).noalias() =
            (w.cwiseProduct(blk.attn_mask[hd]) * keep_scale) * vh;
      } else {
        blk.o.middleCols(hd * dh, dh).noalias() = w * vh;
      }
    }

    blk.h_mid.resize(S, D);
    blk.h_mid.noalias() = blk.o * params.t[base + EncoderParams::kWo];
    blk.h_mid.rowwise() += params.t[base + EncoderParams::kBo].row(0);
    blk.h_mid += blk.h_in;

    layer_norm(blk.h_mid, params.t[base + EncoderParams::kLn2G].row(0),
               params.t[base + EncoderParams::kLn2B].row(0), blk.b1, blk.ln2_mean, blk.ln2_inv);

    blk.f1.resize(S, F);
    blk.f1.noalias() = blk.b1 * params.t[base + EncoderParams::kW1];
    blk.f1.rowwise() += params.t[base + EncoderParams::kB1].row(0);

    Eigen::ArrayXXd act = blk.f1.array();
    gelu_inplace(act);
    blk.g = act.matrix();
    if (use_drop) {
      dropout_mask(blk.ffn_mask, S, F, drop, *drop_rng);
      blk.g = blk.g.cwiseProduct(blk.ffn_mask) * keep_scale;
    }

    h.resize(S, D);
    h.noalias() = blk.g * params.t[base + EncoderParams::kW2];
    h.rowwise() += params.t[base + EncoderParams::kB2].row(0);
    h += blk.h_mid;
  }

  tape.h_last = h;
  layer_norm(tape.h_last, params.t[params.final_ln_g()].row(0),
             params.t[params.final_ln_b()].row(0), tape.hf, tape.fln_mean, tape.fln_inv);

  tape.pooled.resize(D);
  if (cfg.pooling == Pooling::MeanPatches)
    tape.pooled = tape.hf.bottomRows(N).colwise().mean().transpose();
  else
    tape.pooled = tape.hf.row(0).transpose();

  if (!cfg.use_projection_head) return tape.pooled;

  tape.ph1_pre = (params.t[params.proj_w1()].transpose() * tape.pooled +
                  params.t[params.proj_b1()].row(0).transpose());
  Eigen::VectorXd a = tape.ph1_pre.cwiseMax(0.0);
  return params.t[params.proj_w2()].transpose() * a +
         params.t[params.proj_b2()].row(0).transpose();
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void encode_backward_sample(const Eigen::VectorXd& d_out, const SampleTape& tape,
                            const EncoderParams& params, EncoderParams& grads) {
  const EncoderConfig& cfg = params.config;
  const int N = cfg.patches(), S = cfg.tokens(), D = cfg.D;
  const int heads = cfg.n_heads, dh = cfg.head_dim();
  const bool use_drop = !tape.blocks.empty() && !tape.blocks[0].attn_mask.empty();
  const double keep_scale = use_drop ? 1.0 / (1.0 - cfg.dropout_rate) : 1.0;

  Eigen::VectorXd d_pooled;
  if (cfg.use_projection_head) {
    Eigen::VectorXd a = tape.ph1_pre.cwiseMax(0.0);
    grads.t[params.proj_w2()].noalias() += a * d_out.transpose();
    grads.t[params.proj_b2()].row(0) += d_out.transpose();
    Eigen::VectorXd da = params.t[params.proj_w2()] * d_out;
    Eigen::VectorXd dz1 =
        (tape.ph1_pre.array() > 0.0).select(da.array(), 0.0).matrix();
    grads.t[params.proj_w1()].noalias() += tape.pooled * dz1.transpose();
    grads.t[params.proj_b1()].row(0) += dz1.transpose();
    d_pooled = params.t[params.proj_w1()] * dz1;
  } else {
    d_pooled = d_out;
  }

  Eigen::MatrixXd dhf = Eigen::MatrixXd::Zero(S, D);
  if (cfg.pooling == Pooling::MeanPatches) {
    Eigen::RowVectorXd share = d_pooled.transpose() / static_cast<double>(N);
    for (int r = 1; r <= N; ++r) dhf.row(r) = share;
  } else {
    dhf.row(0) = d_pooled.transpose();
  }

  Eigen::MatrixXd dh;
  layer_norm_backward(tape.h_last, params.t[params.final_ln_g()].row(0), tape.fln_mean,
                      tape.fln_inv, dhf, dh, grads.t[params.final_ln_g()],
                      grads.t[params.final_ln_b()]);

  for (int l = cfg.L - 1; l >= 0; --l) {
    const auto& blk = tape.blocks[l];
    const int base = params.block_base(l);

    // FFN half: h_out = h_mid + g * W2 + b2
    Eigen::MatrixXd d_hmid = dh;  // residual branch
    grads.t[base + EncoderParams::kW2].noalias() += blk.g.transpose() * dh;
    grads.t[base + EncoderParams::kB2].row(0) += dh.colwise().sum();
    Eigen::MatrixXd dg;
    dg.noalias() = dh * params.t[base + EncoderParams::kW2].transpose();
    if (use_drop) dg = dg.cwiseProduct(blk.ffn_mask) * keep_scale;
    Eigen::MatrixXd df1 = dg.cwiseProduct(gelu_grad(blk.f1.array()).matrix());
    grads.t[base + EncoderParams::kW1].noalias() += blk.b1.transpose() * df1;
    grads.t[base + EncoderParams::kB1].row(0) += df1.colwise().sum();
    Eigen::MatrixXd db1;
    db1.noalias() = df1 * params.t[base + EncoderParams::kW1].transpose();

    Eigen::MatrixXd d_hmid_ln;
    layer_norm_backward(blk.h_mid, params.t[base + EncoderParams::kLn2G].row(0), blk.ln2_mean,
                        blk.ln2_inv, db1, d_hmid_ln, grads.t[base + EncoderParams::kLn2G],
                        grads.t[base + EncoderParams::kLn2B]);
    d_hmid += d_hmid_ln;

    // Attention half: h_mid = h_in + o * Wo + bo
    Eigen::MatrixXd d_hin = d_hmid;  // residual branch
    grads.t[base + EncoderParams::kWo].noalias() += blk.o.transpose() * d_hmid;
    grads.t[base + EncoderParams::kBo].row(0) += d_hmid.colwise().sum();
    Eigen::MatrixXd do_;
    do_.noalias() = d_hmid * params.t[base + EncoderParams::kWo].transpose();

    Eigen::MatrixXd dq(S, D), dk(S, D), dv(S, D);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int hd = 0; hd < heads; ++hd) {
      auto doh = do_.middleCols(hd * dh, dh);
      auto vh = blk.v.middleCols(hd * dh, dh);
      auto qh = blk.q.middleCols(hd * dh, dh);
      auto kh = blk.k.middleCols(hd * dh, dh);
      const Eigen::MatrixXd& w = blk.attn[hd];

      Eigen::MatrixXd dwd;
      dwd.noalias() = doh * vh.transpose();
      if (use_drop) {
        dv.middleCols(hd * dh, dh).noalias() =
            (w.cwiseProduct(blk.attn_mask[hd]) * keep_scale).transpose() * doh;
        dwd = dwd.cwiseProduct(blk.attn_mask[hd]) * keep_scale;
      } else {
        dv.middleCols(hd * dh, dh).noalias() = w.transpose() * doh;
      }
      // softmax backward per row
      Eigen::MatrixXd dsc(S, S);
      for (int r = 0; r < S; ++r) {
        double dot = dwd.row(r).dot(w.row(r));
        dsc.row(r) = (w.row(r).array() * (dwd.row(r).array() - dot)).matrix();
      }
      dsc *= scale;
      dq.middleCols(hd * dh, dh).noalias() = dsc * kh;
      dk.middleCols(hd * dh, dh).noalias() = dsc.transpose() * qh;
    }

    grads.t[base + EncoderParams::kWq].noalias() += blk.a.transpose() * dq;
    grads.t[base + EncoderParams::kBq].row(0) += dq.colwise().sum();
    grads.t[base + EncoderParams::kWk].noalias() += blk.a.transpose() * dk;
    grads.t[base + EncoderParams::kBk].row(0) += dk.colwise().sum();
    grads.t[base + EncoderParams::kWv].noalias() += blk.a.transpose() * dv;
    grads.t[base + EncoderParams::kBv].row(0) += dv.colwise().sum();

    Eigen::MatrixXd da;
    da.noalias() = dq * params.t[base + EncoderParams::kWq].transpose();
    da.noalias() += dk * params.t[base + EncoderParams::kWk].transpose();
    da.noalias() += dv * params.t[base + EncoderParams::kWv].transpose();

    Eigen::MatrixXd d_hin_ln;
    layer_norm_backward(blk.h_in, params.t[base + EncoderParams::kLn1G].row(0), blk.ln1_mean,
                        blk.ln1_inv, da, d_hin_ln, grads.t[base + EncoderParams::kLn1G],
                        grads.t[base + EncoderParams::kLn1B]);
    dh = d_hin + d_hin_ln;
  }

  // dh is now d(h0): cls row, positional table, and patch tokens.
  grads.t[EncoderParams::kPos] += dh;
  grads.t[EncoderParams::kCls].row(0) += dh.row(0);

  Eigen::MatrixXd dtok = dh.bottomRows(N);
  Eigen::MatrixXd dtok_pre;
  layer_norm_backward(tape.tok_pre, params.t[EncoderParams::kPatchLnG].row(0), tape.pln_mean,
                      tape.pln_inv, dtok, dtok_pre, grads.t[EncoderParams::kPatchLnG],
                      grads.t[EncoderParams::kPatchLnB]);
  grads.t[EncoderParams::kPatchW].noalias() += tape.xp.transpose() * dtok_pre;
  grads.t[EncoderParams::kPatchB].row(0) += dtok_pre.colwise().sum();
}

// ---------------------------------------------------------------------------
// Batch drivers
// ---------------------------------------------------------------------------

Eigen::MatrixXd encode_forward(const std::vector<Eigen::MatrixXd>& windows,
                               const EncoderParams& params, bool train_mode,
                               std::uint64_t dropout_seed, std::vector<SampleTape>& tapes) {
  const std::size_t B = windows.size();
  Eigen::MatrixXd out(B, params.config.out_dim());
  tapes.resize(B);
  const bool use_drop = train_mode && params.config.dropout_rate > 0.0;
  parallel_for(B, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      if (use_drop) {
        Rng r(dropout_seed * 0x9e3779b97f4a7c15ull + i);
        out.row(i) = encode_sample(windows[i], params, train_mode, tapes[i], &r).transpose();
      } else {
        out.row(i) = encode_sample(windows[i], params, train_mode, tapes[i]).transpose();
      }
    }
  });
  return out;
}

Eigen::MatrixXd encode(const std::vector<Eigen::MatrixXd>& windows,
                       const EncoderParams& params, bool train_mode,
                       std::uint64_t dropout_seed) {
  const std::size_t B = windows.size();
  Eigen::MatrixXd out(B, params.config.out_dim());
  const bool use_drop = train_mode && params.config.dropout_rate > 0.0;
  parallel_for(B, [&](std::size_t lo, std::size_t hi) {
    SampleTape scratch;  // reused across this chunk
    for (std::size_t i = lo; i < hi; ++i) {
      if (use_drop) {
        Rng r(dropout_seed * 0x9e3779b97f4a7c15ull + i);
        out.row(i) = encode_sample(windows[i], params, train_mode, scratch, &r).transpose();
      } else {
        out.row(i) = encode_sample(windows[i], params, train_mode, scratch).transpose();
      }
    }
  });
  return out;
}

void encode_backward(const Eigen::MatrixXd& d_out, const std::vector<SampleTape>& tapes,
                     const EncoderParams& params, EncoderParams& grads) {
  const std::size_t B = tapes.size();
  if (static_cast<std::size_t>(d_out.rows()) != B)
    throw ShapeError("encode_backward: cotangent rows != batch size");
  const std::size_t workers = static_cast<std::size_t>(worker_threads());
  if (workers <= 1 || B <= 1) {
    for (std::size_t i = 0; i < B; ++i)
      encode_backward_sample(d_out.row(i).transpose(), tapes[i], params, grads);
    return;
  }
  std::vector<EncoderParams> partial(workers, EncoderParams::zeros_like(params.config));
  parallel_for_chunked(B, workers, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      encode_backward_sample(d_out.row(i).transpose(), tapes[i], params, partial[c]);
  });
  for (auto& part : partial)
    for (std::size_t k = 0; k < grads.t.size(); ++k) grads.t[k] += part.t[k];
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const EncoderConfig& c) {
  return nlohmann::json{{"T", c.T},
                        {"C", c.C},
                        {"P", c.P},
                        {"D", c.D},
                        {"L", c.L},
                        {"n_heads", c.n_heads},
                        {"ffn_ratio", c.ffn_ratio},
                        {"dropout_rate", c.dropout_rate},
                        {"pooling", c.pooling == Pooling::MeanPatches ? "mean_patches" : "cls"},
                        {"use_projection_head", c.use_projection_head},
                        {"proj_hidden", c.proj_hidden},
                        {"proj_out", c.proj_out}};
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.T = j.at("T").get<int>();
  c.C = j.at("C").get<int>();
  c.P = j.at("P").get<int>();
  c.D = j.at("D").get<int>();
  c.L = j.at("L").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.ffn_ratio = j.at("ffn_ratio").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  std::string pool = j.at("pooling").get<std::string>();
  if (pool == "mean_patches")
    c.pooling = Pooling::MeanPatches;
  else if (pool == "cls")
    c.pooling = Pooling::Cls;
  else
    throw ConfigError("checkpoint: unknown pooling '" + pool + "'");
  c.use_projection_head = j.at("use_projection_head").get<bool>();
  c.proj_hidden = j.at("proj_hidden").get<int>();
  c.proj_out = j.at("proj_out").get<int>();
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path,
                     std::uint64_t seed, const std::string& config_hash) {
  nlohmann::json j;
  j["format"] = "fascl-checkpoint";
  j["version"] = 1;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["config"] = config_to_json(params.config);
  auto specs = tensor_layout(params.config);
  nlohmann::json tensors = nlohmann::json::object();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& m = params.t[i];
    std::vector<double> data;
    data.reserve(m.size());
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    tensors[specs[i].name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << j.dump();
  if (!out) throw DataError("checkpoint write failed for '" + path + "'");
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  if (!j.contains("version")) throw ParseError("checkpoint: missing version field", 0);
  if (j.at("version").get<int>() != 1)
    throw ConfigError("checkpoint: unsupported version " + j.at("version").dump());
  EncoderParams p = EncoderParams::zeros_like(config_from_json(j.at("config")));
  auto specs = tensor_layout(p.config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& tj = j.at("tensors").at(specs[i].name);
    int rows = tj.at("rows").get<int>(), cols = tj.at("cols").get<int>();
    if (rows != specs[i].rows || cols != specs[i].cols)
      throw ShapeError("checkpoint: tensor '" + specs[i].name + "' has wrong shape");
    const auto& data = tj.at("data");
    if (static_cast<int>(data.size()) != rows * cols)
      throw ShapeError("checkpoint: tensor '" + specs[i].name + "' has wrong element count");
    std::size_t idx = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) p.t[i](r, c) = data[idx++].get<double>();
  }
  return p;
}

}  // namespace fascl
