#include "mint/bridge_net.hpp"

#include <stdexcept>

#include "mint/nn.hpp"

namespace mint {

void BridgeNetConfig::validate() const {
  if (hidden_dim % num_heads != 0)
    throw std::runtime_error("hidden_dim not divisible by num_heads");
  if (cross_attention_period < 1 || cross_attention_period > num_blocks)
    throw std::runtime_error("cross_attention_period out of range");
  if (num_queries < 1) throw std::runtime_error("no queries");
  if (vocab_size < kNumSpecials) throw std::runtime_error("vocab too small");
}

BridgeNet::BridgeNet(const BridgeNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const double s = cfg_.init_scale;
  params_.add("queries", nn::randn(cfg_.num_queries, cfg_.hidden_dim, rng, s));
  params_.add("tok_emb", nn::randn(cfg_.vocab_size, cfg_.hidden_dim, rng, s));
  params_.add("pos_emb", nn::randn(cfg_.max_text_len, cfg_.hidden_dim, rng, s));
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    std::string b = "block." + std::to_string(i);
    nn::init_layer_norm(params_, b + ".ln1", cfg_.hidden_dim);
    nn::init_attention(params_, b + ".selfattn", cfg_.hidden_dim,
                       cfg_.hidden_dim, rng, s);
    if (i % cfg_.cross_attention_period == 0) {
      nn::init_layer_norm(params_, b + ".lnc", cfg_.hidden_dim);
      nn::init_attention(params_, b + ".crossattn", cfg_.audio_feat_dim,
                         cfg_.hidden_dim, rng, s);
    }
    nn::init_layer_norm(params_, b + ".ln2", cfg_.hidden_dim);
    nn::init_ffn(params_, b + ".ffn", cfg_.hidden_dim, cfg_.ffn_dim, rng, s);
  }
  nn::init_layer_norm(params_, "final_ln", cfg_.hidden_dim);
  params_.add("proj_contrast",
              nn::randn(cfg_.hidden_dim, cfg_.contrastive_proj_dim, rng,
                         std::max(0.1, s)));
  params_.add("alm_head.w", nn::randn(cfg_.hidden_dim, 2, rng, s));
  params_.add("alm_head.b", Mat::Zero(1, 2));
  Mat temp(1, 1);
  temp(0, 0) = 0.07;
  params_.add("temperature", temp);
}

BridgeOutputs BridgeNet::forward(Tape& tape, const AudioFeatureMap* audio,
                                 const TokenSequence* text,
                                 const AttentionMaskPlan& mask,
                                 ForwardMode mode, bool record_attn) {
  int q_len = mask.q_len;
  int t_len = text ? text->length() : 0;
  if (q_len != 0 && q_len != cfg_.num_queries)
    throw std::runtime_error("mask/stream mismatch");
  if (t_len != mask.t_len) throw std::runtime_error("mask/stream mismatch");
  if (q_len + t_len == 0) throw std::runtime_error("empty stream");
  if (t_len > cfg_.max_text_len)
    throw std::runtime_error("text exceeds max_text_len");

  Var emb = tape.param(params_, "tok_emb");
  Var x;
  Var txt;
  if (t_len > 0) {
    Var te = tape.gather_rows(emb, text->ids);
    std::vector<int> pos_ids(t_len);
    for (int i = 0; i < t_len; ++i) pos_ids[i] = i;
    Var pe = tape.gather_rows(tape.param(params_, "pos_emb"), pos_ids);
    txt = tape.add(te, pe);
  }
  if (q_len > 0) {
    Var q = tape.param(params_, "queries");
    x = (t_len > 0) ? tape.concat_rows(q, txt) : q;
  } else {
    x = txt;
  }

  Mat addmask = mask.additive();
  BridgeOutputs out;
  for (int b = 0; b < cfg_.num_blocks; ++b) {
    std::string pre = "block." + std::to_string(b);
    Var h = nn::layer_norm(tape, params_, pre + ".ln1", x);
    nn::AttnResult sa = nn::multi_head_attention(
        tape, params_, pre + ".selfattn", h, h, addmask, cfg_.num_heads,
        record_attn);
    if (record_attn && !sa.probs.empty()) {
      Mat avg = sa.probs[0];
      for (size_t h_i = 1; h_i < sa.probs.size(); ++h_i) avg += sa.probs[h_i];
      out.attn_records.push_back(avg / static_cast<double>(sa.probs.size()));
    }
    x = tape.add(x, sa.out);

    if (audio && q_len > 0 && b % cfg_.cross_attention_period == 0) {
      Var q_rows = tape.slice_rows(x, 0, q_len);
      Var hq = nn::layer_norm(tape, params_, pre + ".lnc", q_rows);
      Var feats = tape.constant(audio->frames);
      Var ca = nn::multi_head_attention(tape, params_, pre + ".crossattn", hq,
                                        feats, Mat(), cfg_.num_heads)
                   .out;
      Var q_new = tape.add(q_rows, ca);
      x = (t_len > 0)
              ? tape.concat_rows(q_new, tape.slice_rows(x, q_len, t_len))
              : q_new;
    }

    Var h2 = nn::layer_norm(tape, params_, pre + ".ln2", x);
    x = tape.add(x, nn::feed_forward(tape, params_, pre + ".ffn", h2));
  }
  x = nn::layer_norm(tape, params_, "final_ln", x);

  out.query_out = q_len > 0 ? tape.slice_rows(x, 0, q_len)
                            : tape.constant(Mat(0, cfg_.hidden_dim));
  out.text_out = t_len > 0 ? tape.slice_rows(x, q_len, t_len)
                           : tape.constant(Mat(0, cfg_.hidden_dim));
  if (t_len > 0) {
    if (mode == ForwardMode::generate) {
      out.text_logits = tape.matmul_nt(out.text_out, emb);
      out.has_logits = true;
    }
  }
  return out;
}

Var BridgeNet::encode_text_cls(Tape& tape, const TokenSequence& text) {
  if (text.length() == 0 || text.ids[0] != static_cast<int>(Special::CLS) ||
      !text.valid_mask[0])
    throw std::runtime_error("CLS required");
  AttentionMaskPlan mask = build_text_only_mask(text.valid_mask);
  BridgeOutputs out = forward(tape, nullptr, &text, mask, ForwardMode::encode);
  return tape.slice_rows(out.text_out, 0, 1);
}

Var BridgeNet::project_for_contrast(Tape& tape, Var x) {
  if (x.cols() != cfg_.hidden_dim)
    throw std::runtime_error("project_for_contrast: width mismatch");
  Var proj = tape.matmul(x, tape.param(params_, "proj_contrast"));
  return tape.l2_normalize_rows(proj);
}

std::vector<bool> BridgeNet::degenerate_rows(const Mat& x, double eps) {
  std::vector<bool> flags(x.rows());
  for (long i = 0; i < x.rows(); ++i) flags[i] = x.row(i).norm() < eps;
  return flags;
}

}  // namespace mint
