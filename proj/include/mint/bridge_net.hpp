// BridgeNet: learnable queries plus a transformer stack whose
// self-attention is shared between the query and text streams, with
// periodic cross-attention from query positions into frozen audio
// features.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mint/autograd.hpp"
#include "mint/frozen.hpp"
#include "mint/masking.hpp"
#include "mint/tokenizer.hpp"

namespace mint {

struct BridgeNetConfig {
  int num_queries = 32;
  int hidden_dim = 64;
  int num_blocks = 2;
  int num_heads = 4;
  int cross_attention_period = 2;  // cross-attention on blocks i % period == 0
  int ffn_dim = 128;
  int contrastive_proj_dim = 32;
  int vocab_size = 0;
  int max_text_len = 30;
  int audio_feat_dim = 24;
  double init_scale = 0.02;
  unsigned seed = 7;

  void validate() const;
};

enum class ForwardMode { encode, generate };

struct BridgeOutputs {
  Var query_out;                 // num_queries x hidden_dim (0 rows if q_len=0)
  Var text_out;                  // t_len x hidden_dim (0 rows if no text)
  Var text_logits;               // t_len x vocab_size, generate mode only
  bool has_logits = false;
  std::vector<Mat> attn_records; // per-block self-attention probs when probing
};

class BridgeNet {
 public:
  explicit BridgeNet(const BridgeNetConfig& cfg);

  BridgeOutputs forward(Tape& tape, const AudioFeatureMap* audio,
                        const TokenSequence* text,
                        const AttentionMaskPlan& mask,
                        ForwardMode mode = ForwardMode::encode,
                        bool record_attn = false);

  // Text-only encoder path; returns the CLS row (1 x hidden_dim).
  Var encode_text_cls(Tape& tape, const TokenSequence& text);

  // Bias-free linear head + per-row L2 normalization.
  Var project_for_contrast(Tape& tape, Var x);

  // Rows whose norm is below eps come out as zeros from the projection.
  static std::vector<bool> degenerate_rows(const Mat& x, double eps = 1e-12);

  const BridgeNetConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  BridgeNetConfig cfg_;
  ParamStore params_;
};

}  // namespace mint
