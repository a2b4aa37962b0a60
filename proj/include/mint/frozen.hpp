// Frozen backbones: a deterministic toy audio featurizer and a small
// decoder-only language model. Both are immutable after initialization;
// the LM is trained once on the synthetic caption corpus and then frozen.

#pragma once

#include <string>
#include <vector>

#include "mint/autograd.hpp"
#include "mint/tokenizer.hpp"

namespace mint {

struct AudioFeatureMap {
  Mat frames;  // n_frames x feat_dim
  std::string clip_id;
  double duration_s = 0.0;
};

struct AudioEncoderConfig {
  int feat_dim = 24;
  int frame_size = 400;  // 25 ms @ 16 kHz
  int hop = 160;         // 10 ms
  int n_filters = 16;
  unsigned seed = 1234;
};

// Framewise log-magnitude filterbank followed by a fixed seeded linear map.
class FrozenAudioEncoder {
 public:
  explicit FrozenAudioEncoder(const AudioEncoderConfig& cfg);

  AudioFeatureMap encode(const std::vector<double>& waveform, int sample_rate,
                         const std::string& clip_id = "") const;

  const AudioEncoderConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }

 private:
  AudioEncoderConfig cfg_;
  std::vector<double> filter_hz_;
  ParamStore params_;  // frozen projection, kept here so it can be hashed
};

struct FrozenLMConfig {
  int vocab_size = 0;
  int lm_dim = 64;
  int lm_blocks = 2;
  int lm_heads = 4;
  int max_positions = 96;
  int ffn_dim = 128;
  unsigned seed = 99;
};

// Decoder-only causal transformer with tied input/output embeddings.
// Soft prompts are prepended as raw embedding rows with no positional
// term; text token t gets learned position t.
class FrozenLM {
 public:
  explicit FrozenLM(const FrozenLMConfig& cfg);

  // Causal logits for the text positions only. prefix may be a 0-row Var.
  Var forward(Tape& tape, Var prefix, const std::vector<int>& text_ids,
              const std::vector<bool>& text_valid) const;
  // Logits for every stream position (prefix rows included).
  Var forward_full(Tape& tape, Var prefix, const std::vector<int>& text_ids,
                   const std::vector<bool>& text_valid) const;

  // Convenience no-grad entry points.
  Mat lm_forward(const Mat& prefix, const TokenSequence& text) const;
  double lm_score(const Mat& prefix, const TokenSequence& prompt,
                  const TokenSequence& candidate) const;
  TokenSequence lm_generate_greedy(const Mat& prefix,
                                   const TokenSequence& prompt,
                                   int max_new) const;

  const FrozenLMConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  void freeze() { params_.frozen = true; }

 private:
  FrozenLMConfig cfg_;
  mutable ParamStore params_;  // tape attachment needs non-const access
};

}  // namespace mint
