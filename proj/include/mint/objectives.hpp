// Stage-1 losses: audio-language contrastive (ALC), audio-language
// matching (ALM) and audio-grounded text generation (ATG).

#pragma once

#include <vector>

#include "mint/bridge_net.hpp"

namespace mint {

struct Stage1Batch {
  std::vector<AudioFeatureMap> audio;
  std::vector<TokenSequence> captions_cls;  // CLS-prefixed, for ALC/ALM
  std::vector<TokenSequence> captions_gen;  // DEC-prefixed + EOS, for ATG

  int size() const { return static_cast<int>(audio.size()); }
};

struct LossFlags {
  bool alc = true;
  bool alm = true;
  bool atg = true;
  bool alc_symmetric = true;  // audio->text and text->audio cross-entropy
};

struct Stage1LossReport {
  double alc = 0.0;
  double alm = 0.0;
  double atg = 0.0;
  double total = 0.0;
  LossFlags enabled;
};

struct Pairing {
  std::vector<int> neg_text_for_audio;  // hardest text index per audio
  std::vector<int> neg_audio_for_text;  // hardest audio index per text
};

// Plain similarity used by evaluation: max over query rows of dot products.
// Inputs are expected to be L2-normalized.
double alc_similarity(const Mat& query_out_proj,
                      const Eigen::RowVectorXd& text_cls_proj);

// Hardest in-batch negatives under the ALC similarity matrix; ties break
// toward the lowest index.
Pairing select_hard_negatives(const Mat& sim_matrix);

struct Stage1StepResult {
  Stage1LossReport report;
  Var total;  // scalar on the tape, ready for backward()
};

// Runs one forward per enabled objective (each with its own mask) and
// sums the enabled losses with unit weights.
Stage1StepResult stage1_losses(Tape& tape, BridgeNet& net,
                               const Stage1Batch& batch, LossFlags flags);

// Individual losses, exposed for targeted tests. Each builds its own
// forwards on the given tape.
Var alc_loss(Tape& tape, BridgeNet& net, const Stage1Batch& batch,
             bool symmetric, Mat* sim_out = nullptr);
Var alm_loss(Tape& tape, BridgeNet& net, const Stage1Batch& batch,
             const Pairing& pairing);
Var atg_loss(Tape& tape, BridgeNet& net, const Stage1Batch& batch);

// ALM matching score (match logit minus non-match logit) for one pair;
// no gradients, used by retrieval reranking and evaluation.
double alm_match_score(BridgeNet& net, const AudioFeatureMap& audio,
                       const TokenSequence& caption_cls);

}  // namespace mint
