#include "mint/objectives.hpp"

#include <stdexcept>

namespace mint {

double alc_similarity(const Mat& query_out_proj,
                      const Eigen::RowVectorXd& text_cls_proj) {
  return (query_out_proj * text_cls_proj.transpose()).maxCoeff();
}

Pairing select_hard_negatives(const Mat& sim) {
  long b = sim.rows();
  if (b < 2 || sim.cols() != b)
    throw std::runtime_error("ALM requires negatives");
  Pairing p;
  p.neg_text_for_audio.resize(b);
  p.neg_audio_for_text.resize(b);
  for (long i = 0; i < b; ++i) {
    long best = i == 0 ? 1 : 0;
    for (long j = 0; j < b; ++j)
      if (j != i && sim(i, j) > sim(i, best)) best = j;
    p.neg_text_for_audio[i] = static_cast<int>(best);
  }
  for (long j = 0; j < b; ++j) {
    long best = j == 0 ? 1 : 0;
    for (long i = 0; i < b; ++i)
      if (i != j && sim(i, j) > sim(best, j)) best = i;
    p.neg_audio_for_text[j] = static_cast<int>(best);
  }
  return p;
}

namespace {

// Similarity matrix S[i][j] = max over queries of <proj(q_i), proj(cls_j)>.
Var similarity_matrix(Tape& tape, BridgeNet& net, const Stage1Batch& batch) {
  int b = batch.size();
  int nq = net.config().num_queries;
  std::vector<Var> audio_proj;
  for (int i = 0; i < b; ++i) {
    AttentionMaskPlan mask = build_unimodal_mask(nq, {});
    BridgeOutputs out = net.forward(tape, &batch.audio[i], nullptr, mask);
    audio_proj.push_back(net.project_for_contrast(tape, out.query_out));
  }
  std::vector<Var> text_proj;
  for (int j = 0; j < b; ++j) {
    Var cls = net.encode_text_cls(tape, batch.captions_cls[j]);
    text_proj.push_back(net.project_for_contrast(tape, cls));
  }
  std::vector<Var> cells;
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      cells.push_back(tape.max_all(tape.matmul_nt(audio_proj[i], text_proj[j])));
  return tape.stack_scalars(cells, b, b);
}

Var info_nce(Tape& tape, Var logits, bool symmetric) {
  long b = logits.rows();
  std::vector<int> diag(b);
  for (long i = 0; i < b; ++i) diag[i] = static_cast<int>(i);
  std::vector<bool> all(b, true);
  Var row_ce = tape.cross_entropy_rows(logits, diag, all);
  if (!symmetric) return row_ce;
  Var col_ce = tape.cross_entropy_rows(tape.transpose(logits), diag, all);
  return tape.scale(tape.add(row_ce, col_ce), 0.5);
}

}  // namespace

Var alc_loss(Tape& tape, BridgeNet& net, const Stage1Batch& batch,
             bool symmetric, Mat* sim_out) {
  if (batch.size() == 0) throw std::runtime_error("empty batch");
  Var sim = similarity_matrix(tape, net, batch);
  if (sim_out) *sim_out = sim.val();
  Var tau = tape.clamp(tape.param(net.params(), "temperature"), 0.001, 0.5);
  Var logits = tape.mul_scalar(sim, tape.reciprocal(tau));
  return info_nce(tape, logits, symmetric);
}

namespace {

// Averaged-over-queries two-class logits for one (audio, caption) pair
// under the bidirectional mask.
Var alm_pair_logits(Tape& tape, BridgeNet& net, const AudioFeatureMap& audio,
                    const TokenSequence& caption_cls) {
  int nq = net.config().num_queries;
  AttentionMaskPlan mask = build_bidirectional_mask(nq, caption_cls.valid_mask);
  BridgeOutputs out = net.forward(tape, &audio, &caption_cls, mask);
  Var logits = tape.add_row_broadcast(
      tape.matmul(out.query_out, tape.param(net.params(), "alm_head.w")),
      tape.param(net.params(), "alm_head.b"));
  Mat avg = Mat::Constant(1, nq, 1.0 / nq);
  return tape.matmul(tape.constant(avg), logits);  // 1 x 2
}

}  // namespace

Var alm_loss(Tape& tape, BridgeNet& net, const Stage1Batch& batch,
             const Pairing& pairing) {
  int b = batch.size();
  if (b < 2) throw std::runtime_error("ALM requires negatives");
  std::vector<Var> rows;
  std::vector<int> labels;
  for (int i = 0; i < b; ++i) {
    rows.push_back(alm_pair_logits(tape, net, batch.audio[i],
                                   batch.captions_cls[i]));
    labels.push_back(1);
  }
  for (int i = 0; i < b; ++i) {
    int j = pairing.neg_text_for_audio.at(i);
    rows.push_back(alm_pair_logits(tape, net, batch.audio[i],
                                   batch.captions_cls[j]));
    labels.push_back(0);
  }
  Var logits = tape.concat_rows(rows);
  std::vector<bool> all(labels.size(), true);
  return tape.cross_entropy_rows(logits, labels, all);
}

double alm_match_score(BridgeNet& net, const AudioFeatureMap& audio,
                       const TokenSequence& caption_cls) {
  Tape tape;
  Mat logits = alm_pair_logits(tape, net, audio, caption_cls).val();
  return logits(0, 1) - logits(0, 0);
}

Var atg_loss(Tape& tape, BridgeNet& net, const Stage1Batch& batch) {
  if (batch.size() == 0) throw std::runtime_error("empty batch");
  int nq = net.config().num_queries;
  std::vector<Var> losses;
  std::vector<double> weights;
  double total_tokens = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    const TokenSequence& cap = batch.captions_gen[i];
    if (cap.valid_count() < 2)
      throw std::runtime_error("caption with no valid tokens");
    AttentionMaskPlan mask = build_causal_multimodal_mask(nq, cap.valid_mask);
    BridgeOutputs out = net.forward(tape, &batch.audio[i], &cap, mask,
                                    ForwardMode::generate);
    // Position k predicts token k+1.
    int t = cap.length();
    std::vector<int> targets(t, 0);
    std::vector<bool> use(t, false);
    int n_tok = 0;
    for (int k = 0; k + 1 < t; ++k) {
      if (cap.valid_mask[k] && cap.valid_mask[k + 1]) {
        targets[k] = cap.ids[k + 1];
        use[k] = true;
        ++n_tok;
      }
    }
    losses.push_back(tape.cross_entropy_rows(out.text_logits, targets, use));
    weights.push_back(n_tok);
    total_tokens += n_tok;
  }
  // Token-level mean across the whole batch.
  Var acc = tape.scale(losses[0], weights[0] / total_tokens);
  for (size_t i = 1; i < losses.size(); ++i)
    acc = tape.add(acc, tape.scale(losses[i], weights[i] / total_tokens));
  return acc;
}

Stage1StepResult stage1_losses(Tape& tape, BridgeNet& net,
                               const Stage1Batch& batch, LossFlags flags) {
  if (!flags.alc && !flags.alm && !flags.atg)
    throw std::runtime_error("no objectives enabled");
  if (batch.size() == 0) throw std::runtime_error("empty batch");

  Stage1StepResult res;
  res.report.enabled = flags;
  std::vector<Var> parts;

  Mat sim;
  bool need_sim = flags.alc || flags.alm;
  if (flags.alc) {
    Var l = alc_loss(tape, net, batch, flags.alc_symmetric, &sim);
    res.report.alc = l.val()(0, 0);
    parts.push_back(l);
  } else if (need_sim) {
    // ALM-only: still mine negatives from ALC similarities, without the
    // contrastive loss itself.
    Tape scratch;
    BridgeNet& n = net;
    Var s = similarity_matrix(scratch, n, batch);
    sim = s.val();
  }
  if (flags.alm) {
    Pairing pairing = select_hard_negatives(sim);
    Var l = alm_loss(tape, net, batch, pairing);
    res.report.alm = l.val()(0, 0);
    parts.push_back(l);
  }
  if (flags.atg) {
    Var l = atg_loss(tape, net, batch);
    res.report.atg = l.val()(0, 0);
    parts.push_back(l);
  }

  Var total = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) total = tape.add(total, parts[i]);
  res.report.total = total.val()(0, 0);
  res.total = total;
  return res;
}

}  // namespace mint
