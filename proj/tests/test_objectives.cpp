#include <cmath>
#include <random>

#include "doctest.h"
#include "mint/objectives.hpp"
#include "mint/tokenizer.hpp"

using namespace mint;

namespace {
BridgeNetConfig tiny_cfg(int vocab = 14) {
  BridgeNetConfig c;
  c.num_queries = 3;
  c.hidden_dim = 8;
  c.num_blocks = 2;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.contrastive_proj_dim = 4;
  c.vocab_size = vocab;
  c.max_text_len = 8;
  c.audio_feat_dim = 6;
  return c;
}

AudioFeatureMap fake_audio(int frames, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  AudioFeatureMap f;
  f.frames = Mat(frames, 6);
  for (long i = 0; i < frames; ++i)
    for (long j = 0; j < 6; ++j) f.frames(i, j) = g(rng);
  f.duration_s = 1.0;
  return f;
}

TokenSequence cls_seq(std::vector<int> body) {
  TokenSequence t;
  t.ids = {1};
  t.valid_mask = {true};
  for (int id : body) {
    t.ids.push_back(id);
    t.valid_mask.push_back(true);
  }
  return t;
}

TokenSequence gen_seq(std::vector<int> body) {
  TokenSequence t;
  t.ids = {2};
  t.valid_mask = {true};
  for (int id : body) {
    t.ids.push_back(id);
    t.valid_mask.push_back(true);
  }
  t.ids.push_back(3);
  t.valid_mask.push_back(true);
  return t;
}

Stage1Batch make_batch(int B, unsigned seed) {
  Stage1Batch b;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < B; ++i) {
    b.audio.push_back(fake_audio(4 + i, seed + i));
    std::vector<int> body;
    for (int k = 0; k < 3; ++k)
      body.push_back(5 + static_cast<int>(rng() % 8));
    b.captions_cls.push_back(cls_seq(body));
    b.captions_gen.push_back(gen_seq(body));
  }
  return b;
}

// Independent symmetric InfoNCE oracle over all B^2 pairs.
double infonce_oracle(const Mat& S, double tau, bool symmetric) {
  long B = S.rows();
  auto ce = [&](const Mat& logits) {
    double total = 0.0;
    for (long i = 0; i < B; ++i) {
      double m = logits.row(i).maxCoeff();
      double lse = m + std::log((logits.row(i).array() - m).exp().sum());
      total += lse - logits(i, i);
    }
    return total / B;
  };
  Mat L = S / tau;
  double a2t = ce(L);
  if (!symmetric) return a2t;
  Mat Lt = L.transpose();
  return 0.5 * (a2t + ce(Lt));
}
}  // namespace

TEST_CASE("alc_similarity examples") {
  Mat q(3, 3);
  q << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Eigen::RowVectorXd t(3);
  t << 1, 0, 0;
  CHECK(alc_similarity(q, t) == doctest::Approx(1.0));

  Mat orth(2, 3);
  orth << 0, 1, 0, 0, 0, 1;
  CHECK(alc_similarity(orth, t) == doctest::Approx(0.0));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Mat r(4, 3);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = g(rng);
    r.row(i).normalize();
  }
  double brute = -2.0;
  for (int i = 0; i < 4; ++i) brute = std::max(brute, r.row(i).dot(t));
  CHECK(alc_similarity(r, t) == doctest::Approx(brute));
}

TEST_CASE("hand-computed 2x2 InfoNCE value") {
  CHECK(infonce_oracle(Mat::Identity(2, 2), 1.0, true) ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-6));
}

TEST_CASE("alc_loss: B=1 is zero") {
  BridgeNet net(tiny_cfg());
  Stage1Batch b = make_batch(1, 2);
  Tape tape;
  CHECK(alc_loss(tape, net, b, true).val()(0, 0) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("alc_loss matches brute-force oracle for B <= 4") {
  BridgeNet net(tiny_cfg());
  double tau = net.params().values.at("temperature")(0, 0);
  tau = std::clamp(tau, 0.001, 0.5);
  for (int B : {2, 3, 4}) {
    Stage1Batch b = make_batch(B, 10 + B);
    for (bool symmetric : {true, false}) {
      Tape tape;
      Mat S;
      double got = alc_loss(tape, net, b, symmetric, &S).val()(0, 0);
      CHECK(got == doctest::Approx(infonce_oracle(S, tau, symmetric))
                       .epsilon(1e-6));
    }
  }
}

TEST_CASE("select_hard_negatives examples") {
  Mat s(2, 2);
  s << 0.9, 0.8, 0.1, 0.95;
  Pairing p = select_hard_negatives(s);
  CHECK(p.neg_text_for_audio[0] == 1);  // only off-diagonal choice
  CHECK(p.neg_audio_for_text[0] == 1);

  Mat eq(3, 3);
  eq.setConstant(0.2);
  eq.diagonal().setConstant(0.9);
  Pairing q = select_hard_negatives(eq);
  CHECK(q.neg_text_for_audio[0] == 1);  // lowest index excluding diagonal
  CHECK(q.neg_text_for_audio[1] == 0);
  CHECK(q.neg_text_for_audio[2] == 0);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  Mat r(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = g(rng);
  Pairing pr = select_hard_negatives(r);
  for (int i = 0; i < 4; ++i) {
    int best = -1;
    double val = -1e18;
    for (int j = 0; j < 4; ++j)
      if (j != i && r(i, j) > val) {
        val = r(i, j);
        best = j;
      }
    CHECK(pr.neg_text_for_audio[i] == best);
  }
  CHECK_THROWS_WITH((void)select_hard_negatives(Mat::Identity(1, 1)),
                    "ALM requires negatives");
}

TEST_CASE("alm_loss: zeroed head gives chance-level ln 2") {
  BridgeNet net(tiny_cfg());
  net.params().values.at("alm_head.w").setZero();
  net.params().values.at("alm_head.b").setZero();
  Stage1Batch b = make_batch(2, 3);
  Pairing p;
  p.neg_text_for_audio = {1, 0};
  p.neg_audio_for_text = {1, 0};
  Tape tape;
  CHECK(alm_loss(tape, net, b, p).val()(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("alm_loss: scripted constant logits give hand-computed BCE") {
  BridgeNet net(tiny_cfg());
  net.params().values.at("alm_head.w").setZero();
  Mat bias(1, 2);
  bias << 0.3, -0.2;  // every example scores the same 2-class logits
  net.params().values.at("alm_head.b") = bias;
  Stage1Batch b = make_batch(2, 4);
  Pairing p;
  p.neg_text_for_audio = {1, 0};
  p.neg_audio_for_text = {1, 0};
  Tape tape;
  double lse = std::log(std::exp(0.3) + std::exp(-0.2));
  // 2 positives (target class 1) + 2 negatives (target class 0).
  double want = 0.5 * ((lse + 0.2) + (lse - 0.3));
  CHECK(alm_loss(tape, net, b, p).val()(0, 0) ==
        doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("alm requires B >= 2") {
  BridgeNet net(tiny_cfg());
  Stage1Batch b = make_batch(1, 5);
  Tape tape;
  CHECK_THROWS_WITH((void)stage1_losses(tape, net, b,
                                        LossFlags{false, true, false}),
                    "ALM requires negatives");
}

TEST_CASE("atg_loss: zeroed embeddings give uniform ln V") {
  BridgeNetConfig cfg = tiny_cfg();
  BridgeNet net(cfg);
  net.params().values.at("tok_emb").setZero();
  net.params().values.at("pos_emb").setZero();
  Stage1Batch b = make_batch(2, 6);
  Tape tape;
  CHECK(atg_loss(tape, net, b).val()(0, 0) ==
        doctest::Approx(std::log(double(cfg.vocab_size))).epsilon(1e-9));
}

TEST_CASE("atg_loss: trailing PAD leaves the loss unchanged") {
  BridgeNet net(tiny_cfg());
  Stage1Batch b = make_batch(2, 7);
  Tape t1;
  double base = atg_loss(t1, net, b).val()(0, 0);
  for (auto& cap : b.captions_gen) {
    cap.ids.push_back(0);
    cap.valid_mask.push_back(false);
  }
  Tape t2;
  CHECK(atg_loss(t2, net, b).val()(0, 0) == base);
}

TEST_CASE("stage1_losses composition") {
  BridgeNet net(tiny_cfg());
  Stage1Batch b = make_batch(3, 8);

  Tape t_alc;
  double alc_only =
      stage1_losses(t_alc, net, b, LossFlags{true, false, false})
          .report.total;
  Tape t_all;
  Stage1StepResult all =
      stage1_losses(t_all, net, b, LossFlags{true, true, true});
  CHECK(all.report.total ==
        doctest::Approx(all.report.alc + all.report.alm + all.report.atg)
            .epsilon(1e-9));
  CHECK(all.report.alc == doctest::Approx(alc_only).epsilon(1e-12));

  // Toggling ATG off leaves alc and alm unchanged.
  Tape t_two;
  Stage1StepResult two =
      stage1_losses(t_two, net, b, LossFlags{true, true, false});
  CHECK(two.report.alc == all.report.alc);
  CHECK(two.report.alm == all.report.alm);

  Tape t_none;
  CHECK_THROWS_WITH(
      (void)stage1_losses(t_none, net, b, LossFlags{false, false, false}),
      "no objectives enabled");
}

TEST_CASE("alm_match_score is deterministic") {
  BridgeNet net(tiny_cfg());
  Stage1Batch b = make_batch(1, 9);
  double a = alm_match_score(net, b.audio[0], b.captions_cls[0]);
  CHECK(a == alm_match_score(net, b.audio[0], b.captions_cls[0]));
}
