// Shared transformer building blocks used by BridgeNet and the toy LM.

#pragma once

#include <random>
#include <string>

#include "mint/autograd.hpp"

namespace mint::nn {

inline Mat randn(long rows, long cols, std::mt19937_64& rng, double std) {
  std::normal_distribution<double> d(0.0, std);
  Mat m(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

// Registers wq/wk/wv/wo (+ biases) for one attention layer.
inline void init_attention(ParamStore& p, const std::string& prefix, int kv_dim,
                           int dim, std::mt19937_64& rng, double std = 0.02) {
  p.add(prefix + ".wq", randn(dim, dim, rng, std));
  p.add(prefix + ".wk", randn(kv_dim, dim, rng, std));
  p.add(prefix + ".wv", randn(kv_dim, dim, rng, std));
  p.add(prefix + ".wo", randn(dim, dim, rng, std));
  p.add(prefix + ".bq", Mat::Zero(1, dim));
  p.add(prefix + ".bk", Mat::Zero(1, dim));
  p.add(prefix + ".bv", Mat::Zero(1, dim));
  p.add(prefix + ".bo", Mat::Zero(1, dim));
}

inline void init_layer_norm(ParamStore& p, const std::string& prefix, int dim) {
  p.add(prefix + ".g", Mat::Ones(1, dim));
  p.add(prefix + ".b", Mat::Zero(1, dim));
}

inline void init_ffn(ParamStore& p, const std::string& prefix, int dim,
                     int ffn_dim, std::mt19937_64& rng, double std = 0.02) {
  p.add(prefix + ".w1", randn(dim, ffn_dim, rng, std));
  p.add(prefix + ".b1", Mat::Zero(1, ffn_dim));
  p.add(prefix + ".w2", randn(ffn_dim, dim, rng, std));
  p.add(prefix + ".b2", Mat::Zero(1, dim));
}

struct AttnResult {
  Var out;
  std::vector<Mat> probs;  // one per head, filled only when recording
};

// Multi-head attention; x_q attends x_kv under the additive mask
// (empty mask = everything allowed).
inline AttnResult multi_head_attention(Tape& t, ParamStore& p,
                                       const std::string& prefix, Var x_q,
                                       Var x_kv, const Mat& additive_mask,
                                       int num_heads, bool record = false) {
  Var q = t.add_row_broadcast(t.matmul(x_q, t.param(p, prefix + ".wq")),
                              t.param(p, prefix + ".bq"));
  Var k = t.add_row_broadcast(t.matmul(x_kv, t.param(p, prefix + ".wk")),
                              t.param(p, prefix + ".bk"));
  Var v = t.add_row_broadcast(t.matmul(x_kv, t.param(p, prefix + ".wv")),
                              t.param(p, prefix + ".bv"));
  long dim = q.cols();
  long dh = dim / num_heads;
  AttnResult res;
  std::vector<Var> heads;
  for (int h = 0; h < num_heads; ++h) {
    Var qh = t.slice_cols(q, h * dh, dh);
    Var kh = t.slice_cols(k, h * dh, dh);
    Var vh = t.slice_cols(v, h * dh, dh);
    Var scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt((double)dh));
    Var probs = t.softmax_rows(scores, additive_mask);
    if (record) res.probs.push_back(probs.val());
    heads.push_back(t.matmul(probs, vh));
  }
  Var cat = t.concat_cols(heads);
  res.out = t.add_row_broadcast(t.matmul(cat, t.param(p, prefix + ".wo")),
                                t.param(p, prefix + ".bo"));
  return res;
}

inline Var feed_forward(Tape& t, ParamStore& p, const std::string& prefix,
                        Var x) {
  Var h = t.gelu(t.add_row_broadcast(t.matmul(x, t.param(p, prefix + ".w1")),
                                     t.param(p, prefix + ".b1")));
  return t.add_row_broadcast(t.matmul(h, t.param(p, prefix + ".w2")),
                             t.param(p, prefix + ".b2"));
}

inline Var layer_norm(Tape& t, ParamStore& p, const std::string& prefix,
                      Var x) {
  return t.layer_norm_rows(x, t.param(p, prefix + ".g"),
                           t.param(p, prefix + ".b"));
}

}  // namespace mint::nn
