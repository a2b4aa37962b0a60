#include "mint/frozen.hpp"

#include <cmath>
#include <stdexcept>

#include "mint/nn.hpp"

namespace mint {

namespace {
constexpr int kTargetRate = 16000;

std::vector<double> resample_linear(const std::vector<double>& w, int from_sr,
                                    int to_sr) {
  if (from_sr == to_sr) return w;
  double ratio = static_cast<double>(from_sr) / to_sr;
  size_t n = static_cast<size_t>(std::floor((w.size() - 1) / ratio)) + 1;
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    double pos = i * ratio;
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, w.size() - 1);
    double frac = pos - lo;
    out[i] = w[lo] * (1.0 - frac) + w[hi] * frac;
  }
  return out;
}
}  // namespace

FrozenAudioEncoder::FrozenAudioEncoder(const AudioEncoderConfig& cfg)
    : cfg_(cfg) {
  // Geometric filter ladder from 50 Hz up to 6 kHz.
  double lo = 50.0, hi = 6000.0;
  for (int k = 0; k < cfg_.n_filters; ++k) {
    double frac = cfg_.n_filters == 1 ? 0.0 : k / double(cfg_.n_filters - 1);
    filter_hz_.push_back(lo * std::pow(hi / lo, frac));
  }
  std::mt19937_64 rng(cfg_.seed);
  params_.add("proj", nn::randn(cfg_.n_filters, cfg_.feat_dim, rng, 0.5));
  params_.frozen = true;
}

AudioFeatureMap FrozenAudioEncoder::encode(const std::vector<double>& waveform,
                                           int sample_rate,
                                           const std::string& clip_id) const {
  if (waveform.empty()) throw std::runtime_error("empty audio");
  for (double s : waveform)
    if (!std::isfinite(s)) throw std::runtime_error("invalid samples");
  double dur = waveform.size() / static_cast<double>(sample_rate);
  if (dur < 0.1 - 1e-9 || dur > 30.0 + 1e-9)
    throw std::runtime_error("audio duration out of range");

  std::vector<double> w = resample_linear(waveform, sample_rate, kTargetRate);
  long n = static_cast<long>(w.size());
  long n_frames =
      n < cfg_.frame_size ? 1 : 1 + (n - cfg_.frame_size) / cfg_.hop;

  Mat bank(n_frames, cfg_.n_filters);
  for (long f = 0; f < n_frames; ++f) {
    long start = f * cfg_.hop;
    for (int k = 0; k < cfg_.n_filters; ++k) {
      double c = 0.0, s = 0.0;
      double omega = 2.0 * M_PI * filter_hz_[k] / kTargetRate;
      for (int t = 0; t < cfg_.frame_size; ++t) {
        double x = (start + t < n) ? w[start + t] : 0.0;
        c += x * std::cos(omega * t);
        s += x * std::sin(omega * t);
      }
      bank(f, k) = std::log1p(std::sqrt(c * c + s * s));
    }
  }

  AudioFeatureMap out;
  out.frames = bank * params_.values.at("proj");
  out.clip_id = clip_id;
  out.duration_s = dur;
  return out;
}

FrozenLM::FrozenLM(const FrozenLMConfig& cfg) : cfg_(cfg) {
  if (cfg_.lm_dim % cfg_.lm_heads != 0)
    throw std::runtime_error("lm_dim not divisible by lm_heads");
  std::mt19937_64 rng(cfg_.seed);
  params_.add("tok_emb", nn::randn(cfg_.vocab_size, cfg_.lm_dim, rng, 0.02));
  params_.add("pos_emb", nn::randn(cfg_.max_positions, cfg_.lm_dim, rng, 0.02));
  for (int i = 0; i < cfg_.lm_blocks; ++i) {
    std::string b = "block." + std::to_string(i);
    nn::init_layer_norm(params_, b + ".ln1", cfg_.lm_dim);
    nn::init_attention(params_, b + ".selfattn", cfg_.lm_dim, cfg_.lm_dim, rng);
    nn::init_layer_norm(params_, b + ".ln2", cfg_.lm_dim);
    nn::init_ffn(params_, b + ".ffn", cfg_.lm_dim, cfg_.ffn_dim, rng);
  }
  nn::init_layer_norm(params_, "final_ln", cfg_.lm_dim);
}

Var FrozenLM::forward_full(Tape& tape, Var prefix,
                           const std::vector<int>& text_ids,
                           const std::vector<bool>& text_valid) const {
  long p = prefix.tape ? prefix.rows() : 0;
  long t = static_cast<long>(text_ids.size());
  if (p > 0 && prefix.cols() != cfg_.lm_dim)
    throw std::runtime_error("prefix dim");
  if (p + t > cfg_.max_positions)
    throw std::runtime_error("stream exceeds max_positions");
  if (p + t == 0) throw std::runtime_error("empty LM stream");

  Var emb = tape.param(params_, "tok_emb");
  Var x;
  if (t > 0) {
    Var te = tape.gather_rows(emb, text_ids);
    std::vector<int> pos_ids(t);
    for (long i = 0; i < t; ++i) pos_ids[i] = static_cast<int>(i);
    Var pe = tape.gather_rows(tape.param(params_, "pos_emb"), pos_ids);
    Var txt = tape.add(te, pe);
    x = (p > 0) ? tape.concat_rows(prefix, txt) : txt;
  } else {
    x = prefix;
  }

  // Causal mask over [prefix | text]; padded text columns blocked.
  Mat addmask = Mat::Zero(p + t, p + t);
  for (long i = 0; i < p + t; ++i)
    for (long j = 0; j < p + t; ++j) {
      bool ok = j <= i && (j < p || text_valid[j - p]);
      addmask(i, j) = ok ? 0.0 : -1e9;
    }

  for (int b = 0; b < cfg_.lm_blocks; ++b) {
    std::string pre = "block." + std::to_string(b);
    Var h = nn::layer_norm(tape, params_, pre + ".ln1", x);
    Var attn = nn::multi_head_attention(tape, params_, pre + ".selfattn", h, h,
                                        addmask, cfg_.lm_heads)
                   .out;
    x = tape.add(x, attn);
    Var h2 = nn::layer_norm(tape, params_, pre + ".ln2", x);
    x = tape.add(x, nn::feed_forward(tape, params_, pre + ".ffn", h2));
  }
  x = nn::layer_norm(tape, params_, "final_ln", x);
  return tape.matmul_nt(x, emb);
}

Var FrozenLM::forward(Tape& tape, Var prefix, const std::vector<int>& text_ids,
                      const std::vector<bool>& text_valid) const {
  long p = prefix.tape ? prefix.rows() : 0;
  Var full = forward_full(tape, prefix, text_ids, text_valid);
  return tape.slice_rows(full, p, static_cast<long>(text_ids.size()));
}

Mat FrozenLM::lm_forward(const Mat& prefix, const TokenSequence& text) const {
  Tape tape;
  Var pre = prefix.rows() > 0 ? tape.constant(prefix) : Var{};
  return forward(tape, pre, text.ids, text.valid_mask).val();
}

double FrozenLM::lm_score(const Mat& prefix, const TokenSequence& prompt,
                          const TokenSequence& candidate) const {
  std::vector<int> ids;
  for (int i = 0; i < prompt.length(); ++i)
    if (prompt.valid_mask[i]) ids.push_back(prompt.ids[i]);
  long n_prompt = static_cast<long>(ids.size());
  std::vector<int> cand;
  for (int i = 0; i < candidate.length(); ++i)
    if (candidate.valid_mask[i]) cand.push_back(candidate.ids[i]);
  if (cand.empty()) throw std::runtime_error("empty candidate");
  ids.insert(ids.end(), cand.begin(), cand.end());

  long p = prefix.rows();
  if (p + n_prompt == 0)
    throw std::runtime_error("candidate needs at least one conditioning position");

  Tape tape;
  Var pre = p > 0 ? tape.constant(prefix) : Var{};
  std::vector<bool> valid(ids.size(), true);
  Mat logits = forward_full(tape, pre, ids, valid).val();

  double score = 0.0;
  for (size_t k = 0; k < cand.size(); ++k) {
    long pos = p + n_prompt + static_cast<long>(k) - 1;
    Eigen::RowVectorXd row = logits.row(pos);
    double m = row.maxCoeff();
    double lse = m + std::log((row.array() - m).exp().sum());
    score += row(cand[k]) - lse;
  }
  return score;
}

TokenSequence FrozenLM::lm_generate_greedy(const Mat& prefix,
                                           const TokenSequence& prompt,
                                           int max_new) const {
  if (max_new < 1) throw std::runtime_error("max_new must be >= 1");
  std::vector<int> ids;
  for (int i = 0; i < prompt.length(); ++i)
    if (prompt.valid_mask[i]) ids.push_back(prompt.ids[i]);

  TokenSequence out;
  for (int step = 0; step < max_new; ++step) {
    Tape tape;
    Var pre = prefix.rows() > 0 ? tape.constant(prefix) : Var{};
    std::vector<bool> valid(ids.size(), true);
    Mat logits = forward_full(tape, pre, ids, valid).val();
    Eigen::RowVectorXd last = logits.row(logits.rows() - 1);
    int best = 0;
    for (int j = 1; j < last.size(); ++j)
      if (last(j) > last(best)) best = j;  // ties -> lowest id
    ids.push_back(best);
    out.ids.push_back(best);
    out.valid_mask.push_back(true);
    if (best == static_cast<int>(Special::EOS)) break;
  }
  return out;
}

}  // namespace mint
