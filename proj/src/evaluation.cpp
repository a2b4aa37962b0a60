#include "mint/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mint {

RougeScore rouge_l(const std::string& candidate, const std::string& reference) {
  std::vector<std::string> c = split_lower(candidate);
  std::vector<std::string> r = split_lower(reference);
  if (c.empty() || r.empty()) return {};

  size_t n = c.size(), m = r.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      dp[i][j] = (c[i - 1] == r[j - 1]) ? dp[i - 1][j - 1] + 1
                                        : std::max(dp[i - 1][j], dp[i][j - 1]);
  double lcs = dp[n][m];
  RougeScore s;
  s.precision = lcs / n;
  s.recall = lcs / m;
  s.f1 = (s.precision + s.recall > 0)
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

std::string vocab_rank_classify(GenerativeStage& model,
                                const AudioFeatureMap& audio,
                                const TokenSequence& instruction,
                                const std::vector<std::string>& candidates) {
  if (candidates.empty()) throw std::runtime_error("no candidates");
  std::string best;
  double best_score = 0.0;
  bool first = true;
  for (const std::string& cand : candidates) {
    double s = model.score_candidate(audio, instruction, cand);
    if (first || s > best_score || (s == best_score && cand < best)) {
      best = cand;
      best_score = s;
      first = false;
    }
  }
  return best;
}

namespace {

Mat audio_embedding(BridgeNet& net, const AudioFeatureMap& audio) {
  Tape tape;
  AttentionMaskPlan mask = build_unimodal_mask(net.config().num_queries, {});
  BridgeOutputs out = net.forward(tape, &audio, nullptr, mask);
  return net.project_for_contrast(tape, out.query_out).val();
}

Eigen::RowVectorXd text_embedding(BridgeNet& net, const Vocabulary& vocab,
                                  const std::string& text, int max_text_len) {
  max_text_len = std::min(max_text_len, net.config().max_text_len);
  Tape tape;
  TokenSequence seq = encode(vocab, text, Special::CLS, false, max_text_len);
  Var cls = net.encode_text_cls(tape, seq);
  return net.project_for_contrast(tape, cls).val().row(0);
}

}  // namespace

RetrievalResult retrieval_eval(BridgeNet& net, const Vocabulary& vocab,
                               const RetrievalCorpus& corpus,
                               const std::vector<std::string>& text_queries,
                               const std::vector<std::string>& relevant_clip,
                               std::optional<int> rerank_top,
                               int max_text_len) {
  if (text_queries.size() != relevant_clip.size())
    throw std::runtime_error("queries/relevance size mismatch");
  size_t n_clips = corpus.clips.size();

  max_text_len = std::min(max_text_len, net.config().max_text_len);
  std::map<std::string, size_t> clip_index;
  for (size_t i = 0; i < n_clips; ++i) clip_index[corpus.clip_ids[i]] = i;
  for (const std::string& rel : relevant_clip)
    if (!clip_index.count(rel))
      throw std::runtime_error("relevance target missing from corpus: " + rel);

  std::vector<Mat> audio_proj;
  for (const AudioFeatureMap& clip : corpus.clips)
    audio_proj.push_back(audio_embedding(net, clip));

  RetrievalResult res;
  for (size_t q = 0; q < text_queries.size(); ++q) {
    Eigen::RowVectorXd tproj =
        text_embedding(net, vocab, text_queries[q], max_text_len);
    std::vector<double> sims(n_clips);
    for (size_t i = 0; i < n_clips; ++i)
      sims[i] = alc_similarity(audio_proj[i], tproj);

    // Stable descending order; ties keep original clip order.
    std::vector<size_t> order(n_clips);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return sims[a] > sims[b]; });

    if (rerank_top && *rerank_top > 1) {
      size_t k = std::min<size_t>(*rerank_top, n_clips);
      TokenSequence cap =
          encode(vocab, text_queries[q], Special::CLS, false, max_text_len);
      std::vector<double> alm(k);
      for (size_t i = 0; i < k; ++i)
        alm[i] = alm_match_score(net, corpus.clips[order[i]], cap);
      std::vector<size_t> top(order.begin(), order.begin() + k);
      std::vector<size_t> pos(k);
      std::iota(pos.begin(), pos.end(), 0);
      std::stable_sort(pos.begin(), pos.end(),
                       [&](size_t a, size_t b) { return alm[a] > alm[b]; });
      for (size_t i = 0; i < k; ++i) order[i] = top[pos[i]];
    }

    size_t target = clip_index[relevant_clip[q]];
    int rank = 0;
    for (size_t i = 0; i < n_clips; ++i)
      if (order[i] == target) {
        rank = static_cast<int>(i) + 1;
        break;
      }
    res.ranks.push_back(rank);
  }

  for (int k : {1, 5, 10}) {
    int hits = 0;
    for (int r : res.ranks) hits += (r <= k) ? 1 : 0;
    res.r_at[k] = 100.0 * hits / std::max<size_t>(res.ranks.size(), 1);
  }
  return res;
}

ClassificationResult classify_suite(
    const std::vector<TemplateRecord>& records,
    const std::vector<AudioFeatureMap>& audio, GenerativeStage& model,
    const TemplateTable& table, int max_text_len) {
  if (records.empty()) throw std::runtime_error("no records");
  max_text_len = std::min(max_text_len, model.bridge().config().max_text_len);
  const std::string& tid = records[0].template_id;
  for (const TemplateRecord& r : records) {
    if (r.template_id != tid) throw std::runtime_error("mixed templates");
    if (r.task_kind != TaskKind::classification)
      throw std::runtime_error("not a classification record");
  }
  const TemplateDef& def = table.get(tid);

  ClassificationResult res;
  int correct = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    TokenSequence instr = encode(model.vocab(), records[i].input_prompt,
                                 std::nullopt, false, max_text_len);
    std::string pred =
        vocab_rank_classify(model, audio[i], instr, def.labels);
    res.predictions.push_back(pred);
    bool ok = pred == records[i].output_text;
    correct += ok ? 1 : 0;
    auto& pc = res.per_class[records[i].output_text];
    pc.first += ok ? 1 : 0;
    pc.second += 1;
  }
  res.accuracy = 100.0 * correct / records.size();
  return res;
}

ClassificationResult classify_stage1_similarity(
    const std::vector<TemplateRecord>& records,
    const std::vector<AudioFeatureMap>& audio, BridgeNet& net,
    const Vocabulary& vocab, const TemplateTable& table, int max_text_len) {
  if (records.empty()) throw std::runtime_error("no records");
  max_text_len = std::min(max_text_len, net.config().max_text_len);
  const TemplateDef& def = table.get(records[0].template_id);

  std::vector<Eigen::RowVectorXd> label_proj;
  for (const std::string& label : def.labels)
    label_proj.push_back(text_embedding(net, vocab, label, max_text_len));

  ClassificationResult res;
  int correct = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    Mat aproj = audio_embedding(net, audio[i]);
    size_t best = 0;
    double best_sim = alc_similarity(aproj, label_proj[0]);
    for (size_t l = 1; l < def.labels.size(); ++l) {
      double s = alc_similarity(aproj, label_proj[l]);
      if (s > best_sim) {
        best_sim = s;
        best = l;
      }
    }
    res.predictions.push_back(def.labels[best]);
    bool ok = def.labels[best] == records[i].output_text;
    correct += ok ? 1 : 0;
    auto& pc = res.per_class[records[i].output_text];
    pc.first += ok ? 1 : 0;
    pc.second += 1;
  }
  res.accuracy = 100.0 * correct / records.size();
  return res;
}

}  // namespace mint
