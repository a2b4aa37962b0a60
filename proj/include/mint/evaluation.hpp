// Evaluation protocols: vocabulary-ranking classification, text-to-audio
// retrieval R@k, ROUGE-L and plain accuracy.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mint/data.hpp"
#include "mint/generative.hpp"
#include "mint/objectives.hpp"

namespace mint {

struct RetrievalResult {
  std::map<int, double> r_at;  // k -> percentage, k in {1, 5, 10}
  std::vector<int> ranks;      // 1-based rank of the relevant clip per query
};

struct ClassificationResult {
  double accuracy = 0.0;  // percentage
  std::map<std::string, std::pair<int, int>> per_class;  // label -> (correct, total)
  std::vector<std::string> predictions;
};

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Token-level LCS; empty side => all zeros.
RougeScore rouge_l(const std::string& candidate, const std::string& reference);

// Argmax over candidates of the LM log-likelihood given the soft audio
// prompt; ties break toward the lexicographically smallest label.
std::string vocab_rank_classify(GenerativeStage& model,
                                const AudioFeatureMap& audio,
                                const TokenSequence& instruction,
                                const std::vector<std::string>& candidates);

// Text-to-audio retrieval over precomputed stage-1 embeddings: clips are
// ranked per query by ALC similarity (optionally reranking the top-k by
// ALM matching score).
struct RetrievalCorpus {
  std::vector<AudioFeatureMap> clips;
  std::vector<std::string> clip_ids;
};

RetrievalResult retrieval_eval(BridgeNet& net, const Vocabulary& vocab,
                               const RetrievalCorpus& corpus,
                               const std::vector<std::string>& text_queries,
                               const std::vector<std::string>& relevant_clip,
                               std::optional<int> rerank_top = std::nullopt,
                               int max_text_len = 30);

// Vocabulary-ranking classification over a set of records sharing one
// classification template.
ClassificationResult classify_suite(
    const std::vector<TemplateRecord>& records,
    const std::vector<AudioFeatureMap>& audio, GenerativeStage& model,
    const TemplateTable& table, int max_text_len = 30);

// Stage-1-only classification: rank labels by ALC similarity between the
// audio and the label text CLS embedding.
ClassificationResult classify_stage1_similarity(
    const std::vector<TemplateRecord>& records,
    const std::vector<AudioFeatureMap>& audio, BridgeNet& net,
    const Vocabulary& vocab, const TemplateTable& table,
    int max_text_len = 30);

}  // namespace mint
