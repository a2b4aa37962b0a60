// The three self-attention mask strategies over the concatenated
// [queries | text] stream, materialized as boolean attend-allowed
// matrices (rows attend, columns attended).

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mint {

enum class MaskKind { unimodal, bidirectional, causal_multimodal, text_only };

struct AttentionMaskPlan {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> allow;
  int q_len = 0;
  int t_len = 0;
  MaskKind kind = MaskKind::unimodal;

  int total() const { return q_len + t_len; }
  // Additive form for softmax: 0 where allowed, -1e9 where blocked.
  Eigen::MatrixXd additive() const;
  std::string to_grid() const;  // debug dump of 0/1 rows
};

// ALC: queries and text cannot see each other.
AttentionMaskPlan build_unimodal_mask(int q_len,
                                      const std::vector<bool>& text_valid);
// ALM: every valid position attends every valid position.
AttentionMaskPlan build_bidirectional_mask(int q_len,
                                           const std::vector<bool>& text_valid);
// ATG: queries see only queries; text sees all queries plus its prefix.
AttentionMaskPlan build_causal_multimodal_mask(
    int q_len, const std::vector<bool>& text_valid);
// Text-only bidirectional stream (q_len = 0), for the CLS encoder path.
AttentionMaskPlan build_text_only_mask(const std::vector<bool>& text_valid);

}  // namespace mint
