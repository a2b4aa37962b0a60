#include "mint/masking.hpp"

#include <stdexcept>

namespace mint {

namespace {

using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

AttentionMaskPlan init_plan(int q_len, const std::vector<bool>& text_valid,
                            MaskKind kind) {
  AttentionMaskPlan p;
  p.q_len = q_len;
  p.t_len = static_cast<int>(text_valid.size());
  p.kind = kind;
  p.allow = BoolMat::Constant(p.total(), p.total(), false);
  return p;
}

void require_queries(int q_len) {
  if (q_len < 1) throw std::runtime_error("no queries");
}

}  // namespace

Eigen::MatrixXd AttentionMaskPlan::additive() const {
  Eigen::MatrixXd m(allow.rows(), allow.cols());
  for (long i = 0; i < allow.rows(); ++i)
    for (long j = 0; j < allow.cols(); ++j) m(i, j) = allow(i, j) ? 0.0 : -1e9;
  return m;
}

std::string AttentionMaskPlan::to_grid() const {
  std::string s;
  for (long i = 0; i < allow.rows(); ++i) {
    for (long j = 0; j < allow.cols(); ++j) s.push_back(allow(i, j) ? '1' : '0');
    s.push_back('\n');
  }
  return s;
}

AttentionMaskPlan build_unimodal_mask(int q_len,
                                      const std::vector<bool>& text_valid) {
  require_queries(q_len);
  AttentionMaskPlan p = init_plan(q_len, text_valid, MaskKind::unimodal);
  for (int i = 0; i < q_len; ++i)
    for (int j = 0; j < q_len; ++j) p.allow(i, j) = true;
  for (int i = 0; i < p.t_len; ++i)
    for (int j = 0; j < p.t_len; ++j)
      p.allow(q_len + i, q_len + j) = text_valid[j];
  return p;
}

AttentionMaskPlan build_bidirectional_mask(int q_len,
                                           const std::vector<bool>& text_valid) {
  require_queries(q_len);
  AttentionMaskPlan p = init_plan(q_len, text_valid, MaskKind::bidirectional);
  for (int i = 0; i < p.total(); ++i)
    for (int j = 0; j < p.total(); ++j)
      p.allow(i, j) = j < q_len || text_valid[j - q_len];
  return p;
}

AttentionMaskPlan build_causal_multimodal_mask(
    int q_len, const std::vector<bool>& text_valid) {
  require_queries(q_len);
  AttentionMaskPlan p =
      init_plan(q_len, text_valid, MaskKind::causal_multimodal);
  for (int i = 0; i < q_len; ++i)
    for (int j = 0; j < q_len; ++j) p.allow(i, j) = true;
  for (int i = 0; i < p.t_len; ++i) {
    for (int j = 0; j < q_len; ++j) p.allow(q_len + i, j) = true;
    for (int j = 0; j <= i; ++j)
      p.allow(q_len + i, q_len + j) = text_valid[j];
  }
  return p;
}

AttentionMaskPlan build_text_only_mask(const std::vector<bool>& text_valid) {
  AttentionMaskPlan p = init_plan(0, text_valid, MaskKind::text_only);
  for (int i = 0; i < p.t_len; ++i)
    for (int j = 0; j < p.t_len; ++j) p.allow(i, j) = text_valid[j];
  return p;
}

}  // namespace mint
