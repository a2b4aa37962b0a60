#include <vector>

#include "doctest.h"
#include "mint/masking.hpp"

using namespace mint;

namespace {
using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

BoolMat from_rows(const std::vector<std::vector<int>>& rows) {
  BoolMat m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j] != 0;
  return m;
}
}  // namespace

TEST_CASE("unimodal mask examples") {
  CHECK(build_unimodal_mask(2, {true, true}).allow ==
        from_rows({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}}));
  AttentionMaskPlan p = build_unimodal_mask(1, {true, false});
  for (int i = 0; i < 3; ++i) CHECK_FALSE(p.allow(i, 2));  // t2 column false
  CHECK(p.allow.row(0).transpose() == from_rows({{1}, {0}, {0}}).col(0));
  CHECK(p.allow.row(1).transpose() == from_rows({{0}, {1}, {0}}).col(0));
  AttentionMaskPlan q = build_unimodal_mask(3, {});
  CHECK(q.allow == from_rows({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}));
}

TEST_CASE("bidirectional mask examples") {
  CHECK(build_bidirectional_mask(2, {true, true}).allow ==
        from_rows({{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}}));
  AttentionMaskPlan p = build_bidirectional_mask(2, {true, false});
  for (int i = 0; i < 4; ++i) {
    CHECK_FALSE(p.allow(i, 3));
    for (int j = 0; j < 3; ++j) CHECK(p.allow(i, j));
  }
  CHECK(build_bidirectional_mask(1, {true, true, true}).allow ==
        from_rows({{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}}));
}

TEST_CASE("causal multimodal mask examples") {
  CHECK(build_causal_multimodal_mask(2, {true, true}).allow ==
        from_rows({{1, 1, 0, 0}, {1, 1, 0, 0}, {1, 1, 1, 0}, {1, 1, 1, 1}}));
  CHECK(build_causal_multimodal_mask(1, {true}).allow ==
        from_rows({{1, 0}, {1, 1}}));
  AttentionMaskPlan p = build_causal_multimodal_mask(2, {true, true, false});
  for (int i = 0; i < 5; ++i) CHECK_FALSE(p.allow(i, 4));
  CHECK(p.allow.row(3).transpose() ==
        from_rows({{1}, {1}, {1}, {1}, {0}}).col(0));
}

TEST_CASE("q_len = 0 errors") {
  CHECK_THROWS_WITH(build_unimodal_mask(0, {true}), "no queries");
  CHECK_THROWS_WITH(build_bidirectional_mask(0, {true}), "no queries");
  CHECK_THROWS_WITH(build_causal_multimodal_mask(0, {true}), "no queries");
}

TEST_CASE("text-only mask for the CLS path") {
  AttentionMaskPlan p = build_text_only_mask({true, true, false});
  CHECK(p.q_len == 0);
  CHECK(p.t_len == 3);
  for (int i = 0; i < 3; ++i) CHECK_FALSE(p.allow(i, 2));  // padded column
  CHECK(p.allow.row(0).transpose() == from_rows({{1}, {1}, {0}}).col(0));
  CHECK(p.allow.row(1).transpose() == from_rows({{1}, {1}, {0}}).col(0));
}

TEST_CASE("additive form is 0 / -1e9") {
  AttentionMaskPlan p = build_unimodal_mask(1, {true});
  Eigen::MatrixXd a = p.additive();
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == -1e9);
  CHECK(a(1, 0) == -1e9);
  CHECK(a(1, 1) == 0.0);
}

TEST_CASE("debug grid golden") {
  CHECK(build_causal_multimodal_mask(1, {true}).to_grid() == "10\n11\n");
}

TEST_CASE("mask invariants over small shapes") {
  for (int q = 1; q <= 4; ++q) {
    for (int t = 0; t <= 4; ++t) {
      for (int pat = 0; pat < (1 << t); ++pat) {
        std::vector<bool> valid(t);
        bool suffix_ok = true;
        for (int j = 0; j < t; ++j) valid[j] = (pat >> j) & 1;
        for (int j = 1; j < t; ++j)
          if (valid[j] && !valid[j - 1]) suffix_ok = false;
        if (!suffix_ok) continue;  // padding is always a suffix

        auto uni = build_unimodal_mask(q, valid);
        auto bid = build_bidirectional_mask(q, valid);
        auto cau = build_causal_multimodal_mask(q, valid);
        int n = q + t;
        for (int i = 0; i < n; ++i) {
          bool row_valid = i < q || valid[i - q];
          if (row_valid) {
            CHECK(uni.allow(i, i));
            CHECK(bid.allow(i, i));
            CHECK(cau.allow(i, i));
          }
          for (int j = 0; j < n; ++j) {
            // padding columns never attendable
            if (j >= q && !valid[j - q]) {
              CHECK_FALSE(uni.allow(i, j));
              CHECK_FALSE(bid.allow(i, j));
              CHECK_FALSE(cau.allow(i, j));
            }
            // bidirectional dominates the other two
            if (uni.allow(i, j)) CHECK(bid.allow(i, j));
            if (cau.allow(i, j)) CHECK(bid.allow(i, j));
            // unimodal: no cross-group edges
            if ((i < q) != (j < q)) CHECK_FALSE(uni.allow(i, j));
            // causal: query-text block false, text-query true, text-text
            // lower-triangular
            if (i < q && j >= q) CHECK_FALSE(cau.allow(i, j));
            if (i >= q && valid[i - q] && j < q) CHECK(cau.allow(i, j));
            if (i >= q && j >= q && j > i) CHECK_FALSE(cau.allow(i, j));
          }
        }
      }
    }
  }
}

TEST_CASE("causal mask prefix stability") {
  std::vector<bool> valid = {true, true, true};
  auto small = build_causal_multimodal_mask(2, {true, true});
  auto big = build_causal_multimodal_mask(2, valid);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(small.allow(i, j) == big.allow(i, j));
}
