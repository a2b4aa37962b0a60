#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "mint/autograd.hpp"
#include "mint/nn.hpp"

using namespace mint;

namespace {

// Central finite differences against analytic gradients for every tensor
// in the store; loss_fn must rebuild the graph from current values.
void fd_check(ParamStore& store, const std::function<double()>& loss_fn_value,
              const std::function<Var(Tape&)>& loss_fn, double h = 1e-6,
              double tol = 1e-5) {
  Tape tape;
  Var loss = loss_fn(tape);
  store.zero_grads();
  tape.backward(loss);
  std::map<std::string, Mat> analytic = store.grads;

  for (auto& [name, v] : store.values) {
    for (long i = 0; i < v.rows(); ++i) {
      for (long j = 0; j < v.cols(); ++j) {
        double keep = v(i, j);
        v(i, j) = keep + h;
        double up = loss_fn_value();
        v(i, j) = keep - h;
        double dn = loss_fn_value();
        v(i, j) = keep;
        double fd = (up - dn) / (2 * h);
        double an = analytic.at(name)(i, j);
        double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        CHECK(std::abs(fd - an) / denom < tol);
      }
    }
  }
}

void check_op(const std::function<Var(Tape&, ParamStore&)>& build,
              std::vector<std::pair<std::string, std::pair<int, int>>> shapes,
              unsigned seed = 11) {
  ParamStore store;
  std::mt19937_64 rng(seed);
  for (auto& [name, sh] : shapes)
    store.add(name, nn::randn(sh.first, sh.second, rng, 0.7));
  auto loss = [&](Tape& t) { return build(t, store); };
  auto value = [&] {
    Tape t;
    return build(t, store).val()(0, 0);
  };
  fd_check(store, value, loss);
}

}  // namespace

TEST_CASE("gradients: matmul / matmul_nt / add / sub / mul_elem") {
  check_op(
      [](Tape& t, ParamStore& s) {
        Var a = t.param(s, "a"), b = t.param(s, "b"), c = t.param(s, "c");
        Var x = t.matmul(a, b);
        x = t.add(x, t.mul_elem(c, c));
        x = t.sub(x, t.scale(c, 0.3));
        return t.sum_all(t.matmul_nt(x, x));
      },
      {{"a", {3, 4}}, {"b", {4, 5}}, {"c", {3, 5}}});
}

TEST_CASE("gradients: gelu / clamp / reciprocal / mul_scalar") {
  check_op(
      [](Tape& t, ParamStore& s) {
        Var a = t.param(s, "a");
        Var tau = t.param(s, "tau");
        Var x = t.gelu(a);
        x = t.mul_scalar(x, t.reciprocal(t.clamp(tau, 0.2, 2.0)));
        return t.mean_all(t.mul_elem(x, x));
      },
      {{"a", {4, 3}}, {"tau", {1, 1}}});
}

TEST_CASE("gradients: softmax_rows with mask and log_softmax_rows") {
  Mat mask = Mat::Zero(3, 4);
  mask(0, 3) = -1e9;
  mask(2, 0) = -1e9;
  check_op(
      [mask](Tape& t, ParamStore& s) {
        Var a = t.param(s, "a");
        Var p = t.softmax_rows(a, mask);
        Var lp = t.log_softmax_rows(t.param(s, "b"));
        return t.add(t.sum_all(t.mul_elem(p, p)), t.mean_all(lp));
      },
      {{"a", {3, 4}}, {"b", {3, 4}}});
}

TEST_CASE("gradients: layer_norm / l2_normalize / broadcast / concat / slice") {
  check_op(
      [](Tape& t, ParamStore& s) {
        Var a = t.param(s, "a");
        Var x = t.layer_norm_rows(a, t.param(s, "g"), t.param(s, "b"));
        x = t.add_row_broadcast(x, t.param(s, "row"));
        Var y = t.l2_normalize_rows(x);
        Var cat = t.concat_rows(y, t.transpose(t.param(s, "c")));
        Var cols = t.concat_cols({cat, cat});
        Var sl = t.slice_cols(t.slice_rows(cols, 1, 3), 2, 4);
        return t.sum_all(t.mul_elem(sl, sl));
      },
      {{"a", {3, 5}}, {"g", {1, 5}}, {"b", {1, 5}}, {"row", {1, 5}},
       {"c", {5, 2}}});
}

TEST_CASE("gradients: gather / stack_scalars / max / cross_entropy") {
  std::vector<int> ids = {2, 0, 2, 1};
  std::vector<int> targets = {1, 0, 2};
  std::vector<bool> weights = {true, false, true};
  check_op(
      [ids, targets, weights](Tape& t, ParamStore& s) {
        Var table = t.param(s, "table");
        Var g = t.gather_rows(table, ids);
        std::vector<Var> cells;
        for (int i = 0; i < 4; ++i)
          cells.push_back(t.max_all(t.slice_rows(g, i, 1)));
        Var stacked = t.stack_scalars(cells, 2, 2);
        Var logits = t.matmul(stacked, t.param(s, "w"));
        Var more = t.concat_rows(logits, t.slice_rows(logits, 0, 1));
        return t.cross_entropy_rows(more, targets, weights);
      },
      {{"table", {3, 2}}, {"w", {2, 3}}});
}

TEST_CASE("max_all ties break toward the lowest row-major index") {
  Tape t;
  Mat m(2, 2);
  m << 5.0, 5.0, 5.0, 1.0;
  Var v = t.constant(m);
  Var mx = t.max_all(v);
  CHECK(mx.val()(0, 0) == 5.0);
  // Gradient lands only on (0,0).
  ParamStore s;
  s.add("p", m);
  Tape t2;
  Var p = t2.param(s, "p");
  s.zero_grads();
  t2.backward(t2.max_all(p));
  CHECK(s.grads.at("p")(0, 0) == 1.0);
  CHECK(s.grads.at("p")(0, 1) == 0.0);
  CHECK(s.grads.at("p")(1, 0) == 0.0);
}

TEST_CASE("l2_normalize zero row has zero output and zero gradient") {
  ParamStore s;
  Mat m(2, 3);
  m << 0, 0, 0, 1, 2, 2;
  s.add("p", m);
  Tape t;
  Var y = t.l2_normalize_rows(t.param(s, "p"));
  CHECK(y.val().row(0).norm() == 0.0);
  CHECK(y.val().row(1).norm() == doctest::Approx(1.0));
  s.zero_grads();
  t.backward(t.sum_all(y));
  CHECK(s.grads.at("p").row(0).norm() == 0.0);
}

TEST_CASE("frozen store accumulates no gradients") {
  ParamStore s;
  s.add("p", Mat::Ones(2, 2));
  s.frozen = true;
  Tape t;
  Var loss = t.sum_all(t.mul_elem(t.param(s, "p"), t.param(s, "p")));
  s.zero_grads();
  t.backward(loss);
  CHECK(s.grads.at("p").norm() == 0.0);
}

TEST_CASE("backward zeroes then accumulates per call") {
  ParamStore s;
  s.add("p", Mat::Ones(1, 1) * 3.0);
  for (int rep = 0; rep < 2; ++rep) {
    Tape t;
    Var loss = t.mul_elem(t.param(s, "p"), t.param(s, "p"));
    s.zero_grads();
    t.backward(loss);
    CHECK(s.grads.at("p")(0, 0) == doctest::Approx(6.0));
  }
}
