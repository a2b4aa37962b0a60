// Reverse-mode autodiff over dense double matrices.
// A Tape owns the computation graph of one forward/backward pass;
// persistent parameters live in a ParamStore and are re-attached as
// leaves each step.

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mint {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  const Mat& val() const;
  long rows() const { return val().rows(); }
  long cols() const { return val().cols(); }
};

// Named parameter tensors plus accumulated gradients. A frozen store
// never accumulates gradients, so its tensors cannot drift.
struct ParamStore {
  std::map<std::string, Mat> values;
  std::map<std::string, Mat> grads;
  bool frozen = false;

  Mat& add(const std::string& name, Mat init);
  void zero_grads();
  bool has(const std::string& name) const { return values.count(name) > 0; }
};

class Tape {
 public:
  // Leaves.
  Var constant(Mat v);
  Var param(ParamStore& store, const std::string& name);

  // Elementwise / structural.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul_elem(Var a, Var b);
  Var scale(Var a, double s);
  Var mul_scalar(Var a, Var s);      // s is 1x1
  Var reciprocal(Var s);             // 1x1
  Var clamp(Var a, double lo, double hi);
  Var gelu(Var a);
  Var transpose(Var a);
  Var add_row_broadcast(Var a, Var row);  // row is 1 x cols
  Var concat_rows(Var a, Var b);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_rows(Var a, long r0, long n);
  Var slice_cols(Var a, long c0, long n);
  Var stack_scalars(const std::vector<Var>& cells, long rows, long cols);

  // Linear algebra.
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T

  // Rows as distributions.
  Var softmax_rows(Var a, const Mat& additive_mask);
  Var log_softmax_rows(Var a);
  Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-6);
  Var l2_normalize_rows(Var a, double eps = 1e-12);

  // Gathers / reductions.
  Var gather_rows(Var table, const std::vector<int>& ids);
  Var max_all(Var a);   // 1x1; ties -> lowest (row, col) in row-major order
  Var sum_all(Var a);   // 1x1
  Var mean_all(Var a);  // 1x1
  // Mean of -log softmax(row i)[targets[i]] over rows with weight true.
  Var cross_entropy_rows(Var logits, const std::vector<int>& targets,
                         const std::vector<bool>& weights);

  void backward(Var loss);
  size_t size() const { return nodes_.size(); }

 private:
  friend struct Var;
  struct Node {
    Mat val;
    Mat grad;
    std::function<void()> back;  // empty for leaves/constants
  };
  std::vector<Node> nodes_;

  Var make(Mat val);
  Mat& grad(Var v) { return nodes_[v.idx].grad; }
  const Mat& val(Var v) const { return nodes_[v.idx].val; }
};

}  // namespace mint
