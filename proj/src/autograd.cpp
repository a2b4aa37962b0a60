#include "mint/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace mint {

const Mat& Var::val() const { return tape->nodes_[idx].val; }

Mat& ParamStore::add(const std::string& name, Mat init) {
  values[name] = std::move(init);
  grads[name] = Mat::Zero(values[name].rows(), values[name].cols());
  return values[name];
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads) g.setZero();
}

Var Tape::make(Mat val) {
  Node n;
  n.grad = Mat::Zero(val.rows(), val.cols());
  n.val = std::move(val);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat v) { return make(std::move(v)); }

Var Tape::param(ParamStore& store, const std::string& name) {
  auto it = store.values.find(name);
  if (it == store.values.end())
    throw std::runtime_error("unknown parameter: " + name);
  Var out = make(it->second);
  if (!store.frozen) {
    ParamStore* sp = &store;
    std::string nm = name;
    Tape* t = this;
    int idx = out.idx;
    nodes_[out.idx].back = [t, sp, nm, idx]() {
      sp->grads[nm] += t->nodes_[idx].grad;
    };
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  Var out = make(val(a) + val(b));
  nodes_[out.idx].back = [this, a, b, out]() {
    grad(a) += grad(out);
    grad(b) += grad(out);
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  Var out = make(val(a) - val(b));
  nodes_[out.idx].back = [this, a, b, out]() {
    grad(a) += grad(out);
    grad(b) -= grad(out);
  };
  return out;
}

Var Tape::mul_elem(Var a, Var b) {
  Var out = make(val(a).cwiseProduct(val(b)));
  nodes_[out.idx].back = [this, a, b, out]() {
    grad(a) += grad(out).cwiseProduct(val(b));
    grad(b) += grad(out).cwiseProduct(val(a));
  };
  return out;
}

Var Tape::scale(Var a, double s) {
  Var out = make(val(a) * s);
  nodes_[out.idx].back = [this, a, out, s]() { grad(a) += grad(out) * s; };
  return out;
}

Var Tape::mul_scalar(Var a, Var s) {
  if (val(s).size() != 1) throw std::runtime_error("mul_scalar: s not 1x1");
  double sv = val(s)(0, 0);
  Var out = make(val(a) * sv);
  nodes_[out.idx].back = [this, a, s, out, sv]() {
    grad(a) += grad(out) * sv;
    grad(s)(0, 0) += (grad(out).cwiseProduct(val(a))).sum();
  };
  return out;
}

Var Tape::reciprocal(Var s) {
  if (val(s).size() != 1) throw std::runtime_error("reciprocal: s not 1x1");
  double sv = val(s)(0, 0);
  Mat o(1, 1);
  o(0, 0) = 1.0 / sv;
  Var out = make(o);
  nodes_[out.idx].back = [this, s, out, sv]() {
    grad(s)(0, 0) += -grad(out)(0, 0) / (sv * sv);
  };
  return out;
}

Var Tape::clamp(Var a, double lo, double hi) {
  Var out = make(val(a).cwiseMax(lo).cwiseMin(hi));
  nodes_[out.idx].back = [this, a, out, lo, hi]() {
    const Mat& v = val(a);
    for (long j = 0; j < v.cols(); ++j)
      for (long i = 0; i < v.rows(); ++i)
        if (v(i, j) > lo && v(i, j) < hi) grad(a)(i, j) += grad(out)(i, j);
  };
  return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
}

Var Tape::gelu(Var a) {
  const Mat& x = val(a);
  Mat y = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v)));
  });
  Var out = make(std::move(y));
  nodes_[out.idx].back = [this, a, out]() {
    const Mat& x = val(a);
    Mat d = x.unaryExpr([](double v) {
      double u = kGeluC * (v + 0.044715 * v * v * v);
      double t = std::tanh(u);
      double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
      return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
    });
    grad(a) += grad(out).cwiseProduct(d);
  };
  return out;
}

Var Tape::transpose(Var a) {
  Var out = make(val(a).transpose());
  nodes_[out.idx].back = [this, a, out]() {
    grad(a) += grad(out).transpose();
  };
  return out;
}

Var Tape::add_row_broadcast(Var a, Var row) {
  if (val(row).rows() != 1 || val(row).cols() != val(a).cols())
    throw std::runtime_error("add_row_broadcast: shape mismatch");
  Mat y = val(a);
  y.rowwise() += val(row).row(0);
  Var out = make(std::move(y));
  nodes_[out.idx].back = [this, a, row, out]() {
    grad(a) += grad(out);
    grad(row).row(0) += grad(out).colwise().sum();
  };
  return out;
}

Var Tape::concat_rows(Var a, Var b) { return concat_rows(std::vector<Var>{a, b}); }

Var Tape::concat_rows(const std::vector<Var>& parts) {
  long rows = 0, cols = parts.empty() ? 0 : parts[0].cols();
  for (const Var& p : parts) rows += p.rows();
  Mat y(rows, cols);
  long r = 0;
  for (const Var& p : parts) {
    y.middleRows(r, p.rows()) = val(p);
    r += p.rows();
  }
  Var out = make(std::move(y));
  std::vector<Var> ps = parts;
  nodes_[out.idx].back = [this, ps, out]() {
    long r = 0;
    for (const Var& p : ps) {
      grad(p) += grad(out).middleRows(r, p.rows());
      r += p.rows();
    }
  };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  long cols = 0, rows = parts.empty() ? 0 : parts[0].rows();
  for (const Var& p : parts) cols += p.cols();
  Mat y(rows, cols);
  long c = 0;
  for (const Var& p : parts) {
    y.middleCols(c, p.cols()) = val(p);
    c += p.cols();
  }
  Var out = make(std::move(y));
  std::vector<Var> ps = parts;
  nodes_[out.idx].back = [this, ps, out]() {
    long c = 0;
    for (const Var& p : ps) {
      grad(p) += grad(out).middleCols(c, p.cols());
      c += p.cols();
    }
  };
  return out;
}

Var Tape::slice_rows(Var a, long r0, long n) {
  Var out = make(val(a).middleRows(r0, n));
  nodes_[out.idx].back = [this, a, out, r0, n]() {
    grad(a).middleRows(r0, n) += grad(out);
  };
  return out;
}

Var Tape::slice_cols(Var a, long c0, long n) {
  Var out = make(val(a).middleCols(c0, n));
  nodes_[out.idx].back = [this, a, out, c0, n]() {
    grad(a).middleCols(c0, n) += grad(out);
  };
  return out;
}

Var Tape::stack_scalars(const std::vector<Var>& cells, long rows, long cols) {
  if (static_cast<long>(cells.size()) != rows * cols)
    throw std::runtime_error("stack_scalars: cell count mismatch");
  Mat y(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) y(i, j) = val(cells[i * cols + j])(0, 0);
  Var out = make(std::move(y));
  std::vector<Var> cs = cells;
  nodes_[out.idx].back = [this, cs, out, rows, cols]() {
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j)
        grad(cs[i * cols + j])(0, 0) += grad(out)(i, j);
  };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  Var out = make(val(a) * val(b));
  nodes_[out.idx].back = [this, a, b, out]() {
    grad(a) += grad(out) * val(b).transpose();
    grad(b) += val(a).transpose() * grad(out);
  };
  return out;
}

Var Tape::matmul_nt(Var a, Var b) {
  Var out = make(val(a) * val(b).transpose());
  nodes_[out.idx].back = [this, a, b, out]() {
    grad(a) += grad(out) * val(b);
    grad(b) += grad(out).transpose() * val(a);
  };
  return out;
}

Var Tape::softmax_rows(Var a, const Mat& additive_mask) {
  Mat z = val(a);
  if (additive_mask.size() > 0) {
    if (additive_mask.rows() != z.rows() || additive_mask.cols() != z.cols())
      throw std::runtime_error("softmax_rows: mask shape mismatch");
    z += additive_mask;
  }
  Mat p(z.rows(), z.cols());
  for (long i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
    p.row(i) = e / e.sum();
  }
  Var out = make(std::move(p));
  nodes_[out.idx].back = [this, a, out]() {
    const Mat& p = val(out);
    const Mat& go = grad(out);
    for (long i = 0; i < p.rows(); ++i) {
      double dot = go.row(i).dot(p.row(i));
      grad(a).row(i) +=
          (p.row(i).array() * (go.row(i).array() - dot)).matrix();
    }
  };
  return out;
}

Var Tape::log_softmax_rows(Var a) {
  const Mat& z = val(a);
  Mat y(z.rows(), z.cols());
  for (long i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    double lse = m + std::log((z.row(i).array() - m).exp().sum());
    y.row(i) = z.row(i).array() - lse;
  }
  Var out = make(std::move(y));
  nodes_[out.idx].back = [this, a, out]() {
    const Mat& y = val(out);
    const Mat& go = grad(out);
    for (long i = 0; i < y.rows(); ++i) {
      double s = go.row(i).sum();
      grad(a).row(i) += go.row(i) - s * y.row(i).array().exp().matrix();
    }
  };
  return out;
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias, double eps) {
  const Mat& x = val(a);
  long d = x.cols();
  Mat xhat(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (long i = 0; i < x.rows(); ++i) {
    double mu = x.row(i).mean();
    double var = (x.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mu) * inv_std(i);
  }
  Mat y = xhat;
  y.array().rowwise() *= val(gain).row(0).array();
  y.rowwise() += val(bias).row(0);
  Var out = make(std::move(y));
  Mat xhat_c = xhat;
  Eigen::VectorXd is_c = inv_std;
  nodes_[out.idx].back = [this, a, gain, bias, out, xhat_c, is_c]() {
    const Mat& go = grad(out);
    long d = go.cols();
    grad(bias).row(0) += go.colwise().sum();
    grad(gain).row(0) += (go.cwiseProduct(xhat_c)).colwise().sum();
    for (long i = 0; i < go.rows(); ++i) {
      Eigen::RowVectorXd gh =
          go.row(i).cwiseProduct(val(gain).row(0));  // dL/dxhat
      double m1 = gh.mean();
      double m2 = gh.cwiseProduct(xhat_c.row(i)).mean();
      grad(a).row(i) +=
          is_c(i) *
          (gh.array() - m1 - xhat_c.row(i).array() * m2).matrix();
    }
  };
  return out;
}

Var Tape::l2_normalize_rows(Var a, double eps) {
  const Mat& x = val(a);
  Mat y(x.rows(), x.cols());
  Eigen::VectorXd norms(x.rows());
  for (long i = 0; i < x.rows(); ++i) {
    double n = x.row(i).norm();
    norms(i) = n;
    if (n < eps)
      y.row(i).setZero();
    else
      y.row(i) = x.row(i) / n;
  }
  Var out = make(std::move(y));
  Eigen::VectorXd norms_c = norms;
  nodes_[out.idx].back = [this, a, out, norms_c, eps]() {
    const Mat& y = val(out);
    const Mat& go = grad(out);
    for (long i = 0; i < y.rows(); ++i) {
      if (norms_c(i) < eps) continue;  // degenerate row: zero gradient
      double dot = go.row(i).dot(y.row(i));
      grad(a).row(i) += (go.row(i) - dot * y.row(i)) / norms_c(i);
    }
  };
  return out;
}

Var Tape::gather_rows(Var table, const std::vector<int>& ids) {
  const Mat& t = val(table);
  Mat y(static_cast<long>(ids.size()), t.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows())
      throw std::runtime_error("gather_rows: id out of range");
    y.row(static_cast<long>(i)) = t.row(ids[i]);
  }
  Var out = make(std::move(y));
  std::vector<int> ids_c = ids;
  nodes_[out.idx].back = [this, table, out, ids_c]() {
    for (size_t i = 0; i < ids_c.size(); ++i)
      grad(table).row(ids_c[i]) += grad(out).row(static_cast<long>(i));
  };
  return out;
}

Var Tape::max_all(Var a) {
  const Mat& x = val(a);
  long bi = 0, bj = 0;
  double best = x(0, 0);
  for (long i = 0; i < x.rows(); ++i)
    for (long j = 0; j < x.cols(); ++j)
      if (x(i, j) > best) {
        best = x(i, j);
        bi = i;
        bj = j;
      }
  Mat o(1, 1);
  o(0, 0) = best;
  Var out = make(o);
  nodes_[out.idx].back = [this, a, out, bi, bj]() {
    grad(a)(bi, bj) += grad(out)(0, 0);
  };
  return out;
}

Var Tape::sum_all(Var a) {
  Mat o(1, 1);
  o(0, 0) = val(a).sum();
  Var out = make(o);
  nodes_[out.idx].back = [this, a, out]() {
    grad(a).array() += grad(out)(0, 0);
  };
  return out;
}

Var Tape::mean_all(Var a) {
  double n = static_cast<double>(val(a).size());
  return scale(sum_all(a), 1.0 / n);
}

Var Tape::cross_entropy_rows(Var logits, const std::vector<int>& targets,
                             const std::vector<bool>& weights) {
  if (targets.size() != static_cast<size_t>(val(logits).rows()) ||
      weights.size() != targets.size())
    throw std::runtime_error("cross_entropy_rows: size mismatch");
  long n_valid = 0;
  for (bool w : weights) n_valid += w ? 1 : 0;
  if (n_valid == 0) throw std::runtime_error("cross_entropy_rows: no valid rows");

  Var lsm = log_softmax_rows(logits);
  const Mat& y = val(lsm);
  double acc = 0.0;
  for (size_t i = 0; i < targets.size(); ++i)
    if (weights[i]) acc -= y(static_cast<long>(i), targets[i]);
  Mat o(1, 1);
  o(0, 0) = acc / static_cast<double>(n_valid);
  Var out = make(o);
  std::vector<int> tg = targets;
  std::vector<bool> wt = weights;
  nodes_[out.idx].back = [this, lsm, out, tg, wt, n_valid]() {
    double g = grad(out)(0, 0) / static_cast<double>(n_valid);
    for (size_t i = 0; i < tg.size(); ++i)
      if (wt[i]) grad(lsm)(static_cast<long>(i), tg[i]) -= g;
  };
  return out;
}

void Tape::backward(Var loss) {
  if (val(loss).size() != 1) throw std::runtime_error("backward: loss not scalar");
  for (auto& n : nodes_) n.grad.setZero();
  nodes_[loss.idx].grad(0, 0) = 1.0;
  for (int i = loss.idx; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

}  // namespace mint
