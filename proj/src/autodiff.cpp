#include "dsgnn/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace dsgnn::ad {

void Tape::backward(Var scalar) {
  const Mat& v = nodes_[scalar.id].value;
  if (v.rows() != 1 || v.cols() != 1)
    throw std::invalid_argument("backward: target must be 1x1");
  grads_.assign(nodes_.size(), Mat());
  has_grad_.assign(nodes_.size(), false);
  grads_[scalar.id] = Mat::Ones(1, 1);
  has_grad_[scalar.id] = true;
  for (int i = scalar.id; i >= 0; --i) {
    if (!has_grad_[i] || !nodes_[i].pull) continue;
    nodes_[i].pull(*this, grads_[i]);
  }
}

const Mat& Tape::grad(Var v) {
  if (!has_grad_.empty() && has_grad_[v.id]) return grads_[v.id];
  zero_ = Mat::Zero(nodes_[v.id].value.rows(), nodes_[v.id].value.cols());
  return zero_;
}

void Tape::accumulate(Var v, const Mat& g) {
  if (!nodes_[v.id].requires_grad) return;
  if (!has_grad_[v.id]) {
    grads_[v.id] = g;
    has_grad_[v.id] = true;
  } else {
    grads_[v.id] += g;
  }
}

namespace {
Var unary(Tape& t, Var a, Mat out, std::function<Mat(Tape&, const Mat&)> pull_a) {
  bool rg = t.requires_grad(a);
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [a, pull_a](Tape& t, const Mat& g) { t.accumulate(a, pull_a(t, g)); };
  return t.push(std::move(out), std::move(pull), rg);
}
}  // namespace

Var add(Tape& t, Var a, Var b) {
  Mat out = t.value(a) + t.value(b);
  bool rg = any_grad(t, {a, b});
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    };
  return t.push(std::move(out), std::move(pull), rg);
}

Var sub(Tape& t, Var a, Var b) {
  Mat out = t.value(a) - t.value(b);
  bool rg = any_grad(t, {a, b});
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g);
      t.accumulate(b, Mat(-g));
    };
  return t.push(std::move(out), std::move(pull), rg);
}

Var cmul(Tape& t, Var a, Var b) {
  Mat out = t.value(a).cwiseProduct(t.value(b));
  bool rg = any_grad(t, {a, b});
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, g.cwiseProduct(t.value(b)));
      t.accumulate(b, g.cwiseProduct(t.value(a)));
    };
  return t.push(std::move(out), std::move(pull), rg);
}

Var matmul(Tape& t, Var a, Var b) {
  Mat out = t.value(a) * t.value(b);
  bool rg = any_grad(t, {a, b});
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [a, b](Tape& t, const Mat& g) {
      t.accumulate(a, Mat(g * t.value(b).transpose()));
      t.accumulate(b, Mat(t.value(a).transpose() * g));
    };
  return t.push(std::move(out), std::move(pull), rg);
}

Var scale(Tape& t, Var a, double s) {
  return unary(t, a, Mat(t.value(a) * s),
               [s](Tape&, const Mat& g) { return Mat(g * s); });
}

Var mul_scalar(Tape& t, Var a, Var s) {
  const double sv = t.value(s)(0, 0);
  Mat out = t.value(a) * sv;
  bool rg = any_grad(t, {a, s});
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [a, s, sv](Tape& t, const Mat& g) {
      t.accumulate(a, Mat(g * sv));
      Mat gs(1, 1);
      gs(0, 0) = g.cwiseProduct(t.value(a)).sum();
      t.accumulate(s, gs);
    };
  return t.push(std::move(out), std::move(pull), rg);
}

Var transpose(Tape& t, Var a) {
  return unary(t, a, Mat(t.value(a).transpose()),
               [](Tape&, const Mat& g) { return Mat(g.transpose()); });
}

Var sigmoid(Tape& t, Var a) {
  Mat out = t.value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return unary(t, a, out, [out](Tape&, const Mat& g) {
    return Mat(g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix())));
  });
}

Var tanh_act(Tape& t, Var a) {
  Mat out = t.value(a).array().tanh().matrix();
  return unary(t, a, out, [out](Tape&, const Mat& g) {
    return Mat(g.cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

Var relu(Tape& t, Var a) {
  Mat out = t.value(a).cwiseMax(0.0);
  Mat mask = (t.value(a).array() > 0.0).cast<double>().matrix();
  return unary(t, a, out,
               [mask](Tape&, const Mat& g) { return Mat(g.cwiseProduct(mask)); });
}

Var softplus(Tape& t, Var a) {
  // log(1+exp(x)) computed stably
  Mat out = t.value(a).unaryExpr([](double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
  });
  Mat sig = t.value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return unary(t, a, out,
               [sig](Tape&, const Mat& g) { return Mat(g.cwiseProduct(sig)); });
}

Var row_softmax(Tape& t, Var a) {
  const Mat& x = t.value(a);
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double m = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - m).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return unary(t, a, out, [out](Tape&, const Mat& g) {
    Mat ga(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      double dot = g.row(i).dot(out.row(i));
      ga.row(i) = out.row(i).cwiseProduct(g.row(i)) - dot * out.row(i);
    }
    return ga;
  });
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
  Eigen::Index total = 0, cols = parts.empty() ? 0 : t.value(parts[0]).cols();
  for (Var p : parts) total += t.value(p).rows();
  Mat out(total, cols);
  std::vector<Eigen::Index> offs;
  Eigen::Index off = 0;
  bool rg = false;
  for (Var p : parts) {
    offs.push_back(off);
    out.middleRows(off, t.value(p).rows()) = t.value(p);
    off += t.value(p).rows();
    rg = rg || t.requires_grad(p);
  }
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [parts, offs](Tape& t, const Mat& g) {
      for (std::size_t i = 0; i < parts.size(); ++i)
        t.accumulate(parts[i], g.middleRows(offs[i], t.value(parts[i]).rows()));
    };
  return t.push(std::move(out), std::move(pull), rg);
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  Eigen::Index total = 0, rws = parts.empty() ? 0 : t.value(parts[0]).rows();
  for (Var p : parts) total += t.value(p).cols();
  Mat out(rws, total);
  std::vector<Eigen::Index> offs;
  Eigen::Index off = 0;
  bool rg = false;
  for (Var p : parts) {
    offs.push_back(off);
    out.middleCols(off, t.value(p).cols()) = t.value(p);
    off += t.value(p).cols();
    rg = rg || t.requires_grad(p);
  }
  Tape::Pull pull = nullptr;
  if (rg)
    pull = [parts, offs](Tape& t, const Mat& g) {
      for (std::size_t i = 0; i < parts.size(); ++i)
        t.accumulate(parts[i], g.middleCols(offs[i], t.value(parts[i]).cols()));
    };
  return t.push(std::move(out), std::move(pull), rg);
}

Var rows(Tape& t, Var a, int start, int n) {
  Mat out = t.value(a).middleRows(start, n);
  return unary(t, a, out, [a, start, n](Tape& t, const Mat& g) {
    Mat ga = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    ga.middleRows(start, n) = g;
    return ga;
  });
}

Var select_rows(Tape& t, Var a, const std::vector<int>& idx) {
  const Mat& x = t.value(a);
  Mat out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = x.row(idx[i]);
  return unary(t, a, out, [a, idx](Tape& t, const Mat& g) {
    Mat ga = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(i);
    return ga;
  });
}

Var tile_rows(Tape& t, Var a, int times) {
  const Mat& x = t.value(a);
  Mat out(x.rows() * times, x.cols());
  for (int i = 0; i < times; ++i) out.middleRows(i * x.rows(), x.rows()) = x;
  return unary(t, a, out, [a, times](Tape& t, const Mat& g) {
    const Eigen::Index r = t.value(a).rows();
    Mat ga = Mat::Zero(r, t.value(a).cols());
    for (int i = 0; i < times; ++i) ga += g.middleRows(i * r, r);
    return ga;
  });
}

Var repeat_each_row(Tape& t, Var a, int times) {
  const Mat& x = t.value(a);
  Mat out(x.rows() * times, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int j = 0; j < times; ++j) out.row(i * times + j) = x.row(i);
  return unary(t, a, out, [a, times](Tape& t, const Mat& g) {
    const Eigen::Index r = t.value(a).rows();
    Mat ga = Mat::Zero(r, t.value(a).cols());
    for (Eigen::Index i = 0; i < r; ++i)
      for (int j = 0; j < times; ++j) ga.row(i) += g.row(i * times + j);
    return ga;
  });
}

Var reshape_colmajor(Tape& t, Var a, int r, int c) {
  const Mat& x = t.value(a);
  if (x.size() != static_cast<Eigen::Index>(r) * c)
    throw std::invalid_argument("reshape: size mismatch");
  Mat out = Eigen::Map<const Mat>(x.data(), r, c);
  return unary(t, a, out, [a, r, c](Tape& t, const Mat& g) {
    const Mat& x = t.value(a);
    return Mat(Eigen::Map<const Mat>(g.data(), x.rows(), x.cols()));
  });
}

Var broadcast_row(Tape& t, Var rowvec, int n) {
  const Mat& x = t.value(rowvec);
  if (x.rows() != 1) throw std::invalid_argument("broadcast_row: expects 1xC");
  Mat out = x.replicate(n, 1);
  return unary(t, rowvec, out,
               [](Tape&, const Mat& g) { return Mat(g.colwise().sum()); });
}

Var colwise_mean(Tape& t, Var a) {
  const Mat& x = t.value(a);
  Mat out = x.colwise().mean();
  const double inv = 1.0 / static_cast<double>(x.rows());
  return unary(t, a, out, [a, inv](Tape& t, const Mat& g) {
    return Mat(g.replicate(t.value(a).rows(), 1) * inv);
  });
}

Var colwise_max(Tape& t, Var a) {
  const Mat& x = t.value(a);
  Mat out(1, x.cols());
  std::vector<Eigen::Index> arg(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out(0, j) = x.col(j).maxCoeff(&arg[j]);
  }
  return unary(t, a, out, [a, arg](Tape& t, const Mat& g) {
    Mat ga = Mat::Zero(t.value(a).rows(), t.value(a).cols());
    for (Eigen::Index j = 0; j < ga.cols(); ++j) ga(arg[j], j) = g(0, j);
    return ga;
  });
}

Var sum_all(Tape& t, Var a) {
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum();
  return unary(t, a, out, [a](Tape& t, const Mat& g) {
    return Mat(Mat::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

Var cmul_const(Tape& t, Var a, const Mat& c) {
  Mat out = t.value(a).cwiseProduct(c);
  return unary(t, a, out,
               [c](Tape&, const Mat& g) { return Mat(g.cwiseProduct(c)); });
}

Var add_const(Tape& t, Var a, const Mat& c) {
  Mat out = t.value(a) + c;
  return unary(t, a, out, [](Tape&, const Mat& g) { return g; });
}

Var masked_mse(Tape& t, Var pred, const Mat& target, const Mat& mask) {
  const double count = mask.sum();
  if (count <= 0.0)
    throw std::invalid_argument("masked_mse: no supervised targets");
  Mat resid = (t.value(pred) - target).cwiseProduct(mask);
  Mat out(1, 1);
  out(0, 0) = resid.squaredNorm() / count;
  return unary(t, pred, out, [resid, count](Tape&, const Mat& g) {
    return Mat(resid * (2.0 * g(0, 0) / count));
  });
}

}  // namespace dsgnn::ad
