#ifndef DSGNN_AUTODIFF_HPP
#define DSGNN_AUTODIFF_HPP

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace dsgnn::ad {

using Mat = Eigen::MatrixXd;

/// Handle to a node on a Tape. Cheap to copy; valid only for the tape
/// that created it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense double matrices. All math is Eigen;
/// every operation records a pull-back closure for the backward pass.
class Tape {
 public:
  Var constant(Mat v) { return push(std::move(v), nullptr, false); }
  Var leaf(Mat v) { return push(std::move(v), nullptr, true); }

  const Mat& value(Var v) const { return nodes_[v.id].value; }

  /// Runs the backward pass from a 1x1 scalar node. Gradients of all
  /// grad-requiring nodes are available through grad() afterwards.
  void backward(Var scalar);

  /// Gradient of the last backward() target w.r.t. v (zero matrix if
  /// nothing flowed).
  const Mat& grad(Var v);

  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  void accumulate(Var v, const Mat& g);

  using Pull = std::function<void(Tape&, const Mat&)>;

  Var push(Mat value, Pull pull, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), std::move(pull), requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Pull pull;
    bool requires_grad;
  };
  std::vector<Node> nodes_;
  std::vector<Mat> grads_;
  std::vector<bool> has_grad_;
  Mat zero_;
};

inline bool any_grad(const Tape& t, std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (t.requires_grad(v)) return true;
  return false;
}

// Elementwise / linear algebra primitives. Each returns a new node.
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var cmul(Tape& t, Var a, Var b);
Var matmul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var mul_scalar(Tape& t, Var a, Var s);  // s is 1x1
Var transpose(Tape& t, Var a);

// Nonlinearities.
Var sigmoid(Tape& t, Var a);
Var tanh_act(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var softplus(Tape& t, Var a);
Var row_softmax(Tape& t, Var a);

// Shape manipulation.
Var concat_rows(Tape& t, const std::vector<Var>& parts);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var rows(Tape& t, Var a, int start, int n);
Var select_rows(Tape& t, Var a, const std::vector<int>& idx);
Var tile_rows(Tape& t, Var a, int times);
Var repeat_each_row(Tape& t, Var a, int times);
Var reshape_colmajor(Tape& t, Var a, int r, int c);
Var broadcast_row(Tape& t, Var rowvec, int n);

// Reductions.
Var colwise_mean(Tape& t, Var a);
Var colwise_max(Tape& t, Var a);  // argmax treated as constant
Var sum_all(Tape& t, Var a);

// Constant-operand helpers (no gradient into the constant).
Var cmul_const(Tape& t, Var a, const Mat& c);
Var add_const(Tape& t, Var a, const Mat& c);

/// Mean of squared residuals over mask-true entries. mask is 0/1 with
/// the same shape as pred; at least one entry must be active.
Var masked_mse(Tape& t, Var pred, const Mat& target, const Mat& mask);

}  // namespace dsgnn::ad

#endif
