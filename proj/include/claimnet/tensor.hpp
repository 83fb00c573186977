#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "claimnet/rng.hpp"

namespace claimnet {

using Matrix = Eigen::MatrixXd;

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Node in a dynamically built reverse-mode graph over dense double matrices.
///
/// `grad` stays empty (0x0) until backward() reaches the node; "empty" and
/// "zero" are distinct states so the optimizer can detect parameters that
/// never participated in a backward pass.
class Tensor {
public:
  Matrix value;
  Matrix grad;
  bool requires_grad = false;

  std::vector<TensorPtr> parents;
  std::function<void(const Tensor&)> backward_fn;

  Tensor() = default;
  explicit Tensor(Matrix v, bool req = false) : value(std::move(v)), requires_grad(req) {}

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }

  bool grad_defined() const {
    return grad.rows() == value.rows() && grad.cols() == value.cols();
  }
  void ensure_grad() {
    if (!grad_defined()) grad = Matrix::Zero(value.rows(), value.cols());
  }
  void clear_grad() { grad.resize(0, 0); }

  static TensorPtr make(Matrix v, bool requires_grad = false);
  static TensorPtr zeros(Eigen::Index r, Eigen::Index c, bool requires_grad = false);
  static TensorPtr scalar(double x, bool requires_grad = false);
};

/// Throws std::runtime_error if m contains NaN or Inf. Every op calls this on
/// its freshly computed value; non-finite state is never allowed to propagate.
void check_finite(const Matrix& m, const char* op);

/// Reverse pass from a 1x1 root. Gradients accumulate additively, so a tensor
/// consumed by several branches receives the sum of the branch gradients.
void backward(const TensorPtr& root);

enum class Activation { relu, tanh, sigmoid };

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
/// x (n x d) plus a 1 x d bias row broadcast over rows.
TensorPtr add_row(const TensorPtr& x, const TensorPtr& bias);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);  // elementwise
TensorPtr scale(const TensorPtr& x, double c);

TensorPtr activate(const TensorPtr& x, Activation kind);
TensorPtr relu(const TensorPtr& x);
TensorPtr tanh_act(const TensorPtr& x);
TensorPtr sigmoid(const TensorPtr& x);

/// Row-wise softmax with max subtraction; each output row sums to 1.
TensorPtr softmax_rows(const TensorPtr& x);

/// Per-row standardization (mean 0, variance 1, epsilon 1e-5 inside the sqrt)
/// followed by elementwise gain and bias; gain and bias are 1 x d.
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias);

/// Training mode: zero each entry with probability `rate`, scale survivors by
/// 1/(1-rate). Inference mode (or rate 0): identity.
TensorPtr dropout(const TensorPtr& x, double rate, RngStream& rng, bool training);

/// Row gather; gradients scatter-add back into the selected table rows only.
TensorPtr embed_lookup(const TensorPtr& table, const std::vector<int>& indices);

TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
TensorPtr col_slice(const TensorPtr& x, Eigen::Index start, Eigen::Index len);

/// Variable-major token stack (vars*batch x dim) -> per-observation feature
/// rows (batch x vars*dim). Pure permutation.
TensorPtr tokens_to_features(const TensorPtr& tokens, Eigen::Index batch, Eigen::Index vars);

/// Scaled dot-product scores over a variable-major token stack. q and k are
/// (vars*batch x dim); row v*batch+i of the result holds the q scores of
/// variable v against all variables for observation i, divided by sqrt(dim).
/// batch=1 reduces to the single-observation form A = Q K^T / sqrt(d).
TensorPtr attention_scores(const TensorPtr& q, const TensorPtr& k,
                           Eigen::Index batch, Eigen::Index vars);

/// X*[v*batch+i] = sum_u weights(v*batch+i, u) * values[u*batch+i].
TensorPtr attention_mix(const TensorPtr& weights, const TensorPtr& values,
                        Eigen::Index batch, Eigen::Index vars);

/// Row-softmax of raw scores followed by attention_mix.
TensorPtr attention_apply(const TensorPtr& scores, const TensorPtr& values,
                          Eigen::Index batch, Eigen::Index vars);

/// Mean of squared differences over all entries; result is 1x1.
TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target);

TensorPtr sum_all(const TensorPtr& x);

}  // namespace claimnet
