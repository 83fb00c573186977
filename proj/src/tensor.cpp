#include "claimnet/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace claimnet {

TensorPtr Tensor::make(Matrix v, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(v), requires_grad);
}

TensorPtr Tensor::zeros(Eigen::Index r, Eigen::Index c, bool requires_grad) {
  return make(Matrix::Zero(r, c), requires_grad);
}

TensorPtr Tensor::scalar(double x, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = x;
  return make(std::move(m), requires_grad);
}

void check_finite(const Matrix& m, const char* op) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string(op) + ": non-finite values in result");
  }
}

namespace {

void accumulate(const TensorPtr& t, const Matrix& g) {
  if (!t->requires_grad) return;
  t->ensure_grad();
  t->grad += g;
}

TensorPtr node(Matrix value, const char* op, std::vector<TensorPtr> parents,
               std::function<void(const Tensor&)> backward_fn) {
  check_finite(value, op);
  bool req = false;
  for (const auto& p : parents) req = req || p->requires_grad;
  auto out = Tensor::make(std::move(value), req);
  if (req) {
    out->parents = std::move(parents);
    out->backward_fn = std::move(backward_fn);
  }
  return out;
}

}  // namespace

void backward(const TensorPtr& root) {
  if (root->rows() != 1 || root->cols() != 1)
    throw std::invalid_argument("backward: root must be a 1x1 scalar");
  if (!root->requires_grad) return;

  // Iterative post-order DFS; emits children after all their parents'
  // dependents, i.e. reverse topological order when walked backward.
  std::vector<TensorPtr> order;
  std::unordered_set<const Tensor*> seen;
  std::vector<std::pair<TensorPtr, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    if (next < t->parents.size()) {
      TensorPtr p = t->parents[next++];
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(t);
      stack.pop_back();
    }
  }

  for (const auto& t : order) t->ensure_grad();
  root->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->cols() != b->rows())
    throw std::invalid_argument("matmul: inner dimensions disagree");
  return node(a->value * b->value, "matmul", {a, b}, [a, b](const Tensor& out) {
    accumulate(a, out.grad * b->value.transpose());
    accumulate(b, a->value.transpose() * out.grad);
  });
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  if (a->rows() != b->rows() || a->cols() != b->cols())
    throw std::invalid_argument("add: shape mismatch");
  return node(a->value + b->value, "add", {a, b}, [a, b](const Tensor& out) {
    accumulate(a, out.grad);
    accumulate(b, out.grad);
  });
}

TensorPtr add_row(const TensorPtr& x, const TensorPtr& bias) {
  if (bias->rows() != 1 || bias->cols() != x->cols())
    throw std::invalid_argument("add_row: bias must be 1 x cols(x)");
  Matrix v = x->value.rowwise() + bias->value.row(0);
  return node(std::move(v), "add_row", {x, bias}, [x, bias](const Tensor& out) {
    accumulate(x, out.grad);
    accumulate(bias, out.grad.colwise().sum());
  });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  if (a->rows() != b->rows() || a->cols() != b->cols())
    throw std::invalid_argument("sub: shape mismatch");
  return node(a->value - b->value, "sub", {a, b}, [a, b](const Tensor& out) {
    accumulate(a, out.grad);
    accumulate(b, -out.grad);
  });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  if (a->rows() != b->rows() || a->cols() != b->cols())
    throw std::invalid_argument("mul: shape mismatch");
  return node(a->value.cwiseProduct(b->value), "mul", {a, b}, [a, b](const Tensor& out) {
    accumulate(a, out.grad.cwiseProduct(b->value));
    accumulate(b, out.grad.cwiseProduct(a->value));
  });
}

TensorPtr scale(const TensorPtr& x, double c) {
  return node(x->value * c, "scale", {x}, [x, c](const Tensor& out) {
    accumulate(x, out.grad * c);
  });
}

TensorPtr relu(const TensorPtr& x) {
  Matrix v = x->value.cwiseMax(0.0);
  return node(std::move(v), "relu", {x}, [x](const Tensor& out) {
    // Subgradient at 0 is 0: strict inequality in the mask.
    Matrix mask = (x->value.array() > 0.0).cast<double>();
    accumulate(x, out.grad.cwiseProduct(mask));
  });
}

TensorPtr tanh_act(const TensorPtr& x) {
  Matrix v = x->value.array().tanh();
  return node(std::move(v), "tanh", {x}, [x](const Tensor& out) {
    Matrix t = x->value.array().tanh();
    accumulate(x, (out.grad.array() * (1.0 - t.array().square())).matrix());
  });
}

TensorPtr sigmoid(const TensorPtr& x) {
  Matrix v = (1.0 / (1.0 + (-x->value.array()).exp())).matrix();
  auto out = node(std::move(v), "sigmoid", {x}, nullptr);
  if (out->requires_grad) {
    Matrix s = out->value;
    out->backward_fn = [x, s](const Tensor& o) {
      accumulate(x, (o.grad.array() * s.array() * (1.0 - s.array())).matrix());
    };
  }
  return out;
}

TensorPtr activate(const TensorPtr& x, Activation kind) {
  switch (kind) {
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh_act(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  throw std::invalid_argument("activate: unknown kind");
}

TensorPtr softmax_rows(const TensorPtr& x) {
  Matrix v(x->rows(), x->cols());
  for (Eigen::Index r = 0; r < x->rows(); ++r) {
    Eigen::ArrayXd row = x->value.row(r).array();
    Eigen::ArrayXd e = (row - row.maxCoeff()).exp();
    v.row(r) = (e / e.sum()).matrix();
  }
  auto out = node(std::move(v), "softmax_rows", {x}, nullptr);
  if (out->requires_grad) {
    Matrix s = out->value;
    out->backward_fn = [x, s](const Tensor& o) {
      Matrix dx(s.rows(), s.cols());
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        double dot = o.grad.row(r).dot(s.row(r));
        dx.row(r) = (s.row(r).array() * (o.grad.row(r).array() - dot)).matrix();
      }
      accumulate(x, dx);
    };
  }
  return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias) {
  constexpr double kEps = 1e-5;
  const Eigen::Index n = x->cols();
  if (gain->rows() != 1 || gain->cols() != n || bias->rows() != 1 || bias->cols() != n)
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(x)");
  Matrix xhat(x->rows(), n);
  Eigen::VectorXd inv_sd(x->rows());
  Matrix v(x->rows(), n);
  for (Eigen::Index r = 0; r < x->rows(); ++r) {
    double m = x->value.row(r).mean();
    double var = (x->value.row(r).array() - m).square().mean();
    double is = 1.0 / std::sqrt(var + kEps);
    inv_sd(r) = is;
    xhat.row(r) = ((x->value.row(r).array() - m) * is).matrix();
    v.row(r) = (xhat.row(r).array() * gain->value.row(0).array() +
                bias->value.row(0).array())
                   .matrix();
  }
  auto out = node(std::move(v), "layer_norm", {x, gain, bias}, nullptr);
  if (out->requires_grad) {
    out->backward_fn = [x, gain, bias, xhat, inv_sd](const Tensor& o) {
      const Eigen::Index n = x->cols();
      if (gain->requires_grad)
        accumulate(gain, o.grad.cwiseProduct(xhat).colwise().sum());
      if (bias->requires_grad) accumulate(bias, o.grad.colwise().sum());
      if (x->requires_grad) {
        Matrix dx(x->rows(), n);
        for (Eigen::Index r = 0; r < x->rows(); ++r) {
          Eigen::ArrayXd dxhat = o.grad.row(r).array() * gain->value.row(0).array();
          double m1 = dxhat.mean();
          double m2 = (dxhat * xhat.row(r).transpose().array()).mean();
          dx.row(r) =
              (inv_sd(r) * (dxhat - m1 - xhat.row(r).transpose().array() * m2)).matrix();
        }
        accumulate(x, dx);
      }
    };
  }
  return out;
}

TensorPtr dropout(const TensorPtr& x, double rate, RngStream& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x->rows(), x->cols());
  for (Eigen::Index c = 0; c < x->cols(); ++c)
    for (Eigen::Index r = 0; r < x->rows(); ++r)
      mask(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
  return node(x->value.cwiseProduct(mask), "dropout", {x},
              [x, mask](const Tensor& out) { accumulate(x, out.grad.cwiseProduct(mask)); });
}

TensorPtr embed_lookup(const TensorPtr& table, const std::vector<int>& indices) {
  Matrix v(static_cast<Eigen::Index>(indices.size()), table->cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= table->rows())
      throw std::out_of_range("embed_lookup: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table->value.row(indices[i]);
  }
  return node(std::move(v), "embed_lookup", {table}, [table, indices](const Tensor& out) {
    if (!table->requires_grad) return;
    table->ensure_grad();
    for (std::size_t i = 0; i < indices.size(); ++i)
      table->grad.row(indices[i]) += out.grad.row(static_cast<Eigen::Index>(i));
  });
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Eigen::Index rows = parts[0]->rows(), cols = 0;
  for (const auto& p : parts) {
    if (p->rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p->cols();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p->cols()) = p->value;
    at += p->cols();
  }
  return node(std::move(v), "concat_cols", parts, [parts](const Tensor& out) {
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      accumulate(p, out.grad.middleCols(at, p->cols()));
      at += p->cols();
    }
  });
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Eigen::Index cols = parts[0]->cols(), rows = 0;
  for (const auto& p : parts) {
    if (p->cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p->rows();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p->rows()) = p->value;
    at += p->rows();
  }
  return node(std::move(v), "concat_rows", parts, [parts](const Tensor& out) {
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      accumulate(p, out.grad.middleRows(at, p->rows()));
      at += p->rows();
    }
  });
}

TensorPtr col_slice(const TensorPtr& x, Eigen::Index start, Eigen::Index len) {
  if (start < 0 || len < 1 || start + len > x->cols())
    throw std::invalid_argument("col_slice: range out of bounds");
  return node(x->value.middleCols(start, len), "col_slice", {x},
              [x, start, len](const Tensor& out) {
                if (!x->requires_grad) return;
                x->ensure_grad();
                x->grad.middleCols(start, len) += out.grad;
              });
}

TensorPtr tokens_to_features(const TensorPtr& tokens, Eigen::Index batch, Eigen::Index vars) {
  if (tokens->rows() != batch * vars)
    throw std::invalid_argument("tokens_to_features: rows != batch*vars");
  const Eigen::Index d = tokens->cols();
  Matrix v(batch, vars * d);
  for (Eigen::Index var = 0; var < vars; ++var)
    v.middleCols(var * d, d) = tokens->value.middleRows(var * batch, batch);
  return node(std::move(v), "tokens_to_features", {tokens},
              [tokens, batch, vars, d](const Tensor& out) {
                if (!tokens->requires_grad) return;
                Matrix g(tokens->rows(), d);
                for (Eigen::Index var = 0; var < vars; ++var)
                  g.middleRows(var * batch, batch) = out.grad.middleCols(var * d, d);
                accumulate(tokens, g);
              });
}

TensorPtr attention_scores(const TensorPtr& q, const TensorPtr& k,
                           Eigen::Index batch, Eigen::Index vars) {
  if (q->rows() != k->rows() || q->cols() != k->cols())
    throw std::invalid_argument("attention_scores: Q/K shape mismatch");
  if (q->rows() != batch * vars)
    throw std::invalid_argument("attention_scores: rows != batch*vars");
  const Eigen::Index d = q->cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix v(batch * vars, vars);
  for (Eigen::Index i = 0; i < batch; ++i)
    for (Eigen::Index a = 0; a < vars; ++a)
      for (Eigen::Index b = 0; b < vars; ++b)
        v(a * batch + i, b) =
            q->value.row(a * batch + i).dot(k->value.row(b * batch + i)) * inv_sqrt_d;
  return node(std::move(v), "attention_scores", {q, k},
              [q, k, batch, vars, inv_sqrt_d](const Tensor& out) {
                Matrix dq = Matrix::Zero(q->rows(), q->cols());
                Matrix dk = Matrix::Zero(k->rows(), k->cols());
                for (Eigen::Index i = 0; i < batch; ++i)
                  for (Eigen::Index a = 0; a < vars; ++a)
                    for (Eigen::Index b = 0; b < vars; ++b) {
                      double g = out.grad(a * batch + i, b) * inv_sqrt_d;
                      dq.row(a * batch + i) += g * k->value.row(b * batch + i);
                      dk.row(b * batch + i) += g * q->value.row(a * batch + i);
                    }
                accumulate(q, dq);
                accumulate(k, dk);
              });
}

TensorPtr attention_mix(const TensorPtr& weights, const TensorPtr& values,
                        Eigen::Index batch, Eigen::Index vars) {
  if (weights->rows() != batch * vars || weights->cols() != vars)
    throw std::invalid_argument("attention_mix: weights must be batch*vars x vars");
  if (values->rows() != batch * vars)
    throw std::invalid_argument("attention_mix: values rows != batch*vars");
  const Eigen::Index d = values->cols();
  Matrix v = Matrix::Zero(batch * vars, d);
  for (Eigen::Index i = 0; i < batch; ++i)
    for (Eigen::Index a = 0; a < vars; ++a)
      for (Eigen::Index b = 0; b < vars; ++b)
        v.row(a * batch + i) += weights->value(a * batch + i, b) * values->value.row(b * batch + i);
  return node(std::move(v), "attention_mix", {weights, values},
              [weights, values, batch, vars](const Tensor& out) {
                Matrix dw = Matrix::Zero(weights->rows(), weights->cols());
                Matrix dv = Matrix::Zero(values->rows(), values->cols());
                for (Eigen::Index i = 0; i < batch; ++i)
                  for (Eigen::Index a = 0; a < vars; ++a)
                    for (Eigen::Index b = 0; b < vars; ++b) {
                      dw(a * batch + i, b) =
                          out.grad.row(a * batch + i).dot(values->value.row(b * batch + i));
                      dv.row(b * batch + i) +=
                          weights->value(a * batch + i, b) * out.grad.row(a * batch + i);
                    }
                accumulate(weights, dw);
                accumulate(values, dv);
              });
}

TensorPtr attention_apply(const TensorPtr& scores, const TensorPtr& values,
                          Eigen::Index batch, Eigen::Index vars) {
  return attention_mix(softmax_rows(scores), values, batch, vars);
}

TensorPtr mse_loss(const TensorPtr& pred, const TensorPtr& target) {
  if (pred->rows() != target->rows() || pred->cols() != target->cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  const double n = static_cast<double>(pred->value.size());
  Matrix diff = pred->value - target->value;
  Matrix v(1, 1);
  v(0, 0) = diff.squaredNorm() / n;
  return node(std::move(v), "mse_loss", {pred, target},
              [pred, target, diff, n](const Tensor& out) {
                double g = out.grad(0, 0) * 2.0 / n;
                accumulate(pred, g * diff);
                accumulate(target, -g * diff);
              });
}

TensorPtr sum_all(const TensorPtr& x) {
  Matrix v(1, 1);
  v(0, 0) = x->value.sum();
  return node(std::move(v), "sum_all", {x}, [x](const Tensor& out) {
    accumulate(x, Matrix::Constant(x->rows(), x->cols(), out.grad(0, 0)));
  });
}

}  // namespace claimnet
