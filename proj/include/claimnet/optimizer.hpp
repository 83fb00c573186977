#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "claimnet/tensor.hpp"

namespace claimnet {

/// Named collection of trainable tensors with per-parameter Adam moment
/// buffers and a shared step counter. Iteration order is insertion order, so
/// updates are deterministic.
class ParameterSet {
public:
  void add(const std::string& name, TensorPtr t);
  TensorPtr get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, TensorPtr>>& items() const { return items_; }
  long step_count() const { return step_; }

  void zero_grad();

  /// One Adam update over every parameter. Requires a populated gradient for
  /// each parameter (a zero gradient is populated; a missing buffer is an
  /// error). Gradients are cleared after the update.
  void adam_step(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                 double epsilon = 1e-8);

  using Snapshot = std::vector<Matrix>;
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

private:
  struct AdamState {
    Matrix m, v;
  };
  std::vector<std::pair<std::string, TensorPtr>> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<AdamState> state_;
  long step_ = 0;
};

/// Glorot-style uniform init on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, RngStream& rng);

}  // namespace claimnet
