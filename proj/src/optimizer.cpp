#include "claimnet/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace claimnet {

void ParameterSet::add(const std::string& name, TensorPtr t) {
  if (index_.count(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
  t->requires_grad = true;
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(t));
  AdamState st;
  st.m = Matrix::Zero(items_.back().second->rows(), items_.back().second->cols());
  st.v = st.m;
  state_.push_back(std::move(st));
}

TensorPtr ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParameterSet: no parameter " + name);
  return items_[it->second].second;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : items_) t->clear_grad();
}

void ParameterSet::adam_step(double learning_rate, double beta1, double beta2,
                             double epsilon) {
  for (auto& [name, t] : items_)
    if (!t->grad_defined())
      throw std::runtime_error("adam_step: missing gradient for parameter " + name);
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < items_.size(); ++i) {
    TensorPtr& t = items_[i].second;
    AdamState& st = state_[i];
    st.m = beta1 * st.m + (1.0 - beta1) * t->grad;
    st.v = beta2 * st.v.array().matrix() +
           (1.0 - beta2) * t->grad.array().square().matrix();
    Matrix m_hat = st.m / bc1;
    Matrix v_hat = st.v / bc2;
    t->value.array() -=
        learning_rate * m_hat.array() / (v_hat.array().sqrt() + epsilon);
    check_finite(t->value, "adam_step");
    t->clear_grad();
  }
}

ParameterSet::Snapshot ParameterSet::snapshot() const {
  Snapshot snap;
  snap.reserve(items_.size());
  for (const auto& [name, t] : items_) snap.push_back(t->value);
  return snap;
}

void ParameterSet::restore(const Snapshot& snap) {
  if (snap.size() != items_.size())
    throw std::invalid_argument("ParameterSet::restore: snapshot size mismatch");
  for (std::size_t i = 0; i < items_.size(); ++i) items_[i].second->value = snap[i];
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-limit, limit);
  return m;
}

}  // namespace claimnet
