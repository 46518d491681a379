#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfd/kernels.hpp"
#include "dfd/tensor.hpp"

namespace dfd {

// A learnable tensor. The gradient buffer accumulates across backward passes
// until the optimizer clears it.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.resize(value.rows(), value.cols()); }
};

// Owns parameters with stable addresses, in registration order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, std::size_t rows, std::size_t cols);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  void zero_grad();
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

namespace ad {

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode tape. Nodes are recorded in evaluation order and replayed
// backwards; any referenced Segments must outlive backward().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node. Parameter
  // leaves add their gradient into Parameter::grad.
  void backward(Var loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  // Zero-initialised on first access.
  Matrix& grad_mut(std::size_t id);

  Var push(Matrix value, bool requires_grad, BackwardFn fn);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add_row(Var x, Var bias);  // x + 1·biasᵀ, bias is 1×cols
Var affine(Var x, Var weight, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double c);
Var one_minus(Var x);
Var silu(Var x);
Var sigmoid(Var x);
Var clamp(Var x, double lo, double hi);
Var detach(Var x);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var x, std::span<const std::size_t> index);
Var scale_rows(Var x, Var weights);  // weights is rows×1
// Row s is the mean of x's rows in segment s; an empty segment yields zeros.
Var segment_mean(Var x, kernels::Segments segments);
Var mean_all(Var x);

// Mean over rows of −log softmax(logits)_y.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
// Mean over rows of (1 − p_y^g)/g with p = softmax(logits) clamped to [prob_floor, 1].
Var generalized_cross_entropy(Var logits, std::span<const int> labels, double g,
                              double prob_floor = 1e-12);
// mean(joint) − log mean exp(clamp(negative, −clip, clip)). Throws NumericError
// if any score is non-finite.
Var donsker_varadhan(Var joint, Var negative, double clip = 30.0);

}  // namespace ad
}  // namespace dfd
