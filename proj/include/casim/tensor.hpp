#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace casim {

class Rng;

/// Additive-mask sentinel standing in for -infinity. Kept finite so masked
/// arithmetic never produces NaN.
inline constexpr double kNegInf = -1e30;

namespace detail {

struct Node;

}  // namespace detail

/// 2-D row-major tensor of doubles with reverse-mode automatic
/// differentiation. A Tensor is a cheap shared handle onto a graph node;
/// ops build the graph and backward() walks it in reverse topological
/// order, accumulating into the gradient buffers of nodes that require
/// gradients. Scalars are 1x1, vectors are 1xN rows.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double value,
                     bool requires_grad = false);
  static Tensor from(std::vector<double> values, int rows, int cols,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Normal(0, stddev) initialization through the shared generator.
  static Tensor randn(int rows, int cols, Rng& rng, double stddev,
                      bool requires_grad = false);

  int rows() const;
  int cols() const;
  size_t size() const;
  std::vector<int> shape() const { return {rows(), cols()}; }

  double at(int r, int c) const;
  void set(int r, int c, double v);
  double item() const;  // value of a 1x1 tensor

  const std::vector<double>& values() const;
  std::vector<double>& values();

  bool requires_grad() const;
  bool has_grad() const;
  /// Gradient buffer; allocated (zeroed) on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Reverse-mode sweep from this node, which must be a 1x1 scalar.
  void backward();

  bool defined() const { return node_ != nullptr; }

  detail::Node* node() const { return node_.get(); }
  explicit Tensor(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> vals;
  std::vector<double> grad;  // lazily allocated, same shape as vals
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(Node&)> backward;
};

/// Builds a fresh node wired to its parents; requires_grad is inherited
/// from any parent unless forced.
Tensor make_node(int rows, int cols, std::vector<Tensor> parents,
                 std::function<void(Node&)> backward, bool requires_grad);

void ensure_grad(Node& n);

}  // namespace detail

}  // namespace casim
