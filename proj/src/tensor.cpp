#include "casim/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "casim/rng.hpp"

namespace casim {

using detail::Node;

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(int rows, int cols, double value, bool requires_grad) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("tensor dims must be positive");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->vals.assign(static_cast<size_t>(rows) * cols, value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(std::vector<double> values, int rows, int cols,
                    bool requires_grad) {
  if (values.size() != static_cast<size_t>(rows) * cols)
    throw std::invalid_argument("tensor value count does not match shape");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->vals = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({value}, 1, 1, requires_grad);
}

Tensor Tensor::randn(int rows, int cols, Rng& rng, double stddev,
                     bool requires_grad) {
  std::vector<double> v(static_cast<size_t>(rows) * cols);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return from(std::move(v), rows, cols, requires_grad);
}

int Tensor::rows() const { return node_ ? node_->rows : 0; }
int Tensor::cols() const { return node_ ? node_->cols : 0; }
size_t Tensor::size() const { return node_ ? node_->vals.size() : 0; }

double Tensor::at(int r, int c) const {
  return node_->vals[static_cast<size_t>(r) * node_->cols + c];
}

void Tensor::set(int r, int c, double v) {
  node_->vals[static_cast<size_t>(r) * node_->cols + c] = v;
}

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() requires a 1x1 tensor");
  return node_->vals[0];
}

const std::vector<double>& Tensor::values() const { return node_->vals; }
std::vector<double>& Tensor::values() { return node_->vals; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<double>& Tensor::grad() {
  detail::ensure_grad(*node_);
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  detail::ensure_grad(*node_);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty())
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() {
  if (size() != 1) throw std::logic_error("backward() requires a scalar loss");
  // Iterative post-order DFS producing a topological order of the graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (node_->requires_grad) stack.push_back({node_.get(), 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].node();
      if (p && p->requires_grad && seen.insert(p).second)
        stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  detail::ensure_grad(*node_);
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

namespace detail {

void ensure_grad(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.vals.size(), 0.0);
}

Tensor make_node(int rows, int cols, std::vector<Tensor> parents,
                 std::function<void(Node&)> backward, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->vals.assign(static_cast<size_t>(rows) * cols, 0.0);
  n->requires_grad = requires_grad;
  if (requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

}  // namespace detail

}  // namespace casim
