// Copyright 2026 The maskscribe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "maskscribe/nn/tensor.h"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace maskscribe::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename S>
Tensor<S> Tensor<S>::zeros(Shape shape) {
  return filled(std::move(shape), S(0));
}

template <typename S>
Tensor<S> Tensor<S>::filled(Shape shape, S value) {
  std::vector<S> data(shape_size(shape), value);
  return from(std::move(shape), std::move(data));
}

template <typename S>
Tensor<S> Tensor<S>::from(Shape shape, std::vector<S> data) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape));
  }
  if (data.size() != shape_size(shape)) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
  }
  auto node = std::make_shared<Node<S>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

template <typename S>
S Tensor<S>::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename S>
void check_finite(std::span<const S> values, const char* where) {
  for (S v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + where);
  }
}

template <typename S>
Tensor<S> make_result(const char* op, Shape shape, std::vector<S> value,
                      std::vector<Tensor<S>> parents, std::function<void(Node<S>&)> backward) {
  check_finite<S>(value, op);
  Tensor<S> out = Tensor<S>::from(std::move(shape), std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  Node<S>* node = out.node();
  node->requires_grad = true;
  node->backward = std::move(backward);
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node_ptr());
  return out;
}

template <typename S>
void backward(const Tensor<S>& loss) {
  if (!loss.defined() || !loss.requires_grad()) {
    throw UsageError("backward() on a tensor that is not connected to any parameter");
  }
  if (loss.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> visited;
  std::vector<std::pair<Node<S>*, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node<S>* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), S(0));
  }
  loss.node()->ensure_grad()[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* node = *it;
    if (!node->is_leaf()) node->backward(*node);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void check_finite<float>(std::span<const float>, const char*);
template void check_finite<double>(std::span<const double>, const char*);
template Tensor<float> make_result<float>(const char*, Shape, std::vector<float>, std::vector<Tensor<float>>,
                                          std::function<void(Node<float>&)>);
template Tensor<double> make_result<double>(const char*, Shape, std::vector<double>,
                                            std::vector<Tensor<double>>,
                                            std::function<void(Node<double>&)>);
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace maskscribe::nn
