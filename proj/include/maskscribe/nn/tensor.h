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

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "maskscribe/error.h"

namespace maskscribe::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

template <typename S>
struct Node {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // empty until the first gradient lands here
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pushes this->grad into parents
  bool requires_grad = false;

  bool is_leaf() const { return !backward; }
  std::vector<S>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    return grad;
  }
};

// Reference-counted handle onto a tape node. Copies alias the same storage.
//
// Data is row-major. Most ops treat a tensor as a matrix of rows() x cols(),
// where cols() is the last dimension and rows() the product of the rest.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<S>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, S value);
  static Tensor from(Shape shape, std::vector<S> data);
  static Tensor scalar(S value) { return from({1}, {value}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t cols() const { return node_->shape.empty() ? 1 : node_->shape.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  std::span<const S> data() const { return node_->value; }
  std::span<S> mutable_data() { return node_->value; }
  S item() const;
  S at(std::size_t row, std::size_t col) const { return node_->value[row * cols() + col]; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const S> grad() const { return node_->grad; }
  std::span<S> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  // A tape-free copy of the values.
  Tensor detach() const { return from(shape(), node_->value); }

  Node<S>* node() const { return node_.get(); }
  const std::shared_ptr<Node<S>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<S>> node_;
};

// Gradient recording is thread-local so inference threads can run with
// recording off while a training thread records.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. Throws NumericError if any value is non-finite. The
// node joins the tape only when recording is on and some parent requires a
// gradient; otherwise the backward rule is dropped.
template <typename S>
Tensor<S> make_result(const char* op, Shape shape, std::vector<S> value, std::vector<Tensor<S>> parents,
                      std::function<void(Node<S>&)> backward);

// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
// calls; intermediate gradients are recomputed each call.
template <typename S>
void backward(const Tensor<S>& loss);

// Throws NumericError naming `where` if any value is NaN or infinite.
template <typename S>
void check_finite(std::span<const S> values, const char* where);

}  // namespace maskscribe::nn
