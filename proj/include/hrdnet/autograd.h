// Copyright 2026 The HRDNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef HRDNET_AUTOGRAD_H_
#define HRDNET_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <vector>

#include "hrdnet/tensor.h"

// Minimal reverse-mode automatic differentiation over Tensor values.
//
// Every op returns a fresh node holding its forward value; when gradients are
// enabled and at least one input requires them, the node also records its
// inputs and a closure that pushes its gradient back into them. Backward()
// walks the recorded graph in reverse topological order.
namespace hrdnet::ag {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Returns the gradient buffer, allocating zeros on first use.
  Tensor<T>& MutableGrad() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

// Thread-local switch; inference code disables graph recording.
bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
Var<T> Constant(Tensor<T> value);

// Leaf that accumulates gradients.
template <typename T>
Var<T> Parameter(Tensor<T> value);

// Builds a node from a precomputed value. `backward` receives the finished
// node and must add into the MutableGrad() of the inputs that require it.
template <typename T>
Var<T> MakeNode(Tensor<T> value, std::vector<Var<T>> inputs,
                std::function<void(Node<T>&)> backward);

// x: (Cin, H, W); weight: (Cout, Cin, k, k); bias: null or (Cout).
template <typename T>
Var<T> Conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
              int padding);

// gamma, beta: (C). Statistics are per sample, per channel group.
template <typename T>
Var<T> GroupNorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, int groups,
                 T eps = T(1e-5));

template <typename T>
Var<T> Relu(const Var<T>& x);

template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b);

// Sums a non-empty list of same-shaped values.
template <typename T>
Var<T> Sum(const std::vector<Var<T>>& terms);

// Nearest-neighbour upsampling by an integer factor in both spatial dims.
template <typename T>
Var<T> UpsampleNearest(const Var<T>& x, int factor);

// Seeds d(root)/d(root) = 1 for a single-element root and propagates.
template <typename T>
void Backward(const Var<T>& root);

}  // namespace hrdnet::ag

#endif  // HRDNET_AUTOGRAD_H_
