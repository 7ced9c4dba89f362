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
#include "hrdnet/autograd.h"

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace hrdnet {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

namespace ag {
namespace {

thread_local bool grad_enabled = true;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
bool NeedsGraph(std::initializer_list<const Var<T>*> inputs) {
  if (!grad_enabled) return false;
  for (const Var<T>* v : inputs) {
    if (*v && (*v)->requires_grad) return true;
  }
  return false;
}

// Unfolds (C, H, W) into (C*k*k, Ho*Wo) patches.
template <typename T>
void Im2Col(const T* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* col) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(ci) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void Col2Im(const T* col, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* x) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = x + (static_cast<std::size_t>(ci) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

bool GradEnabled() { return grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

template <typename T>
Var<T> Constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return node;
}

template <typename T>
Var<T> Parameter(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

template <typename T>
Var<T> MakeNode(Tensor<T> value, std::vector<Var<T>> inputs,
                std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (!grad_enabled) return node;
  bool any = false;
  for (const auto& in : inputs) any = any || (in && in->requires_grad);
  if (!any) return node;
  node->requires_grad = true;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  return node;
}

template <typename T>
Var<T> Conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride,
              int padding) {
  const Tensor<T>& in = x->value;
  const Tensor<T>& wt = weight->value;
  if (in.rank() != 3 || wt.rank() != 4 || wt.dim(2) != wt.dim(3)) {
    throw InvalidInputError("conv2d: expected (C,H,W) input and (O,I,k,k) weight");
  }
  const int cin = in.channels(), h = in.height(), w = in.width();
  const int cout = wt.dim(0), k = wt.dim(2);
  if (wt.dim(1) != cin) {
    throw InvalidInputError("conv2d: weight expects " + std::to_string(wt.dim(1)) +
                            " input channels, got " + std::to_string(cin));
  }
  if (bias && (bias->value.size() != static_cast<std::size_t>(cout))) {
    throw InvalidInputError("conv2d: bias size mismatch");
  }
  const int ho = (h + 2 * padding - k) / stride + 1;
  const int wo = (w + 2 * padding - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw InvalidInputError("conv2d: input smaller than kernel");
  const int kdim = cin * k * k;
  const int n = ho * wo;
  const bool direct = (k == 1 && stride == 1 && padding == 0);

  AlignedVector<T> col;
  const T* col_ptr = in.data();
  if (!direct) {
    col.resize(static_cast<std::size_t>(kdim) * n);
    Im2Col(in.data(), cin, h, w, k, stride, padding, ho, wo, col.data());
    col_ptr = col.data();
  }

  Tensor<T> out(cout, ho, wo);
  MatMap<T> y(out.data(), cout, n);
  ConstMatMap<T> wm(wt.data(), cout, kdim);
  ConstMatMap<T> cm(col_ptr, kdim, n);
  y.noalias() = wm * cm;
  if (bias) {
    for (int o = 0; o < cout; ++o) y.row(o).array() += bias->value[o];
  }

  if (!NeedsGraph<T>({&x, &weight, &bias})) return Constant(std::move(out));

  auto saved_col = std::make_shared<AlignedVector<T>>(std::move(col));
  return MakeNode<T>(
      std::move(out), {x, weight, bias},
      [=](Node<T>& self) {
        ConstMatMap<T> dy(self.grad.data(), cout, n);
        const T* cp = direct ? x->value.data() : saved_col->data();
        ConstMatMap<T> cm2(cp, kdim, n);
        if (weight->requires_grad) {
          MatMap<T> dw(weight->MutableGrad().data(), cout, kdim);
          dw.noalias() += dy * cm2.transpose();
        }
        if (bias && bias->requires_grad) {
          T* db = bias->MutableGrad().data();
          for (int o = 0; o < cout; ++o) {
            const T* row = self.grad.data() + static_cast<std::size_t>(o) * n;
            T acc = 0;
            for (int p = 0; p < n; ++p) acc += row[p];
            db[o] += acc;
          }
        }
        if (x->requires_grad) {
          ConstMatMap<T> wm2(weight->value.data(), cout, kdim);
          if (direct) {
            MatMap<T> dx(x->MutableGrad().data(), kdim, n);
            dx.noalias() += wm2.transpose() * dy;
          } else {
            RowMatrix<T> dcol = wm2.transpose() * dy;
            Col2Im(dcol.data(), cin, h, w, k, stride, padding, ho, wo,
                   x->MutableGrad().data());
          }
        }
      });
}

template <typename T>
Var<T> GroupNorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, int groups,
                 T eps) {
  const Tensor<T>& in = x->value;
  const int c = in.channels();
  if (groups <= 0 || c % groups != 0) {
    throw InvalidInputError("group_norm: " + std::to_string(c) +
                            " channels not divisible into " + std::to_string(groups) +
                            " groups");
  }
  const std::size_t plane = static_cast<std::size_t>(in.height()) * in.width();
  const std::size_t per_group = plane * (c / groups);
  Tensor<T> out(in.shape());
  auto xhat = std::make_shared<std::vector<T>>(in.size());
  auto inv_std = std::make_shared<std::vector<T>>(groups);
  for (int g = 0; g < groups; ++g) {
    const std::size_t base = g * per_group;
    T mean = 0;
    for (std::size_t i = 0; i < per_group; ++i) mean += in[base + i];
    mean /= static_cast<T>(per_group);
    T var = 0;
    for (std::size_t i = 0; i < per_group; ++i) {
      const T d = in[base + i] - mean;
      var += d * d;
    }
    var /= static_cast<T>(per_group);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[g] = is;
    for (std::size_t i = 0; i < per_group; ++i) {
      const std::size_t idx = base + i;
      const int ch = static_cast<int>(idx / plane);
      const T xh = (in[idx] - mean) * is;
      (*xhat)[idx] = xh;
      out[idx] = xh * gamma->value[ch] + beta->value[ch];
    }
  }
  if (!NeedsGraph<T>({&x, &gamma, &beta})) return Constant(std::move(out));
  return MakeNode<T>(
      std::move(out), {x, gamma, beta}, [=](Node<T>& self) {
        const Tensor<T>& dy = self.grad;
        if (gamma->requires_grad || beta->requires_grad) {
          T* dg = gamma->requires_grad ? gamma->MutableGrad().data() : nullptr;
          T* db = beta->requires_grad ? beta->MutableGrad().data() : nullptr;
          for (int ch = 0; ch < c; ++ch) {
            T sg = 0, sb = 0;
            for (std::size_t i = ch * plane; i < (ch + 1) * plane; ++i) {
              sg += dy[i] * (*xhat)[i];
              sb += dy[i];
            }
            if (dg) dg[ch] += sg;
            if (db) db[ch] += sb;
          }
        }
        if (!x->requires_grad) return;
        T* dx = x->MutableGrad().data();
        for (int g = 0; g < groups; ++g) {
          const std::size_t base = g * per_group;
          T mean_d = 0, mean_dx = 0;
          for (std::size_t i = 0; i < per_group; ++i) {
            const std::size_t idx = base + i;
            const T d = dy[idx] * gamma->value[static_cast<int>(idx / plane)];
            mean_d += d;
            mean_dx += d * (*xhat)[idx];
          }
          mean_d /= static_cast<T>(per_group);
          mean_dx /= static_cast<T>(per_group);
          const T is = (*inv_std)[g];
          for (std::size_t i = 0; i < per_group; ++i) {
            const std::size_t idx = base + i;
            const T d = dy[idx] * gamma->value[static_cast<int>(idx / plane)];
            dx[idx] += is * (d - mean_d - (*xhat)[idx] * mean_dx);
          }
        }
      });
}

template <typename T>
Var<T> Relu(const Var<T>& x) {
  Tensor<T> out(x->value.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = x->value[i] > T(0) ? x->value[i] : T(0);
  if (!NeedsGraph<T>({&x})) return Constant(std::move(out));
  return MakeNode<T>(std::move(out), {x}, [x, n](Node<T>& self) {
    T* dx = x->MutableGrad().data();
    for (std::size_t i = 0; i < n; ++i) {
      if (self.value[i] > T(0)) dx[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b) {
  return Sum<T>({a, b});
}

template <typename T>
Var<T> Sum(const std::vector<Var<T>>& terms) {
  if (terms.empty()) throw InvalidInputError("sum of zero terms");
  Tensor<T> out = terms.front()->value;
  for (std::size_t t = 1; t < terms.size(); ++t) {
    const Tensor<T>& v = terms[t]->value;
    if (v.shape() != out.shape()) {
      throw InvalidInputError("add: shape " + ShapeToString(v.shape()) + " vs " +
                              ShapeToString(out.shape()));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  if (!grad_enabled) return Constant(std::move(out));
  return MakeNode<T>(std::move(out), terms, [terms](Node<T>& self) {
    for (const auto& t : terms) {
      if (!t->requires_grad) continue;
      T* d = t->MutableGrad().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> UpsampleNearest(const Var<T>& x, int factor) {
  const Tensor<T>& in = x->value;
  if (factor < 1) throw InvalidInputError("upsample factor must be >= 1");
  const int c = in.channels(), h = in.height(), w = in.width();
  const int ho = h * factor, wo = w * factor;
  Tensor<T> out(c, ho, wo);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < ho; ++y) {
      const T* src = in.data() + (static_cast<std::size_t>(ch) * h + y / factor) * w;
      T* dst = out.data() + (static_cast<std::size_t>(ch) * ho + y) * wo;
      for (int xo = 0; xo < wo; ++xo) dst[xo] = src[xo / factor];
    }
  }
  if (!NeedsGraph<T>({&x})) return Constant(std::move(out));
  return MakeNode<T>(std::move(out), {x}, [=](Node<T>& self) {
    T* dx = x->MutableGrad().data();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < ho; ++y) {
        const T* g = self.grad.data() + (static_cast<std::size_t>(ch) * ho + y) * wo;
        T* dst = dx + (static_cast<std::size_t>(ch) * h + y / factor) * w;
        for (int xo = 0; xo < wo; ++xo) dst[xo / factor] += g[xo];
      }
    }
  });
}

template <typename T>
void Backward(const Var<T>& root) {
  if (root->value.size() != 1) {
    throw InvalidInputError("backward: root must be a scalar, got shape " +
                            ShapeToString(root->value.shape()));
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child && child->requires_grad && child->backward && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  root->MutableGrad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && node->grad.size() == node->value.size()) node->backward(*node);
  }
}

#define HRDNET_INSTANTIATE_AG(T)                                                         \
  template Var<T> Constant<T>(Tensor<T>);                                                \
  template Var<T> Parameter<T>(Tensor<T>);                                               \
  template Var<T> MakeNode<T>(Tensor<T>, std::vector<Var<T>>,                            \
                              std::function<void(Node<T>&)>);                            \
  template Var<T> Conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, int);      \
  template Var<T> GroupNorm<T>(const Var<T>&, const Var<T>&, const Var<T>&, int, T);     \
  template Var<T> Relu<T>(const Var<T>&);                                                \
  template Var<T> Add<T>(const Var<T>&, const Var<T>&);                                  \
  template Var<T> Sum<T>(const std::vector<Var<T>>&);                                    \
  template Var<T> UpsampleNearest<T>(const Var<T>&, int);                                \
  template void Backward<T>(const Var<T>&);

HRDNET_INSTANTIATE_AG(float)
HRDNET_INSTANTIATE_AG(double)

}  // namespace ag
}  // namespace hrdnet
