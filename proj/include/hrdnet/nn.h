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
#ifndef HRDNET_NN_H_
#define HRDNET_NN_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hrdnet/autograd.h"

namespace hrdnet::nn {

template <typename T>
struct NamedParam {
  std::string name;
  ag::Var<T> var;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
std::int64_t CountScalars(const ParamList<T>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += static_cast<std::int64_t>(p.var->value.size());
  return n;
}

// Seeded generator for one named sub-module, so that adding a module never
// shifts the weights of its siblings.
std::mt19937_64 MakeGenerator(std::uint64_t seed, const std::string& scope);

// Square-kernel convolution with "same" padding (k / 2).
template <typename T>
class Conv {
 public:
  Conv() = default;
  Conv(int in_channels, int out_channels, int kernel, int stride, bool bias);

  // N(0, sqrt(2 / fan_out)); bias zero.
  void InitKaimingFanOut(std::mt19937_64& gen);
  // U(-a, a), a = sqrt(6 / (fan_in + fan_out)); bias zero.
  void InitXavierUniform(std::mt19937_64& gen);
  void InitNormal(std::mt19937_64& gen, double stddev, double bias_value);

  ag::Var<T> operator()(const ag::Var<T>& x) const;
  void CollectParams(const std::string& prefix, ParamList<T>* out) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }
  const ag::Var<T>& weight() const { return weight_; }
  const ag::Var<T>& bias() const { return bias_; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1;
  ag::Var<T> weight_;
  ag::Var<T> bias_;
};

template <typename T>
class GroupNormLayer {
 public:
  GroupNormLayer() = default;
  // Uses the largest divisor of `channels` not exceeding `max_groups`.
  GroupNormLayer(int channels, int max_groups);

  ag::Var<T> operator()(const ag::Var<T>& x) const;
  void CollectParams(const std::string& prefix, ParamList<T>* out) const;
  int groups() const { return groups_; }

 private:
  int groups_ = 1;
  ag::Var<T> gamma_;
  ag::Var<T> beta_;
};

}  // namespace hrdnet::nn

#endif  // HRDNET_NN_H_
