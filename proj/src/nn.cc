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
#include "hrdnet/nn.h"

#include <cmath>

namespace hrdnet::nn {

std::mt19937_64 MakeGenerator(std::uint64_t seed, const std::string& scope) {
  // FNV-1a over the scope name, mixed with the seed.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : scope) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

template <typename T>
Conv<T>::Conv(int in_channels, int out_channels, int kernel, int stride, bool bias)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride) {
  if (in_channels <= 0 || out_channels <= 0) {
    throw ConfigError("convolution needs positive channel counts, got " +
                      std::to_string(in_channels) + " -> " + std::to_string(out_channels));
  }
  if (kernel <= 0 || kernel % 2 == 0 || stride <= 0) {
    throw ConfigError("convolution needs an odd kernel and positive stride");
  }
  weight_ = ag::Parameter(Tensor<T>(Shape{out_channels, in_channels, kernel, kernel}));
  if (bias) bias_ = ag::Parameter(Tensor<T>(Shape{out_channels}));
}

template <typename T>
void Conv<T>::InitKaimingFanOut(std::mt19937_64& gen) {
  const double std = std::sqrt(2.0 / (out_ * kernel_ * kernel_));
  std::normal_distribution<double> dist(0.0, std);
  for (T& v : weight_->value.storage()) v = static_cast<T>(dist(gen));
  if (bias_) bias_->value.Fill(T(0));
}

template <typename T>
void Conv<T>::InitXavierUniform(std::mt19937_64& gen) {
  const double fan_in = in_ * kernel_ * kernel_;
  const double fan_out = out_ * kernel_ * kernel_;
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (T& v : weight_->value.storage()) v = static_cast<T>(dist(gen));
  if (bias_) bias_->value.Fill(T(0));
}

template <typename T>
void Conv<T>::InitNormal(std::mt19937_64& gen, double stddev, double bias_value) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (T& v : weight_->value.storage()) v = static_cast<T>(dist(gen));
  if (bias_) bias_->value.Fill(static_cast<T>(bias_value));
}

template <typename T>
ag::Var<T> Conv<T>::operator()(const ag::Var<T>& x) const {
  return ag::Conv2d(x, weight_, bias_, stride_, kernel_ / 2);
}

template <typename T>
void Conv<T>::CollectParams(const std::string& prefix, ParamList<T>* out) const {
  out->push_back({prefix + ".weight", weight_});
  if (bias_) out->push_back({prefix + ".bias", bias_});
}

template <typename T>
GroupNormLayer<T>::GroupNormLayer(int channels, int max_groups) {
  if (channels <= 0) throw ConfigError("group norm needs positive channels");
  groups_ = 1;
  for (int g = std::max(1, std::min(max_groups, channels)); g >= 1; --g) {
    if (channels % g == 0) {
      groups_ = g;
      break;
    }
  }
  gamma_ = ag::Parameter(Tensor<T>(Shape{channels}, T(1)));
  beta_ = ag::Parameter(Tensor<T>(Shape{channels}, T(0)));
}

template <typename T>
ag::Var<T> GroupNormLayer<T>::operator()(const ag::Var<T>& x) const {
  return ag::GroupNorm(x, gamma_, beta_, groups_);
}

template <typename T>
void GroupNormLayer<T>::CollectParams(const std::string& prefix, ParamList<T>* out) const {
  out->push_back({prefix + ".gamma", gamma_});
  out->push_back({prefix + ".beta", beta_});
}

template class Conv<float>;
template class Conv<double>;
template class GroupNormLayer<float>;
template class GroupNormLayer<double>;

}  // namespace hrdnet::nn
