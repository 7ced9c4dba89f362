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
#ifndef HRDNET_STREAMS_H_
#define HRDNET_STREAMS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "hrdnet/geometry.h"
#include "hrdnet/nn.h"

namespace hrdnet {

// Depth and width of one backbone stream. Stage s runs at stride 4 * 2^s.
struct StreamSpec {
  int stream_index = 0;
  std::vector<int> blocks_per_stage;  // residual blocks per stage, one entry per level
  std::vector<int> stage_channels;
  int stem_channels = 16;

  int num_levels() const { return static_cast<int>(stage_channels.size()); }
  int total_blocks() const;
  bool operator==(const StreamSpec&) const = default;
};

// Throws ConfigError when a spec is malformed or when total depth decreases
// with stream index (shallow networks must take the high-resolution inputs).
void ValidateStreamSpecs(const std::vector<StreamSpec>& specs);

// Coarsest backbone stride for M levels: 4 * 2^(M-1).
int CoarsestStride(int num_levels);

template <typename T>
struct FeatureMap {
  ag::Var<T> data;  // (C, H, W)
  int stream_index = 0;
  int level_index = 0;  // 0 = coarsest
  int stride = 0;       // relative to the stream's own input

  int channels() const { return data->value.channels(); }
  int height() const { return data->value.height(); }
  int width() const { return data->value.width(); }
};

template <typename T>
struct FeatureGroup {
  int stream_index = 0;
  std::vector<FeatureMap<T>> maps;  // maps[j].level_index == j
};

template <typename T>
class StreamModel {
 public:
  StreamModel() = default;
  StreamModel(const StreamSpec& spec, int input_channels, std::uint64_t seed,
              int norm_groups = 4);

  FeatureGroup<T> ExtractFeatures(const ag::Var<T>& image) const;
  FeatureGroup<T> ExtractFeatures(const Tensor<T>& image) const {
    return ExtractFeatures(ag::Constant(image));
  }

  nn::ParamList<T> Parameters(const std::string& prefix = "stream") const;
  const StreamSpec& spec() const { return spec_; }
  int num_levels() const { return spec_.num_levels(); }
  int coarsest_stride() const { return CoarsestStride(num_levels()); }
  int input_channels() const { return input_channels_; }

 private:
  struct Block {
    nn::GroupNormLayer<T> norm1, norm2;
    nn::Conv<T> conv1, conv2;
  };
  struct Stage {
    bool has_projection = false;
    nn::Conv<T> projection;
    nn::GroupNormLayer<T> projection_norm;
    std::vector<Block> blocks;
  };

  StreamSpec spec_;
  int input_channels_ = 3;
  nn::Conv<T> stem1_, stem2_;
  nn::GroupNormLayer<T> stem_norm1_, stem_norm2_;
  std::vector<Stage> stages_;
};

// Runs stream i on pyramid member i; streams share no weights.
template <typename T>
std::vector<FeatureGroup<T>> ForwardMdipn(const std::vector<ag::Var<T>>& pyramid_images,
                                          const std::vector<StreamModel<T>>& models);
template <typename T>
std::vector<FeatureGroup<T>> ForwardMdipn(const ImagePyramid<T>& pyramid,
                                          const std::vector<StreamModel<T>>& models);

// Exact number of trainable scalars over any mix of modules that expose
// Parameters(), including vectors of them.
template <typename M>
std::int64_t CountParameters(const M& module) {
  return nn::CountScalars(module.Parameters());
}
template <typename M>
std::int64_t CountParameters(const std::vector<M>& modules) {
  std::int64_t n = 0;
  for (const auto& m : modules) n += CountParameters(m);
  return n;
}
template <typename First, typename Second, typename... Rest>
std::int64_t CountParameters(const First& first, const Second& second, const Rest&... rest) {
  return CountParameters(first) + CountParameters(second, rest...);
}

}  // namespace hrdnet

#endif  // HRDNET_STREAMS_H_
