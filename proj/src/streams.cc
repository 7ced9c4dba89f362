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
#include "hrdnet/streams.h"

#include <numeric>

namespace hrdnet {

int StreamSpec::total_blocks() const {
  return std::accumulate(blocks_per_stage.begin(), blocks_per_stage.end(), 0);
}

int CoarsestStride(int num_levels) { return 4 << (num_levels - 1); }

void ValidateStreamSpecs(const std::vector<StreamSpec>& specs) {
  if (specs.empty()) throw ConfigError("at least one stream is required");
  const int m = specs.front().num_levels();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const StreamSpec& s = specs[i];
    const std::string where = "stream_specs[" + std::to_string(i) + "]";
    if (s.stream_index != static_cast<int>(i)) {
      throw ConfigError(where + ".stream_index must equal " + std::to_string(i));
    }
    if (s.num_levels() < 1) throw ConfigError(where + ".stage_channels must not be empty");
    if (s.blocks_per_stage.size() != s.stage_channels.size()) {
      throw ConfigError(where + ": blocks_per_stage and stage_channels differ in length");
    }
    if (s.num_levels() != m) {
      throw ConfigError(where + " has " + std::to_string(s.num_levels()) +
                        " levels, stream 0 has " + std::to_string(m));
    }
    if (s.stem_channels <= 0) throw ConfigError(where + ".stem_channels must be positive");
    for (int c : s.stage_channels) {
      if (c <= 0) throw ConfigError(where + ".stage_channels must be positive");
    }
    for (int b : s.blocks_per_stage) {
      if (b < 0) throw ConfigError(where + ".blocks_per_stage must be non-negative");
    }
    if (i > 0 && s.total_blocks() < specs[i - 1].total_blocks()) {
      throw ConfigError(where + ": total depth " + std::to_string(s.total_blocks()) +
                        " is below stream " + std::to_string(i - 1) + "'s " +
                        std::to_string(specs[i - 1].total_blocks()) +
                        " (depth must be non-decreasing with stream index)");
    }
  }
}

template <typename T>
StreamModel<T>::StreamModel(const StreamSpec& spec, int input_channels, std::uint64_t seed,
                            int norm_groups)
    : spec_(spec), input_channels_(input_channels) {
  if (input_channels <= 0 || spec.stem_channels <= 0) {
    throw ConfigError("stream needs positive input and stem channels");
  }
  if (spec.blocks_per_stage.size() != spec.stage_channels.size() || spec.num_levels() < 1) {
    throw ConfigError("stream spec lists must be non-empty and of equal length");
  }
  const std::string scope = "stream" + std::to_string(spec.stream_index);
  auto gen = nn::MakeGenerator(seed, scope);

  stem1_ = nn::Conv<T>(input_channels, spec.stem_channels, 3, 2, false);
  stem2_ = nn::Conv<T>(spec.stem_channels, spec.stem_channels, 3, 2, false);
  stem1_.InitKaimingFanOut(gen);
  stem2_.InitKaimingFanOut(gen);
  stem_norm1_ = nn::GroupNormLayer<T>(spec.stem_channels, norm_groups);
  stem_norm2_ = nn::GroupNormLayer<T>(spec.stem_channels, norm_groups);

  int in = spec.stem_channels;
  for (int s = 0; s < spec.num_levels(); ++s) {
    const int out = spec.stage_channels[s];
    const int stride = s == 0 ? 1 : 2;
    Stage stage;
    if (stride != 1 || in != out) {
      stage.has_projection = true;
      stage.projection = nn::Conv<T>(in, out, 3, stride, false);
      stage.projection.InitKaimingFanOut(gen);
      stage.projection_norm = nn::GroupNormLayer<T>(out, norm_groups);
    }
    for (int b = 0; b < spec.blocks_per_stage[s]; ++b) {
      Block blk;
      blk.norm1 = nn::GroupNormLayer<T>(out, norm_groups);
      blk.conv1 = nn::Conv<T>(out, out, 3, 1, false);
      blk.norm2 = nn::GroupNormLayer<T>(out, norm_groups);
      blk.conv2 = nn::Conv<T>(out, out, 3, 1, false);
      blk.conv1.InitKaimingFanOut(gen);
      blk.conv2.InitKaimingFanOut(gen);
      stage.blocks.push_back(std::move(blk));
    }
    stages_.push_back(std::move(stage));
    in = out;
  }
}

template <typename T>
FeatureGroup<T> StreamModel<T>::ExtractFeatures(const ag::Var<T>& image) const {
  const Tensor<T>& img = image->value;
  if (img.rank() != 3 || img.channels() != input_channels_) {
    throw InvalidInputError("stream " + std::to_string(spec_.stream_index) + " expects " +
                            std::to_string(input_channels_) + "-channel (C,H,W) input");
  }
  const int div = coarsest_stride();
  if (img.height() % div != 0 || img.width() % div != 0) {
    throw AlignmentError("stream " + std::to_string(spec_.stream_index) + ": input " +
                         std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                         " is not divisible by " + std::to_string(div));
  }
  ag::Var<T> x = ag::Relu(stem_norm1_(stem1_(image)));
  x = ag::Relu(stem_norm2_(stem2_(x)));

  const int m = num_levels();
  FeatureGroup<T> group;
  group.stream_index = spec_.stream_index;
  group.maps.resize(m);
  for (int s = 0; s < m; ++s) {
    const Stage& stage = stages_[s];
    if (stage.has_projection) x = ag::Relu(stage.projection_norm(stage.projection(x)));
    for (const Block& blk : stage.blocks) {
      ag::Var<T> r = blk.conv1(ag::Relu(blk.norm1(x)));
      r = blk.conv2(ag::Relu(blk.norm2(r)));
      x = ag::Add(x, r);
    }
    const int level = m - 1 - s;
    group.maps[level] = FeatureMap<T>{x, spec_.stream_index, level, 4 << s};
  }
  return group;
}

template <typename T>
nn::ParamList<T> StreamModel<T>::Parameters(const std::string& prefix) const {
  nn::ParamList<T> out;
  stem1_.CollectParams(prefix + ".stem.conv1", &out);
  stem_norm1_.CollectParams(prefix + ".stem.norm1", &out);
  stem2_.CollectParams(prefix + ".stem.conv2", &out);
  stem_norm2_.CollectParams(prefix + ".stem.norm2", &out);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const std::string sp = prefix + ".stage" + std::to_string(s);
    const Stage& stage = stages_[s];
    if (stage.has_projection) {
      stage.projection.CollectParams(sp + ".projection", &out);
      stage.projection_norm.CollectParams(sp + ".projection_norm", &out);
    }
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const std::string bp = sp + ".block" + std::to_string(b);
      stage.blocks[b].norm1.CollectParams(bp + ".norm1", &out);
      stage.blocks[b].conv1.CollectParams(bp + ".conv1", &out);
      stage.blocks[b].norm2.CollectParams(bp + ".norm2", &out);
      stage.blocks[b].conv2.CollectParams(bp + ".conv2", &out);
    }
  }
  return out;
}

template <typename T>
std::vector<FeatureGroup<T>> ForwardMdipn(const std::vector<ag::Var<T>>& pyramid_images,
                                          const std::vector<StreamModel<T>>& models) {
  if (pyramid_images.size() != models.size()) {
    throw ConfigError("MD-IPN: " + std::to_string(pyramid_images.size()) +
                      " pyramid images for " + std::to_string(models.size()) + " streams");
  }
  std::vector<StreamSpec> specs;
  for (const auto& m : models) specs.push_back(m.spec());
  ValidateStreamSpecs(specs);
  std::vector<FeatureGroup<T>> groups;
  groups.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    groups.push_back(models[i].ExtractFeatures(pyramid_images[i]));
  }
  return groups;
}

template <typename T>
std::vector<FeatureGroup<T>> ForwardMdipn(const ImagePyramid<T>& pyramid,
                                          const std::vector<StreamModel<T>>& models) {
  std::vector<ag::Var<T>> images;
  for (const auto& img : pyramid.images) images.push_back(ag::Constant(img));
  return ForwardMdipn(images, models);
}

template class StreamModel<float>;
template class StreamModel<double>;
template std::vector<FeatureGroup<float>> ForwardMdipn(const std::vector<ag::Var<float>>&,
                                                       const std::vector<StreamModel<float>>&);
template std::vector<FeatureGroup<double>> ForwardMdipn(
    const std::vector<ag::Var<double>>&, const std::vector<StreamModel<double>>&);
template std::vector<FeatureGroup<float>> ForwardMdipn(const ImagePyramid<float>&,
                                                       const std::vector<StreamModel<float>>&);
template std::vector<FeatureGroup<double>> ForwardMdipn(const ImagePyramid<double>&,
                                                        const std::vector<StreamModel<double>>&);

}  // namespace hrdnet
