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
#ifndef HRDNET_MSFPN_H_
#define HRDNET_MSFPN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "hrdnet/streams.h"

namespace hrdnet {

enum class FusionStrategy { kSimpleFpn, kAlignedByResolution, kAlignedByDepth };

std::string ToString(FusionStrategy s);
// Accepts "simple_fpn", "aligned_by_resolution", "aligned_by_depth".
FusionStrategy ParseFusionStrategy(const std::string& name);

struct FusionConfig {
  FusionStrategy strategy = FusionStrategy::kAlignedByDepth;
  int common_channels = 256;
  int extra_levels = 1;  // coarser outputs appended by stride-2 convolution
  bool operator==(const FusionConfig&) const = default;
};

// Fused detection pyramid ordered coarsest to finest. The appended extra
// levels come first, so maps[extra_levels + j] is the projection of fused
// level j of stream 0.
template <typename T>
struct OutputPyramid {
  std::vector<FeatureMap<T>> maps;
  int extra_levels = 0;

  const FeatureMap<T>& level(int j) const { return maps.at(extra_levels + j); }
  int size() const { return static_cast<int>(maps.size()); }
};

// Multi-scale FPN over N feature groups of M levels each.
//
// Fusion runs streams from the deepest (N-1) to the shallowest (0) and levels
// from coarse (0) to fine (M-1), so every upsampled source has already been
// fused. Fusion convolutions are 1x1 without bias or activation.
template <typename T>
class MsFpn {
 public:
  MsFpn() = default;
  // level_channels[i][j]: channels of raw map (i, j).
  MsFpn(const FusionConfig& config, const std::vector<std::vector<int>>& level_channels,
        std::uint64_t seed);

  std::vector<FeatureGroup<T>> Fuse(const std::vector<FeatureGroup<T>>& groups) const;

  // fused(i,j) = L(raw(i,j)) + Up2(fused(i,j-1)) + Up2(fused(i+1,j))
  std::vector<FeatureGroup<T>> FuseAlignedByDepth(
      const std::vector<FeatureGroup<T>>& groups) const;
  // fused(i,j) = L(raw(i,j)) + Up2(fused(i,j-1)) + X(fused(i+1,j+1))
  std::vector<FeatureGroup<T>> FuseAlignedByResolution(
      const std::vector<FeatureGroup<T>>& groups) const;
  // Independent FPN per stream; group 0 then receives every other stream's
  // output at the same level after a 1x1 conv and 2^i upsampling. Groups
  // i > 0 of the result hold the per-stream FPN outputs.
  std::vector<FeatureGroup<T>> FuseSimpleFpn(const std::vector<FeatureGroup<T>>& groups) const;

  // F'_j = Conv3x3(fused(0, j)), plus extra_levels stride-2 convs on top.
  OutputPyramid<T> ProjectOutputs(const FeatureGroup<T>& fused_group0) const;

  OutputPyramid<T> operator()(const std::vector<FeatureGroup<T>>& groups) const {
    return ProjectOutputs(Fuse(groups).front());
  }

  nn::ParamList<T> Parameters(const std::string& prefix = "fpn") const;

  const FusionConfig& config() const { return config_; }
  int num_streams() const { return static_cast<int>(lateral_.size()); }
  int num_levels() const { return lateral_.empty() ? 0 : static_cast<int>(lateral_[0].size()); }

  const nn::Conv<T>& lateral(int i, int j) const { return lateral_.at(i).at(j); }
  // Cross-stream 1x1 conv; only present for aligned_by_resolution (i < N-1,
  // j < M-1) and simple_fpn (i > 0).
  const nn::Conv<T>& cross(int i, int j) const { return cross_.at(i).at(j); }
  bool has_cross(int i, int j) const;
  const nn::Conv<T>& output(int j) const { return output_.at(j); }
  const nn::Conv<T>& extra(int e) const { return extra_.at(e); }

 private:
  void CheckGroups(const std::vector<FeatureGroup<T>>& groups) const;

  FusionConfig config_;
  std::vector<std::vector<nn::Conv<T>>> lateral_;
  std::vector<std::vector<nn::Conv<T>>> cross_;
  std::vector<nn::Conv<T>> output_;
  std::vector<nn::Conv<T>> extra_;
};

}  // namespace hrdnet

#endif  // HRDNET_MSFPN_H_
