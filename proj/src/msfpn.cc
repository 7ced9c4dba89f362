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
#include "hrdnet/msfpn.h"

namespace hrdnet {
namespace {

std::string Where(int i, int j) {
  return "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

template <typename T>
void ExpectSpatial(const ag::Var<T>& term, const ag::Var<T>& target, int i, int j,
                   const char* what) {
  const Tensor<T>& a = term->value;
  const Tensor<T>& b = target->value;
  if (a.height() != b.height() || a.width() != b.width()) {
    throw AlignmentError("MS-FPN " + std::string(what) + " at " + Where(i, j) + ": " +
                         std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                         " does not match " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()));
  }
}

}  // namespace

std::string ToString(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kSimpleFpn:
      return "simple_fpn";
    case FusionStrategy::kAlignedByResolution:
      return "aligned_by_resolution";
    case FusionStrategy::kAlignedByDepth:
      return "aligned_by_depth";
  }
  return "unknown";
}

FusionStrategy ParseFusionStrategy(const std::string& name) {
  if (name == "simple_fpn") return FusionStrategy::kSimpleFpn;
  if (name == "aligned_by_resolution") return FusionStrategy::kAlignedByResolution;
  if (name == "aligned_by_depth") return FusionStrategy::kAlignedByDepth;
  throw ConfigError("unknown fusion strategy '" + name +
                    "' (expected simple_fpn, aligned_by_resolution or aligned_by_depth)");
}

template <typename T>
MsFpn<T>::MsFpn(const FusionConfig& config, const std::vector<std::vector<int>>& level_channels,
                std::uint64_t seed)
    : config_(config) {
  if (config.common_channels <= 0) throw ConfigError("fusion.common_channels must be positive");
  if (config.extra_levels < 0) throw ConfigError("fusion.extra_levels must be non-negative");
  if (level_channels.empty() || level_channels[0].empty()) {
    throw ConfigError("MS-FPN needs at least one stream with one level");
  }
  const int n = static_cast<int>(level_channels.size());
  const int m = static_cast<int>(level_channels[0].size());
  const int c = config.common_channels;
  auto gen = nn::MakeGenerator(seed, "fpn");

  lateral_.resize(n);
  cross_.resize(n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(level_channels[i].size()) != m) {
      throw ConfigError("MS-FPN: stream " + std::to_string(i) + " has a different level count");
    }
    for (int j = 0; j < m; ++j) {
      lateral_[i].emplace_back(level_channels[i][j], c, 1, 1, false);
      lateral_[i][j].InitXavierUniform(gen);
    }
  }
  // has_cross() reads the lateral grid, so crosses are built once it is complete.
  for (int i = 0; i < n; ++i) {
    cross_[i].resize(m);
    for (int j = 0; j < m; ++j) {
      if (!has_cross(i, j)) continue;
      cross_[i][j] = nn::Conv<T>(c, c, 1, 1, false);
      cross_[i][j].InitXavierUniform(gen);
    }
  }
  for (int j = 0; j < m; ++j) {
    output_.emplace_back(c, c, 3, 1, true);
    output_.back().InitXavierUniform(gen);
  }
  for (int e = 0; e < config.extra_levels; ++e) {
    extra_.emplace_back(c, c, 3, 2, true);
    extra_.back().InitXavierUniform(gen);
  }
}

template <typename T>
bool MsFpn<T>::has_cross(int i, int j) const {
  const int n = static_cast<int>(lateral_.size());
  const int m = n ? static_cast<int>(lateral_[0].size()) : 0;
  switch (config_.strategy) {
    case FusionStrategy::kAlignedByResolution:
      return i < n - 1 && j < m - 1;
    case FusionStrategy::kSimpleFpn:
      return i > 0;
    case FusionStrategy::kAlignedByDepth:
      return false;
  }
  return false;
}

template <typename T>
void MsFpn<T>::CheckGroups(const std::vector<FeatureGroup<T>>& groups) const {
  if (static_cast<int>(groups.size()) != num_streams()) {
    throw ConfigError("MS-FPN built for " + std::to_string(num_streams()) + " streams, got " +
                      std::to_string(groups.size()) + " groups");
  }
  for (int i = 0; i < num_streams(); ++i) {
    if (static_cast<int>(groups[i].maps.size()) != num_levels()) {
      throw AlignmentError("MS-FPN: group " + std::to_string(i) + " has " +
                           std::to_string(groups[i].maps.size()) + " levels, expected " +
                           std::to_string(num_levels()));
    }
    for (int j = 0; j < num_levels(); ++j) {
      if (groups[i].maps[j].channels() != lateral_[i][j].in_channels()) {
        throw AlignmentError("MS-FPN: raw map " + Where(i, j) + " has " +
                             std::to_string(groups[i].maps[j].channels()) +
                             " channels, expected " +
                             std::to_string(lateral_[i][j].in_channels()));
      }
    }
  }
}

template <typename T>
std::vector<FeatureGroup<T>> MsFpn<T>::Fuse(const std::vector<FeatureGroup<T>>& groups) const {
  switch (config_.strategy) {
    case FusionStrategy::kSimpleFpn:
      return FuseSimpleFpn(groups);
    case FusionStrategy::kAlignedByResolution:
      return FuseAlignedByResolution(groups);
    case FusionStrategy::kAlignedByDepth:
      return FuseAlignedByDepth(groups);
  }
  throw ConfigError("unknown fusion strategy");
}

template <typename T>
std::vector<FeatureGroup<T>> MsFpn<T>::FuseAlignedByDepth(
    const std::vector<FeatureGroup<T>>& groups) const {
  CheckGroups(groups);
  const int n = num_streams(), m = num_levels();
  std::vector<FeatureGroup<T>> fused = groups;
  for (int i = n - 1; i >= 0; --i) {
    for (int j = 0; j < m; ++j) {
      const FeatureMap<T>& raw = groups[i].maps[j];
      std::vector<ag::Var<T>> terms{lateral_[i][j](raw.data)};
      if (j > 0) {
        terms.push_back(ag::UpsampleNearest(fused[i].maps[j - 1].data, 2));
        ExpectSpatial(terms.back(), raw.data, i, j, "within-stream term");
      }
      if (i < n - 1) {
        terms.push_back(ag::UpsampleNearest(fused[i + 1].maps[j].data, 2));
        ExpectSpatial(terms.back(), raw.data, i, j, "cross-stream term");
      }
      fused[i].maps[j].data = ag::Sum(terms);
    }
  }
  return fused;
}

template <typename T>
std::vector<FeatureGroup<T>> MsFpn<T>::FuseAlignedByResolution(
    const std::vector<FeatureGroup<T>>& groups) const {
  CheckGroups(groups);
  const int n = num_streams(), m = num_levels();
  std::vector<FeatureGroup<T>> fused = groups;
  for (int i = n - 1; i >= 0; --i) {
    for (int j = 0; j < m; ++j) {
      const FeatureMap<T>& raw = groups[i].maps[j];
      std::vector<ag::Var<T>> terms{lateral_[i][j](raw.data)};
      if (j > 0) {
        terms.push_back(ag::UpsampleNearest(fused[i].maps[j - 1].data, 2));
        ExpectSpatial(terms.back(), raw.data, i, j, "within-stream term");
      }
      if (i < n - 1 && j + 1 < m) {
        terms.push_back(cross_[i][j](fused[i + 1].maps[j + 1].data));
        ExpectSpatial(terms.back(), raw.data, i, j, "cross-stream term");
      }
      fused[i].maps[j].data = ag::Sum(terms);
    }
  }
  return fused;
}

template <typename T>
std::vector<FeatureGroup<T>> MsFpn<T>::FuseSimpleFpn(
    const std::vector<FeatureGroup<T>>& groups) const {
  CheckGroups(groups);
  const int n = num_streams(), m = num_levels();
  std::vector<FeatureGroup<T>> fpn = groups;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const FeatureMap<T>& raw = groups[i].maps[j];
      std::vector<ag::Var<T>> terms{lateral_[i][j](raw.data)};
      if (j > 0) {
        terms.push_back(ag::UpsampleNearest(fpn[i].maps[j - 1].data, 2));
        ExpectSpatial(terms.back(), raw.data, i, j, "within-stream term");
      }
      fpn[i].maps[j].data = ag::Sum(terms);
    }
  }
  std::vector<FeatureGroup<T>> out = fpn;
  for (int j = 0; j < m; ++j) {
    std::vector<ag::Var<T>> terms{fpn[0].maps[j].data};
    for (int i = 1; i < n; ++i) {
      terms.push_back(ag::UpsampleNearest(cross_[i][j](fpn[i].maps[j].data), 1 << i));
      ExpectSpatial(terms.back(), fpn[0].maps[j].data, i, j, "stream merge");
    }
    out[0].maps[j].data = ag::Sum(terms);
  }
  return out;
}

template <typename T>
OutputPyramid<T> MsFpn<T>::ProjectOutputs(const FeatureGroup<T>& fused_group0) const {
  const int m = num_levels();
  if (static_cast<int>(fused_group0.maps.size()) != m) {
    throw AlignmentError("project_outputs: expected " + std::to_string(m) + " fused levels");
  }
  OutputPyramid<T> out;
  out.extra_levels = config_.extra_levels;
  out.maps.resize(m + config_.extra_levels);
  for (int j = 0; j < m; ++j) {
    const FeatureMap<T>& f = fused_group0.maps[j];
    out.maps[config_.extra_levels + j] = FeatureMap<T>{output_[j](f.data), 0, j, f.stride};
  }
  FeatureMap<T> prev = out.maps[config_.extra_levels];
  for (int e = 0; e < config_.extra_levels; ++e) {
    FeatureMap<T> next{extra_[e](prev.data), 0, -(e + 1), prev.stride * 2};
    out.maps[config_.extra_levels - 1 - e] = next;
    prev = next;
  }
  return out;
}

template <typename T>
nn::ParamList<T> MsFpn<T>::Parameters(const std::string& prefix) const {
  nn::ParamList<T> out;
  for (int i = 0; i < num_streams(); ++i) {
    for (int j = 0; j < num_levels(); ++j) {
      const std::string ij = std::to_string(i) + "_" + std::to_string(j);
      lateral_[i][j].CollectParams(prefix + ".lateral" + ij, &out);
      if (has_cross(i, j)) cross_[i][j].CollectParams(prefix + ".cross" + ij, &out);
    }
  }
  for (int j = 0; j < num_levels(); ++j) {
    output_[j].CollectParams(prefix + ".output" + std::to_string(j), &out);
  }
  for (std::size_t e = 0; e < extra_.size(); ++e) {
    extra_[e].CollectParams(prefix + ".extra" + std::to_string(e), &out);
  }
  return out;
}

template class MsFpn<float>;
template class MsFpn<double>;

}  // namespace hrdnet
