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
#ifndef HRDNET_CONFIG_H_
#define HRDNET_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "hrdnet/data.h"
#include "hrdnet/head.h"
#include "hrdnet/msfpn.h"
#include "hrdnet/schedule.h"
#include "hrdnet/streams.h"

namespace hrdnet {

// Everything needed to build, train and run one detector. `height` x
// `width` is the network input resolution R; images are resized to fit it.
struct HrdNetConfig {
  int n_streams = 2;
  double alpha = 0.5;
  int levels = 4;
  std::vector<StreamSpec> stream_specs;
  int norm_groups = 4;
  FusionConfig fusion;
  HeadConfig head;  // head.in_channels follows fusion.common_channels
  Schedule schedule;
  std::string train_dataset;
  std::string val_dataset;
  int height = 256;
  int width = 256;
  std::uint64_t seed = 0;
  bool train_on_patches = false;
  int batch_size = 2;
  std::vector<double> test_scales{0.75, 1.0, 1.25};
  bool multi_scale_test = false;
  double nms_iou = 0.5;
  int max_detections = 100;
  int eval_every = 1;  // epochs between validation passes; the last epoch always runs
  std::int64_t max_iters_per_epoch = 0;  // 0 = full pass over the training split

  bool operator==(const HrdNetConfig&) const = default;
};

// Throws ConfigError whose message starts with the offending field path.
void ValidateConfig(const HrdNetConfig& config);

// JSON text. Missing fields keep their defaults; unknown fields are errors.
HrdNetConfig ParseConfig(const std::string& text);
std::string SerializeConfig(const HrdNetConfig& config);
HrdNetConfig LoadConfig(const std::string& path);
void SaveConfig(const std::string& path, const HrdNetConfig& config);

// Residual stream with `blocks` blocks per stage and stage widths
// `base_channels` * 2^s.
StreamSpec MakeStreamSpec(int stream_index, int levels, int blocks, int base_channels,
                          int stem_channels);

// Small synthetic-scene presets: stream i gets `blocks[i]` blocks per stage.
HrdNetConfig MakeDeskConfig(const std::vector<int>& blocks, FusionStrategy strategy,
                            int resolution, int num_classes, int common_channels = 32);

// Single-backbone detector made of stream `stream` alone, fed the resolution
// that stream sees inside the full model (alpha^stream * R).
HrdNetConfig SingleStreamConfig(const HrdNetConfig& config, int stream);

// Same detector with another fusion strategy.
HrdNetConfig WithFusion(const HrdNetConfig& config, FusionStrategy strategy);

SceneSpec ParseSceneSpec(const std::string& text);
std::string SerializeSceneSpec(const SceneSpec& spec);

}  // namespace hrdnet

#endif  // HRDNET_CONFIG_H_
