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
#ifndef HRDNET_DATA_H_
#define HRDNET_DATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "hrdnet/geometry.h"

namespace hrdnet {

// Parameters of the synthetic small-object scene generator.
struct SceneSpec {
  int height = 256;
  int width = 256;
  int min_objects = 3;
  int max_objects = 10;
  int min_object_size = 4;  // pixels, square sprites
  int max_object_size = 24;
  int num_classes = 5;
  double clutter_level = 0.3;  // in [0, 1]
  std::uint64_t seed = 0;
  double max_overlap_iou = 0.3;
  int max_placement_retries = 100;
  bool operator==(const SceneSpec&) const = default;
};

void ValidateSceneSpec(const SceneSpec& spec);

// Deterministic in (spec.seed, index). Pixels are 3-channel values k / 255.
AnnotatedImage<float> GenerateScene(const SceneSpec& spec, int index);

std::string SceneClassName(int label);

// 8-bit interleaving-free image storage: (C, H, W) bytes.
struct Image8 {
  int channels = 0, height = 0, width = 0;
  std::vector<std::uint8_t> pixels;
};

Image8 ToImage8(const Tensor<float>& image);
Tensor<float> FromImage8(const Image8& image);

// Binary PPM (P6, 8-bit) for 3-channel images, PGM (P5) for 1-channel.
void WriteNetpbm(const std::string& path, const Image8& image);
Image8 ReadNetpbm(const std::string& path);

struct Category {
  int id = 0;
  std::string name;
  bool operator==(const Category&) const = default;
};

struct ImageRecord {
  std::int64_t id = 0;
  std::string file_name;
  int height = 0;
  int width = 0;
  bool operator==(const ImageRecord&) const = default;
};

// Annotated images plus the category table. Labels are indices into
// `categories`; annotation files carry the categories' ids instead.
struct Dataset {
  std::string split;
  std::string image_root;  // directory that `file_name` is relative to
  std::vector<Category> categories;
  std::vector<ImageRecord> images;
  std::vector<std::vector<Box>> boxes;
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<std::int64_t>> annotation_ids;
  std::vector<Image8> pixels;  // optional in-memory copies, parallel to images

  std::size_t size() const { return images.size(); }
  int num_classes() const { return static_cast<int>(categories.size()); }
  // Loads pixels from memory when present, otherwise from image_root.
  AnnotatedImage<float> Sample(std::size_t i) const;
  int LabelOfCategory(int category_id) const;
};

enum class BoxPolicy {
  kReject,  // any box leaving the image is an error
  kClip,    // clip to the image; degenerate results are still errors
};

Dataset ParseAnnotations(const std::string& text, BoxPolicy policy = BoxPolicy::kReject);
std::string SerializeAnnotations(const Dataset& dataset);
Dataset LoadAnnotations(const std::string& path, BoxPolicy policy = BoxPolicy::kReject);
void SaveAnnotations(const std::string& path, const Dataset& dataset);

// Renders `count` scenes with indices first_index.. into an in-memory dataset.
Dataset GenerateDataset(const SceneSpec& spec, int count, int first_index,
                        const std::string& split);

// Writes <dir>/images/*.ppm and <dir>/annotations.json.
void WriteDataset(const std::string& dir, const Dataset& dataset);

}  // namespace hrdnet

#endif  // HRDNET_DATA_H_
