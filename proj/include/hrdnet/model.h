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
#ifndef HRDNET_MODEL_H_
#define HRDNET_MODEL_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hrdnet/config.h"
#include "hrdnet/head.h"
#include "hrdnet/msfpn.h"
#include "hrdnet/postprocess.h"
#include "hrdnet/streams.h"

namespace hrdnet {

// Network-ready image: resized by (scale_x, scale_y) from the source frame,
// then zero-padded bottom/right. `height` x `width` is the resized, unpadded
// extent in which detections are clipped.
template <typename T>
struct PreparedInput {
  Tensor<T> image;
  int height = 0;
  int width = 0;
  double scale_x = 1;
  double scale_y = 1;
};

// Resizes so the image fits the configured resolution times `factor`, then
// pads to the pyramid alignment.
template <typename T>
PreparedInput<T> PrepareInput(const Tensor<float>& source, const HrdNetConfig& config,
                              double factor = 1.0);
// Same with an explicit source-to-network scale.
template <typename T>
PreparedInput<T> PrepareInputAtScale(const Tensor<float>& source, const HrdNetConfig& config,
                                     double scale);
// Scale that fits an h x w source into the configured resolution.
double FitScale(int height, int width, const HrdNetConfig& config);

// MD-IPN streams, MS-FPN and a single-stage head.
template <typename T>
class HrdNet {
 public:
  explicit HrdNet(const HrdNetConfig& config);

  struct Forward {
    std::vector<FeatureGroup<T>> raw;
    OutputPyramid<T> pyramid;
    HeadOutput<T> head;
  };
  // `image` must already satisfy the alignment contract.
  Forward Run(const Tensor<T>& image) const;
  HeadOutput<T> operator()(const Tensor<T>& image) const { return Run(image).head; }

  // Pre-NMS candidates in source pixels for one test scale.
  DetectionSet Candidates(const Tensor<float>& source, double factor = 1.0) const;
  // Single scale, or the configured test scales when multi_scale is set;
  // NMS followed by the max_detections cap.
  DetectionSet Detect(const Tensor<float>& source, bool multi_scale) const;
  DetectionSet Detect(const Tensor<float>& source) const {
    return Detect(source, config_.multi_scale_test);
  }

  nn::ParamList<T> Parameters() const;
  std::int64_t NumParameters() const;

  const HrdNetConfig& config() const { return config_; }
  const std::vector<StreamModel<T>>& streams() const { return streams_; }
  const MsFpn<T>& fpn() const { return fpn_; }
  const RetinaHead<T>& head() const { return head_; }

 private:
  HrdNetConfig config_;
  std::vector<StreamModel<T>> streams_;
  MsFpn<T> fpn_;
  RetinaHead<T> head_;
};

// Joint NMS over the pre-NMS candidates of several detectors.
template <typename T>
DetectionSet EnsembleDetect(const std::vector<const HrdNet<T>*>& models,
                            const Tensor<float>& source, double nms_iou, int max_detections);

// Detections of every image of `dataset` as evaluator records.
template <typename T>
std::vector<DetectionRecord> DetectDataset(const HrdNet<T>& model, const Dataset& dataset,
                                           bool multi_scale);
std::vector<DetectionRecord> ToRecords(const DetectionSet& dets, std::int64_t image_id,
                                       const std::vector<Category>& categories);

// Checkpoint archive: "HRDNETCK", u32 version, then length-prefixed config
// JSON, meta JSON and named tensors (f32 or f64, stored bit-exactly).
struct StoredTensor {
  Shape shape;
  int dtype_bytes = 4;
  std::vector<std::uint8_t> bytes;
  bool operator==(const StoredTensor&) const = default;
};

struct Checkpoint {
  HrdNetConfig config;
  std::string meta = "{}";
  std::map<std::string, StoredTensor> tensors;
};

template <typename T>
StoredTensor Store(const Tensor<T>& t);
template <typename T>
Tensor<T> Restore(const StoredTensor& s, const std::string& name);

void WriteCheckpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint ReadCheckpoint(const std::string& path);

// Parameters under their hierarchical names.
template <typename T>
Checkpoint MakeCheckpoint(const HrdNet<T>& model, const std::string& meta = "{}");
// Copies stored parameters into `model`; names and shapes must match.
template <typename T>
void LoadParameters(const Checkpoint& checkpoint, HrdNet<T>* model);

}  // namespace hrdnet

#endif  // HRDNET_MODEL_H_
