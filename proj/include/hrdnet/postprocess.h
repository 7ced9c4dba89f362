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
#ifndef HRDNET_POSTPROCESS_H_
#define HRDNET_POSTPROCESS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hrdnet/geometry.h"

namespace hrdnet {

// Parallel arrays of boxes (source-image pixels), scores and class labels.
struct DetectionSet {
  std::vector<Box> boxes;
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return boxes.size(); }
  bool empty() const { return boxes.empty(); }
  void Add(const Box& box, double score, int label);
  void Append(const DetectionSet& other);
  DetectionSet Select(const std::vector<std::size_t>& indices) const;
  bool operator==(const DetectionSet&) const = default;
};

double Iou(const Box& a, const Box& b);

// Greedy per-class suppression. Candidates are visited by descending score,
// ties broken by ascending input index; a candidate is dropped when its IoU
// with an already kept box of the same class exceeds `iou_threshold`.
// Returns kept input indices in visiting order.
std::vector<std::size_t> NmsIndices(const DetectionSet& dets, double iou_threshold = 0.5);
DetectionSet Nms(const DetectionSet& dets, double iou_threshold = 0.5);

// Each set was produced at `scale_factors[k]` times the source resolution;
// boxes are mapped back to source pixels before a joint NMS.
DetectionSet MultiScaleMerge(const std::vector<DetectionSet>& det_sets,
                             const std::vector<double>& scale_factors,
                             double iou_threshold = 0.5);

// Concatenates pre-NMS candidates of several models and runs one joint NMS.
DetectionSet EnsembleMerge(const std::vector<DetectionSet>& raw_det_sets,
                           double iou_threshold = 0.5);

// Sorts by score (descending, stable) and keeps at most `max_count` entries.
DetectionSet TopK(const DetectionSet& dets, std::size_t max_count);

// One line of the detection dump: a COCO-style result record.
struct DetectionRecord {
  std::int64_t image_id = 0;
  int category_id = 0;
  double score = 0;
  Box box;
  bool operator==(const DetectionRecord&) const = default;
};

std::string SerializeDetections(const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> ParseDetections(const std::string& text);
void WriteDetectionDump(const std::string& path, const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> ReadDetectionDump(const std::string& path);

}  // namespace hrdnet

#endif  // HRDNET_POSTPROCESS_H_
