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
#ifndef HRDNET_EVALUATION_H_
#define HRDNET_EVALUATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hrdnet/data.h"
#include "hrdnet/postprocess.h"

namespace hrdnet {

struct AreaRange {
  std::string name;
  double lo = 0;
  double hi = 0;  // both bounds inclusive
};

struct EvalParams {
  std::vector<double> iou_thresholds;     // 0.50:0.05:0.95
  std::vector<double> recall_thresholds;  // 0:0.01:1
  std::vector<int> max_detections{1, 10, 100, 500};
  int ap_max_detections = 100;
  std::vector<AreaRange> area_ranges;  // all, small, medium, large

  EvalParams();
};

// Headline metrics. Size buckets without any ground truth are absent.
struct EvalReport {
  double ap = 0, ap50 = 0, ap75 = 0;
  std::optional<double> ap_small, ap_medium, ap_large;
  double ar1 = 0, ar10 = 0, ar100 = 0, ar500 = 0;
  std::map<int, double> per_category_ap;  // category id -> AP; classes with GT only

  std::string ToJson() const;
};

// IoU exactly as the reference evaluator computes it for boxes.
double CocoIou(const Box& det, const Box& gt);

// Greedy matching of detections (already sorted by score, descending)
// against ground truths of one class. Returns the matched GT index per
// detection, or -1.
std::vector<int> MatchDetections(const std::vector<Box>& dets, const std::vector<Box>& gts,
                                 double iou_threshold);

// 101-point interpolated AP of score-ordered detections. `tp[i]` and `fp[i]`
// may both be false for detections that count as neither.
double AveragePrecision101(const std::vector<bool>& tp, const std::vector<bool>& fp, int num_gt,
                           const std::vector<double>& recall_thresholds);
double AveragePrecision101(const std::vector<bool>& tp, int num_gt);

// COCO-style evaluation of detection records against a dataset's ground
// truth. Every record must reference an image of the dataset.
EvalReport Evaluate(const Dataset& ground_truth, const std::vector<DetectionRecord>& detections,
                    const EvalParams& params = {});

}  // namespace hrdnet

#endif  // HRDNET_EVALUATION_H_
