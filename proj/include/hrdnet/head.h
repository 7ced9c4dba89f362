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
#ifndef HRDNET_HEAD_H_
#define HRDNET_HEAD_H_

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hrdnet/msfpn.h"
#include "hrdnet/postprocess.h"

namespace hrdnet {

struct AnchorBox {
  double cx = 0, cy = 0, w = 0, h = 0;
  Box ToBox() const { return Box{cx - w / 2, cy - h / 2, w, h}; }
};

struct LevelShape {
  int height = 0;
  int width = 0;
  int stride = 0;  // relative to the network input
  bool operator==(const LevelShape&) const = default;
};

// Anchors for every level, flattened per level in (y, x, anchor) order.
// Anchor a enumerates (scale, ratio) pairs with the ratio varying fastest.
struct AnchorSet {
  std::vector<std::vector<AnchorBox>> levels;
  std::vector<LevelShape> shapes;
  std::vector<double> scales;
  std::vector<double> ratios;

  int anchors_per_cell() const { return static_cast<int>(scales.size() * ratios.size()); }
  std::size_t total() const;
};

// Base anchor side is 4 * stride; ratio is height / width.
AnchorSet GenerateAnchors(const std::vector<LevelShape>& shapes, const std::vector<double>& scales,
                          const std::vector<double>& ratios);

constexpr int kIgnoreAnchor = -2;
constexpr int kBackgroundAnchor = -1;

struct AnchorTargets {
  std::vector<int> labels;  // class id, kBackgroundAnchor or kIgnoreAnchor
  std::vector<std::array<double, 4>> deltas;  // meaningful for positives only
  int num_positive = 0;
};

struct AssignerConfig {
  double positive_iou = 0.5;
  double negative_iou = 0.4;
  bool operator==(const AssignerConfig&) const = default;
};

AnchorTargets AssignTargets(const AnchorSet& anchors, const std::vector<Box>& gt_boxes,
                            const std::vector<int>& gt_labels, const AssignerConfig& cfg = {});

// Centre offsets normalised by anchor size, log size ratios.
std::array<double, 4> EncodeBox(const Box& box, const AnchorBox& anchor);
Box DecodeBox(const std::array<double, 4>& deltas, const AnchorBox& anchor);

struct FocalLossParams {
  double alpha = 0.25;
  double gamma = 2.0;
  bool operator==(const FocalLossParams&) const = default;
};

// Sigmoid focal loss of one logit against a binary target, and its
// derivative with respect to the logit.
double FocalLoss(double logit, bool positive, const FocalLossParams& p);
double FocalLossGrad(double logit, bool positive, const FocalLossParams& p);
double SmoothL1(double diff, double beta);
double SmoothL1Grad(double diff, double beta);

// Sums of the two loss terms over flat per-anchor arrays (before
// normalisation). logits: num_anchors * num_classes, deltas: num_anchors * 4.
struct LossSums {
  double classification = 0;
  double regression = 0;
};
LossSums FlatLossSums(std::span<const double> logits, std::span<const double> deltas,
                      const AnchorTargets& targets, int num_classes, const FocalLossParams& fp,
                      double smooth_l1_beta);

struct HeadConfig {
  int num_classes = 10;
  int in_channels = 256;
  int tower_convs = 1;
  int tower_norm_groups = 0;  // GroupNorm after each tower conv; 0 disables
  std::vector<double> anchor_scales{1.0, 1.2599210498948732, 1.5874010519681994};
  std::vector<double> anchor_ratios{0.5, 1.0, 2.0};
  double prior_probability = 0.01;
  FocalLossParams focal;
  double smooth_l1_beta = 0.11;
  double regression_weight = 1.0;  // lambda in total = cls + lambda * reg
  AssignerConfig assigner;
  double score_threshold = 0.05;
  int pre_nms_top_k = 1000;  // per level, 0 = unlimited

  int anchors_per_cell() const {
    return static_cast<int>(anchor_scales.size() * anchor_ratios.size());
  }
  bool operator==(const HeadConfig&) const = default;
};

template <typename T>
struct HeadOutput {
  std::vector<ag::Var<T>> class_logits;  // per level (A*K, h, w)
  std::vector<ag::Var<T>> box_deltas;    // per level (A*4, h, w)
  std::vector<LevelShape> shapes;
};

template <typename T>
struct LossBundle {
  ag::Var<T> total;  // differentiable scalar
  double classification = 0;
  double regression = 0;
  double total_value = 0;
};

// Interface every detection head implements on top of the fused pyramid.
template <typename T>
class DetectionHead {
 public:
  virtual ~DetectionHead() = default;
  virtual HeadOutput<T> Forward(const OutputPyramid<T>& pyramid) const = 0;
  virtual AnchorTargets AssignTargets(const std::vector<LevelShape>& shapes,
                                      const std::vector<Box>& gt_boxes,
                                      const std::vector<int>& gt_labels) const = 0;
  // `normalizer` divides both loss sums (usually the batch positive count).
  virtual LossBundle<T> Loss(const HeadOutput<T>& preds, const AnchorTargets& targets,
                             double normalizer) const = 0;
  // Pre-NMS candidates clipped to an image of `height` x `width` pixels.
  virtual DetectionSet Decode(const HeadOutput<T>& preds, int height, int width) const = 0;
  virtual nn::ParamList<T> Parameters(const std::string& prefix) const = 0;
};

template <typename T>
LossBundle<T> ComputeLoss(const HeadOutput<T>& preds, const AnchorTargets& targets,
                          const HeadConfig& cfg, double normalizer);

template <typename T>
DetectionSet DecodeDetections(const HeadOutput<T>& preds, const AnchorSet& anchors,
                              double score_threshold, int height, int width,
                              int pre_nms_top_k = 0);

// Single-stage anchor head: shared conv towers across levels, sigmoid focal
// classification and smooth-L1 box regression.
template <typename T>
class RetinaHead : public DetectionHead<T> {
 public:
  RetinaHead(const HeadConfig& config, std::uint64_t seed);

  HeadOutput<T> Forward(const OutputPyramid<T>& pyramid) const override;
  AnchorTargets AssignTargets(const std::vector<LevelShape>& shapes,
                              const std::vector<Box>& gt_boxes,
                              const std::vector<int>& gt_labels) const override;
  LossBundle<T> Loss(const HeadOutput<T>& preds, const AnchorTargets& targets,
                     double normalizer) const override;
  DetectionSet Decode(const HeadOutput<T>& preds, int height, int width) const override;
  nn::ParamList<T> Parameters(const std::string& prefix = "head") const override;

  const HeadConfig& config() const { return config_; }

 private:
  HeadConfig config_;
  std::vector<nn::Conv<T>> cls_tower_, reg_tower_;
  std::vector<nn::GroupNormLayer<T>> cls_norm_, reg_norm_;
  nn::Conv<T> cls_out_, reg_out_;
};

}  // namespace hrdnet

#endif  // HRDNET_HEAD_H_
