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
#include "hrdnet/head.h"

#include <algorithm>
#include <limits>
#include <numeric>

namespace hrdnet {
namespace {

// exp(|dw|) is capped at 1000 / 16 when decoding sizes.
const double kMaxLogRatio = std::abs(std::log(16.0 / 1000.0));

double Softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::size_t AnchorSet::total() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.size();
  return n;
}

AnchorSet GenerateAnchors(const std::vector<LevelShape>& shapes, const std::vector<double>& scales,
                          const std::vector<double>& ratios) {
  if (scales.empty() || ratios.empty()) {
    throw ConfigError("anchor scales and ratios must be non-empty");
  }
  AnchorSet set;
  set.shapes = shapes;
  set.scales = scales;
  set.ratios = ratios;
  for (const LevelShape& s : shapes) {
    const double base = 4.0 * s.stride;
    std::vector<AnchorBox> cell;
    for (double sc : scales) {
      for (double r : ratios) {
        const double side = base * sc;
        cell.push_back({0, 0, side / std::sqrt(r), side * std::sqrt(r)});
      }
    }
    std::vector<AnchorBox> level;
    level.reserve(static_cast<std::size_t>(s.height) * s.width * cell.size());
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double cx = (x + 0.5) * s.stride, cy = (y + 0.5) * s.stride;
        for (const AnchorBox& c : cell) level.push_back({cx, cy, c.w, c.h});
      }
    }
    set.levels.push_back(std::move(level));
  }
  return set;
}

std::array<double, 4> EncodeBox(const Box& box, const AnchorBox& a) {
  const double cx = box.x + box.w / 2, cy = box.y + box.h / 2;
  return {(cx - a.cx) / a.w, (cy - a.cy) / a.h, std::log(box.w / a.w), std::log(box.h / a.h)};
}

Box DecodeBox(const std::array<double, 4>& d, const AnchorBox& a) {
  const double dw = std::clamp(d[2], -kMaxLogRatio, kMaxLogRatio);
  const double dh = std::clamp(d[3], -kMaxLogRatio, kMaxLogRatio);
  const double cx = a.cx + d[0] * a.w, cy = a.cy + d[1] * a.h;
  const double w = a.w * std::exp(dw), h = a.h * std::exp(dh);
  return Box{cx - w / 2, cy - h / 2, w, h};
}

AnchorTargets AssignTargets(const AnchorSet& anchors, const std::vector<Box>& gt_boxes,
                            const std::vector<int>& gt_labels, const AssignerConfig& cfg) {
  if (gt_boxes.size() != gt_labels.size()) {
    throw InvalidInputError("assign_targets: boxes and labels differ in length");
  }
  const std::size_t n = anchors.total();
  AnchorTargets t;
  t.labels.assign(n, kBackgroundAnchor);
  t.deltas.assign(n, {0, 0, 0, 0});
  if (gt_boxes.empty()) return t;

  std::vector<const AnchorBox*> flat;
  flat.reserve(n);
  for (const auto& level : anchors.levels) {
    for (const auto& a : level) flat.push_back(&a);
  }
  const std::size_t g = gt_boxes.size();
  std::vector<double> best_iou(n, 0.0);
  std::vector<int> best_gt(n, -1);
  std::vector<double> gt_best_iou(g, 0.0);
  std::vector<std::size_t> gt_best_anchor(g, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Box ab = flat[i]->ToBox();
    for (std::size_t k = 0; k < g; ++k) {
      const double v = Iou(ab, gt_boxes[k]);
      if (v > best_iou[i]) {
        best_iou[i] = v;
        best_gt[i] = static_cast<int>(k);
      }
      if (v > gt_best_iou[k]) {
        gt_best_iou[k] = v;
        gt_best_anchor[k] = i;
      }
    }
  }
  std::vector<int> assigned(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (best_iou[i] >= cfg.positive_iou) {
      assigned[i] = best_gt[i];
    } else if (best_iou[i] >= cfg.negative_iou) {
      t.labels[i] = kIgnoreAnchor;
    }
  }
  for (std::size_t k = 0; k < g; ++k) {
    if (gt_best_iou[k] > 0) assigned[gt_best_anchor[k]] = static_cast<int>(k);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i] < 0) continue;
    t.labels[i] = gt_labels[assigned[i]];
    t.deltas[i] = EncodeBox(gt_boxes[assigned[i]], *flat[i]);
    ++t.num_positive;
  }
  return t;
}

double FocalLoss(double logit, bool positive, const FocalLossParams& p) {
  if (positive) return p.alpha * std::pow(Sigmoid(-logit), p.gamma) * Softplus(-logit);
  return (1 - p.alpha) * std::pow(Sigmoid(logit), p.gamma) * Softplus(logit);
}

double FocalLossGrad(double logit, bool positive, const FocalLossParams& p) {
  const double pr = Sigmoid(logit), q = Sigmoid(-logit);
  if (positive) {
    const double log_p = -Softplus(-logit);
    return p.alpha * std::pow(q, p.gamma) * (p.gamma * pr * log_p - q);
  }
  const double log_q = -Softplus(logit);
  return (1 - p.alpha) * std::pow(pr, p.gamma) * (pr - p.gamma * q * log_q);
}

double SmoothL1(double diff, double beta) {
  const double a = std::abs(diff);
  return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
}

double SmoothL1Grad(double diff, double beta) {
  const double a = std::abs(diff);
  if (a < beta) return diff / beta;
  return diff > 0 ? 1.0 : -1.0;
}

LossSums FlatLossSums(std::span<const double> logits, std::span<const double> deltas,
                      const AnchorTargets& targets, int num_classes, const FocalLossParams& fp,
                      double smooth_l1_beta) {
  LossSums s;
  for (std::size_t i = 0; i < targets.labels.size(); ++i) {
    const int label = targets.labels[i];
    if (label == kIgnoreAnchor) continue;
    for (int k = 0; k < num_classes; ++k) {
      s.classification += FocalLoss(logits[i * num_classes + k], label == k, fp);
    }
    if (label >= 0) {
      for (int d = 0; d < 4; ++d) {
        s.regression += SmoothL1(deltas[i * 4 + d] - targets.deltas[i][d], smooth_l1_beta);
      }
    }
  }
  return s;
}

template <typename T>
LossBundle<T> ComputeLoss(const HeadOutput<T>& preds, const AnchorTargets& targets,
                          const HeadConfig& cfg, double normalizer) {
  const int k_classes = cfg.num_classes;
  const int a_cells = cfg.anchors_per_cell();
  if (preds.class_logits.size() != preds.box_deltas.size() ||
      preds.class_logits.size() != preds.shapes.size()) {
    throw InvalidInputError("compute_loss: inconsistent prediction levels");
  }
  if (!(normalizer > 0)) throw InvalidInputError("compute_loss: normalizer must be positive");
  std::size_t expected = 0;
  for (const auto& s : preds.shapes) expected += static_cast<std::size_t>(s.height) * s.width * a_cells;
  if (expected != targets.labels.size()) {
    throw InvalidInputError("compute_loss: " + std::to_string(targets.labels.size()) +
                            " targets for " + std::to_string(expected) + " anchors");
  }

  std::vector<Tensor<T>> grad_cls, grad_reg;
  double cls_sum = 0, reg_sum = 0;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < preds.shapes.size(); ++l) {
    const Tensor<T>& logits = preds.class_logits[l]->value;
    const Tensor<T>& deltas = preds.box_deltas[l]->value;
    for (T v : logits.storage()) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError("compute_loss: non-finite class logit at level " + std::to_string(l));
      }
    }
    for (T v : deltas.storage()) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError("compute_loss: non-finite box delta at level " + std::to_string(l));
      }
    }
    const std::size_t hw = static_cast<std::size_t>(preds.shapes[l].height) * preds.shapes[l].width;
    Tensor<T> gc(logits.shape()), gr(deltas.shape());
    for (std::size_t p = 0; p < hw; ++p) {
      for (int a = 0; a < a_cells; ++a) {
        const std::size_t n = offset + p * a_cells + a;
        const int label = targets.labels[n];
        if (label == kIgnoreAnchor) continue;
        for (int k = 0; k < k_classes; ++k) {
          const std::size_t idx = static_cast<std::size_t>(a * k_classes + k) * hw + p;
          const double x = logits[idx];
          cls_sum += FocalLoss(x, label == k, cfg.focal);
          gc[idx] = static_cast<T>(FocalLossGrad(x, label == k, cfg.focal) / normalizer);
        }
        if (label < 0) continue;
        for (int d = 0; d < 4; ++d) {
          const std::size_t idx = static_cast<std::size_t>(a * 4 + d) * hw + p;
          const double diff = deltas[idx] - targets.deltas[n][d];
          reg_sum += SmoothL1(diff, cfg.smooth_l1_beta);
          gr[idx] = static_cast<T>(cfg.regression_weight *
                                   SmoothL1Grad(diff, cfg.smooth_l1_beta) / normalizer);
        }
      }
    }
    offset += hw * a_cells;
    grad_cls.push_back(std::move(gc));
    grad_reg.push_back(std::move(gr));
  }

  LossBundle<T> out;
  out.classification = cls_sum / normalizer;
  out.regression = reg_sum / normalizer;
  out.total_value = out.classification + cfg.regression_weight * out.regression;
  if (!std::isfinite(out.total_value)) throw NumericError("compute_loss: non-finite loss");

  std::vector<ag::Var<T>> inputs = preds.class_logits;
  inputs.insert(inputs.end(), preds.box_deltas.begin(), preds.box_deltas.end());
  const std::size_t levels = preds.shapes.size();
  out.total = ag::MakeNode<T>(
      Tensor<T>(Shape{1}, static_cast<T>(out.total_value)), inputs,
      [inputs, levels, gcs = std::move(grad_cls), grs = std::move(grad_reg)](ag::Node<T>& self) {
        const T g = self.grad[0];
        for (std::size_t l = 0; l < levels; ++l) {
          for (int which = 0; which < 2; ++which) {
            const auto& var = inputs[which * levels + l];
            if (!var->requires_grad) continue;
            const Tensor<T>& src = which == 0 ? gcs[l] : grs[l];
            T* dst = var->MutableGrad().data();
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] += g * src[i];
          }
        }
      });
  return out;
}

template <typename T>
DetectionSet DecodeDetections(const HeadOutput<T>& preds, const AnchorSet& anchors,
                              double score_threshold, int height, int width, int pre_nms_top_k) {
  const int a_cells = anchors.anchors_per_cell();
  DetectionSet out;
  for (std::size_t l = 0; l < preds.shapes.size(); ++l) {
    const Tensor<T>& logits = preds.class_logits[l]->value;
    const Tensor<T>& deltas = preds.box_deltas[l]->value;
    const std::size_t hw = static_cast<std::size_t>(preds.shapes[l].height) * preds.shapes[l].width;
    const int k_classes = logits.channels() / a_cells;
    struct Candidate {
      double score;
      std::size_t anchor;
      int label;
    };
    std::vector<Candidate> cands;
    for (std::size_t p = 0; p < hw; ++p) {
      for (int a = 0; a < a_cells; ++a) {
        for (int k = 0; k < k_classes; ++k) {
          const double s = Sigmoid(logits[static_cast<std::size_t>(a * k_classes + k) * hw + p]);
          if (s > score_threshold) cands.push_back({s, p * a_cells + a, k});
        }
      }
    }
    if (pre_nms_top_k > 0 && cands.size() > static_cast<std::size_t>(pre_nms_top_k)) {
      std::stable_sort(cands.begin(), cands.end(),
                       [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
      cands.resize(pre_nms_top_k);
    }
    for (const Candidate& c : cands) {
      const std::size_t p = c.anchor / a_cells;
      const int a = static_cast<int>(c.anchor % a_cells);
      std::array<double, 4> d;
      for (int k = 0; k < 4; ++k) d[k] = deltas[static_cast<std::size_t>(a * 4 + k) * hw + p];
      const Box b = DecodeBox(d, anchors.levels[l][c.anchor]);
      const double x0 = std::clamp(b.x, 0.0, double(width));
      const double y0 = std::clamp(b.y, 0.0, double(height));
      const double x1 = std::clamp(b.right(), 0.0, double(width));
      const double y1 = std::clamp(b.bottom(), 0.0, double(height));
      if (x1 - x0 <= 0 || y1 - y0 <= 0) continue;
      out.Add(Box{x0, y0, x1 - x0, y1 - y0}, c.score, c.label);
    }
  }
  return out;
}

template <typename T>
RetinaHead<T>::RetinaHead(const HeadConfig& config, std::uint64_t seed) : config_(config) {
  if (config.num_classes <= 0) throw ConfigError("head.num_classes must be positive");
  if (config.in_channels <= 0) throw ConfigError("head.in_channels must be positive");
  if (config.tower_convs < 0) throw ConfigError("head.tower_convs must be non-negative");
  if (config.tower_norm_groups < 0) {
    throw ConfigError("head.tower_norm_groups must be non-negative");
  }
  if (config.anchor_scales.empty() || config.anchor_ratios.empty()) {
    throw ConfigError("head anchor scales and ratios must be non-empty");
  }
  if (!(config.prior_probability > 0 && config.prior_probability < 1)) {
    throw ConfigError("head.prior_probability must lie in (0, 1)");
  }
  auto gen = nn::MakeGenerator(seed, "head");
  const int c = config.in_channels;
  for (int t = 0; t < config.tower_convs; ++t) {
    cls_tower_.emplace_back(c, c, 3, 1, true);
    cls_tower_.back().InitNormal(gen, 0.01, 0.0);
    reg_tower_.emplace_back(c, c, 3, 1, true);
    reg_tower_.back().InitNormal(gen, 0.01, 0.0);
    if (config.tower_norm_groups > 0) {
      cls_norm_.emplace_back(c, config.tower_norm_groups);
      reg_norm_.emplace_back(c, config.tower_norm_groups);
    }
  }
  const int a = config.anchors_per_cell();
  const double prior_bias = -std::log((1 - config.prior_probability) / config.prior_probability);
  cls_out_ = nn::Conv<T>(c, a * config.num_classes, 3, 1, true);
  cls_out_.InitNormal(gen, 0.01, prior_bias);
  reg_out_ = nn::Conv<T>(c, a * 4, 3, 1, true);
  reg_out_.InitNormal(gen, 0.01, 0.0);
}

template <typename T>
HeadOutput<T> RetinaHead<T>::Forward(const OutputPyramid<T>& pyramid) const {
  HeadOutput<T> out;
  for (const FeatureMap<T>& m : pyramid.maps) {
    if (m.channels() != config_.in_channels) {
      throw ConfigError("head expects " + std::to_string(config_.in_channels) +
                        " channels, pyramid level has " + std::to_string(m.channels()));
    }
    ag::Var<T> c = m.data, r = m.data;
    for (std::size_t t = 0; t < cls_tower_.size(); ++t) {
      c = cls_tower_[t](c);
      r = reg_tower_[t](r);
      if (!cls_norm_.empty()) {
        c = cls_norm_[t](c);
        r = reg_norm_[t](r);
      }
      c = ag::Relu(c);
      r = ag::Relu(r);
    }
    out.class_logits.push_back(cls_out_(c));
    out.box_deltas.push_back(reg_out_(r));
    out.shapes.push_back({m.height(), m.width(), m.stride});
  }
  return out;
}

template <typename T>
AnchorTargets RetinaHead<T>::AssignTargets(const std::vector<LevelShape>& shapes,
                                           const std::vector<Box>& gt_boxes,
                                           const std::vector<int>& gt_labels) const {
  for (int label : gt_labels) {
    if (label < 0 || label >= config_.num_classes) {
      throw InvalidInputError("ground-truth label " + std::to_string(label) +
                              " outside [0, " + std::to_string(config_.num_classes) + ")");
    }
  }
  return hrdnet::AssignTargets(GenerateAnchors(shapes, config_.anchor_scales,
                                               config_.anchor_ratios),
                               gt_boxes, gt_labels, config_.assigner);
}

template <typename T>
LossBundle<T> RetinaHead<T>::Loss(const HeadOutput<T>& preds, const AnchorTargets& targets,
                                  double normalizer) const {
  return ComputeLoss(preds, targets, config_, normalizer);
}

template <typename T>
DetectionSet RetinaHead<T>::Decode(const HeadOutput<T>& preds, int height, int width) const {
  const AnchorSet anchors =
      GenerateAnchors(preds.shapes, config_.anchor_scales, config_.anchor_ratios);
  return DecodeDetections(preds, anchors, config_.score_threshold, height, width,
                          config_.pre_nms_top_k);
}

template <typename T>
nn::ParamList<T> RetinaHead<T>::Parameters(const std::string& prefix) const {
  nn::ParamList<T> out;
  for (std::size_t t = 0; t < cls_tower_.size(); ++t) {
    cls_tower_[t].CollectParams(prefix + ".cls_tower" + std::to_string(t), &out);
    if (!cls_norm_.empty()) cls_norm_[t].CollectParams(prefix + ".cls_norm" + std::to_string(t), &out);
  }
  for (std::size_t t = 0; t < reg_tower_.size(); ++t) {
    reg_tower_[t].CollectParams(prefix + ".reg_tower" + std::to_string(t), &out);
    if (!reg_norm_.empty()) reg_norm_[t].CollectParams(prefix + ".reg_norm" + std::to_string(t), &out);
  }
  cls_out_.CollectParams(prefix + ".cls_out", &out);
  reg_out_.CollectParams(prefix + ".reg_out", &out);
  return out;
}

template class RetinaHead<float>;
template class RetinaHead<double>;
template LossBundle<float> ComputeLoss(const HeadOutput<float>&, const AnchorTargets&,
                                       const HeadConfig&, double);
template LossBundle<double> ComputeLoss(const HeadOutput<double>&, const AnchorTargets&,
                                        const HeadConfig&, double);
template DetectionSet DecodeDetections(const HeadOutput<float>&, const AnchorSet&, double, int,
                                       int, int);
template DetectionSet DecodeDetections(const HeadOutput<double>&, const AnchorSet&, double, int,
                                       int, int);

}  // namespace hrdnet
