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
#include "hrdnet/postprocess.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace hrdnet {

void DetectionSet::Add(const Box& box, double score, int label) {
  boxes.push_back(box);
  scores.push_back(score);
  labels.push_back(label);
}

void DetectionSet::Append(const DetectionSet& other) {
  boxes.insert(boxes.end(), other.boxes.begin(), other.boxes.end());
  scores.insert(scores.end(), other.scores.begin(), other.scores.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

DetectionSet DetectionSet::Select(const std::vector<std::size_t>& indices) const {
  DetectionSet out;
  for (std::size_t i : indices) out.Add(boxes.at(i), scores.at(i), labels.at(i));
  return out;
}

double Iou(const Box& a, const Box& b) {
  const double inter = Intersect(a, b).area();
  if (inter <= 0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

namespace {

std::vector<std::size_t> ScoreOrder(const DetectionSet& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets.scores[a] > dets.scores[b];
  });
  return order;
}

}  // namespace

std::vector<std::size_t> NmsIndices(const DetectionSet& dets, double iou_threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t idx : ScoreOrder(dets)) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (dets.labels[k] == dets.labels[idx] &&
          Iou(dets.boxes[k], dets.boxes[idx]) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

DetectionSet Nms(const DetectionSet& dets, double iou_threshold) {
  return dets.Select(NmsIndices(dets, iou_threshold));
}

DetectionSet MultiScaleMerge(const std::vector<DetectionSet>& det_sets,
                             const std::vector<double>& scale_factors, double iou_threshold) {
  if (det_sets.size() != scale_factors.size()) {
    throw ConfigError("multi_scale_merge: " + std::to_string(det_sets.size()) +
                      " detection sets for " + std::to_string(scale_factors.size()) +
                      " scale factors");
  }
  DetectionSet all;
  for (std::size_t k = 0; k < det_sets.size(); ++k) {
    if (!(scale_factors[k] > 0)) throw ConfigError("multi_scale_merge: scale must be positive");
    const double inv = 1.0 / scale_factors[k];
    DetectionSet scaled = det_sets[k];
    scaled.boxes = ScaleBoxes(scaled.boxes, inv, inv);
    all.Append(scaled);
  }
  return Nms(all, iou_threshold);
}

DetectionSet EnsembleMerge(const std::vector<DetectionSet>& raw_det_sets, double iou_threshold) {
  DetectionSet all;
  for (const auto& s : raw_det_sets) all.Append(s);
  return Nms(all, iou_threshold);
}

DetectionSet TopK(const DetectionSet& dets, std::size_t max_count) {
  auto order = ScoreOrder(dets);
  if (order.size() > max_count) order.resize(max_count);
  return dets.Select(order);
}

std::string SerializeDetections(const std::vector<DetectionRecord>& records) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    arr.push_back({{"image_id", r.image_id},
                   {"category_id", r.category_id},
                   {"score", r.score},
                   {"bbox", {r.box.x, r.box.y, r.box.w, r.box.h}}});
  }
  return arr.dump(1) + "\n";
}

std::vector<DetectionRecord> ParseDetections(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("detection dump: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("detection dump: top level must be an array");
  std::vector<DetectionRecord> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    try {
      DetectionRecord r;
      r.image_id = rec.at("image_id").get<std::int64_t>();
      r.category_id = rec.at("category_id").get<int>();
      r.score = rec.at("score").get<double>();
      const auto& bb = rec.at("bbox");
      if (!bb.is_array() || bb.size() != 4) throw ParseError("bbox must have 4 numbers");
      r.box = Box{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                  bb[3].get<double>()};
      out.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError("detection dump record " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

void WriteDetectionDump(const std::string& path, const std::vector<DetectionRecord>& records) {
  std::ofstream f(path);
  if (!f) throw InvalidInputError("cannot write " + path);
  f << SerializeDetections(records);
}

std::vector<DetectionRecord> ReadDetectionDump(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInputError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ParseDetections(ss.str());
}

}  // namespace hrdnet
