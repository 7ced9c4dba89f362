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
#include "hrdnet/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hrdnet/errors.h"

namespace hrdnet {
namespace {

using Json = nlohmann::ordered_json;

// Reads typed fields from one JSON object and rejects keys it never read.
class ObjectReader {
 public:
  ObjectReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj.is_object()) throw ConfigError(Where() + ": expected an object");
  }

  template <typename V>
  void Get(const std::string& key, V* out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      *out = it->template get<V>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(Field(key) + ": wrong type");
    }
  }

  const Json* Child(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void Finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(Field(it.key()) + ": unknown field");
    }
  }

  std::string Field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string Where() const { return path_.empty() ? "config" : path_; }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Json ParseJson(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

std::string ReadFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInputError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw InvalidInputError("cannot write " + path);
  f << text;
}

void Require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

void ValidateConfig(const HrdNetConfig& c) {
  Require(c.n_streams >= 1, "n_streams", "must be >= 1");
  Require(c.levels >= 1, "levels", "must be >= 1");
  Require(static_cast<int>(c.stream_specs.size()) == c.n_streams, "stream_specs",
          "expected n_streams (" + std::to_string(c.n_streams) + ") entries, got " +
              std::to_string(c.stream_specs.size()));
  for (std::size_t i = 0; i < c.stream_specs.size(); ++i) {
    Require(c.stream_specs[i].num_levels() == c.levels,
            "stream_specs[" + std::to_string(i) + "].stage_channels",
            "expected levels (" + std::to_string(c.levels) + ") entries");
  }
  ValidateStreamSpecs(c.stream_specs);
  Require(c.alpha > 0 && c.alpha <= 1, "alpha", "must lie in (0, 1]");
  if (c.fusion.strategy != FusionStrategy::kSimpleFpn || c.n_streams > 1) {
    Require(c.alpha == 0.5, "alpha",
            "must be 0.5 when fusion.strategy is " + ToString(c.fusion.strategy) +
                " (got " + std::to_string(c.alpha) + ")");
  }
  Require(c.norm_groups >= 1, "norm_groups", "must be >= 1");
  Require(c.fusion.common_channels >= 1, "fusion.common_channels", "must be >= 1");
  Require(c.fusion.extra_levels >= 0, "fusion.extra_levels", "must be >= 0");
  Require(c.head.in_channels == c.fusion.common_channels, "head.in_channels",
          "must equal fusion.common_channels");
  Require(c.head.num_classes >= 1, "head.num_classes", "must be >= 1");
  Require(c.head.tower_convs >= 0, "head.tower_convs", "must be >= 0");
  Require(c.head.tower_norm_groups >= 0, "head.tower_norm_groups", "must be >= 0");
  Require(!c.head.anchor_scales.empty(), "head.anchor_scales", "must not be empty");
  Require(!c.head.anchor_ratios.empty(), "head.anchor_ratios", "must not be empty");
  for (double v : c.head.anchor_scales) Require(v > 0, "head.anchor_scales", "must be positive");
  for (double v : c.head.anchor_ratios) Require(v > 0, "head.anchor_ratios", "must be positive");
  Require(c.head.prior_probability > 0 && c.head.prior_probability < 1,
          "head.prior_probability", "must lie in (0, 1)");
  Require(c.head.assigner.negative_iou <= c.head.assigner.positive_iou, "head.negative_iou",
          "must not exceed head.positive_iou");
  Require(c.head.smooth_l1_beta > 0, "head.smooth_l1_beta", "must be positive");
  Require(c.head.pre_nms_top_k >= 0, "head.pre_nms_top_k", "must be >= 0");
  ValidateSchedule(c.schedule, "schedule");
  Require(c.height >= 1 && c.width >= 1, "resolution", "must be positive");
  Require(c.batch_size >= 1, "batch_size", "must be >= 1");
  Require(!c.test_scales.empty(), "test_scales", "must not be empty");
  for (double s : c.test_scales) Require(s > 0, "test_scales", "must be positive");
  Require(c.nms_iou >= 0 && c.nms_iou <= 1, "nms_iou", "must lie in [0, 1]");
  Require(c.max_detections >= 1, "max_detections", "must be >= 1");
  Require(c.eval_every >= 1, "eval_every", "must be >= 1");
  Require(c.max_iters_per_epoch >= 0, "max_iters_per_epoch", "must be >= 0");
}

HrdNetConfig ParseConfig(const std::string& text) {
  const Json root = ParseJson(text, "config");
  HrdNetConfig c;
  ObjectReader r(root, "");
  r.Get("n_streams", &c.n_streams);
  r.Get("alpha", &c.alpha);
  r.Get("levels", &c.levels);
  if (const Json* specs = r.Child("stream_specs")) {
    if (!specs->is_array()) throw ConfigError("stream_specs: expected a list");
    c.stream_specs.clear();
    for (std::size_t i = 0; i < specs->size(); ++i) {
      ObjectReader s((*specs)[i], "stream_specs[" + std::to_string(i) + "]");
      StreamSpec spec;
      spec.stream_index = static_cast<int>(i);
      s.Get("stream_index", &spec.stream_index);
      s.Get("blocks_per_stage", &spec.blocks_per_stage);
      s.Get("stage_channels", &spec.stage_channels);
      s.Get("stem_channels", &spec.stem_channels);
      s.Finish();
      c.stream_specs.push_back(spec);
    }
  }
  r.Get("norm_groups", &c.norm_groups);
  if (const Json* f = r.Child("fusion")) {
    ObjectReader s(*f, "fusion");
    std::string strategy = ToString(c.fusion.strategy);
    s.Get("strategy", &strategy);
    try {
      c.fusion.strategy = ParseFusionStrategy(strategy);
    } catch (const Error& e) {
      throw ConfigError(std::string("fusion.strategy: ") + e.what());
    }
    s.Get("common_channels", &c.fusion.common_channels);
    s.Get("extra_levels", &c.fusion.extra_levels);
    s.Finish();
  }
  c.head.in_channels = c.fusion.common_channels;
  if (const Json* h = r.Child("head")) {
    ObjectReader s(*h, "head");
    HeadConfig& hc = c.head;
    s.Get("num_classes", &hc.num_classes);
    s.Get("tower_convs", &hc.tower_convs);
    s.Get("tower_norm_groups", &hc.tower_norm_groups);
    s.Get("anchor_scales", &hc.anchor_scales);
    s.Get("anchor_ratios", &hc.anchor_ratios);
    s.Get("prior_probability", &hc.prior_probability);
    s.Get("focal_alpha", &hc.focal.alpha);
    s.Get("focal_gamma", &hc.focal.gamma);
    s.Get("smooth_l1_beta", &hc.smooth_l1_beta);
    s.Get("regression_weight", &hc.regression_weight);
    s.Get("positive_iou", &hc.assigner.positive_iou);
    s.Get("negative_iou", &hc.assigner.negative_iou);
    s.Get("score_threshold", &hc.score_threshold);
    s.Get("pre_nms_top_k", &hc.pre_nms_top_k);
    s.Finish();
  }
  if (const Json* sc = r.Child("schedule")) {
    ObjectReader s(*sc, "schedule");
    Schedule& k = c.schedule;
    s.Get("base_lr", &k.base_lr);
    s.Get("decay_epochs", &k.decay_epochs);
    s.Get("decay_factor", &k.decay_factor);
    s.Get("warmup_iters", &k.warmup_iters);
    s.Get("warmup_ratio", &k.warmup_ratio);
    s.Get("weight_decay", &k.weight_decay);
    s.Get("momentum", &k.momentum);
    s.Get("total_epochs", &k.total_epochs);
    s.Get("grad_clip_norm", &k.grad_clip_norm);
    s.Finish();
  }
  r.Get("train_dataset", &c.train_dataset);
  r.Get("val_dataset", &c.val_dataset);
  if (const Json* res = r.Child("resolution")) {
    if (!res->is_array() || res->size() != 2 || !(*res)[0].is_number_integer() ||
        !(*res)[1].is_number_integer()) {
      throw ConfigError("resolution: expected [height, width]");
    }
    c.height = (*res)[0].get<int>();
    c.width = (*res)[1].get<int>();
  }
  r.Get("seed", &c.seed);
  r.Get("train_on_patches", &c.train_on_patches);
  r.Get("batch_size", &c.batch_size);
  r.Get("test_scales", &c.test_scales);
  r.Get("multi_scale_test", &c.multi_scale_test);
  r.Get("nms_iou", &c.nms_iou);
  r.Get("max_detections", &c.max_detections);
  r.Get("eval_every", &c.eval_every);
  r.Get("max_iters_per_epoch", &c.max_iters_per_epoch);
  r.Finish();
  ValidateConfig(c);
  return c;
}

std::string SerializeConfig(const HrdNetConfig& c) {
  Json j;
  j["n_streams"] = c.n_streams;
  j["alpha"] = c.alpha;
  j["levels"] = c.levels;
  j["stream_specs"] = Json::array();
  for (const StreamSpec& s : c.stream_specs) {
    j["stream_specs"].push_back({{"stream_index", s.stream_index},
                                 {"blocks_per_stage", s.blocks_per_stage},
                                 {"stage_channels", s.stage_channels},
                                 {"stem_channels", s.stem_channels}});
  }
  j["norm_groups"] = c.norm_groups;
  j["fusion"] = {{"strategy", ToString(c.fusion.strategy)},
                 {"common_channels", c.fusion.common_channels},
                 {"extra_levels", c.fusion.extra_levels}};
  const HeadConfig& h = c.head;
  j["head"] = {{"num_classes", h.num_classes},
               {"tower_convs", h.tower_convs},
               {"tower_norm_groups", h.tower_norm_groups},
               {"anchor_scales", h.anchor_scales},
               {"anchor_ratios", h.anchor_ratios},
               {"prior_probability", h.prior_probability},
               {"focal_alpha", h.focal.alpha},
               {"focal_gamma", h.focal.gamma},
               {"smooth_l1_beta", h.smooth_l1_beta},
               {"regression_weight", h.regression_weight},
               {"positive_iou", h.assigner.positive_iou},
               {"negative_iou", h.assigner.negative_iou},
               {"score_threshold", h.score_threshold},
               {"pre_nms_top_k", h.pre_nms_top_k}};
  const Schedule& k = c.schedule;
  j["schedule"] = {{"base_lr", k.base_lr},           {"decay_epochs", k.decay_epochs},
                   {"decay_factor", k.decay_factor}, {"warmup_iters", k.warmup_iters},
                   {"warmup_ratio", k.warmup_ratio}, {"weight_decay", k.weight_decay},
                   {"momentum", k.momentum},         {"total_epochs", k.total_epochs},
                   {"grad_clip_norm", k.grad_clip_norm}};
  j["train_dataset"] = c.train_dataset;
  j["val_dataset"] = c.val_dataset;
  j["resolution"] = {c.height, c.width};
  j["seed"] = c.seed;
  j["train_on_patches"] = c.train_on_patches;
  j["batch_size"] = c.batch_size;
  j["test_scales"] = c.test_scales;
  j["multi_scale_test"] = c.multi_scale_test;
  j["nms_iou"] = c.nms_iou;
  j["max_detections"] = c.max_detections;
  j["eval_every"] = c.eval_every;
  j["max_iters_per_epoch"] = c.max_iters_per_epoch;
  return j.dump(2) + "\n";
}

HrdNetConfig LoadConfig(const std::string& path) { return ParseConfig(ReadFile(path)); }

void SaveConfig(const std::string& path, const HrdNetConfig& config) {
  WriteFile(path, SerializeConfig(config));
}

StreamSpec MakeStreamSpec(int stream_index, int levels, int blocks, int base_channels,
                          int stem_channels) {
  StreamSpec s;
  s.stream_index = stream_index;
  s.stem_channels = stem_channels;
  for (int l = 0; l < levels; ++l) {
    s.blocks_per_stage.push_back(blocks);
    s.stage_channels.push_back(base_channels << l);
  }
  return s;
}

HrdNetConfig MakeDeskConfig(const std::vector<int>& blocks, FusionStrategy strategy,
                            int resolution, int num_classes, int common_channels) {
  HrdNetConfig c;
  c.n_streams = static_cast<int>(blocks.size());
  c.levels = 4;
  for (int i = 0; i < c.n_streams; ++i) {
    c.stream_specs.push_back(MakeStreamSpec(i, c.levels, blocks[i], 16, 16));
  }
  c.fusion.strategy = strategy;
  c.fusion.common_channels = common_channels;
  c.fusion.extra_levels = 0;
  c.head.num_classes = num_classes;
  c.head.in_channels = common_channels;
  c.head.anchor_scales = {0.25, 0.5, 1.0};
  c.head.anchor_ratios = {1.0};
  c.head.tower_norm_groups = c.norm_groups;
  c.height = c.width = resolution;
  return c;
}

HrdNetConfig SingleStreamConfig(const HrdNetConfig& config, int stream) {
  if (stream < 0 || stream >= config.n_streams) {
    throw ConfigError("stream index " + std::to_string(stream) + " outside [0, " +
                      std::to_string(config.n_streams) + ")");
  }
  HrdNetConfig c = config;
  c.n_streams = 1;
  c.stream_specs = {config.stream_specs[stream]};
  c.stream_specs[0].stream_index = 0;
  const double f = std::pow(config.alpha, stream);
  c.height = std::max(1, static_cast<int>(std::lround(config.height * f)));
  c.width = std::max(1, static_cast<int>(std::lround(config.width * f)));
  ValidateConfig(c);
  return c;
}

HrdNetConfig WithFusion(const HrdNetConfig& config, FusionStrategy strategy) {
  HrdNetConfig c = config;
  c.fusion.strategy = strategy;
  ValidateConfig(c);
  return c;
}

SceneSpec ParseSceneSpec(const std::string& text) {
  const Json root = ParseJson(text, "scene spec");
  SceneSpec s;
  ObjectReader r(root, "scene");
  r.Get("height", &s.height);
  r.Get("width", &s.width);
  r.Get("min_objects", &s.min_objects);
  r.Get("max_objects", &s.max_objects);
  r.Get("min_object_size", &s.min_object_size);
  r.Get("max_object_size", &s.max_object_size);
  r.Get("num_classes", &s.num_classes);
  r.Get("clutter_level", &s.clutter_level);
  r.Get("seed", &s.seed);
  r.Get("max_overlap_iou", &s.max_overlap_iou);
  r.Get("max_placement_retries", &s.max_placement_retries);
  r.Finish();
  ValidateSceneSpec(s);
  return s;
}

std::string SerializeSceneSpec(const SceneSpec& s) {
  Json j = {{"height", s.height},
            {"width", s.width},
            {"min_objects", s.min_objects},
            {"max_objects", s.max_objects},
            {"min_object_size", s.min_object_size},
            {"max_object_size", s.max_object_size},
            {"num_classes", s.num_classes},
            {"clutter_level", s.clutter_level},
            {"seed", s.seed},
            {"max_overlap_iou", s.max_overlap_iou},
            {"max_placement_retries", s.max_placement_retries}};
  return j.dump(2) + "\n";
}

}  // namespace hrdnet
