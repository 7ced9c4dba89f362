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
#include "hrdnet/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "hrdnet/errors.h"
#include "hrdnet/logging.h"
#include "hrdnet/postprocess.h"
#include "json.hpp"

namespace hrdnet {
namespace {

using Json = nlohmann::ordered_json;

struct Rgb {
  double r, g, b;
};

Rgb ClassColor(int label) {
  static const Rgb kPalette[] = {{0.90, 0.15, 0.15}, {0.15, 0.85, 0.20}, {0.20, 0.35, 0.95},
                                 {0.95, 0.90, 0.10}, {0.90, 0.20, 0.90}, {0.10, 0.85, 0.90},
                                 {0.95, 0.55, 0.10}, {0.55, 0.25, 0.75}};
  return kPalette[label % 8];
}

// True when pixel (px, py) of an s x s sprite belongs to the shape of `label`.
bool SpriteCovers(int label, int px, int py, int s) {
  const double u = (px + 0.5) / s, v = (py + 0.5) / s;
  switch (label % 5) {
    case 0:  // filled square
      return true;
    case 1: {  // disk
      const double du = u - 0.5, dv = v - 0.5;
      return du * du + dv * dv <= 0.25 + 0.5 / (s * s);
    }
    case 2:  // triangle, apex up
      return std::abs(u - 0.5) <= 0.5 * v + 0.5 / s;
    case 3:  // plus sign
      return std::abs(u - 0.5) <= 1.0 / 6 + 0.5 / s || std::abs(v - 0.5) <= 1.0 / 6 + 0.5 / s;
    default: {  // hollow square
      const int t = std::max(1, s / 4);
      return px < t || py < t || px >= s - t || py >= s - t;
    }
  }
}

std::uint8_t Quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v * 255.0), 0, 255));
}

}  // namespace

std::string SceneClassName(int label) {
  static const char* kShapes[] = {"square", "disk", "triangle", "plus", "frame"};
  std::string name = kShapes[label % 5];
  if (label >= 5) name += "_" + std::to_string(label / 5);
  return name;
}

void ValidateSceneSpec(const SceneSpec& s) {
  if (s.height <= 0 || s.width <= 0) throw ConfigError("scene.image_size must be positive");
  if (s.min_objects < 0 || s.max_objects < s.min_objects) {
    throw ConfigError("scene.objects_per_image must be a non-negative range");
  }
  if (s.min_object_size <= 0 || s.max_object_size < s.min_object_size) {
    throw ConfigError("scene.object_size_px must be a positive range");
  }
  if (2 * s.max_object_size >= std::min(s.height, s.width)) {
    throw ConfigError("scene.object_size_px max must be below half the image side");
  }
  if (s.num_classes <= 0) throw ConfigError("scene.num_classes must be positive");
  if (s.clutter_level < 0 || s.clutter_level > 1) {
    throw ConfigError("scene.clutter_level must lie in [0, 1]");
  }
  if (s.max_placement_retries <= 0) {
    throw ConfigError("scene.max_placement_retries must be positive");
  }
}

AnnotatedImage<float> GenerateScene(const SceneSpec& spec, int index) {
  ValidateSceneSpec(spec);
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                    static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5ce9eu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int h = spec.height, w = spec.width;
  constexpr double kTwoPi = 2 * std::numbers::pi;

  // Smooth grey background, slight colour cast, pixel noise.
  std::vector<double> canvas(3ull * h * w);
  const double base = 0.30 + 0.25 * unit(rng);
  double tint[3];
  for (double& t : tint) t = 0.04 * (unit(rng) - 0.5);
  const double fx = kTwoPi * (1 + 3 * unit(rng)) / w, fy = kTwoPi * (1 + 3 * unit(rng)) / h;
  const double phase = kTwoPi * unit(rng);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tex = 0.06 * std::sin(fx * x + phase) * std::cos(fy * y);
      const double n = noise(rng);
      for (int c = 0; c < 3; ++c) canvas[(std::size_t(c) * h + y) * w + x] = base + tint[c] + tex + n;
    }
  }

  // Grey distractor strokes.
  const int strokes = static_cast<int>(std::lround(spec.clutter_level * 30 * h * w / 65536.0));
  for (int k = 0; k < strokes; ++k) {
    const int len = 3 + static_cast<int>(unit(rng) * 12);
    const bool horizontal = unit(rng) < 0.5;
    const int x0 = static_cast<int>(unit(rng) * w), y0 = static_cast<int>(unit(rng) * h);
    const double g = 0.15 + 0.7 * unit(rng);
    for (int t = 0; t < len; ++t) {
      const int x = horizontal ? x0 + t : x0, y = horizontal ? y0 : y0 + t;
      if (x >= w || y >= h) break;
      for (int c = 0; c < 3; ++c) canvas[(std::size_t(c) * h + y) * w + x] = g;
    }
  }

  AnnotatedImage<float> out;
  std::uniform_int_distribution<int> count_dist(spec.min_objects, spec.max_objects);
  std::uniform_int_distribution<int> size_dist(spec.min_object_size, spec.max_object_size);
  std::uniform_int_distribution<int> class_dist(0, spec.num_classes - 1);
  const int wanted = count_dist(rng);
  for (int k = 0; k < wanted; ++k) {
    const int label = class_dist(rng);
    const int s = size_dist(rng);
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_placement_retries && !placed; ++attempt) {
      const int bx = std::uniform_int_distribution<int>(0, w - s)(rng);
      const int by = std::uniform_int_distribution<int>(0, h - s)(rng);
      const Box cand{double(bx), double(by), double(s), double(s)};
      const bool clear = std::none_of(out.boxes.begin(), out.boxes.end(), [&](const Box& b) {
        return Iou(b, cand) >= spec.max_overlap_iou;
      });
      if (!clear) continue;
      placed = true;
      const Rgb col = ClassColor(label);
      const double shade = 0.85 + 0.15 * unit(rng);
      const double rgb[3] = {col.r * shade, col.g * shade, col.b * shade};
      for (int py = 0; py < s; ++py) {
        for (int px = 0; px < s; ++px) {
          if (!SpriteCovers(label, px, py, s)) continue;
          for (int c = 0; c < 3; ++c) {
            canvas[(std::size_t(c) * h + by + py) * w + bx + px] = rgb[c];
          }
        }
      }
      out.boxes.push_back(cand);
      out.labels.push_back(label);
    }
    if (!placed) {
      LogWarning("scene " + std::to_string(index) + ": dropped object " + std::to_string(k) +
                 " after " + std::to_string(spec.max_placement_retries) + " placement attempts");
    }
  }

  out.image = Tensor<float>(3, h, w);
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    out.image[i] = static_cast<float>(Quantize(canvas[i])) / 255.0f;
  }
  return out;
}

Image8 ToImage8(const Tensor<float>& image) {
  Image8 out{image.channels(), image.height(), image.width(), {}};
  out.pixels.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) out.pixels[i] = Quantize(image[i]);
  return out;
}

Tensor<float> FromImage8(const Image8& image) {
  Tensor<float> out(image.channels, image.height, image.width);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image.pixels[i] / 255.0f;
  return out;
}

void WriteNetpbm(const std::string& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidInputError("netpbm supports 1 or 3 channels, got " +
                            std::to_string(image.channels));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInputError("cannot write " + path);
  f << (image.channels == 3 ? "P6" : "P5") << "\n"
    << image.width << " " << image.height << "\n255\n";
  const std::size_t plane = std::size_t(image.height) * image.width;
  std::vector<std::uint8_t> interleaved(plane * image.channels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < image.channels; ++c) {
      interleaved[p * image.channels + c] = image.pixels[c * plane + p];
    }
  }
  f.write(reinterpret_cast<const char*>(interleaved.data()),
          static_cast<std::streamsize>(interleaved.size()));
}

Image8 ReadNetpbm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInputError("cannot read " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6" && magic != "P5") throw ParseError(path + ": not a binary PPM/PGM file");
  auto next_int = [&]() {
    f >> std::ws;
    while (f.peek() == '#') {
      std::string line;
      std::getline(f, line);
      f >> std::ws;
    }
    int v = -1;
    f >> v;
    return v;
  };
  Image8 img;
  img.channels = magic == "P6" ? 3 : 1;
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  if (img.width <= 0 || img.height <= 0 || maxval != 255) {
    throw ParseError(path + ": unsupported netpbm header");
  }
  f.get();
  const std::size_t plane = std::size_t(img.height) * img.width;
  std::vector<std::uint8_t> interleaved(plane * img.channels);
  f.read(reinterpret_cast<char*>(interleaved.data()),
         static_cast<std::streamsize>(interleaved.size()));
  if (f.gcount() != static_cast<std::streamsize>(interleaved.size())) {
    throw ParseError(path + ": truncated pixel data");
  }
  img.pixels.resize(interleaved.size());
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < img.channels; ++c) {
      img.pixels[c * plane + p] = interleaved[p * img.channels + c];
    }
  }
  return img;
}

AnnotatedImage<float> Dataset::Sample(std::size_t i) const {
  AnnotatedImage<float> s;
  if (i < pixels.size() && !pixels[i].pixels.empty()) {
    s.image = FromImage8(pixels[i]);
  } else {
    const auto path = std::filesystem::path(image_root) / images.at(i).file_name;
    s.image = FromImage8(ReadNetpbm(path.string()));
  }
  s.boxes = boxes.at(i);
  s.labels = labels.at(i);
  return s;
}

int Dataset::LabelOfCategory(int category_id) const {
  for (std::size_t k = 0; k < categories.size(); ++k) {
    if (categories[k].id == category_id) return static_cast<int>(k);
  }
  return -1;
}

Dataset ParseAnnotations(const std::string& text, BoxPolicy policy) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("annotation file: ") + e.what());
  }
  auto section = [&](const char* key) -> const Json& {
    if (!doc.is_object() || !doc.contains(key) || !doc[key].is_array()) {
      throw ParseError(std::string("annotation file: missing array '") + key + "'");
    }
    return doc[key];
  };
  Dataset ds;
  const Json& cats = section("categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    Category c;
    try {
      c = {cats[i].at("id").get<int>(), cats[i].value("name", std::string())};
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("categories[" + std::to_string(i) + "]: " + e.what());
    }
    if (ds.LabelOfCategory(c.id) >= 0) {
      throw ParseError("categories[" + std::to_string(i) + "]: duplicate id " +
                       std::to_string(c.id));
    }
    ds.categories.push_back(c);
  }

  std::map<std::int64_t, std::size_t> image_index;
  const Json& imgs = section("images");
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    ImageRecord r;
    try {
      r.id = imgs[i].at("id").get<std::int64_t>();
      r.file_name = imgs[i].value("file_name", std::string());
      r.height = imgs[i].at("height").get<int>();
      r.width = imgs[i].at("width").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("images[" + std::to_string(i) + "]: " + e.what());
    }
    if (r.height <= 0 || r.width <= 0) {
      throw ParseError("images[" + std::to_string(i) + "] (id " + std::to_string(r.id) +
                       "): non-positive size");
    }
    if (!image_index.emplace(r.id, ds.images.size()).second) {
      throw ParseError("images[" + std::to_string(i) + "]: duplicate id " + std::to_string(r.id));
    }
    ds.images.push_back(r);
  }
  ds.boxes.resize(ds.images.size());
  ds.labels.resize(ds.images.size());
  ds.annotation_ids.resize(ds.images.size());

  const Json& anns = section("annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string where = "annotations[" + std::to_string(i) + "]";
    std::int64_t id = 0, image_id = 0;
    int category_id = 0;
    Box b;
    try {
      id = anns[i].at("id").get<std::int64_t>();
      image_id = anns[i].at("image_id").get<std::int64_t>();
      category_id = anns[i].at("category_id").get<int>();
      const Json& bb = anns[i].at("bbox");
      if (!bb.is_array() || bb.size() != 4) throw ParseError("bbox must hold 4 numbers");
      b = Box{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
    } catch (const std::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    const std::string rec = where + " (id " + std::to_string(id) + ")";
    const auto it = image_index.find(image_id);
    if (it == image_index.end()) {
      throw ParseError(rec + ": unknown image_id " + std::to_string(image_id));
    }
    const int label = ds.LabelOfCategory(category_id);
    if (label < 0) throw ParseError(rec + ": unknown category_id " + std::to_string(category_id));
    if (!(b.w > 0) || !(b.h > 0)) throw ParseError(rec + ": box width and height must be positive");
    const ImageRecord& img = ds.images[it->second];
    const bool inside = b.x >= 0 && b.y >= 0 && b.right() <= img.width && b.bottom() <= img.height;
    if (!inside) {
      if (policy == BoxPolicy::kReject) throw ParseError(rec + ": box leaves the image");
      b = Intersect(b, Box{0, 0, double(img.width), double(img.height)});
      if (!(b.w > 0) || !(b.h > 0)) throw ParseError(rec + ": box lies outside the image");
    }
    ds.boxes[it->second].push_back(b);
    ds.labels[it->second].push_back(label);
    ds.annotation_ids[it->second].push_back(id);
  }
  return ds;
}

std::string SerializeAnnotations(const Dataset& ds) {
  Json doc;
  doc["images"] = Json::array();
  doc["annotations"] = Json::array();
  doc["categories"] = Json::array();
  std::int64_t next_id = 1;
  for (const auto& ids : ds.annotation_ids) {
    for (std::int64_t id : ids) next_id = std::max(next_id, id + 1);
  }
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const ImageRecord& r = ds.images[i];
    doc["images"].push_back(
        {{"id", r.id}, {"file_name", r.file_name}, {"height", r.height}, {"width", r.width}});
    for (std::size_t k = 0; k < ds.boxes[i].size(); ++k) {
      const Box& b = ds.boxes[i][k];
      const bool has_id = i < ds.annotation_ids.size() && k < ds.annotation_ids[i].size();
      doc["annotations"].push_back({{"id", has_id ? ds.annotation_ids[i][k] : next_id++},
                                    {"image_id", r.id},
                                    {"category_id", ds.categories.at(ds.labels[i][k]).id},
                                    {"bbox", {b.x, b.y, b.w, b.h}},
                                    {"area", b.area()},
                                    {"iscrowd", 0}});
    }
  }
  for (const Category& c : ds.categories) {
    doc["categories"].push_back({{"id", c.id}, {"name", c.name}});
  }
  return doc.dump(1) + "\n";
}

Dataset LoadAnnotations(const std::string& path, BoxPolicy policy) {
  std::ifstream f(path);
  if (!f) throw InvalidInputError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  Dataset ds = ParseAnnotations(ss.str(), policy);
  ds.image_root = (std::filesystem::path(path).parent_path() / "images").string();
  return ds;
}

void SaveAnnotations(const std::string& path, const Dataset& dataset) {
  std::ofstream f(path);
  if (!f) throw InvalidInputError("cannot write " + path);
  f << SerializeAnnotations(dataset);
}

Dataset GenerateDataset(const SceneSpec& spec, int count, int first_index,
                        const std::string& split) {
  ValidateSceneSpec(spec);
  Dataset ds;
  ds.split = split;
  for (int k = 0; k < spec.num_classes; ++k) ds.categories.push_back({k + 1, SceneClassName(k)});
  std::int64_t ann_id = 1;
  for (int n = 0; n < count; ++n) {
    const int index = first_index + n;
    AnnotatedImage<float> s = GenerateScene(spec, index);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.ppm", index);
    ds.images.push_back({index + 1, name, spec.height, spec.width});
    std::vector<std::int64_t> ids;
    for (std::size_t k = 0; k < s.boxes.size(); ++k) ids.push_back(ann_id++);
    ds.annotation_ids.push_back(std::move(ids));
    ds.boxes.push_back(std::move(s.boxes));
    ds.labels.push_back(std::move(s.labels));
    ds.pixels.push_back(ToImage8(s.image));
  }
  return ds;
}

void WriteDataset(const std::string& dir, const Dataset& ds) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root / "images");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto path = (root / "images" / ds.images[i].file_name).string();
    if (i < ds.pixels.size() && !ds.pixels[i].pixels.empty()) {
      WriteNetpbm(path, ds.pixels[i]);
    } else {
      WriteNetpbm(path, ToImage8(ds.Sample(i).image));
    }
  }
  SaveAnnotations((root / "annotations.json").string(), ds);
}

}  // namespace hrdnet
