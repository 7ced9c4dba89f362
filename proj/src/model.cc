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
#include "hrdnet/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hrdnet/errors.h"

namespace hrdnet {
namespace {

constexpr char kMagic[8] = {'H', 'R', 'D', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::vector<std::vector<int>> LevelChannels(const HrdNetConfig& c) {
  std::vector<std::vector<int>> out;
  for (const StreamSpec& s : c.stream_specs) {
    // Stage s feeds level M-1-s.
    out.emplace_back(s.stage_channels.rbegin(), s.stage_channels.rend());
  }
  return out;
}

const HrdNetConfig& Checked(const HrdNetConfig& c) {
  ValidateConfig(c);
  return c;
}

HeadConfig ResolvedHead(const HrdNetConfig& c) {
  HeadConfig h = c.head;
  h.in_channels = c.fusion.common_channels;
  return h;
}

template <typename V>
void Put(std::ofstream& f, V v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

void PutString(std::ofstream& f, const std::string& s) {
  Put<std::uint64_t>(f, s.size());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename V>
V Get(std::ifstream& f, const std::string& path) {
  V v{};
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(V))) {
    throw ParseError(path + ": truncated checkpoint");
  }
  return v;
}

std::string GetString(std::ifstream& f, const std::string& path, std::uint64_t limit) {
  const auto n = Get<std::uint64_t>(f, path);
  if (n > limit) throw ParseError(path + ": implausible field length");
  std::string s(n, '\0');
  if (!f.read(s.data(), static_cast<std::streamsize>(n))) {
    throw ParseError(path + ": truncated checkpoint");
  }
  return s;
}

}  // namespace

double FitScale(int height, int width, const HrdNetConfig& config) {
  if (height <= 0 || width <= 0) throw InvalidInputError("fit_scale: empty image");
  return std::min(double(config.height) / height, double(config.width) / width);
}

template <typename T>
PreparedInput<T> PrepareInput(const Tensor<float>& source, const HrdNetConfig& config,
                              double factor) {
  if (source.rank() != 3) throw InvalidInputError("prepare_input: expected a (C, H, W) image");
  return PrepareInputAtScale<T>(source, config,
                                FitScale(source.height(), source.width(), config) * factor);
}

template <typename T>
PreparedInput<T> PrepareInputAtScale(const Tensor<float>& source, const HrdNetConfig& config,
                                     double s) {
  if (source.rank() != 3 || source.height() <= 0 || source.width() <= 0) {
    throw InvalidInputError("prepare_input: expected a non-empty (C, H, W) image");
  }
  if (!(s > 0) || !std::isfinite(s)) throw InvalidInputError("prepare_input: bad scale");
  const int h = std::max(1, static_cast<int>(std::lround(source.height() * s)));
  const int w = std::max(1, static_cast<int>(std::lround(source.width() * s)));
  PreparedInput<T> out;
  out.height = h;
  out.width = w;
  out.scale_x = double(w) / source.width();
  out.scale_y = double(h) / source.height();
  const Tensor<T> src = source.Cast<T>();
  const Tensor<T> resized =
      (h == source.height() && w == source.width()) ? src : ResizeBilinear(src, h, w);
  out.image = PadToAlignment(resized, config.n_streams, 0.5, CoarsestStride(config.levels)).image;
  return out;
}

template <typename T>
HrdNet<T>::HrdNet(const HrdNetConfig& config)
    : config_(Checked(config)), head_(ResolvedHead(config), config.seed) {
  for (const StreamSpec& s : config_.stream_specs) {
    streams_.emplace_back(s, 3, config_.seed, config_.norm_groups);
  }
  fpn_ = MsFpn<T>(config_.fusion, LevelChannels(config_), config_.seed);
}

template <typename T>
typename HrdNet<T>::Forward HrdNet<T>::Run(const Tensor<T>& image) const {
  Forward f;
  const ImagePyramid<T> pyr =
      BuildPyramid(image, config_.n_streams, config_.alpha, CoarsestStride(config_.levels));
  f.raw = ForwardMdipn(pyr, streams_);
  f.pyramid = fpn_(f.raw);
  f.head = head_.Forward(f.pyramid);
  return f;
}

template <typename T>
DetectionSet HrdNet<T>::Candidates(const Tensor<float>& source, double factor) const {
  ag::NoGradGuard no_grad;
  const PreparedInput<T> in = PrepareInput<T>(source, config_, factor);
  DetectionSet d = head_.Decode((*this)(in.image), in.height, in.width);
  d.boxes = ScaleBoxes(d.boxes, 1 / in.scale_x, 1 / in.scale_y);
  return d;
}

template <typename T>
DetectionSet HrdNet<T>::Detect(const Tensor<float>& source, bool multi_scale) const {
  DetectionSet all;
  if (multi_scale) {
    for (double f : config_.test_scales) all.Append(Candidates(source, f));
  } else {
    all = Candidates(source, 1.0);
  }
  return TopK(Nms(all, config_.nms_iou), config_.max_detections);
}

template <typename T>
nn::ParamList<T> HrdNet<T>::Parameters() const {
  nn::ParamList<T> out;
  for (std::size_t i = 0; i < streams_.size(); ++i) {
    auto p = streams_[i].Parameters("streams." + std::to_string(i));
    out.insert(out.end(), p.begin(), p.end());
  }
  auto f = fpn_.Parameters("fpn");
  out.insert(out.end(), f.begin(), f.end());
  auto h = head_.Parameters("head");
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

template <typename T>
std::int64_t HrdNet<T>::NumParameters() const {
  return CountParameters(streams_, fpn_, head_);
}

template <typename T>
DetectionSet EnsembleDetect(const std::vector<const HrdNet<T>*>& models,
                            const Tensor<float>& source, double nms_iou, int max_detections) {
  std::vector<DetectionSet> raw;
  for (const HrdNet<T>* m : models) raw.push_back(m->Candidates(source));
  return TopK(EnsembleMerge(raw, nms_iou), max_detections);
}

std::vector<DetectionRecord> ToRecords(const DetectionSet& dets, std::int64_t image_id,
                                       const std::vector<Category>& categories) {
  std::vector<DetectionRecord> out;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    const int label = dets.labels[k];
    if (label < 0 || label >= static_cast<int>(categories.size())) {
      throw InvalidInputError("detection label " + std::to_string(label) +
                              " has no category");
    }
    out.push_back({image_id, categories[label].id, dets.scores[k], dets.boxes[k]});
  }
  return out;
}

template <typename T>
std::vector<DetectionRecord> DetectDataset(const HrdNet<T>& model, const Dataset& dataset,
                                           bool multi_scale) {
  if (model.config().head.num_classes != dataset.num_classes()) {
    throw ConfigError("head.num_classes is " + std::to_string(model.config().head.num_classes) +
                      " but the dataset has " + std::to_string(dataset.num_classes()) +
                      " categories");
  }
  std::vector<DetectionRecord> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto recs = ToRecords(model.Detect(dataset.Sample(i).image, multi_scale),
                                dataset.images[i].id, dataset.categories);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

template <typename T>
StoredTensor Store(const Tensor<T>& t) {
  StoredTensor s;
  s.shape = t.shape();
  s.dtype_bytes = sizeof(T);
  s.bytes.resize(t.size() * sizeof(T));
  if (!s.bytes.empty()) std::memcpy(s.bytes.data(), t.data(), s.bytes.size());
  return s;
}

template <typename T>
Tensor<T> Restore(const StoredTensor& s, const std::string& name) {
  if (s.dtype_bytes != static_cast<int>(sizeof(T))) {
    throw InvalidInputError(name + ": stored with " + std::to_string(8 * s.dtype_bytes) +
                            "-bit values, model uses " + std::to_string(8 * sizeof(T)));
  }
  Tensor<T> t(s.shape);
  if (s.bytes.size() != t.size() * sizeof(T)) throw ParseError(name + ": size mismatch");
  if (!s.bytes.empty()) std::memcpy(t.data(), s.bytes.data(), s.bytes.size());
  return t;
}

void WriteCheckpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInputError("cannot write " + path);
  f.write(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(f, kVersion);
  PutString(f, SerializeConfig(ck.config));
  PutString(f, ck.meta);
  Put<std::uint64_t>(f, ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    PutString(f, name);
    Put<std::uint8_t>(f, static_cast<std::uint8_t>(t.dtype_bytes));
    Put<std::uint32_t>(f, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) Put<std::int32_t>(f, d);
    f.write(reinterpret_cast<const char*>(t.bytes.data()),
            static_cast<std::streamsize>(t.bytes.size()));
  }
  if (!f) throw InvalidInputError("write failed: " + path);
}

Checkpoint ReadCheckpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInputError("cannot read " + path);
  char magic[sizeof(kMagic)];
  if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path + ": not a checkpoint");
  }
  const auto version = Get<std::uint32_t>(f, path);
  if (version != kVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  constexpr std::uint64_t kTextLimit = 1 << 24;
  Checkpoint ck;
  ck.config = ParseConfig(GetString(f, path, kTextLimit));
  ck.meta = GetString(f, path, kTextLimit);
  const auto count = Get<std::uint64_t>(f, path);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = GetString(f, path, 4096);
    StoredTensor t;
    t.dtype_bytes = Get<std::uint8_t>(f, path);
    if (t.dtype_bytes != 4 && t.dtype_bytes != 8) throw ParseError(name + ": bad value type");
    const auto rank = Get<std::uint32_t>(f, path);
    if (rank > 8) throw ParseError(name + ": bad rank");
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = Get<std::int32_t>(f, path);
      if (d < 0) throw ParseError(name + ": negative dimension");
      t.shape.push_back(d);
    }
    t.bytes.resize(Tensor<float>::NumElements(t.shape) * t.dtype_bytes);
    if (!f.read(reinterpret_cast<char*>(t.bytes.data()),
                static_cast<std::streamsize>(t.bytes.size()))) {
      throw ParseError(path + ": truncated checkpoint");
    }
    ck.tensors.emplace(name, std::move(t));
  }
  return ck;
}

template <typename T>
Checkpoint MakeCheckpoint(const HrdNet<T>& model, const std::string& meta) {
  Checkpoint ck;
  ck.config = model.config();
  ck.meta = meta;
  for (const auto& p : model.Parameters()) ck.tensors.emplace(p.name, Store(p.var->value));
  return ck;
}

template <typename T>
void LoadParameters(const Checkpoint& ck, HrdNet<T>* model) {
  for (const auto& p : model->Parameters()) {
    auto it = ck.tensors.find(p.name);
    if (it == ck.tensors.end()) throw InvalidInputError("checkpoint lacks " + p.name);
    Tensor<T> t = Restore<T>(it->second, p.name);
    if (t.shape() != p.var->value.shape()) {
      throw InvalidInputError(p.name + ": checkpoint shape differs from the model");
    }
    p.var->value = std::move(t);
  }
}

#define HRDNET_INSTANTIATE(T)                                                                \
  template PreparedInput<T> PrepareInput<T>(const Tensor<float>&, const HrdNetConfig&,      \
                                            double);                                        \
  template PreparedInput<T> PrepareInputAtScale<T>(const Tensor<float>&,                    \
                                                   const HrdNetConfig&, double);            \
  template class HrdNet<T>;                                                                 \
  template DetectionSet EnsembleDetect<T>(const std::vector<const HrdNet<T>*>&,             \
                                          const Tensor<float>&, double, int);               \
  template std::vector<DetectionRecord> DetectDataset<T>(const HrdNet<T>&, const Dataset&,  \
                                                         bool);                             \
  template StoredTensor Store<T>(const Tensor<T>&);                                         \
  template Tensor<T> Restore<T>(const StoredTensor&, const std::string&);                   \
  template Checkpoint MakeCheckpoint<T>(const HrdNet<T>&, const std::string&);              \
  template void LoadParameters<T>(const Checkpoint&, HrdNet<T>*);
HRDNET_INSTANTIATE(float)
HRDNET_INSTANTIATE(double)
#undef HRDNET_INSTANTIATE

}  // namespace hrdnet
