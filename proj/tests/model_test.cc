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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "hrdnet/data.h"
#include "hrdnet/errors.h"
#include "support/configs.h"

namespace hrdnet {
namespace {

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("hrdnet_model_" + name)).string();
}

Tensor<float> RandomImage(int h, int w, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0, 1);
  Tensor<float> t(3, h, w);
  for (float& v : t.storage()) v = u(rng);
  return t;
}

// Perturbs every parameter so that a checkpoint differs from a fresh model.
template <typename T>
void Jitter(const HrdNet<T>& model, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0, 0.01);
  for (const auto& p : model.Parameters()) {
    for (T& v : p.var->value.storage()) v += static_cast<T>(n(rng));
  }
}

TEST(ParamCountTest, MatchesAnalyticOracle) {
  for (const auto& c : oracle::ParamCountConfigs()) {
    const HrdNet<float> model(c.config);
    EXPECT_EQ(model.NumParameters(), c.expected) << c.name;
    EXPECT_EQ(nn::CountScalars(model.Parameters()), c.expected) << c.name;
  }
}

TEST(ParamCountTest, SecondStreamAddsParameters) {
  const HrdNetConfig two = MakeDeskConfig({1, 2}, FusionStrategy::kAlignedByDepth, 256, 5);
  const HrdNetConfig one = MakeDeskConfig({1}, FusionStrategy::kAlignedByDepth, 256, 5);
  EXPECT_GT(HrdNet<float>(two).NumParameters(), HrdNet<float>(one).NumParameters());
}

TEST(HrdNetTest, ParameterNamesAreUniqueAndHierarchical) {
  const HrdNet<float> model(oracle::TinyConfig());
  std::set<std::string> names;
  for (const auto& p : model.Parameters()) EXPECT_TRUE(names.insert(p.name).second) << p.name;
  EXPECT_TRUE(names.count("streams.1.stem.conv1.weight"));
  EXPECT_TRUE(names.count("fpn.output0.bias"));
  EXPECT_TRUE(names.count("head.cls_out.weight"));
}

TEST(HrdNetTest, OutputShapes) {
  const HrdNetConfig c = oracle::TinyConfig();
  const HrdNet<float> model(c);
  const auto f = model.Run(Tensor<float>(3, 64, 64));
  ASSERT_EQ(f.raw.size(), 2u);
  EXPECT_EQ(f.raw[1].maps[3].height(), 8);
  ASSERT_EQ(f.head.shapes.size(), 4u);
  EXPECT_EQ(f.head.shapes[3], (LevelShape{16, 16, 4}));
  EXPECT_EQ(f.head.class_logits[3]->value.shape(), (Shape{15, 16, 16}));
  EXPECT_THROW(model.Run(Tensor<float>(3, 48, 64)), AlignmentError);
}

TEST(HrdNetTest, InvalidConfigRejected) {
  HrdNetConfig c = oracle::TinyConfig();
  c.alpha = 0.7;
  EXPECT_THROW(HrdNet<float>{c}, ConfigError);
}

TEST(PrepareInputTest, FitsResolutionAndAligns) {
  const HrdNetConfig c = oracle::TinyConfig(64);
  const auto in = PrepareInput<float>(RandomImage(100, 50, 1), c);
  EXPECT_EQ(in.height, 64);
  EXPECT_EQ(in.width, 32);
  EXPECT_EQ(in.image.height(), 64);
  EXPECT_EQ(in.image.width(), 64);
  EXPECT_DOUBLE_EQ(in.scale_x, 0.64);
  EXPECT_DOUBLE_EQ(in.scale_y, 0.64);
  const auto same = PrepareInput<float>(RandomImage(64, 64, 2), c);
  EXPECT_EQ(same.image, RandomImage(64, 64, 2));
  const auto up = PrepareInput<float>(RandomImage(64, 64, 2), c, 1.25);
  EXPECT_EQ(up.height, 80);
  EXPECT_EQ(up.image.height(), 128);
}

TEST(DetectTest, BoxesInSourceFrameAndCapped) {
  HrdNetConfig c = oracle::TinyConfig(64);
  c.head.score_threshold = 0.0;
  c.max_detections = 50;
  const HrdNet<float> model(c);
  Jitter(model, 4);
  const Tensor<float> img = RandomImage(90, 120, 3);
  const DetectionSet d = model.Detect(img, false);
  EXPECT_EQ(d.size(), 50u);
  for (std::size_t k = 0; k < d.size(); ++k) {
    EXPECT_GE(d.boxes[k].x, 0);
    EXPECT_GE(d.boxes[k].y, 0);
    EXPECT_LE(d.boxes[k].right(), 120 + 1e-9);
    EXPECT_LE(d.boxes[k].bottom(), 90 + 1e-9);
    if (k > 0) EXPECT_GE(d.scores[k - 1], d.scores[k]);
  }
}

TEST(DetectTest, CandidatesAreScaledBackExactly) {
  // A source twice the network resolution gives the same candidates as its
  // half-size version, scaled by two.
  HrdNetConfig c = oracle::TinyConfig(64);
  c.head.score_threshold = 0.0;
  const HrdNet<float> model(c);
  Jitter(model, 5);
  const Tensor<float> small = RandomImage(64, 64, 6);
  Tensor<float> big(3, 128, 128);
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < 128; ++y) {
      for (int x = 0; x < 128; ++x) big.at(ch, y, x) = small.at(ch, y / 2, x / 2);
    }
  }
  // Bilinear halving of a 2x nearest upsample reproduces the original.
  ASSERT_EQ(ResizeBilinear(big, 64, 64), small);
  const DetectionSet a = model.Candidates(small), b = model.Candidates(big);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(ScaleBoxes(a.boxes, 2, 2), b.boxes);
  EXPECT_EQ(a.scores, b.scores);
}

TEST(DetectTest, MultiScaleIsNmsOverScales) {
  HrdNetConfig c = oracle::TinyConfig(64);
  c.head.score_threshold = 0.0;
  const HrdNet<float> model(c);
  Jitter(model, 7);
  const Tensor<float> img = RandomImage(64, 64, 8);
  DetectionSet all;
  for (double f : c.test_scales) all.Append(model.Candidates(img, f));
  EXPECT_EQ(model.Detect(img, true), TopK(Nms(all, c.nms_iou), c.max_detections));
}

TEST(DetectTest, EnsembleOfIdenticalModelsEqualsSingle) {
  HrdNetConfig c = oracle::TinyConfig(64);
  c.head.score_threshold = 0.0;
  const HrdNet<float> model(c);
  Jitter(model, 9);
  const Tensor<float> img = RandomImage(64, 64, 10);
  EXPECT_EQ(EnsembleDetect<float>({&model, &model}, img, 0.5, 100), model.Detect(img, false));
}

TEST(DetectTest, DatasetRecordsUseCategoryIds) {
  SceneSpec s;
  s.height = s.width = 64;
  s.max_object_size = 12;
  Dataset ds = GenerateDataset(s, 2, 0, "val");
  for (auto& cat : ds.categories) cat.id += 100;
  HrdNetConfig c = oracle::TinyConfig(64);
  c.head.score_threshold = 0.0;
  const HrdNet<float> model(c);
  const auto recs = DetectDataset(model, ds, false);
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) {
    EXPECT_GE(r.category_id, 101);
    EXPECT_LE(r.category_id, 105);
  }
  c.head.num_classes = 3;
  EXPECT_THROW(DetectDataset(HrdNet<float>(c), ds, false), ConfigError);
}

template <typename T>
void CheckpointRoundTrip() {
  const HrdNetConfig c = oracle::TinyConfig(64);
  const HrdNet<T> model(c);
  Jitter(model, 11);
  const std::string path = TempPath("rt" + std::to_string(sizeof(T)));
  WriteCheckpoint(path, MakeCheckpoint(model, R"({"note": 1})"));
  const Checkpoint ck = ReadCheckpoint(path);
  EXPECT_EQ(ck.config, c);
  EXPECT_EQ(ck.meta, R"({"note": 1})");
  HrdNet<T> loaded(ck.config);
  LoadParameters(ck, &loaded);
  const Tensor<T> img = RandomImage(64, 64, 12).Cast<T>();
  const auto a = model(img), b = loaded(img);
  for (std::size_t l = 0; l < a.class_logits.size(); ++l) {
    EXPECT_EQ(a.class_logits[l]->value, b.class_logits[l]->value);
    EXPECT_EQ(a.box_deltas[l]->value, b.box_deltas[l]->value);
  }
}

TEST(CheckpointTest, RoundTripIsBitExactFloat) { CheckpointRoundTrip<float>(); }
TEST(CheckpointTest, RoundTripIsBitExactDouble) { CheckpointRoundTrip<double>(); }

TEST(CheckpointTest, CorruptFilesRejected) {
  const HrdNet<float> model(oracle::TinyConfig(64));
  const std::string path = TempPath("corrupt");
  WriteCheckpoint(path, MakeCheckpoint(model));
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 10);
  EXPECT_THROW(ReadCheckpoint(path), ParseError);
  std::ofstream(path, std::ios::trunc) << "NOTACKPT0000";
  EXPECT_THROW(ReadCheckpoint(path), ParseError);
  EXPECT_THROW(ReadCheckpoint(TempPath("missing")), InvalidInputError);
}

TEST(CheckpointTest, MismatchedModelRejected) {
  const HrdNet<float> model(oracle::TinyConfig(64));
  const Checkpoint ck = MakeCheckpoint(model);
  HrdNet<double> wrong_type(oracle::TinyConfig(64));
  EXPECT_THROW(LoadParameters(ck, &wrong_type), InvalidInputError);
  HrdNetConfig other = oracle::TinyConfig(64);
  other.fusion.common_channels = other.head.in_channels = 16;
  HrdNet<float> wrong_shape(other);
  EXPECT_THROW(LoadParameters(ck, &wrong_shape), InvalidInputError);
}

}  // namespace
}  // namespace hrdnet
