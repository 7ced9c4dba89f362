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
// Command-line entry points: train, eval, infer, profile, gen-data, ablate.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hrdnet/config.h"
#include "hrdnet/data.h"
#include "hrdnet/errors.h"
#include "hrdnet/evaluation.h"
#include "hrdnet/logging.h"
#include "hrdnet/model.h"
#include "hrdnet/training.h"

namespace hrdnet {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string run_dir;
  bool quiet = false;
};

std::string ReadText(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInputError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw InvalidInputError("cannot write " + path.string());
  f << text;
}

// A dataset argument is either an annotation file or a directory holding
// annotations.json.
Dataset LoadDatasetArg(const std::string& path) {
  if (path.empty()) throw ConfigError("dataset path is empty");
  const fs::path p(path);
  return LoadAnnotations(fs::is_directory(p) ? (p / "annotations.json").string() : path);
}

fs::path PrepareRunDir(const GlobalOptions& g, const std::string& command) {
  const fs::path dir = g.run_dir.empty() ? fs::path("runs") / command : fs::path(g.run_dir);
  fs::create_directories(dir);
  return dir;
}

HrdNetConfig ResolveConfig(const std::string& path, const GlobalOptions& g) {
  HrdNetConfig c = LoadConfig(path);
  if (g.seed) c.seed = *g.seed;
  return c;
}

std::string ReportTable(const std::vector<std::pair<std::string, EvalReport>>& rows,
                        const std::vector<std::int64_t>& params) {
  std::ostringstream out;
  out << "| variant | params | AP | AP50 | AP75 | AP_S |\n|---|---|---|---|---|---|\n";
  char buf[256];
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const EvalReport& r = rows[k].second;
    std::snprintf(buf, sizeof(buf), "| %s | %lld | %.4f | %.4f | %.4f | %s |\n",
                  rows[k].first.c_str(), static_cast<long long>(params[k]), r.ap, r.ap50,
                  r.ap75,
                  r.ap_small ? std::to_string(*r.ap_small).substr(0, 6).c_str() : "n/a");
    out << buf;
  }
  return out.str();
}

TrainResult RunTraining(const HrdNetConfig& config, const fs::path& dir, const GlobalOptions& g,
                        bool resume) {
  fs::create_directories(dir);
  SaveConfig((dir / "config.json").string(), config);
  const Dataset train = LoadDatasetArg(config.train_dataset);
  std::optional<Dataset> val;
  if (!config.val_dataset.empty()) val = LoadDatasetArg(config.val_dataset);
  TrainOptions o;
  o.run_dir = dir.string();
  o.resume = resume;
  o.val = val ? &*val : nullptr;
  o.record_time = !g.deterministic;
  return TrainLoop(config, train, o);
}

int CmdTrain(const GlobalOptions& g, const std::string& config_path, bool resume) {
  const HrdNetConfig config = ResolveConfig(config_path, g);
  const fs::path dir = PrepareRunDir(g, "train");
  const TrainResult r = RunTraining(config, dir, g, resume);
  std::cout << "trained " << r.history.size() << " epochs; checkpoint "
            << (dir / "latest.ckpt").string();
  if (r.best_epoch >= 0) std::cout << "; best AP " << r.best_ap << " at epoch " << r.best_epoch;
  std::cout << "\n";
  return 0;
}

int CmdEval(const GlobalOptions& g, const std::string& checkpoint, const std::string& dataset,
            bool multi_scale) {
  const Checkpoint ck = ReadCheckpoint(checkpoint);
  HrdNet<float> model(ck.config);
  LoadParameters(ck, &model);
  const Dataset ds = LoadDatasetArg(dataset);
  const fs::path dir = PrepareRunDir(g, "eval");
  SaveConfig((dir / "config.json").string(), ck.config);
  const auto dets = DetectDataset(model, ds, multi_scale);
  WriteDetectionDump((dir / "detections.json").string(), dets);
  const EvalReport report = Evaluate(ds, dets);
  const std::string text = report.ToJson();
  WriteText(dir / "eval.json", text + "\n");
  std::cout << text << "\n";
  return 0;
}

int CmdInfer(const GlobalOptions& g, const std::string& checkpoint, const std::string& images,
             const std::string& out) {
  const Checkpoint ck = ReadCheckpoint(checkpoint);
  HrdNet<float> model(ck.config);
  LoadParameters(ck, &model);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    const std::string ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidInputError("no .ppm or .pgm images in " + images);
  const fs::path dir = PrepareRunDir(g, "infer");
  SaveConfig((dir / "config.json").string(), ck.config);
  std::vector<Category> categories;
  for (int k = 0; k < ck.config.head.num_classes; ++k) {
    categories.push_back({k + 1, SceneClassName(k)});
  }
  std::vector<DetectionRecord> all;
  Json index = Json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    Image8 img = ReadNetpbm(files[i].string());
    if (img.channels == 1) {
      // Grey input: replicate into three channels.
      img.pixels.resize(img.pixels.size() * 3);
      std::copy_n(img.pixels.begin(), img.pixels.size() / 3,
                  img.pixels.begin() + img.pixels.size() / 3);
      std::copy_n(img.pixels.begin(), img.pixels.size() / 3,
                  img.pixels.begin() + 2 * img.pixels.size() / 3);
      img.channels = 3;
    }
    const auto id = static_cast<std::int64_t>(i + 1);
    const auto recs = ToRecords(model.Detect(FromImage8(img)), id, categories);
    all.insert(all.end(), recs.begin(), recs.end());
    index.push_back({{"id", id}, {"file_name", files[i].filename().string()}});
  }
  WriteDetectionDump(out, all);
  WriteText(dir / "images.json", index.dump(1) + "\n");
  std::cout << all.size() << " detections over " << files.size() << " images written to "
            << out << "\n";
  return 0;
}

int CmdProfile(const GlobalOptions& g, const std::string& config_path, int iterations,
               int warmup) {
  if (iterations < 20) throw ConfigError("profile: at least 20 timed iterations are required");
  const HrdNetConfig config = ResolveConfig(config_path, g);
  const HrdNet<float> model(config);
  const fs::path dir = PrepareRunDir(g, "profile");
  SaveConfig((dir / "config.json").string(), config);
  std::mt19937 rng(static_cast<std::uint32_t>(config.seed));
  std::uniform_real_distribution<float> u(0, 1);
  Tensor<float> image(3, config.height, config.width);
  for (float& v : image.storage()) v = u(rng);
  for (int k = 0; k < warmup; ++k) model.Detect(image, false);
  std::vector<double> seconds;
  for (int k = 0; k < iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    model.Detect(image, false);
    seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(seconds.begin(), seconds.end());
  const std::size_t n = seconds.size();
  const double median = n % 2 ? seconds[n / 2] : 0.5 * (seconds[n / 2 - 1] + seconds[n / 2]);

  Json j;
  j["params"] = model.NumParameters();
  Json parts = Json::object();
  for (std::size_t i = 0; i < model.streams().size(); ++i) {
    parts["stream" + std::to_string(i)] = CountParameters(model.streams()[i]);
  }
  parts["fpn"] = CountParameters(model.fpn());
  parts["head"] = CountParameters(model.head());
  j["params_by_part"] = parts;
  j["resolution"] = {config.height, config.width};
  j["timed_iterations"] = iterations;
  j["median_seconds"] = median;
  j["items_per_second"] = 1.0 / median;
  WriteText(dir / "profile.json", j.dump(1) + "\n");
  std::printf("| params | items/second |\n|---|---|\n| %lld | %.3f |\n",
              static_cast<long long>(model.NumParameters()), 1.0 / median);
  return 0;
}

int CmdGenData(const GlobalOptions& g, const std::string& spec_path, const std::string& out) {
  const Json root = Json::parse(ReadText(spec_path), nullptr, false);
  if (root.is_discarded() || !root.is_object()) throw ParseError(spec_path + ": invalid JSON");
  for (auto it = root.begin(); it != root.end(); ++it) {
    if (it.key() != "scene" && it.key() != "train_images" && it.key() != "val_images") {
      throw ConfigError(it.key() + ": unknown field");
    }
  }
  SceneSpec scene = ParseSceneSpec(root.contains("scene") ? root["scene"].dump() : "{}");
  if (g.seed) scene.seed = *g.seed;
  const int n_train = root.value("train_images", 100);
  const int n_val = root.value("val_images", 20);
  if (n_train < 0 || n_val < 0) throw ConfigError("image counts must be non-negative");
  const fs::path dir(out);
  fs::create_directories(dir);
  WriteText(dir / "scene.json", SerializeSceneSpec(scene));
  // Validation scenes continue the index sequence so no scene is shared.
  WriteDataset((dir / "train").string(), GenerateDataset(scene, n_train, 0, "train"));
  WriteDataset((dir / "val").string(), GenerateDataset(scene, n_val, n_train, "val"));
  std::cout << "wrote " << n_train << " train and " << n_val << " val images to " << out
            << "\n";
  return 0;
}

int CmdAblate(const GlobalOptions& g, const std::string& config_path,
              const std::string& variants) {
  const HrdNetConfig config = ResolveConfig(config_path, g);
  if (config.val_dataset.empty()) throw ConfigError("val_dataset: ablation needs a val split");
  const fs::path dir = PrepareRunDir(g, "ablate-" + variants);
  SaveConfig((dir / "config.json").string(), config);
  const Dataset val = LoadDatasetArg(config.val_dataset);

  std::vector<std::pair<std::string, EvalReport>> rows;
  std::vector<std::int64_t> params;
  auto train_and_eval = [&](const std::string& name, const HrdNetConfig& c) {
    TrainResult r = RunTraining(c, dir / name, g, false);
    rows.emplace_back(name, Evaluate(val, DetectDataset(*r.model, val, c.multi_scale_test)));
    params.push_back(r.model->NumParameters());
    return std::move(r.model);
  };

  if (variants == "fusion") {
    for (FusionStrategy s : {FusionStrategy::kSimpleFpn, FusionStrategy::kAlignedByResolution,
                             FusionStrategy::kAlignedByDepth}) {
      train_and_eval(ToString(s), WithFusion(config, s));
    }
  } else if (variants == "ensemble") {
    if (config.n_streams < 2) throw ConfigError("n_streams: ensemble ablation needs >= 2");
    train_and_eval("hrdnet", config);
    std::vector<std::unique_ptr<HrdNet<float>>> singles;
    for (int i : {0, config.n_streams - 1}) {
      singles.push_back(train_and_eval("single_stream" + std::to_string(i),
                                       SingleStreamConfig(config, i)));
    }
    std::vector<DetectionRecord> dets;
    for (std::size_t k = 0; k < val.size(); ++k) {
      const auto merged = EnsembleDetect<float>({singles[0].get(), singles[1].get()},
                                                val.Sample(k).image, config.nms_iou,
                                                config.max_detections);
      const auto recs = ToRecords(merged, val.images[k].id, val.categories);
      dets.insert(dets.end(), recs.begin(), recs.end());
    }
    rows.emplace_back("ensemble", Evaluate(val, dets));
    params.push_back(singles[0]->NumParameters() + singles[1]->NumParameters());
  } else {
    throw ConfigError("--variants must be fusion or ensemble");
  }

  Json j = Json::array();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    j.push_back({{"variant", rows[k].first},
                 {"params", params[k]},
                 {"report", Json::parse(rows[k].second.ToJson())}});
  }
  WriteText(dir / "ablation.json", j.dump(1) + "\n");
  const std::string table = ReportTable(rows, params);
  WriteText(dir / "ablation.md", table);
  std::cout << table;
  return 0;
}

}  // namespace
}  // namespace hrdnet

int main(int argc, char** argv) {
  using namespace hrdnet;
  CLI::App app{"HRDNet multi-stream small-object detector"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  app.add_flag("--deterministic", g.deterministic,
               "Single-threaded, fixed-order execution; logs omit wall-clock fields");
  app.add_option("--run-dir", g.run_dir, "Artifact directory (default runs/<command>)");
  app.add_flag("--quiet", g.quiet, "Only print warnings and errors");

  std::string config_path, checkpoint, dataset, images, out, spec, variants;
  bool multi_scale = false, resume = false;
  int iterations = 20, warmup = 3;

  auto* train = app.add_subcommand("train", "Train a detector from a config file");
  train->add_option("--config", config_path)->required();
  train->add_flag("--resume", resume, "Continue from <run-dir>/latest.ckpt");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on an annotated dataset");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--dataset", dataset)->required();
  eval->add_flag("--multi-scale", multi_scale, "Merge detections over the test scales");

  auto* infer = app.add_subcommand("infer", "Detect objects in a directory of images");
  infer->add_option("--checkpoint", checkpoint)->required();
  infer->add_option("--images", images)->required();
  infer->add_option("--out", out)->required();

  auto* profile = app.add_subcommand("profile", "Parameter count and inference speed");
  profile->add_option("--config", config_path)->required();
  profile->add_option("--iterations", iterations, "Timed iterations (>= 20)");
  profile->add_option("--warmup", warmup, "Untimed warm-up iterations");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic small-object dataset");
  gen->add_option("--spec", spec)->required();
  gen->add_option("--out", out)->required();

  auto* ablate = app.add_subcommand("ablate", "Train and compare model variants");
  ablate->add_option("--config", config_path)->required();
  ablate->add_option("--variants", variants)->required()->check(
      CLI::IsMember({"fusion", "ensemble"}));

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;
  SetLogLevel(g.quiet ? LogLevel::kWarning : LogLevel::kInfo);

  try {
    if (*train) return CmdTrain(g, config_path, resume);
    if (*eval) return CmdEval(g, checkpoint, dataset, multi_scale);
    if (*infer) return CmdInfer(g, checkpoint, images, out);
    if (*profile) return CmdProfile(g, config_path, iterations, warmup);
    if (*gen) return CmdGenData(g, spec, out);
    if (*ablate) return CmdAblate(g, config_path, variants);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
