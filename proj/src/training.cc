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
#include "hrdnet/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hrdnet/errors.h"
#include "hrdnet/logging.h"

namespace hrdnet {
namespace {

using Json = nlohmann::ordered_json;

std::string Fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

struct RunState {
  int next_epoch = 0;
  std::int64_t global_iter = 0;
  double best_ap = -1;
  int best_epoch = -1;
};

std::string MetaJson(const RunState& s) {
  return Json{{"next_epoch", s.next_epoch},
              {"global_iter", s.global_iter},
              {"best_ap", s.best_ap},
              {"best_epoch", s.best_epoch}}
      .dump();
}

Checkpoint TrainingCheckpoint(const HrdNet<float>& model, const SgdState<float>& sgd,
                              const RunState& s) {
  Checkpoint ck = MakeCheckpoint(model, MetaJson(s));
  for (const auto& [name, buf] : sgd.momentum) ck.tensors.emplace("momentum/" + name, Store(buf));
  return ck;
}

bool SameExceptEpochs(HrdNetConfig a, HrdNetConfig b) {
  a.schedule.total_epochs = b.schedule.total_epochs = 0;
  return a == b;
}

}  // namespace

template <typename T>
void SgdUpdate(const nn::ParamList<T>& params, double lr, double momentum, double weight_decay,
               SgdState<T>* state) {
  for (const auto& p : params) {
    Tensor<T>& value = p.var->value;
    Tensor<T>& buf = state->momentum[p.name];
    if (buf.shape() != value.shape()) buf = Tensor<T>(value.shape());
    const bool has_grad = p.var->grad.size() == value.size();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = (has_grad ? double(p.var->grad[k]) : 0.0) + weight_decay * value[k];
      const double v = momentum * buf[k] + g;
      buf[k] = static_cast<T>(v);
      value[k] = static_cast<T>(value[k] - lr * v);
    }
    if (has_grad) p.var->grad.Fill(T(0));
  }
}

template <typename T>
double ClipGradNorm(const nn::ParamList<T>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) {
    for (T g : p.var->grad.storage()) sq += double(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T f = static_cast<T>(max_norm / (norm + 1e-6));
    for (const auto& p : params) {
      for (T& g : p.var->grad.storage()) g *= f;
    }
  }
  return norm;
}

template <typename T>
std::vector<TrainSample<T>> PrepareTrainingSamples(const AnnotatedImage<float>& sample,
                                                   const HrdNetConfig& config) {
  const double s = FitScale(sample.image.height(), sample.image.width(), config);
  std::vector<AnnotatedImage<float>> parts;
  if (config.train_on_patches) {
    parts = CropQuadrants(sample);
  } else {
    parts.push_back(sample);
  }
  std::vector<TrainSample<T>> out;
  for (const auto& part : parts) {
    const PreparedInput<T> in = PrepareInputAtScale<T>(part.image, config, s);
    out.push_back({in.image, ScaleBoxes(part.boxes, in.scale_x, in.scale_y), part.labels});
  }
  return out;
}

template <typename T>
StepStats TrainStep(const HrdNet<T>& model, const std::vector<TrainSample<T>>& batch, double lr,
                    const Schedule& schedule, SgdState<T>* state, std::int64_t iteration) {
  if (batch.empty()) throw InvalidInputError("train_step: empty batch");
  StepStats st;
  st.iteration = iteration;
  st.lr = lr;
  auto fail = [&](const std::string& what) {
    throw NumericError("non-finite loss at iteration " + std::to_string(iteration) + " (lr " +
                       Fmt(lr) + ", classification " + Fmt(st.classification) +
                       ", regression " + Fmt(st.regression) + "): " + what);
  };
  std::vector<ag::Var<T>> terms;
  try {
    std::vector<HeadOutput<T>> preds;
    std::vector<AnchorTargets> targets;
    for (const auto& s : batch) {
      preds.push_back(model(s.image));
      targets.push_back(model.head().AssignTargets(preds.back().shapes, s.boxes, s.labels));
      st.num_positive += targets.back().num_positive;
    }
    const double normalizer = std::max(1, st.num_positive);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      LossBundle<T> l = model.head().Loss(preds[k], targets[k], normalizer);
      st.classification += l.classification;
      st.regression += l.regression;
      st.loss += l.total_value;
      terms.push_back(l.total);
    }
  } catch (const NumericError& e) {
    fail(e.what());
  }
  if (!std::isfinite(st.loss)) fail("loss is " + Fmt(st.loss));
  ag::Backward(ag::Sum(terms));
  const nn::ParamList<T> params = model.Parameters();
  st.grad_norm = ClipGradNorm(params, schedule.grad_clip_norm);
  if (!std::isfinite(st.grad_norm)) fail("gradient norm is " + Fmt(st.grad_norm));
  SgdUpdate(params, lr, schedule.momentum, schedule.weight_decay, state);
  return st;
}

std::string EpochRecord::ToJson() const {
  Json j;
  j["epoch"] = epoch;
  j["iterations"] = iterations;
  j["lr"] = lr;
  j["loss"] = loss;
  j["classification"] = classification;
  j["regression"] = regression;
  j["val"] = val ? Json::parse(val->ToJson()) : Json(nullptr);
  if (seconds) j["seconds"] = *seconds;
  return j.dump();
}

TrainResult TrainLoop(const HrdNetConfig& config, const Dataset& train,
                      const TrainOptions& options) {
  ValidateConfig(config);
  if (train.size() == 0) throw ConfigError("train_dataset: dataset is empty");
  if (train.num_classes() != config.head.num_classes) {
    throw ConfigError("head.num_classes: " + std::to_string(config.head.num_classes) +
                      " but the training set has " + std::to_string(train.num_classes()) +
                      " categories");
  }
  namespace fs = std::filesystem;
  const bool write = !options.run_dir.empty();
  if (write) fs::create_directories(options.run_dir);
  const std::string latest = (fs::path(options.run_dir) / "latest.ckpt").string();
  const std::string best = (fs::path(options.run_dir) / "best.ckpt").string();

  TrainResult result;
  result.model = std::make_unique<HrdNet<float>>(config);
  HrdNet<float>& model = *result.model;
  SgdState<float> sgd;
  RunState rs;
  if (options.resume) {
    if (!write) throw ConfigError("resume needs a run directory");
    const Checkpoint ck = ReadCheckpoint(latest);
    if (!SameExceptEpochs(ck.config, config)) {
      throw ConfigError("resume: checkpoint config differs beyond schedule.total_epochs");
    }
    LoadParameters(ck, &model);
    for (const auto& [name, t] : ck.tensors) {
      if (name.rfind("momentum/", 0) == 0) {
        sgd.momentum[name.substr(9)] = Restore<float>(t, name);
      }
    }
    const Json meta = Json::parse(ck.meta);
    rs.next_epoch = meta.at("next_epoch").get<int>();
    rs.global_iter = meta.at("global_iter").get<std::int64_t>();
    rs.best_ap = meta.at("best_ap").get<double>();
    rs.best_epoch = meta.at("best_epoch").get<int>();
  } else if (write) {
    std::ofstream(fs::path(options.run_dir) / "metrics.jsonl", std::ios::trunc);
  }
  if (write && rs.next_epoch == 0) WriteCheckpoint(latest, TrainingCheckpoint(model, sgd, rs));

  // Units are (image, patch) pairs.
  const int per_image = config.train_on_patches ? 4 : 1;
  const std::size_t units = train.size() * per_image;
  std::int64_t iters = (static_cast<std::int64_t>(units) + config.batch_size - 1) /
                       config.batch_size;
  if (config.max_iters_per_epoch > 0) iters = std::min(iters, config.max_iters_per_epoch);

  for (int epoch = rs.next_epoch; epoch < config.schedule.total_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(units);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x7a1du};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::int64_t it = 0; it < iters; ++it) {
      std::vector<TrainSample<float>> batch;
      for (int b = 0; b < config.batch_size; ++b) {
        const std::size_t pos = static_cast<std::size_t>(it) * config.batch_size + b;
        if (pos >= units) break;
        const std::size_t u = order[pos];
        auto samples = PrepareTrainingSamples<float>(train.Sample(u / per_image), config);
        batch.push_back(std::move(samples[u % per_image]));
      }
      const double lr = LrAt(rs.global_iter, epoch, config.schedule);
      const StepStats st = TrainStep(model, batch, lr, config.schedule, &sgd, rs.global_iter);
      ++rs.global_iter;
      result.iteration_losses.push_back(st.loss);
      rec.loss += st.loss;
      rec.classification += st.classification;
      rec.regression += st.regression;
      rec.lr = lr;
      ++rec.iterations;
    }
    if (rec.iterations > 0) {
      rec.loss /= rec.iterations;
      rec.classification /= rec.iterations;
      rec.regression /= rec.iterations;
    }
    rs.next_epoch = epoch + 1;
    const bool last = epoch + 1 == config.schedule.total_epochs;
    bool improved = false;
    if (options.val && ((epoch + 1) % config.eval_every == 0 || last)) {
      rec.val = Evaluate(*options.val, DetectDataset(model, *options.val,
                                                     config.multi_scale_test));
      if (rec.val->ap > rs.best_ap) {
        rs.best_ap = rec.val->ap;
        rs.best_epoch = epoch;
        improved = true;
      }
    }
    if (options.record_time) {
      rec.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    if (write) {
      const Checkpoint ck = TrainingCheckpoint(model, sgd, rs);
      WriteCheckpoint(latest, ck);
      if (improved || (!options.val && last)) WriteCheckpoint(best, ck);
      std::ofstream(fs::path(options.run_dir) / "metrics.jsonl", std::ios::app)
          << rec.ToJson() << "\n";
    }
    LogInfo("epoch " + std::to_string(epoch) + ": loss " + Fmt(rec.loss) + " (cls " +
            Fmt(rec.classification) + ", reg " + Fmt(rec.regression) + "), lr " + Fmt(rec.lr) +
            (rec.val ? ", val AP " + Fmt(rec.val->ap) : std::string()));
    if (options.on_epoch) options.on_epoch(rec);
    result.history.push_back(std::move(rec));
  }
  result.best_ap = rs.best_ap;
  result.best_epoch = rs.best_epoch;
  return result;
}

#define HRDNET_INSTANTIATE(T)                                                                  \
  template double ClipGradNorm<T>(const nn::ParamList<T>&, double);                           \
  template void SgdUpdate<T>(const nn::ParamList<T>&, double, double, double, SgdState<T>*);  \
  template std::vector<TrainSample<T>> PrepareTrainingSamples<T>(const AnnotatedImage<float>&, \
                                                                 const HrdNetConfig&);         \
  template StepStats TrainStep<T>(const HrdNet<T>&, const std::vector<TrainSample<T>>&,       \
                                  double, const Schedule&, SgdState<T>*, std::int64_t);
HRDNET_INSTANTIATE(float)
HRDNET_INSTANTIATE(double)
#undef HRDNET_INSTANTIATE

}  // namespace hrdnet
