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
#ifndef HRDNET_TRAINING_H_
#define HRDNET_TRAINING_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hrdnet/data.h"
#include "hrdnet/evaluation.h"
#include "hrdnet/model.h"
#include "hrdnet/schedule.h"

namespace hrdnet {

template <typename T>
struct SgdState {
  std::map<std::string, Tensor<T>> momentum;  // keyed by parameter name
};

// v <- momentum * v + (grad + weight_decay * p); p <- p - lr * v. Buffers
// start at zero. Gradients are cleared afterwards.
template <typename T>
void SgdUpdate(const nn::ParamList<T>& params, double lr, double momentum, double weight_decay,
               SgdState<T>* state);

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename T>
double ClipGradNorm(const nn::ParamList<T>& params, double max_norm);

// One image (or patch) in network coordinates, padded to alignment.
template <typename T>
struct TrainSample {
  Tensor<T> image;
  std::vector<Box> boxes;
  std::vector<int> labels;
};

// Resizes a source sample by the configured fit scale. With
// config.train_on_patches the sample is first cut into four quadrants, each
// resized by the scale of the full image.
template <typename T>
std::vector<TrainSample<T>> PrepareTrainingSamples(const AnnotatedImage<float>& sample,
                                                   const HrdNetConfig& config);

struct StepStats {
  std::int64_t iteration = 0;
  double lr = 0;
  double loss = 0;
  double classification = 0;
  double regression = 0;
  int num_positive = 0;
  double grad_norm = 0;  // before clipping
};

// Forward over the batch, losses normalised by the batch positive count, one
// backward pass, gradient clipping and one SGD update. Throws NumericError before updating when
// the loss is not finite.
template <typename T>
StepStats TrainStep(const HrdNet<T>& model, const std::vector<TrainSample<T>>& batch, double lr,
                    const Schedule& schedule, SgdState<T>* state, std::int64_t iteration);

struct EpochRecord {
  int epoch = 0;
  std::int64_t iterations = 0;
  double lr = 0;  // at the epoch's last iteration
  double loss = 0;
  double classification = 0;
  double regression = 0;
  std::optional<EvalReport> val;
  std::optional<double> seconds;
  std::string ToJson() const;
};

struct TrainOptions {
  std::string run_dir;  // empty: no files are written
  bool resume = false;  // continue from run_dir/latest.ckpt
  const Dataset* val = nullptr;
  bool record_time = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::unique_ptr<HrdNet<float>> model;
  std::vector<EpochRecord> history;
  std::vector<double> iteration_losses;
  double best_ap = -1;
  int best_epoch = -1;
};

// Writes <run_dir>/metrics.jsonl (one line per epoch), latest.ckpt after
// every epoch and best.ckpt whenever validation AP improves. A resumed run
// may only change schedule.total_epochs.
TrainResult TrainLoop(const HrdNetConfig& config, const Dataset& train,
                      const TrainOptions& options = {});

}  // namespace hrdnet

#endif  // HRDNET_TRAINING_H_
