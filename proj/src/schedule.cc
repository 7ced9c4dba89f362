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
#include "hrdnet/schedule.h"

#include <cmath>

#include "hrdnet/errors.h"

namespace hrdnet {

void ValidateSchedule(const Schedule& s, const std::string& path) {
  auto fail = [&](const std::string& field, const std::string& what) {
    throw ConfigError(path + "." + field + ": " + what);
  };
  if (!(s.base_lr >= 0) || !std::isfinite(s.base_lr)) fail("base_lr", "must be finite and >= 0");
  if (!(s.warmup_ratio > 0 && s.warmup_ratio <= 1)) fail("warmup_ratio", "must lie in (0, 1]");
  if (s.warmup_iters < 0) fail("warmup_iters", "must be >= 0");
  if (!(s.decay_factor > 0)) fail("decay_factor", "must be positive");
  if (s.weight_decay < 0) fail("weight_decay", "must be >= 0");
  if (!(s.momentum >= 0 && s.momentum < 1)) fail("momentum", "must lie in [0, 1)");
  if (s.total_epochs < 0) fail("total_epochs", "must be >= 0");
  if (!(s.grad_clip_norm >= 0)) fail("grad_clip_norm", "must be >= 0");
  for (std::size_t i = 0; i < s.decay_epochs.size(); ++i) {
    if (s.decay_epochs[i] < 0) fail("decay_epochs", "entries must be >= 0");
    if (i > 0 && s.decay_epochs[i] <= s.decay_epochs[i - 1]) {
      fail("decay_epochs", "must be strictly increasing");
    }
  }
}

double LrAt(std::int64_t global_iter, int epoch, const Schedule& s) {
  if (global_iter < 0 || epoch < 0) {
    throw InvalidInputError("lr_at: iteration and epoch must be non-negative");
  }
  if (global_iter < s.warmup_iters) {
    const double t = static_cast<double>(global_iter) / s.warmup_iters;
    return s.base_lr * (s.warmup_ratio + (1 - s.warmup_ratio) * t);
  }
  double lr = s.base_lr;
  for (int e : s.decay_epochs) {
    if (e <= epoch) lr *= s.decay_factor;
  }
  return lr;
}

}  // namespace hrdnet
