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
#ifndef HRDNET_SCHEDULE_H_
#define HRDNET_SCHEDULE_H_

#include <cstdint>
#include <string>
#include <vector>

namespace hrdnet {

struct Schedule {
  double base_lr = 0.02;
  std::vector<int> decay_epochs{7, 11};
  double decay_factor = 0.1;
  int warmup_iters = 500;
  double warmup_ratio = 1.0 / 3.0;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  int total_epochs = 12;
  double grad_clip_norm = 35.0;  // global L2 norm cap, 0 disables
  bool operator==(const Schedule&) const = default;
};

// Throws ConfigError naming the offending field under `path`.
void ValidateSchedule(const Schedule& s, const std::string& path = "schedule");

// Linear warmup from base_lr * warmup_ratio over warmup_iters iterations,
// then step decay applied at the start of each listed epoch.
double LrAt(std::int64_t global_iter, int epoch, const Schedule& s);

}  // namespace hrdnet

#endif  // HRDNET_SCHEDULE_H_
