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
#include "hrdnet/evaluation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hrdnet/errors.h"
#include "json.hpp"

namespace hrdnet {
namespace {

// Matches numpy.linspace: start + i * step, last element pinned to stop.
std::vector<double> Linspace(double start, double stop, int num) {
  std::vector<double> v(num);
  const double step = (stop - start) / (num - 1);
  for (int i = 0; i < num; ++i) v[i] = i * step + start;
  v.back() = stop;
  return v;
}

struct Gt {
  Box box;
  double area;
};

struct Det {
  Box box;
  double score;
  double area;
};

// Per (image, category, area range) matching state.
struct ImageEval {
  std::vector<double> scores;           // score-sorted detections
  std::vector<std::vector<char>> matched;  // [t][d]
  std::vector<std::vector<char>> ignored;  // [t][d]
  int num_gt_not_ignored = 0;
};

// Core greedy matcher over a score-ordered detection list. `ious[d][g]` uses
// the gt order given; gts must be sorted with non-ignored entries first.
// Writes the matched gt index per detection (-1 when unmatched).
void GreedyMatch(const std::vector<std::vector<double>>& ious, const std::vector<char>& gt_ignore,
                 double threshold, std::vector<int>& det_match) {
  const std::size_t nd = ious.size(), ng = gt_ignore.size();
  std::vector<char> gt_taken(ng, 0);
  det_match.assign(nd, -1);
  for (std::size_t d = 0; d < nd; ++d) {
    double best = std::min(threshold, 1 - 1e-10);
    int m = -1;
    for (std::size_t g = 0; g < ng; ++g) {
      if (gt_taken[g]) continue;
      // Once matched to a regular gt, stop at the first ignored one.
      if (m > -1 && !gt_ignore[m] && gt_ignore[g]) break;
      if (ious[d][g] < best) continue;
      best = ious[d][g];
      m = static_cast<int>(g);
    }
    if (m == -1) continue;
    gt_taken[m] = 1;
    det_match[d] = m;
  }
}

}  // namespace

EvalParams::EvalParams()
    : iou_thresholds(Linspace(0.5, 0.95, 10)),
      recall_thresholds(Linspace(0.0, 1.0, 101)),
      area_ranges{{"all", 0, 1e10},
                  {"small", 0, 32.0 * 32.0},
                  {"medium", 32.0 * 32.0, 96.0 * 96.0},
                  {"large", 96.0 * 96.0, 1e10}} {}

std::string EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["ap"] = ap;
  j["ap50"] = ap50;
  j["ap75"] = ap75;
  j["ap_small"] = opt(ap_small);
  j["ap_medium"] = opt(ap_medium);
  j["ap_large"] = opt(ap_large);
  j["ar1"] = ar1;
  j["ar10"] = ar10;
  j["ar100"] = ar100;
  j["ar500"] = ar500;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [id, v] : per_category_ap) per[std::to_string(id)] = v;
  j["per_category_ap"] = per;
  return j.dump(2);
}

double CocoIou(const Box& det, const Box& gt) {
  const double ga = gt.w * gt.h, da = det.w * det.h;
  const double w = std::fmin(det.w + det.x, gt.w + gt.x) - std::fmax(det.x, gt.x);
  if (w <= 0) return 0;
  const double h = std::fmin(det.h + det.y, gt.h + gt.y) - std::fmax(det.y, gt.y);
  if (h <= 0) return 0;
  const double i = w * h;
  return i / (da + ga - i);
}

std::vector<int> MatchDetections(const std::vector<Box>& dets, const std::vector<Box>& gts,
                                 double iou_threshold) {
  std::vector<std::vector<double>> ious(dets.size(), std::vector<double>(gts.size()));
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t g = 0; g < gts.size(); ++g) ious[d][g] = CocoIou(dets[d], gts[g]);
  }
  std::vector<int> match;
  GreedyMatch(ious, std::vector<char>(gts.size(), 0), iou_threshold, match);
  return match;
}

double AveragePrecision101(const std::vector<bool>& tp, const std::vector<bool>& fp, int num_gt,
                           const std::vector<double>& recall_thresholds) {
  if (tp.size() != fp.size()) throw InvalidInputError("tp/fp flag lengths differ");
  if (num_gt <= 0) throw InvalidInputError("average precision needs at least one ground truth");
  const std::size_t nd = tp.size();
  std::vector<double> rc(nd), pr(nd);
  double tp_sum = 0, fp_sum = 0;
  for (std::size_t i = 0; i < nd; ++i) {
    tp_sum += tp[i];
    fp_sum += fp[i];
    rc[i] = tp_sum / num_gt;
    pr[i] = tp_sum / (fp_sum + tp_sum + std::numeric_limits<double>::epsilon());
  }
  for (std::size_t i = nd; i-- > 1;) pr[i - 1] = std::max(pr[i - 1], pr[i]);
  double sum = 0;
  for (double r : recall_thresholds) {
    const auto it = std::lower_bound(rc.begin(), rc.end(), r);
    if (it == rc.end()) break;
    sum += pr[it - rc.begin()];
  }
  return sum / recall_thresholds.size();
}

double AveragePrecision101(const std::vector<bool>& tp, int num_gt) {
  std::vector<bool> fp(tp.size());
  for (std::size_t i = 0; i < tp.size(); ++i) fp[i] = !tp[i];
  return AveragePrecision101(tp, fp, num_gt, EvalParams().recall_thresholds);
}

EvalReport Evaluate(const Dataset& gt_set, const std::vector<DetectionRecord>& detections,
                    const EvalParams& params) {
  const std::size_t T = params.iou_thresholds.size();
  const std::size_t A = params.area_ranges.size();
  const std::size_t M = params.max_detections.size();
  if (T == 0 || A == 0 || M == 0 || params.recall_thresholds.empty()) {
    throw ConfigError("evaluation parameters must be non-empty");
  }
  const int max_det_all = *std::max_element(params.max_detections.begin(),
                                            params.max_detections.end());

  // Images and categories in ascending id order.
  std::vector<std::size_t> img_order(gt_set.size());
  std::iota(img_order.begin(), img_order.end(), 0);
  std::sort(img_order.begin(), img_order.end(), [&](std::size_t a, std::size_t b) {
    return gt_set.images[a].id < gt_set.images[b].id;
  });
  std::map<std::int64_t, std::size_t> img_slot;
  for (std::size_t s = 0; s < img_order.size(); ++s) img_slot[gt_set.images[img_order[s]].id] = s;
  std::vector<int> cat_ids;
  for (const Category& c : gt_set.categories) cat_ids.push_back(c.id);
  std::sort(cat_ids.begin(), cat_ids.end());
  std::map<int, std::size_t> cat_slot;
  for (std::size_t k = 0; k < cat_ids.size(); ++k) cat_slot[cat_ids[k]] = k;
  const std::size_t K = cat_ids.size(), I = img_order.size();

  std::vector<std::vector<Gt>> gts(K * I);
  std::vector<std::vector<Det>> dts(K * I);
  for (std::size_t s = 0; s < I; ++s) {
    const std::size_t i = img_order[s];
    for (std::size_t n = 0; n < gt_set.boxes[i].size(); ++n) {
      const Box& b = gt_set.boxes[i][n];
      const int cat = gt_set.categories.at(gt_set.labels[i][n]).id;
      gts[cat_slot.at(cat) * I + s].push_back({b, b.w * b.h});
    }
  }
  for (const DetectionRecord& r : detections) {
    const auto it = img_slot.find(r.image_id);
    if (it == img_slot.end()) {
      throw InvalidInputError("detection references unknown image id " +
                              std::to_string(r.image_id));
    }
    const auto kt = cat_slot.find(r.category_id);
    if (kt == cat_slot.end()) continue;
    dts[kt->second * I + it->second].push_back({r.box, r.score, r.box.w * r.box.h});
  }

  // evals[(k * A + a) * I + s]
  std::vector<std::optional<ImageEval>> evals(K * A * I);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t s = 0; s < I; ++s) {
      const auto& g = gts[k * I + s];
      auto d = dts[k * I + s];
      if (g.empty() && d.empty()) continue;
      std::stable_sort(d.begin(), d.end(),
                       [](const Det& x, const Det& y) { return x.score > y.score; });
      if (d.size() > static_cast<std::size_t>(max_det_all)) d.resize(max_det_all);

      for (std::size_t a = 0; a < A; ++a) {
        const AreaRange& ar = params.area_ranges[a];
        std::vector<char> ignore(g.size());
        for (std::size_t n = 0; n < g.size(); ++n) {
          ignore[n] = g[n].area < ar.lo || g[n].area > ar.hi;
        }
        std::vector<std::size_t> gorder(g.size());
        std::iota(gorder.begin(), gorder.end(), 0);
        std::stable_sort(gorder.begin(), gorder.end(),
                         [&](std::size_t x, std::size_t y) { return ignore[x] < ignore[y]; });
        std::vector<char> sorted_ignore(g.size());
        std::vector<std::vector<double>> ious(d.size(), std::vector<double>(g.size()));
        for (std::size_t n = 0; n < g.size(); ++n) {
          sorted_ignore[n] = ignore[gorder[n]];
          for (std::size_t m = 0; m < d.size(); ++m) ious[m][n] = CocoIou(d[m].box, g[gorder[n]].box);
        }

        ImageEval e;
        e.num_gt_not_ignored =
            static_cast<int>(std::count(sorted_ignore.begin(), sorted_ignore.end(), 0));
        for (const Det& x : d) e.scores.push_back(x.score);
        e.matched.assign(T, std::vector<char>(d.size(), 0));
        e.ignored.assign(T, std::vector<char>(d.size(), 0));
        std::vector<int> match;
        for (std::size_t t = 0; t < T; ++t) {
          GreedyMatch(ious, sorted_ignore, params.iou_thresholds[t], match);
          for (std::size_t m = 0; m < d.size(); ++m) {
            if (match[m] >= 0) {
              e.matched[t][m] = 1;
              e.ignored[t][m] = sorted_ignore[match[m]];
            } else {
              e.ignored[t][m] = d[m].area < ar.lo || d[m].area > ar.hi;
            }
          }
        }
        evals[(k * A + a) * I + s] = std::move(e);
      }
    }
  }

  // precision[t][k][a][m] as a per-(t,k,a,m) mean over recall thresholds;
  // -1 marks categories without non-ignored ground truth.
  auto idx = [&](std::size_t t, std::size_t k, std::size_t a, std::size_t m) {
    return ((t * K + k) * A + a) * M + m;
  };
  std::vector<double> precision(T * K * A * M, -1.0), recall(T * K * A * M, -1.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t m = 0; m < M; ++m) {
        const std::size_t max_det = params.max_detections[m];
        struct Entry {
          double score;
          std::size_t s, d;
        };
        std::vector<Entry> entries;
        int npig = 0;
        bool any = false;
        for (std::size_t s = 0; s < I; ++s) {
          const auto& e = evals[(k * A + a) * I + s];
          if (!e) continue;
          any = true;
          npig += e->num_gt_not_ignored;
          for (std::size_t d = 0; d < std::min(max_det, e->scores.size()); ++d) {
            entries.push_back({e->scores[d], s, d});
          }
        }
        if (!any || npig == 0) continue;
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& x, const Entry& y) { return x.score > y.score; });
        for (std::size_t t = 0; t < T; ++t) {
          std::vector<bool> tp(entries.size()), fp(entries.size());
          for (std::size_t n = 0; n < entries.size(); ++n) {
            const ImageEval& e = *evals[(k * A + a) * I + entries[n].s];
            const bool matched = e.matched[t][entries[n].d];
            const bool ignored = e.ignored[t][entries[n].d];
            tp[n] = matched && !ignored;
            fp[n] = !matched && !ignored;
          }
          const double n_tp = static_cast<double>(std::count(tp.begin(), tp.end(), true));
          recall[idx(t, k, a, m)] = entries.empty() ? 0.0 : n_tp / npig;
          precision[idx(t, k, a, m)] =
              AveragePrecision101(tp, fp, npig, params.recall_thresholds);
        }
      }
    }
  }

  auto find_index = [](const std::vector<double>& v, double x) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (std::abs(v[i] - x) < 1e-12) return i;
    }
    return std::nullopt;
  };
  auto mean_over = [&](const std::vector<double>& table, std::optional<std::size_t> t_only,
                       std::size_t a, std::size_t m) -> std::optional<double> {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < T; ++t) {
      if (t_only && t != *t_only) continue;
      for (std::size_t k = 0; k < K; ++k) {
        const double v = table[idx(t, k, a, m)];
        if (v > -1) {
          sum += v;
          ++n;
        }
      }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  };
  auto area_index = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t a = 0; a < A; ++a) {
      if (params.area_ranges[a].name == name) return a;
    }
    return std::nullopt;
  };
  auto det_index = [&](int max_det) -> std::optional<std::size_t> {
    for (std::size_t m = 0; m < M; ++m) {
      if (params.max_detections[m] == max_det) return m;
    }
    return std::nullopt;
  };

  EvalReport rep;
  const auto all = area_index("all");
  const auto ap_m = det_index(params.ap_max_detections);
  if (!all || !ap_m) throw ConfigError("evaluation needs the 'all' range and the AP detection cap");
  const auto t50 = find_index(params.iou_thresholds, 0.5);
  const auto t75 = find_index(params.iou_thresholds, 0.75);
  rep.ap = mean_over(precision, std::nullopt, *all, *ap_m).value_or(0.0);
  if (t50) rep.ap50 = mean_over(precision, t50, *all, *ap_m).value_or(0.0);
  if (t75) rep.ap75 = mean_over(precision, t75, *all, *ap_m).value_or(0.0);
  if (auto a = area_index("small")) rep.ap_small = mean_over(precision, std::nullopt, *a, *ap_m);
  if (auto a = area_index("medium")) rep.ap_medium = mean_over(precision, std::nullopt, *a, *ap_m);
  if (auto a = area_index("large")) rep.ap_large = mean_over(precision, std::nullopt, *a, *ap_m);
  const std::pair<int, double*> ars[] = {{1, &rep.ar1}, {10, &rep.ar10}, {100, &rep.ar100},
                                         {500, &rep.ar500}};
  for (const auto& [cap, out] : ars) {
    if (auto m = det_index(cap)) *out = mean_over(recall, std::nullopt, *all, *m).value_or(0.0);
  }
  for (std::size_t k = 0; k < K; ++k) {
    double sum = 0;
    bool valid = false;
    for (std::size_t t = 0; t < T; ++t) {
      const double v = precision[idx(t, k, *all, *ap_m)];
      if (v > -1) {
        sum += v;
        valid = true;
      }
    }
    if (valid) rep.per_category_ap[cat_ids[k]] = sum / T;
  }
  return rep;
}

}  // namespace hrdnet
