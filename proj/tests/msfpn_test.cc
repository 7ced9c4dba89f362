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
#include "hrdnet/msfpn.h"

#include <gtest/gtest.h>

#include <random>

#include "hrdnet/errors.h"
#include "support/oracles.h"

namespace hrdnet {
namespace {

// Raw feature groups with the alpha = 0.5 shape identities: group i level j
// is (channels[j], s_j / 2^i, s_j / 2^i) with s_j = base / 2^(m-1-j).
template <typename T>
std::vector<FeatureGroup<T>> RandomGroups(int n, int m, int base, const std::vector<int>& channels,
                                          unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0, 1);
  std::vector<FeatureGroup<T>> groups(n);
  for (int i = 0; i < n; ++i) {
    groups[i].stream_index = i;
    for (int j = 0; j < m; ++j) {
      const int s = (base >> (m - 1 - j)) >> i;
      Tensor<T> t(channels[j], s, s);
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<T>(d(rng));
      groups[i].maps.push_back({ag::Constant(t), i, j, 4 << (m - 1 - j)});
    }
  }
  return groups;
}

std::vector<std::vector<int>> Channels(int n, const std::vector<int>& per_level) {
  return std::vector<std::vector<int>>(n, per_level);
}

const FusionStrategy kAll[] = {FusionStrategy::kSimpleFpn, FusionStrategy::kAlignedByResolution,
                               FusionStrategy::kAlignedByDepth};

TEST(FusionStrategyTest, NamesRoundTrip) {
  for (auto s : kAll) EXPECT_EQ(ParseFusionStrategy(ToString(s)), s);
  EXPECT_THROW(ParseFusionStrategy("aligned_by_magic"), ConfigError);
}

TEST(MsFpnTest, ShapesPreservedForEveryStrategy) {
  for (auto s : kAll) {
    for (int n = 1; n <= 3; ++n) {
      const MsFpn<float> fpn({s, 8, 1}, Channels(n, {12, 10, 6, 4}), 0);
      const auto groups = RandomGroups<float>(n, 4, 64, {12, 10, 6, 4}, 1);
      const auto fused = fpn.Fuse(groups);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) {
          EXPECT_EQ(fused[i].maps[j].channels(), 8);
          EXPECT_EQ(fused[i].maps[j].height(), groups[i].maps[j].height());
        }
      }
      const auto out = fpn(groups);
      ASSERT_EQ(out.size(), 5);
      for (int k = 0; k + 1 < out.size(); ++k) {
        EXPECT_EQ(out.maps[k + 1].height(), 2 * out.maps[k].height());
        EXPECT_EQ(out.maps[k + 1].stride * 2, out.maps[k].stride);
      }
      EXPECT_EQ(out.level(3).height(), 64);
    }
  }
}

TEST(MsFpnTest, ExtraLevelCount) {
  const auto groups = RandomGroups<float>(1, 4, 64, {4, 4, 4, 4}, 2);
  EXPECT_EQ(MsFpn<float>({FusionStrategy::kAlignedByDepth, 4, 0}, Channels(1, {4, 4, 4, 4}), 0)(groups).size(), 4);
  EXPECT_EQ(MsFpn<float>({FusionStrategy::kAlignedByDepth, 4, 2}, Channels(1, {4, 4, 4, 4}), 0)(groups).size(), 6);
}

TEST(MsFpnTest, ZeroInputGivesZeroFusion) {
  for (auto s : kAll) {
    const MsFpn<float> fpn({s, 8, 1}, Channels(2, {4, 4, 4, 4}), 0);
    auto groups = RandomGroups<float>(2, 4, 64, {4, 4, 4, 4}, 3);
    for (auto& g : groups) {
      for (auto& m : g.maps) m.data->value.Fill(0.0f);
    }
    for (const auto& g : fpn.Fuse(groups)) {
      for (const auto& m : g.maps) {
        for (std::size_t k = 0; k < m.data->value.size(); ++k) ASSERT_EQ(m.data->value[k], 0.0f);
      }
    }
  }
}

TEST(MsFpnTest, FusionIsLinear) {
  for (auto s : kAll) {
    const MsFpn<double> fpn({s, 6, 0}, Channels(3, {5, 4, 3, 2}), 7);
    const auto a = RandomGroups<double>(3, 4, 64, {5, 4, 3, 2}, 4);
    const auto b = RandomGroups<double>(3, 4, 64, {5, 4, 3, 2}, 5);
    auto ab = a;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        ab[i].maps[j].data = ag::Constant(oracle::Plus(a[i].maps[j].data->value, b[i].maps[j].data->value));
      }
    }
    const auto fa = fpn.Fuse(a), fb = fpn.Fuse(b), fab = fpn.Fuse(ab);
    for (int j = 0; j < 4; ++j) {
      const auto& x = fab[0].maps[j].data->value;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double want = fa[0].maps[j].data->value[k] + fb[0].maps[j].data->value[k];
        ASSERT_NEAR(x[k], want, 1e-5 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST(MsFpnTest, SingleStreamMatchesTextbookFpn) {
  for (auto s : kAll) {
    const MsFpn<double> fpn({s, 6, 1}, Channels(1, {5, 4, 3, 2}), 11);
    const auto groups = RandomGroups<double>(1, 4, 32, {5, 4, 3, 2}, 6);
    std::vector<Tensor<double>> raw;
    for (const auto& m : groups[0].maps) raw.push_back(m.data->value);
    const auto want = oracle::TextbookFpn(fpn, raw);
    const auto got = fpn(groups);
    ASSERT_EQ(static_cast<std::size_t>(got.size()), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      ASSERT_EQ(got.maps[k].data->value.shape(), want[k].shape());
      for (std::size_t q = 0; q < want[k].size(); ++q) {
        ASSERT_NEAR(got.maps[k].data->value[q], want[k][q], 1e-6) << ToString(s);
      }
    }
  }
}

TEST(MsFpnTest, ResolutionAlignedFinestLevelHasNoCrossTerm) {
  const MsFpn<float> fpn({FusionStrategy::kAlignedByResolution, 4, 0}, Channels(3, {4, 4, 4, 4}), 0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(fpn.has_cross(i, j), i < 2 && j < 3) << i << "," << j;
  }
}

TEST(MsFpnTest, SimpleFpnWithZeroSecondStreamEqualsFirstStreamFpn) {
  const MsFpn<double> two({FusionStrategy::kSimpleFpn, 6, 0}, Channels(2, {4, 4, 4, 4}), 3);
  auto groups = RandomGroups<double>(2, 4, 64, {4, 4, 4, 4}, 8);
  for (auto& m : groups[1].maps) m.data->value.Fill(0.0);
  std::vector<Tensor<double>> raw;
  for (const auto& m : groups[0].maps) raw.push_back(m.data->value);
  const auto want = oracle::TextbookFpn(two, raw);
  const auto got = two(groups);
  for (std::size_t k = 0; k < want.size(); ++k) {
    for (std::size_t q = 0; q < want[k].size(); ++q) {
      ASSERT_NEAR(got.maps[k].data->value[q], want[k][q], 1e-9);
    }
  }
}

TEST(MsFpnTest, DepthAlignedDependencyClosure) {
  const int n = 3, m = 4;
  const MsFpn<double> fpn({FusionStrategy::kAlignedByDepth, 4, 0}, Channels(n, {3, 3, 3, 3}), 5);
  const auto base = RandomGroups<double>(n, m, 64, {3, 3, 3, 3}, 9);
  const auto ref = fpn(base);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      auto perturbed = base;
      Tensor<double> t = base[i].maps[j].data->value;
      for (std::size_t q = 0; q < t.size(); ++q) t[q] += 1.0 + 0.1 * q;
      perturbed[i].maps[j].data = ag::Constant(t);
      const auto out = fpn(perturbed);
      for (int k = 0; k < m; ++k) {
        double diff = 0;
        for (std::size_t q = 0; q < out.level(k).data->value.size(); ++q) {
          diff = std::max(diff, std::abs(out.level(k).data->value[q] - ref.level(k).data->value[q]));
        }
        const bool expected = oracle::DepthAlignedSources(n, m, k).count({i, j}) > 0;
        EXPECT_EQ(diff > 1e-9, expected) << "raw(" << i << "," << j << ") -> F'_" << k;
        EXPECT_EQ(expected, j <= k);
      }
    }
  }
}

TEST(MsFpnTest, MismatchedShapesNameTheMap) {
  const MsFpn<float> fpn({FusionStrategy::kAlignedByDepth, 4, 0}, Channels(2, {4, 4, 4, 4}), 0);
  auto groups = RandomGroups<float>(2, 4, 64, {4, 4, 4, 4}, 10);
  groups[1] = RandomGroups<float>(1, 4, 64, {4, 4, 4, 4}, 11)[0];  // not halved
  groups[1].stream_index = 1;
  try {
    fpn.Fuse(groups);
    FAIL();
  } catch (const AlignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 0)"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace hrdnet
