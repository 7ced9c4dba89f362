#!/usr/bin/env python3
# Copyright 2026 The HRDNet Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Layer-by-layer parameter count of the detector, independent of the C++ code.

Prints one JSON object per configuration; the numbers are frozen into
tests/model_test.cc and the acceptance binary.
"""
import json


def conv(cin, cout, k, bias):
    return cin * cout * k * k + (cout if bias else 0)


def norm(c):
    return 2 * c


def stream(blocks, channels, stem, cin=3):
    n = conv(cin, stem, 3, False) + norm(stem) + conv(stem, stem, 3, False) + norm(stem)
    prev = stem
    for s, (b, c) in enumerate(zip(blocks, channels)):
        if s > 0 or prev != c:
            n += conv(prev, c, 3, False) + norm(c)
        n += b * 2 * (conv(c, c, 3, False) + norm(c))
        prev = c
    return n


def fpn(strategy, level_channels, c, extra):
    n_streams, m = len(level_channels), len(level_channels[0])
    n = sum(conv(ch, c, 1, False) for row in level_channels for ch in row)
    if strategy == "aligned_by_resolution":
        n += (n_streams - 1) * (m - 1) * conv(c, c, 1, False)
    elif strategy == "simple_fpn":
        n += (n_streams - 1) * m * conv(c, c, 1, False)
    n += m * conv(c, c, 3, True) + extra * conv(c, c, 3, True)
    return n


def head(c, classes, anchors, towers, tower_norm):
    n = 2 * towers * conv(c, c, 3, True)
    if tower_norm:
        n += 2 * towers * norm(c)
    return n + conv(c, anchors * classes, 3, True) + conv(c, anchors * 4, 3, True)


def total(cfg):
    n = 0
    level_channels = []
    for s in cfg["streams"]:
        n += stream(s["blocks"], s["channels"], s["stem"])
        level_channels.append(list(reversed(s["channels"])))
    n += fpn(cfg["strategy"], level_channels, cfg["common"], cfg["extra"])
    n += head(cfg["common"], cfg["classes"], cfg["anchors"], cfg["towers"],
              cfg["tower_norm"])
    return n


CONFIGS = {
    "desk_two_stream": dict(
        streams=[dict(blocks=[1] * 4, channels=[16, 32, 64, 128], stem=16),
                 dict(blocks=[2] * 4, channels=[16, 32, 64, 128], stem=16)],
        strategy="aligned_by_depth", common=32, extra=0, classes=5, anchors=3, towers=1,
        tower_norm=True),
    "three_stream_resolution": dict(
        streams=[dict(blocks=[0, 0, 0, 0], channels=[8, 16, 32, 64], stem=8),
                 dict(blocks=[0, 1, 0, 1], channels=[8, 16, 32, 64], stem=8),
                 dict(blocks=[1, 1, 1, 1], channels=[16, 16, 32, 32], stem=16)],
        strategy="aligned_by_resolution", common=16, extra=1, classes=3, anchors=9,
        towers=1, tower_norm=False),
    "simple_fpn_wide_head": dict(
        streams=[dict(blocks=[1, 1, 1, 1], channels=[8, 16, 32, 64], stem=8),
                 dict(blocks=[1, 2, 2, 1], channels=[8, 16, 32, 64], stem=8)],
        strategy="simple_fpn", common=24, extra=2, classes=10, anchors=9, towers=2,
        tower_norm=True),
}

if __name__ == "__main__":
    print(json.dumps({name: total(cfg) for name, cfg in CONFIGS.items()}, indent=1))
