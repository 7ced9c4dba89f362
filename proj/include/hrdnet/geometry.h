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
#ifndef HRDNET_GEOMETRY_H_
#define HRDNET_GEOMETRY_H_

#include <array>
#include <vector>

#include "hrdnet/tensor.h"

namespace hrdnet {

// Axis-aligned box in pixels: top-left corner plus extent.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  bool operator==(const Box&) const = default;
};

// Intersection of two boxes; zero extent when they do not overlap.
Box Intersect(const Box& a, const Box& b);

template <typename T>
struct AnnotatedImage {
  Tensor<T> image;  // (C, H, W)
  std::vector<Box> boxes;
  std::vector<int> labels;
};

template <typename T>
struct ImagePyramid {
  std::vector<Tensor<T>> images;  // images[i] is alpha^i times the base size
  double alpha = 0.5;
  int base_height = 0;
  int base_width = 0;
};

struct Padding {
  int bottom = 0;
  int right = 0;
};

template <typename T>
struct PaddedImage {
  Tensor<T> image;
  Padding pad;
};

// Divisor every padded input must satisfy so that all N pyramid members are
// multiples of the coarsest backbone stride.
int AlignmentDivisor(int n_streams, int max_stride);

// Bilinear resize with half-pixel sample centres (align_corners = false).
template <typename T>
Tensor<T> ResizeBilinear(const Tensor<T>& image, int out_height, int out_width);

template <typename T>
ImagePyramid<T> BuildPyramid(const Tensor<T>& image, int n_streams, double alpha,
                             int max_stride = 32);

// Zero-pads bottom/right up to the next multiple of AlignmentDivisor().
template <typename T>
PaddedImage<T> PadToAlignment(const Tensor<T>& image, int n_streams, double alpha,
                              int max_stride = 32);

// Splits into four non-overlapping patches ordered top-left, top-right,
// bottom-left, bottom-right. Boxes are clipped to each patch they overlap and
// kept when at least `min_retained_fraction` of their area survives.
template <typename T>
std::vector<AnnotatedImage<T>> CropQuadrants(const AnnotatedImage<T>& sample,
                                             double min_retained_fraction = 0.25);

// Pixel rectangles of the four quadrants for an H x W image (x, y, w, h).
std::array<Box, 4> QuadrantRects(int height, int width);

std::vector<Box> ScaleBoxes(const std::vector<Box>& boxes, double sx, double sy);

}  // namespace hrdnet

#endif  // HRDNET_GEOMETRY_H_
