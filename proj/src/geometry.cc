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
#include "hrdnet/geometry.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace hrdnet {

Box Intersect(const Box& a, const Box& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.right(), b.right());
  const double y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return Box{x0, y0, 0, 0};
  return Box{x0, y0, x1 - x0, y1 - y0};
}

int AlignmentDivisor(int n_streams, int max_stride) {
  if (n_streams < 1) throw InvalidInputError("n_streams must be >= 1");
  if (max_stride < 1) throw InvalidInputError("max_stride must be >= 1");
  return max_stride << (n_streams - 1);
}

template <typename T>
Tensor<T> ResizeBilinear(const Tensor<T>& image, int out_height, int out_width) {
  if (image.rank() != 3) throw InvalidInputError("resize expects a (C,H,W) image");
  const int c = image.channels(), h = image.height(), w = image.width();
  if (h <= 0 || w <= 0 || out_height <= 0 || out_width <= 0) {
    throw InvalidInputError("resize: non-positive dimensions");
  }
  if (h == out_height && w == out_width) return image;
  const double sy = static_cast<double>(h) / out_height;
  const double sx = static_cast<double>(w) / out_width;

  struct Tap {
    int i0, i1;
    double frac;
  };
  auto taps = [](int out, int in, double scale) {
    std::vector<Tap> t(out);
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      int i0 = std::min(static_cast<int>(src), in - 1);
      t[o] = {i0, std::min(i0 + 1, in - 1), src - i0};
    }
    return t;
  };
  const auto ty = taps(out_height, h, sy);
  const auto tx = taps(out_width, w, sx);

  Tensor<T> out(c, out_height, out_width);
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < out_height; ++oy) {
      const Tap& a = ty[oy];
      for (int ox = 0; ox < out_width; ++ox) {
        const Tap& b = tx[ox];
        const double top =
            image.at(ch, a.i0, b.i0) * (1 - b.frac) + image.at(ch, a.i0, b.i1) * b.frac;
        const double bot =
            image.at(ch, a.i1, b.i0) * (1 - b.frac) + image.at(ch, a.i1, b.i1) * b.frac;
        out.at(ch, oy, ox) = static_cast<T>(top * (1 - a.frac) + bot * a.frac);
      }
    }
  }
  return out;
}

template <typename T>
ImagePyramid<T> BuildPyramid(const Tensor<T>& image, int n_streams, double alpha,
                             int max_stride) {
  if (image.rank() != 3 || image.height() <= 0 || image.width() <= 0) {
    throw InvalidInputError("build_pyramid: image must have positive (C,H,W) dimensions");
  }
  if (n_streams < 1) throw InvalidInputError("build_pyramid: n_streams must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidInputError("build_pyramid: alpha must lie in (0, 1]");
  }
  const int h = image.height(), w = image.width();
  if (alpha == 0.5) {
    const int div = AlignmentDivisor(n_streams, max_stride);
    if (h % div != 0 || w % div != 0) {
      throw AlignmentError("build_pyramid: " + std::to_string(h) + "x" + std::to_string(w) +
                           " is not divisible by " + std::to_string(div) +
                           " (max_stride * 2^(n_streams-1))");
    }
  }
  ImagePyramid<T> pyr;
  pyr.alpha = alpha;
  pyr.base_height = h;
  pyr.base_width = w;
  pyr.images.reserve(n_streams);
  pyr.images.push_back(image);
  for (int i = 1; i < n_streams; ++i) {
    const double f = std::pow(alpha, i);
    const int hi = static_cast<int>(std::lround(f * h));
    const int wi = static_cast<int>(std::lround(f * w));
    if (hi <= 0 || wi <= 0) {
      throw InvalidInputError("build_pyramid: member " + std::to_string(i) +
                              " collapses to zero size");
    }
    if (hi % max_stride != 0 || wi % max_stride != 0) {
      throw AlignmentError("build_pyramid: member " + std::to_string(i) + " size " +
                           std::to_string(hi) + "x" + std::to_string(wi) +
                           " is not divisible by " + std::to_string(max_stride));
    }
    pyr.images.push_back(ResizeBilinear(image, hi, wi));
  }
  return pyr;
}

template <typename T>
PaddedImage<T> PadToAlignment(const Tensor<T>& image, int n_streams, double alpha,
                              int max_stride) {
  if (image.rank() != 3 || image.height() <= 0 || image.width() <= 0) {
    throw InvalidInputError("pad_to_alignment: image must have positive dimensions");
  }
  if (alpha != 0.5) {
    throw InvalidInputError("pad_to_alignment: only alpha = 0.5 has exact alignment");
  }
  const int div = AlignmentDivisor(n_streams, max_stride);
  const int h = image.height(), w = image.width();
  const int ph = (h + div - 1) / div * div;
  const int pw = (w + div - 1) / div * div;
  PaddedImage<T> out;
  out.pad = {ph - h, pw - w};
  if (ph == h && pw == w) {
    out.image = image;
    return out;
  }
  out.image = Tensor<T>(image.channels(), ph, pw);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      std::copy_n(&image.at(c, y, 0), w, &out.image.at(c, y, 0));
    }
  }
  return out;
}

std::array<Box, 4> QuadrantRects(int height, int width) {
  const int h0 = (height + 1) / 2, w0 = (width + 1) / 2;
  return {Box{0, 0, double(w0), double(h0)}, Box{double(w0), 0, double(width - w0), double(h0)},
          Box{0, double(h0), double(w0), double(height - h0)},
          Box{double(w0), double(h0), double(width - w0), double(height - h0)}};
}

template <typename T>
std::vector<AnnotatedImage<T>> CropQuadrants(const AnnotatedImage<T>& sample,
                                             double min_retained_fraction) {
  const Tensor<T>& img = sample.image;
  if (img.rank() != 3 || img.height() < 2 || img.width() < 2) {
    throw InvalidInputError("crop_quadrants: image must be at least 2x2");
  }
  if (sample.boxes.size() != sample.labels.size()) {
    throw InvalidInputError("crop_quadrants: boxes and labels differ in length");
  }
  std::vector<AnnotatedImage<T>> patches;
  for (const Box& r : QuadrantRects(img.height(), img.width())) {
    AnnotatedImage<T> p;
    const int px = static_cast<int>(r.x), py = static_cast<int>(r.y);
    const int pw = static_cast<int>(r.w), ph = static_cast<int>(r.h);
    p.image = Tensor<T>(img.channels(), ph, pw);
    for (int c = 0; c < img.channels(); ++c) {
      for (int y = 0; y < ph; ++y) std::copy_n(&img.at(c, py + y, px), pw, &p.image.at(c, y, 0));
    }
    for (std::size_t k = 0; k < sample.boxes.size(); ++k) {
      const Box& b = sample.boxes[k];
      const Box inter = Intersect(b, r);
      if (inter.area() <= 0) continue;
      if (inter.area() < min_retained_fraction * b.area()) continue;
      p.boxes.push_back(Box{inter.x - r.x, inter.y - r.y, inter.w, inter.h});
      p.labels.push_back(sample.labels[k]);
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

std::vector<Box> ScaleBoxes(const std::vector<Box>& boxes, double sx, double sy) {
  std::vector<Box> out;
  out.reserve(boxes.size());
  for (const Box& b : boxes) out.push_back(Box{b.x * sx, b.y * sy, b.w * sx, b.h * sy});
  return out;
}

#define HRDNET_INSTANTIATE_GEOMETRY(T)                                                \
  template Tensor<T> ResizeBilinear<T>(const Tensor<T>&, int, int);                   \
  template ImagePyramid<T> BuildPyramid<T>(const Tensor<T>&, int, double, int);       \
  template PaddedImage<T> PadToAlignment<T>(const Tensor<T>&, int, double, int);      \
  template std::vector<AnnotatedImage<T>> CropQuadrants<T>(const AnnotatedImage<T>&, \
                                                           double);

HRDNET_INSTANTIATE_GEOMETRY(float)
HRDNET_INSTANTIATE_GEOMETRY(double)

}  // namespace hrdnet
