// Copyright 2026 The TFIQA Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tfiqa/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tfiqa/common.hpp"
#include "tfiqa/rng.hpp"

namespace tfiqa {

void ValidateImage(const ImageTensor& image, int64_t min_side) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ValidationError("image must have shape [3, H, W], got " + ShapeToString(image.shape()));
  }
  const int64_t h = image.dim(1);
  const int64_t w = image.dim(2);
  if (h < min_side || w < min_side) {
    throw ValidationError("image " + std::to_string(h) + "x" + std::to_string(w) +
                          " is smaller than the required minimum side " + std::to_string(min_side));
  }
  for (int64_t i = 0; i < image.size(); ++i) {
    const double v = image[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError("image values must be finite and within [0, 1]");
    }
  }
}

ImageTensor LoadImage(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + path);
  ImageTensor out({3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      // OpenCV decodes BGR; we store RGB.
      out.At(0, y, x) = row[x][2] / 255.0;
      out.At(1, y, x) = row[x][1] / 255.0;
      out.At(2, y, x) = row[x][0] / 255.0;
    }
  }
  return out;
}

void SaveImagePng(const std::string& path, const ImageTensor& image) {
  ValidateImage(image);
  const int h = static_cast<int>(image.dim(1));
  const int w = static_cast<int>(image.dim(2));
  cv::Mat bgr(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      auto q = [&](int c) {
        return static_cast<unsigned char>(std::lround(std::clamp(image.At(c, y, x), 0.0, 1.0) * 255.0));
      };
      row[x] = cv::Vec3b(q(2), q(1), q(0));
    }
  }
  if (!cv::imwrite(path, bgr)) throw IoError("cannot write image: " + path);
}

namespace {

int Reflect(int i, int n) {
  // Reflect-101 style border: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace

ImageTensor GaussianBlur(const ImageTensor& image, double sigma) {
  ValidateImage(image);
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * (k * k) / (sigma * sigma));
    kernel[static_cast<size_t>(k + radius)] = v;
    sum += v;
  }
  for (auto& v : kernel) v /= sum;

  const int h = static_cast<int>(image.dim(1));
  const int w = static_cast<int>(image.dim(2));
  ImageTensor tmp({3, h, w});
  ImageTensor out({3, h, w});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<size_t>(k + radius)] * image.At(c, y, Reflect(x + k, w));
        }
        tmp.At(c, y, x) = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[static_cast<size_t>(k + radius)] * tmp.At(c, Reflect(y + k, h), x);
        }
        out.At(c, y, x) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

ImageTensor AddGaussianNoise(const ImageTensor& image, double sigma, Rng& rng) {
  ValidateImage(image);
  ImageTensor out = image;
  if (sigma <= 0.0) return out;
  for (int64_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i] + rng.Normal(0.0, sigma), 0.0, 1.0);
  }
  return out;
}

}  // namespace tfiqa
