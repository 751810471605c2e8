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

#ifndef TFIQA_IMAGE_HPP_
#define TFIQA_IMAGE_HPP_

#include <string>

#include "tfiqa/tensor.hpp"

namespace tfiqa {

class Rng;

// An image is a [3, H, W] tensor in RGB channel order with values in [0, 1].
// Decoded 8-bit files are divided by 255.
using ImageTensor = Tensor;

// Throws ValidationError if `image` is not a finite [3, H, W] tensor with
// values in [0, 1] and H, W >= min_side.
void ValidateImage(const ImageTensor& image, int64_t min_side = 1);

// PNG/JPEG/BMP via OpenCV codecs. Throws IoError on unreadable files.
ImageTensor LoadImage(const std::string& path);
void SaveImagePng(const std::string& path, const ImageTensor& image);

// Separable Gaussian blur with reflected borders; sigma <= 0 is the identity.
// Kernel radius is ceil(3 * sigma).
ImageTensor GaussianBlur(const ImageTensor& image, double sigma);

// Adds zero-mean Gaussian pixel noise and clamps back to [0, 1].
ImageTensor AddGaussianNoise(const ImageTensor& image, double sigma, Rng& rng);

}  // namespace tfiqa

#endif  // TFIQA_IMAGE_HPP_
