// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vtcas/tensor.hpp"

namespace vtcas {

class Rng;

/// u8 images, channel-interleaved row-major (count, H, W, C), one label each.
struct ImageSet {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_bytes() const { return height * width * channels; }
  std::size_t classes() const;  // 1 + max label
  void validate() const;
};

/// Images `indices` as (B, C, H, W), pixels mapped to (v/255 - 0.5) / 0.25.
Tensor batch_images(const ImageSet& set, std::span<const std::size_t> indices);
std::vector<int> batch_labels(const ImageSet& set, std::span<const std::size_t> indices);

/// Indices 0..n-1 shuffled by `rng`, cut into batches of at most `batch`.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng* rng);

struct DatasetSpec {
  std::size_t count = 750;
  std::size_t side = 32;
  std::size_t channels = 3;
  std::size_t classes = 3;
  double train_fraction = 0.8;
  double val_fraction = 0.2;
  double test_fraction = 0.0;
  /// Pixel noise standard deviation on the 0..255 scale.
  double noise = 8.0;
  std::uint64_t seed = 1;
};

void validate(const DatasetSpec& spec);

struct DatasetSplits {
  ImageSet train;
  ImageSet val;
  ImageSet test;
};

/// Class-conditional images: a per-class colour tint, a bright blob at a
/// per-class position and an oriented grating with random phase, plus
/// Gaussian noise. Labels cycle through the classes, so counts per split are
/// balanced to within one.
DatasetSplits synth_dataset(const DatasetSpec& spec);
std::size_t split_count(const DatasetSpec& spec, double fraction);

/// TIMG/TLBL files (little-endian). Throws FormatError on bad magic,
/// version, truncation or a label count that differs from the image count.
void save_timg(const std::filesystem::path& images, const std::filesystem::path& labels, const ImageSet& set);
ImageSet load_timg(const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace vtcas
