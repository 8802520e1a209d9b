// SPDX-License-Identifier: Apache-2.0
#include "vtcas/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "vtcas/error.hpp"
#include "vtcas/rng.hpp"

namespace vtcas {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string file) : bytes_(bytes), file_(std::move(file)) {}

  void magic(const char (&want)[5]) {
    need(4, "magic");
    if (std::memcmp(&bytes_[0], want, 4) != 0) {
      std::ostringstream os;
      os << file_ << ": bad magic bytes";
      for (std::size_t i = 0; i < 4; ++i) os << ' ' << std::hex << std::setw(2) << std::setfill('0') << int(bytes_[i]);
      os << " (expected " << want << ")";
      throw FormatError(os.str());
    }
    pos_ = 4;
  }

  std::uint32_t u32(const char* what) {
    need(pos_ + 4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::vector<std::uint8_t> payload(std::size_t n, const char* what) {
    need(pos_ + n, what);
    if (bytes_.size() != pos_ + n) {
      throw FormatError(file_ + ": " + std::to_string(bytes_.size() - pos_ - n) + " trailing bytes");
    }
    return {bytes_.begin() + static_cast<long>(pos_), bytes_.end()};
  }

 private:
  void need(std::size_t end, const char* what) const {
    if (bytes_.size() < end) {
      throw FormatError(file_ + ": truncated " + what + " (need " + std::to_string(end) + " bytes, have " +
                        std::to_string(bytes_.size()) + ")");
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string file_;
  std::size_t pos_ = 0;
};

std::uint8_t clamp_pixel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Per-class tint of each channel, cycling through a small palette.
double tint(std::size_t cls, std::size_t ch) {
  static constexpr std::array<std::array<double, 3>, 6> kPalette = {
      {{60, -40, -20}, {-40, 60, -20}, {-20, -40, 60}, {40, 40, -60}, {-60, 40, 40}, {40, -60, 40}}};
  const auto& row = kPalette[cls % kPalette.size()];
  return row[ch % 3] * (cls / kPalette.size() % 2 ? -0.5 : 1.0);
}

ImageSet synth_split(const DatasetSpec& spec, std::size_t count, Rng rng) {
  ImageSet set;
  set.height = set.width = spec.side;
  set.channels = spec.channels;
  set.pixels.resize(count * set.image_bytes());
  set.labels.resize(count);
  const double side = static_cast<double>(spec.side);
  const double k = static_cast<double>(spec.classes);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t cls = n % spec.classes;
    set.labels[n] = static_cast<std::uint8_t>(cls);
    const double angle = std::numbers::pi * static_cast<double>(cls) / k;
    const double freq = 3.0 / side;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double by = side * (0.25 + 0.5 * std::fmod(0.618 * static_cast<double>(cls), 1.0));
    const double bx = side * (0.75 - 0.5 * std::fmod(0.382 * static_cast<double>(cls) + 0.25, 1.0));
    const double radius = side / 6.0;
    std::uint8_t* img = &set.pixels[n * set.image_bytes()];
    for (std::size_t y = 0; y < spec.side; ++y)
      for (std::size_t x = 0; x < spec.side; ++x) {
        const double fx = static_cast<double>(x), fy = static_cast<double>(y);
        const double grating =
            20.0 * std::sin(2.0 * std::numbers::pi * freq * (fx * std::cos(angle) + fy * std::sin(angle)) + phase);
        const double d2 = (fy - by) * (fy - by) + (fx - bx) * (fx - bx);
        const double blob = 50.0 * std::exp(-d2 / (2.0 * radius * radius));
        for (std::size_t c = 0; c < spec.channels; ++c) {
          const double noise = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
          img[(y * spec.side + x) * spec.channels + c] = clamp_pixel(128.0 + tint(cls, c) + grating + blob + noise);
        }
      }
  }
  return set;
}

}  // namespace

std::size_t ImageSet::classes() const {
  return labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

void ImageSet::validate() const {
  if (pixels.size() != labels.size() * image_bytes()) {
    throw ShapeError("image set: " + std::to_string(pixels.size()) + " pixel bytes for " +
                     std::to_string(labels.size()) + " images of " + std::to_string(image_bytes()) + " bytes");
  }
}

Tensor batch_images(const ImageSet& set, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("batch_images: empty batch");
  const std::size_t h = set.height, w = set.width, c = set.channels;
  Tensor out(Shape{indices.size(), c, h, w});
  auto o = out.data();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= set.size()) throw ShapeError("batch_images: index out of range");
    const std::uint8_t* img = &set.pixels[indices[b] * set.image_bytes()];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) {
          o[((b * c + ch) * h + y) * w + x] = (img[(y * w + x) * c + ch] / 255.0 - 0.5) / 0.25;
        }
  }
  return out;
}

std::vector<int> batch_labels(const ImageSet& set, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(set.labels.at(i));
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng* rng) {
  if (batch == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (rng) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng->below(i)]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch) {
    out.emplace_back(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(std::min(n, i + batch)));
  }
  return out;
}

void validate(const DatasetSpec& spec) {
  if (spec.classes < 2 || spec.classes > 256) throw ConfigError("dataset: classes must be in [2, 256]");
  if (spec.side == 0 || spec.channels == 0) throw ConfigError("dataset: side and channels must be positive");
  const double fr[] = {spec.train_fraction, spec.val_fraction, spec.test_fraction};
  for (double f : fr)
    if (f < 0.0 || f > 1.0) throw ConfigError("dataset: split fractions must lie in [0, 1]");
  if (fr[0] + fr[1] + fr[2] > 1.0 + 1e-12) throw ConfigError("dataset: split fractions sum above 1");
  if (spec.noise < 0.0) throw ConfigError("dataset: noise must be non-negative");
  for (double f : fr) {
    const std::size_t n = split_count(spec, f);
    if (n > 0 && n < spec.classes) {
      throw ConfigError("dataset: a split of " + std::to_string(n) + " images cannot hold every class");
    }
  }
  if (split_count(spec, spec.train_fraction) == 0) throw ConfigError("dataset: empty training split");
}

std::size_t split_count(const DatasetSpec& spec, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(spec.count)));
}

DatasetSplits synth_dataset(const DatasetSpec& spec) {
  validate(spec);
  Rng root(spec.seed);
  Rng data = root.fork("data");
  DatasetSplits out;
  out.train = synth_split(spec, split_count(spec, spec.train_fraction), data.fork("train"));
  out.val = synth_split(spec, split_count(spec, spec.val_fraction), data.fork("val"));
  out.test = synth_split(spec, split_count(spec, spec.test_fraction), data.fork("test"));
  return out;
}

void save_timg(const std::filesystem::path& images, const std::filesystem::path& labels, const ImageSet& set) {
  set.validate();
  const auto u32 = [](std::size_t v) {
    if (v > 0xffffffffu) throw FormatError("value does not fit in u32");
    return static_cast<std::uint32_t>(v);
  };
  {
    std::ofstream os(images, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write " + images.string());
    os.write("TIMG", 4);
    put_u32(os, 1);
    put_u32(os, u32(set.size()));
    put_u32(os, u32(set.height));
    put_u32(os, u32(set.width));
    put_u32(os, u32(set.channels));
    os.write(reinterpret_cast<const char*>(set.pixels.data()), static_cast<std::streamsize>(set.pixels.size()));
    if (!os) throw FormatError("write failed: " + images.string());
  }
  std::ofstream os(labels, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + labels.string());
  os.write("TLBL", 4);
  put_u32(os, 1);
  put_u32(os, u32(set.size()));
  os.write(reinterpret_cast<const char*>(set.labels.data()), static_cast<std::streamsize>(set.labels.size()));
  if (!os) throw FormatError("write failed: " + labels.string());
}

ImageSet load_timg(const std::filesystem::path& images, const std::filesystem::path& labels) {
  ImageSet set;
  const auto ib = read_all(images);
  Reader ir(ib, images.string());
  ir.magic("TIMG");
  if (const auto v = ir.u32("version"); v != 1) throw FormatError(images.string() + ": unsupported version " + std::to_string(v));
  const std::size_t count = ir.u32("count");
  set.height = ir.u32("height");
  set.width = ir.u32("width");
  set.channels = ir.u32("channels");
  if (set.image_bytes() == 0) throw FormatError(images.string() + ": zero image dimension");
  if (count > ib.size() / set.image_bytes()) {
    throw FormatError(images.string() + ": truncated pixel payload (header declares " + std::to_string(count) +
                      " images of " + std::to_string(set.image_bytes()) + " bytes, file has " +
                      std::to_string(ib.size()) + " bytes)");
  }
  set.pixels = ir.payload(count * set.image_bytes(), "pixel payload");

  const auto lb = read_all(labels);
  Reader lr(lb, labels.string());
  lr.magic("TLBL");
  if (const auto v = lr.u32("version"); v != 1) throw FormatError(labels.string() + ": unsupported version " + std::to_string(v));
  const std::size_t lcount = lr.u32("count");
  if (lcount != count) {
    throw FormatError("label count " + std::to_string(lcount) + " does not match image count " + std::to_string(count));
  }
  set.labels = lr.payload(lcount, "label payload");
  return set;
}

}  // namespace vtcas
