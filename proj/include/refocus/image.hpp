#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "refocus/error.hpp"
#include "refocus/geometry.hpp"

namespace refocus {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  std::uint32_t packed() const noexcept { return (std::uint32_t{r} << 16) | (std::uint32_t{g} << 8) | b; }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Tightly packed 8-bit RGB image, row-major.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Rgb fill = {})
      : width_(width), height_(height), pixels_(checked_size(width, height) * 3) {
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
    }
  }
  Raster(int width, int height, std::vector<std::uint8_t> rgb) : width_(width), height_(height), pixels_(std::move(rgb)) {
    if (pixels_.size() != checked_size(width, height) * 3) {
      throw Error(ErrorCode::InvalidArgument, "pixel buffer size does not match raster dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }

  Rgb at(int x, int y) const noexcept {
    const auto i = offset(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    const auto i = offset(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative raster dimension");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Pixel footprint of a normalized box: [floor(min*size), ceil(max*size)), clamped to the
/// image and never smaller than 1x1.
inline PixelRect box_to_pixels(const BBox& box, int width, int height) noexcept {
  auto span_of = [](double lo, double hi, int size) {
    int a = static_cast<int>(std::floor(lo * size));
    int b = static_cast<int>(std::ceil(hi * size));
    a = std::clamp(a, 0, size - 1);
    b = std::clamp(b, a + 1, size);
    return std::pair{a, b};
  };
  const auto [x0, x1] = span_of(box.x_min, box.x_max, width);
  const auto [y0, y1] = span_of(box.y_min, box.y_max, height);
  return {x0, y0, x1, y1};
}

/// Copies the pixels under `box`. No resampling.
inline Raster crop_region(const Raster& image, const BBox& box) {
  if (image.empty()) throw Error(ErrorCode::InvalidArgument, "cannot crop an empty image");
  const auto rect = box_to_pixels(box, image.width(), image.height());
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(rect.width()) * rect.height() * 3);
  const auto src = image.bytes();
  for (int y = rect.y0; y < rect.y1; ++y) {
    const auto row = (static_cast<std::size_t>(y) * image.width() + rect.x0) * 3;
    out.insert(out.end(), src.begin() + row, src.begin() + row + static_cast<std::size_t>(rect.width()) * 3);
  }
  return Raster(rect.width(), rect.height(), std::move(out));
}

/// FNV-1a over dimensions and pixels; identifies an image by content.
inline std::uint64_t fingerprint(const Raster& image) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int shift = 0; shift < 32; shift += 8) {
    mix(static_cast<std::uint8_t>(static_cast<std::uint32_t>(image.width()) >> shift));
    mix(static_cast<std::uint8_t>(static_cast<std::uint32_t>(image.height()) >> shift));
  }
  for (auto byte : image.bytes()) mix(byte);
  return h;
}

}  // namespace refocus
