#ifndef CMDIS_IMAGE_HPP
#define CMDIS_IMAGE_HPP

#include <cstdint>
#include <vector>

#include "cmdis/error.hpp"

namespace cmdis {

// Pixel coordinate: x = column, y = row. Pixel centers sit on integer
// coordinates; (0,0) is the top-left pixel.
struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// Row-major-before-column ordering (scan order).
inline bool scan_less(const PixelCoord& a, const PixelCoord& b) {
  return a.y != b.y ? a.y < b.y : a.x < b.x;
}

using PixelSet = std::vector<PixelCoord>;

// Axis-aligned integer rectangle; (x0, y0) inclusive top-left corner.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  int x1() const { return x0 + width; }   // exclusive
  int y1() const { return y0 + height; }  // exclusive
  bool contains(int x, int y) const {
    return x >= x0 && x < x1() && y >= y0 && y < y1();
  }
  double center_x() const { return x0 + (width - 1) / 2.0; }
  double center_y() const { return y0 + (height - 1) / 2.0; }
  int min_side() const { return width < height ? width : height; }
  friend bool operator==(const Box&, const Box&) = default;
};

// 8-bit quantization with round-half-up; inputs outside [0,1] are clamped.
inline std::uint8_t to_byte(double v) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  double q = v * 255.0 + 0.5;
  int b = static_cast<int>(q);  // floor for non-negative q
  return static_cast<std::uint8_t>(b > 255 ? 255 : b);
}

inline double from_byte(std::uint8_t b) { return b / 255.0; }

// Real-valued RGB image, intensities nominally in [0,1]. The range is
// enforced at the 8-bit serialization boundary, not on every store, so
// intermediate algebra (e.g. linearity checks) can hold unclamped values.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  RasterImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * kChannels, fill) {
    require(width > 0 && height > 0, "RasterImage: dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }
  Box bounds() const { return Box{0, 0, width_, height_}; }

  double& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  double at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Copies the pixels under `box`, which must lie inside the image.
  RasterImage crop(const Box& box) const;

  // Clamps every intensity to [0,1] in place.
  void clamp01();

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Binary mask, one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
    require(width > 0 && height > 0, "BinaryMask: dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  bool at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v) {
    data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }

  std::size_t count() const;

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

enum class RegionLabel : std::uint8_t { background = 0, source = 1, target = 2 };

// Per-pixel source/target labeling. Source and target must stay disjoint;
// validate() is called on every map the toolkit emits.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height,
              RegionLabel::background) {
    require(width > 0 && height > 0, "LabelMap: dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  RegionLabel at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  void set(int x, int y, RegionLabel v) {
    data_[static_cast<std::size_t>(y) * width_ + x] = v;
  }

  BinaryMask mask_of(RegionLabel label) const;
  // Union of source and target pixels.
  BinaryMask foreground() const;

  // Checks that the map is consistent with `mask`: source and target are
  // disjoint (by construction of the enum) and their union equals the mask.
  void validate_against(const BinaryMask& mask) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<RegionLabel> data_;
};

// Pixels set in the mask, in scan order.
PixelSet pixels_from_mask(const BinaryMask& mask);

// Mask of the given size with exactly `pixels` set; out-of-bounds pixels error.
BinaryMask mask_from_pixels(int width, int height, const PixelSet& pixels);

// Tight bounding box of the set pixels; errors on an empty mask.
Box bounding_box(const BinaryMask& mask);
Box bounding_box(const PixelSet& pixels);

}  // namespace cmdis

#endif
