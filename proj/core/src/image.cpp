#include "cmdis/image.hpp"

#include <algorithm>
#include <numeric>

namespace cmdis {

RasterImage RasterImage::crop(const Box& box) const {
  require(box.width > 0 && box.height > 0, "crop: box must be non-empty");
  require(box.x0 >= 0 && box.y0 >= 0 && box.x1() <= width_ && box.y1() <= height_,
          "crop: box exceeds image bounds");
  RasterImage out(box.width, box.height);
  for (int y = 0; y < box.height; ++y)
    for (int x = 0; x < box.width; ++x)
      for (int c = 0; c < kChannels; ++c)
        out.at(x, y, c) = at(box.x0 + x, box.y0 + y, c);
  return out;
}

void RasterImage::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(data_.begin(), data_.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMask LabelMap::mask_of(RegionLabel label) const {
  BinaryMask out(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (at(x, y) == label) out.set(x, y, true);
  return out;
}

BinaryMask LabelMap::foreground() const {
  BinaryMask out(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (at(x, y) != RegionLabel::background) out.set(x, y, true);
  return out;
}

void LabelMap::validate_against(const BinaryMask& mask) const {
  require(mask.width() == width_ && mask.height() == height_,
          "label map: size mismatch with mask");
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      require((at(x, y) != RegionLabel::background) == mask.at(x, y),
              "label map: source/target union does not equal mask foreground");
}

PixelSet pixels_from_mask(const BinaryMask& mask) {
  PixelSet out;
  out.reserve(mask.count());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) out.push_back({x, y});
  return out;
}

BinaryMask mask_from_pixels(int width, int height, const PixelSet& pixels) {
  BinaryMask out(width, height);
  for (const auto& p : pixels) {
    require(out.in_bounds(p.x, p.y), "mask_from_pixels: pixel out of bounds");
    out.set(p.x, p.y, true);
  }
  return out;
}

Box bounding_box(const PixelSet& pixels) {
  require(!pixels.empty(), "bounding_box: empty pixel set");
  int minx = pixels[0].x, maxx = pixels[0].x;
  int miny = pixels[0].y, maxy = pixels[0].y;
  for (const auto& p : pixels) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  return Box{minx, miny, maxx - minx + 1, maxy - miny + 1};
}

Box bounding_box(const BinaryMask& mask) {
  int minx = mask.width(), maxx = -1, miny = mask.height(), maxy = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
      }
  require(maxx >= 0, "bounding_box: empty mask");
  return Box{minx, miny, maxx - minx + 1, maxy - miny + 1};
}

}  // namespace cmdis
