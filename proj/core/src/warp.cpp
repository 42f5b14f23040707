#include "cmdis/warp.hpp"

#include <algorithm>
#include <cmath>

namespace cmdis {

namespace {

struct BilinearSample {
  double value = 0.0;
  bool valid = false;
};

// Shared sampling core. `get` reads the source plane value at integer (x, y).
template <class Get>
BilinearSample sample_bilinear(double u, double v, int w, int h, Get&& get) {
  BilinearSample out;
  if (!(u >= 0.0 && u <= w - 1.0 && v >= 0.0 && v <= h - 1.0)) return out;
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  if (x0 > w - 1) x0 = w - 1;
  if (y0 > h - 1) y0 = h - 1;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double wx = u - x0;
  const double wy = v - y0;
  const double top = (1.0 - wx) * get(x0, y0) + wx * get(x1, y0);
  const double bot = (1.0 - wx) * get(x0, y1) + wx * get(x1, y1);
  out.value = (1.0 - wy) * top + wy * bot;
  out.valid = true;
  return out;
}

}  // namespace

WarpedPatch warp_image(const RasterImage& src, const SimilarityTransform& t,
                       const Box& out_box, Vec2 src_origin) {
  require(out_box.width > 0 && out_box.height > 0, "warp_image: empty output box");
  require(!src.empty(), "warp_image: empty source");
  const Mat3 hinv = invert(t).matrix();
  WarpedPatch out;
  out.box = out_box;
  out.pixels = RasterImage(out_box.width, out_box.height);
  out.validity = BinaryMask(out_box.width, out_box.height);
  const int w = src.width(), h = src.height();
  for (int y = 0; y < out_box.height; ++y) {
    const double gy = out_box.y0 + y;
    for (int x = 0; x < out_box.width; ++x) {
      const double gx = out_box.x0 + x;
      const Vec2 q = hinv.apply(Vec2{gx, gy});
      const double u = q.x - src_origin.x;
      const double v = q.y - src_origin.y;
      // Sample channel 0 first to learn validity, then the rest.
      auto s0 = sample_bilinear(u, v, w, h, [&](int sx, int sy) { return src.at(sx, sy, 0); });
      if (!s0.valid) continue;
      out.pixels.at(x, y, 0) = s0.value;
      for (int c = 1; c < RasterImage::kChannels; ++c) {
        auto sc = sample_bilinear(u, v, w, h, [&](int sx, int sy) { return src.at(sx, sy, c); });
        out.pixels.at(x, y, c) = sc.value;
      }
      out.validity.set(x, y, true);
    }
  }
  return out;
}

BinaryMask warp_mask(const BinaryMask& mask, const SimilarityTransform& t,
                     const Box& out_box) {
  require(out_box.width > 0 && out_box.height > 0, "warp_mask: empty output box");
  require(!mask.empty(), "warp_mask: empty source mask");
  const Mat3 hinv = invert(t).matrix();
  BinaryMask out(out_box.width, out_box.height);
  const int w = mask.width(), h = mask.height();
  for (int y = 0; y < out_box.height; ++y) {
    const double gy = out_box.y0 + y;
    for (int x = 0; x < out_box.width; ++x) {
      const double gx = out_box.x0 + x;
      const Vec2 q = hinv.apply(Vec2{gx, gy});
      auto s = sample_bilinear(q.x, q.y, w, h,
                               [&](int sx, int sy) { return mask.at(sx, sy) ? 1.0 : 0.0; });
      out.set(x, y, s.valid && s.value >= 0.5);
    }
  }
  return out;
}

PixelSet warp_points(const PixelSet& points, const SimilarityTransform& t) {
  const Mat3 m = t.matrix();
  PixelSet out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const Vec2 q = m.apply(Vec2{static_cast<double>(p.x), static_cast<double>(p.y)});
    out.push_back({static_cast<int>(std::llround(q.x)), static_cast<int>(std::llround(q.y))});
  }
  std::sort(out.begin(), out.end(), scan_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double masked_mse(const RasterImage& a, const BinaryMask& valid_a, const RasterImage& b,
                  const BinaryMask& valid_b, double* valid_fraction) {
  require(a.width() == b.width() && a.height() == b.height(),
          "masked_mse: image size mismatch");
  require(valid_a.width() == a.width() && valid_a.height() == a.height() &&
              valid_b.width() == b.width() && valid_b.height() == b.height(),
          "masked_mse: validity size mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!valid_a.at(x, y) || !valid_b.at(x, y)) continue;
      ++n;
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        const double d = a.at(x, y, c) - b.at(x, y, c);
        acc += d * d;
      }
    }
  if (valid_fraction != nullptr)
    *valid_fraction =
        static_cast<double>(n) / (static_cast<double>(a.width()) * a.height());
  if (n == 0) return 0.0;
  return acc / (static_cast<double>(n) * RasterImage::kChannels);
}

}  // namespace cmdis
