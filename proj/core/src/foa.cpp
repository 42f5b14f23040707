#include "cmdis/foa.hpp"

namespace cmdis {

Box central_crop_box(const Box& box) {
  require(box.min_side() >= kPatchSize, "central_crop_box: region-too-small");
  return Box{box.x0 + (box.width - kPatchSize) / 2, box.y0 + (box.height - kPatchSize) / 2,
             kPatchSize, kPatchSize};
}

Box corner_crop_box(const Box& box, int corner) {
  require(box.min_side() >= kPatchSize, "corner_crop_box: region-too-small");
  require(corner >= 0 && corner < 4, "corner_crop_box: corner must be in [0,3]");
  const int x = (corner % 2 == 0) ? box.x0 : box.x1() - kPatchSize;
  const int y = (corner < 2) ? box.y0 : box.y1() - kPatchSize;
  return Box{x, y, kPatchSize, kPatchSize};
}

bool regions_large_enough(const Box& b1, const Box& b2) {
  return b1.min_side() >= kPatchSize && b2.min_side() >= kPatchSize;
}

namespace {

// Crops `crop_box` out of the image in the global frame.
RasterImage global_crop(const RasterImage& image, const Box& crop_box) {
  require(crop_box.x0 >= 0 && crop_box.y0 >= 0 && crop_box.x1() <= image.width() &&
              crop_box.y1() <= image.height(),
          "patch crop exceeds image bounds");
  return image.crop(crop_box);
}

// Warps the content of support box `src_box` onto `out_box` through `t`
// (both in the global frame).
WarpedPatch warp_support(const RasterImage& image, const Box& src_box,
                         const SimilarityTransform& t, const Box& out_box) {
  RasterImage support = global_crop(image, src_box);
  return warp_image(support, t, out_box,
                    Vec2{static_cast<double>(src_box.x0), static_cast<double>(src_box.y0)});
}

}  // namespace

PatchQuad build_quad(const RasterImage& image, const PixelSet& p1, const PixelSet& p2,
                     const SimilarityTransform& t) {
  const Box b1 = bounding_box(p1);
  const Box b2 = bounding_box(p2);
  require(regions_large_enough(b1, b2), "build_quad: region-too-small");

  const Box c1 = central_crop_box(b1);
  const Box c2 = central_crop_box(b2);

  PatchQuad quad;
  quad.box1 = b1;
  quad.box2 = b2;
  quad.x1 = global_crop(image, c1);
  quad.x3 = global_crop(image, c2);

  // Backward reconstruction of region 1 from region 2, aligned to box 1.
  WarpedPatch back = warp_support(image, b2, invert(t), c1);
  quad.x2 = std::move(back.pixels);
  quad.v2 = std::move(back.validity);

  // Forward reconstruction of region 2 from region 1, aligned to box 2.
  WarpedPatch fwd = warp_support(image, b1, t, c2);
  quad.x4 = std::move(fwd.pixels);
  quad.v4 = std::move(fwd.validity);
  return quad;
}

std::array<BoundaryPair, 8> build_boundary_pairs(const RasterImage& image,
                                                 const PixelSet& p1, const PixelSet& p2,
                                                 const SimilarityTransform& t) {
  const Box b1 = bounding_box(p1);
  const Box b2 = bounding_box(p2);
  require(regions_large_enough(b1, b2), "build_boundary_pairs: region-too-small");

  std::array<BoundaryPair, 8> pairs;
  const SimilarityTransform tinv = invert(t);
  for (int corner = 0; corner < 4; ++corner) {
    {
      const Box crop = corner_crop_box(b1, corner);
      BoundaryPair& pair = pairs[corner];
      pair.corner = corner;
      pair.a = global_crop(image, crop);
      WarpedPatch wp = warp_support(image, b2, tinv, crop);
      pair.b = std::move(wp.pixels);
      pair.vb = std::move(wp.validity);
    }
    {
      const Box crop = corner_crop_box(b2, corner);
      BoundaryPair& pair = pairs[4 + corner];
      pair.corner = corner;
      pair.a = global_crop(image, crop);
      WarpedPatch wp = warp_support(image, b1, t, crop);
      pair.b = std::move(wp.pixels);
      pair.vb = std::move(wp.validity);
    }
  }
  return pairs;
}

}  // namespace cmdis
