#ifndef CMDIS_WARP_HPP
#define CMDIS_WARP_HPP

#include "cmdis/image.hpp"
#include "cmdis/transform.hpp"

namespace cmdis {

// Result of warping onto an output grid. `pixels` and `validity` are sized
// box.width x box.height; invalid pixels hold the 0 sentinel.
struct WarpedPatch {
  Box box;
  RasterImage pixels;
  BinaryMask validity;
};

// Inverse-mapping bilinear warp. For each output grid point g in out_box the
// source is sampled at H^-1 * g, where the source raster occupies the
// rectangle with top-left `src_origin` in the shared coordinate frame.
// A sample is valid iff the source coordinate lies inside
// [0, w-1] x [0, h-1] of the source raster (boundary inclusive): samples
// whose interpolation support would require pixels outside the raster are
// flagged invalid, never extrapolated. Integer-offset warps reproduce the
// source bit-exactly on valid pixels.
WarpedPatch warp_image(const RasterImage& src, const SimilarityTransform& t,
                       const Box& out_box, Vec2 src_origin = {0.0, 0.0});

// Mask transport: bilinearly warps the 0/1 indicator field and thresholds at
// 0.5, ties mapping to foreground. Samples outside the source are background.
// The result is aligned to out_box (pixel (x, y) of the result corresponds to
// grid point (out_box.x0 + x, out_box.y0 + y)).
BinaryMask warp_mask(const BinaryMask& mask, const SimilarityTransform& t,
                     const Box& out_box);

// Forward-maps each point through the transform, rounds to the nearest grid
// point, and deduplicates. Result is in scan order.
PixelSet warp_points(const PixelSet& points, const SimilarityTransform& t);

// Mean squared error over the pixels marked valid in both validity masks,
// averaged over channels. `valid_fraction` receives the fraction of jointly
// valid pixels. Images must be the same size.
double masked_mse(const RasterImage& a, const BinaryMask& valid_a, const RasterImage& b,
                  const BinaryMask& valid_b, double* valid_fraction = nullptr);

}  // namespace cmdis

#endif
