#ifndef CMDIS_FOA_HPP
#define CMDIS_FOA_HPP

#include <array>

#include "cmdis/image.hpp"
#include "cmdis/transform.hpp"
#include "cmdis/warp.hpp"

namespace cmdis {

// Side of every network input patch.
inline constexpr int kPatchSize = 64;

// Input tensor for the four-branch scorer, built from a region pair and the
// transform t mapping region 1 onto region 2:
//   x1 = central crop of region 1's bounding box;
//   x2 = same crop of the backward reconstruction (region 2 warped by t^-1);
//   x3 = central crop of region 2's bounding box;
//   x4 = same crop of the forward reconstruction (region 1 warped by t).
// x1/x3 are direct image crops (fully valid); v2/v4 flag the valid pixels of
// the warped members.
struct PatchQuad {
  RasterImage x1, x2, x3, x4;
  BinaryMask v2, v4;
  Box box1, box2;  // the regions' bounding boxes
};

// One corner crop pair for the boundary scorer: `a` from the region's own
// bounding box, `b` the same-corner crop of the warped counterpart box,
// with vb flagging b's valid pixels. corner: 0 = top-left, 1 = top-right,
// 2 = bottom-left, 3 = bottom-right.
struct BoundaryPair {
  RasterImage a, b;
  BinaryMask vb;
  int corner = 0;
};

// Central kPatchSize crop of `box` (offsets floor-divided); box min side
// must be >= kPatchSize.
Box central_crop_box(const Box& box);
// Corner kPatchSize crop of `box`; same size requirement.
Box corner_crop_box(const Box& box, int corner);

// True when both bounding boxes can host a kPatchSize crop.
bool regions_large_enough(const Box& b1, const Box& b2);

// Builds the quad; throws "region-too-small" if either bounding box has a
// side under kPatchSize. `t` maps region 1 onto region 2.
PatchQuad build_quad(const RasterImage& image, const PixelSet& p1, const PixelSet& p2,
                     const SimilarityTransform& t);

// Corner crop pairs: [0..3] pair region 1's box with the counterpart warped
// from region 2 by t^-1; [4..7] pair region 2's box with the counterpart
// warped from region 1 by t.
std::array<BoundaryPair, 8> build_boundary_pairs(const RasterImage& image,
                                                 const PixelSet& p1, const PixelSet& p2,
                                                 const SimilarityTransform& t);

}  // namespace cmdis

#endif
