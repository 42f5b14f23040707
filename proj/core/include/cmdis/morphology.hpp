#ifndef CMDIS_MORPHOLOGY_HPP
#define CMDIS_MORPHOLOGY_HPP

#include <vector>

#include "cmdis/image.hpp"

namespace cmdis {

// Square structuring element of the given side with its anchor at the
// top-left cell: offsets {0..side-1} x {0..side-1}. Erosion uses
// (A minus B)(p) = AND over b of A(p+b); dilation (A plus B)(p) = OR over
// b of A(p-b); pixels outside the mask read as background.
BinaryMask erode_square(const BinaryMask& mask, int side);
BinaryMask dilate_square(const BinaryMask& mask, int side);

// Opening = erosion then dilation with the same element. Removes isolated
// pixels and hairline bridges while leaving solid interiors intact.
BinaryMask open_square(const BinaryMask& mask, int side);

// Repeated dilation with the 3x3 (8-neighbourhood) element.
BinaryMask dilate3x3(const BinaryMask& mask, int iterations);
// Repeated erosion with the 3x3 element.
BinaryMask erode3x3(const BinaryMask& mask, int iterations);

// 8-connected components, sorted by pixel count descending; ties broken by
// the scan-order position of the first pixel. Pixels within each component
// are in scan order.
std::vector<PixelSet> connected_components(const BinaryMask& mask);

}  // namespace cmdis

#endif
