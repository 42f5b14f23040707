#ifndef CMDIS_IMAGE_IO_HPP
#define CMDIS_IMAGE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cmdis/image.hpp"

namespace cmdis {

// Loads a PNG or JPEG file (sniffed by magic bytes) as an RGB image in [0,1].
// Grayscale inputs are replicated across channels; alpha is dropped.
RasterImage load_image(const std::filesystem::path& path);

// PNG, 8-bit RGB, fixed encoder settings so output bytes are reproducible.
void save_png(const std::filesystem::path& path, const RasterImage& image);

// JPEG, 8-bit RGB, quality in [1,100], no chroma subsampling.
void save_jpeg(const std::filesystem::path& path, const RasterImage& image, int quality);

std::vector<std::uint8_t> encode_jpeg(const RasterImage& image, int quality);
RasterImage decode_jpeg(const std::vector<std::uint8_t>& bytes);

// In-memory encode/decode round trip; the degradation operator used by
// post-processing and robustness sweeps.
RasterImage jpeg_cycle(const RasterImage& image, int quality);

// Masks serialize as 8-bit grayscale PNG, 0 = background, 255 = foreground.
// On load any value >= 128 counts as foreground.
void save_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask load_mask_png(const std::filesystem::path& path);

// Label maps serialize as RGB PNG: pure green = source, pure red = target,
// pure blue = background.
void save_label_map_png(const std::filesystem::path& path, const LabelMap& map);
LabelMap load_label_map_png(const std::filesystem::path& path);

}  // namespace cmdis

#endif
