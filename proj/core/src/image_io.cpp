#include "cmdis/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <jpeglib.h>
#include <png.h>

namespace cmdis {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open file for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), "write failed: " + path.string());
}

// ---- PNG ----

struct PngReadCtx {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void png_read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (ctx->pos + len > ctx->size) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, ctx->data + ctx->pos, len);
  ctx->pos += len;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_fn(png_structp) {}

// Decodes PNG bytes to 8-bit RGB rows.
std::vector<std::uint8_t> decode_png_rgb(const std::vector<std::uint8_t>& bytes,
                                         int& width, int& height) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, "png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png: allocation failure");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  PngReadCtx ctx{bytes.data(), bytes.size(), 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("png: corrupt or truncated stream");
  }
  png_set_read_fn(png, &ctx, png_read_fn);
  png_read_info(png, info);

  png_set_expand(png);          // palette/low-bit/tRNS to 8-bit
  png_set_strip_16(png);        // 16-bit to 8-bit
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  require(png_get_channels(png, info) == 3, "png: unexpected channel count after expansion");

  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  for (int y = 0; y < height; ++y)
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int width, int height,
                                     int channels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, "png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: allocation failure");
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encode failure");
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  // Pinned settings: byte-identical output for identical pixels.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_SUB);
  int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               8, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return out;
}

// ---- JPEG ----

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

bool looks_like_png(const std::vector<std::uint8_t>& bytes) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

bool looks_like_jpeg(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0xff && bytes[1] == 0xd8;
}

std::vector<std::uint8_t> quantize_rgb(const RasterImage& image) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(image.width()) *
                                  image.height() * 3);
  const auto& d = image.data();
  for (std::size_t i = 0; i < d.size(); ++i) bytes[i] = to_byte(d[i]);
  return bytes;
}

RasterImage image_from_rgb8(const std::uint8_t* bytes, int width, int height) {
  RasterImage out(width, height);
  auto& d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = from_byte(bytes[i]);
  return out;
}

}  // namespace

RasterImage load_image(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (looks_like_png(bytes)) {
    int w = 0, h = 0;
    auto pixels = decode_png_rgb(bytes, w, h);
    return image_from_rgb8(pixels.data(), w, h);
  }
  if (looks_like_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error("unsupported image format: " + path.string());
}

void save_png(const std::filesystem::path& path, const RasterImage& image) {
  require(!image.empty(), "save_png: empty image");
  auto bytes = quantize_rgb(image);
  write_file(path, encode_png(bytes.data(), image.width(), image.height(), 3));
}

std::vector<std::uint8_t> encode_jpeg(const RasterImage& image, int quality) {
  require(!image.empty(), "encode_jpeg: empty image");
  require(quality >= 1 && quality <= 100, "encode_jpeg: quality must be in [1,100]");
  auto rgb = quantize_rgb(image);

  jpeg_compress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long buffer_size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    if (buffer) free(buffer);
    throw Error("jpeg: encode failure");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &buffer_size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width());
  cinfo.image_height = static_cast<JDIMENSION>(image.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  // 4:4:4 — no chroma subsampling, keeps high-frequency chroma intact.
  for (int c = 0; c < cinfo.num_components; ++c) {
    cinfo.comp_info[c].h_samp_factor = 1;
    cinfo.comp_info[c].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(image.width()) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(rgb.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + buffer_size);
  free(buffer);
  return out;
}

RasterImage decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error("jpeg: corrupt or truncated stream");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  require(jpeg_read_header(&cinfo, TRUE) == JPEG_HEADER_OK, "jpeg: bad header");
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  int width = static_cast<int>(cinfo.output_width);
  int height = static_cast<int>(cinfo.output_height);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image_from_rgb8(rgb.data(), width, height);
}

void save_jpeg(const std::filesystem::path& path, const RasterImage& image, int quality) {
  write_file(path, encode_jpeg(image, quality));
}

RasterImage jpeg_cycle(const RasterImage& image, int quality) {
  return decode_jpeg(encode_jpeg(image, quality));
}

void save_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  require(!mask.empty(), "save_mask_png: empty mask");
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(mask.width()) * mask.height());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.data()[i] ? 255 : 0;
  write_file(path, encode_png(gray.data(), mask.width(), mask.height(), 1));
}

BinaryMask load_mask_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  require(looks_like_png(bytes), "mask file is not a PNG: " + path.string());
  int w = 0, h = 0;
  auto rgb = decode_png_rgb(bytes, w, h);
  BinaryMask mask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      // Average the channels so RGB-saved masks load the same way.
      int v = (rgb[i] + rgb[i + 1] + rgb[i + 2]) / 3;
      mask.set(x, y, v >= 128);
    }
  return mask;
}

void save_label_map_png(const std::filesystem::path& path, const LabelMap& map) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(map.width()) * map.height() * 3, 0);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      std::size_t i = (static_cast<std::size_t>(y) * map.width() + x) * 3;
      switch (map.at(x, y)) {
        case RegionLabel::source: rgb[i + 1] = 255; break;
        case RegionLabel::target: rgb[i] = 255; break;
        case RegionLabel::background: rgb[i + 2] = 255; break;
      }
    }
  write_file(path, encode_png(rgb.data(), map.width(), map.height(), 3));
}

LabelMap load_label_map_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  require(looks_like_png(bytes), "label map file is not a PNG: " + path.string());
  int w = 0, h = 0;
  auto rgb = decode_png_rgb(bytes, w, h);
  LabelMap map(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      std::uint8_t r = rgb[i], g = rgb[i + 1], b = rgb[i + 2];
      if (g >= 128 && r < 128) map.set(x, y, RegionLabel::source);
      else if (r >= 128 && g < 128) map.set(x, y, RegionLabel::target);
      else if (b >= 128) map.set(x, y, RegionLabel::background);
      else throw Error("label map: pixel is not pure red/green/blue in " + path.string());
    }
  return map;
}

}  // namespace cmdis
