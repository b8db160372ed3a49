#include "hydramix/io/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "hydramix/io/binary.hpp"

namespace hydramix::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void on_png_error(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  *text = message;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

}  // namespace

Image8 read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path.string() + "'");
  std::uint8_t header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw FormatError("'" + path.string() + "' at offset 0: not a PNG file");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  png_infop info = png_create_info_struct(png);
  Image8 image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_expand(png);
  png_read_update_info(png, info);
  image.width = png_get_image_width(png, info);
  image.height = png_get_image_height(png, info);
  image.channels = png_get_channels(png, info);
  image.pixels.resize(image.width * image.height * image.channels);
  for (std::size_t y = 0; y < image.height; ++y) rows.push_back(image.pixels.data() + y * image.width * image.channels);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (image.channels != 1 && image.channels != 3) {
    throw FormatError("'" + path.string() + "': unsupported channel count " + std::to_string(image.channels));
  }
  return image;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw numerics::ContractError("write_png: 1 or 3 channels");
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw numerics::DimensionError("write_png: pixel buffer size does not match dimensions");
  }
  std::vector<std::uint8_t> encoded;
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("encoding '" + path.string() + "': " + error);
  }
  png_set_write_fn(
      png, &encoded,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        out->insert(out->end(), data, data + n);
      },
      nullptr);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows.push_back(const_cast<png_bytep>(image.pixels.data() + y * image.width * image.channels));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  write_file_atomic(path, encoded);
}

numerics::Tensor<float> to_tensor(const Image8& image) {
  const std::size_t c = image.channels, h = image.height, w = image.width;
  std::vector<float> out(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        out[(ch * h + y) * w + x] = static_cast<float>(image.pixels[(y * w + x) * c + ch]) / 127.5f - 1.0f;
  return numerics::Tensor<float>({c, h, w}, std::move(out));
}

Image8 from_tensor(const numerics::Tensor<float>& t) {
  std::size_t c, h, w;
  if (t.rank() == 3) {
    c = t.dim(0), h = t.dim(1), w = t.dim(2);
  } else if (t.rank() == 4 && t.dim(0) == 1) {
    c = t.dim(1), h = t.dim(2), w = t.dim(3);
  } else {
    throw numerics::DimensionError("from_tensor: expected C x H x W, got " + numerics::shape_str(t.shape()));
  }
  Image8 image{w, h, c, std::vector<std::uint8_t>(c * h * w)};
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const float v = std::round((t[(ch * h + y) * w + x] + 1.0f) * 127.5f);
        image.pixels[(y * w + x) * c + ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
      }
  return image;
}

}  // namespace hydramix::io
