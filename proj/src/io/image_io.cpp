#include "gsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace gsr {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PngImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ParseError("cannot open PNG file " + path.string());

  unsigned char header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw ParseError("not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("libpng initialization failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("corrupt PNG file " + path.string());
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian words
  png_read_update_info(png, info);

  PngImage out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  bit_depth = png_get_bit_depth(png, info);
  out.bit_depth = bit_depth;

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(rowbytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (bit_depth == 16) {
    for (int y = 0; y < out.height; ++y) {
      const auto* row = reinterpret_cast<const std::uint16_t*>(rows[y]);
      std::copy(row, row + out.width * out.channels,
                out.samples.begin() + static_cast<std::ptrdiff_t>(y) * out.width * out.channels);
    }
  } else {
    for (int y = 0; y < out.height; ++y) {
      std::copy(rows[y], rows[y] + out.width * out.channels,
                out.samples.begin() + static_cast<std::ptrdiff_t>(y) * out.width * out.channels);
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const PngImage& image) {
  if (image.bit_depth != 8 && image.bit_depth != 16) {
    throw Error("write_png: bit depth must be 8 or 16");
  }
  int color_type = 0;
  switch (image.channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 2: color_type = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw Error("write_png: unsupported channel count");
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot write PNG file " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG " + path.string());
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, image.bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (image.bit_depth == 16) png_set_swap(png);

  const int row_samples = image.width * image.channels;
  std::vector<unsigned char> row8(row_samples);
  std::vector<std::uint16_t> row16(row_samples);
  for (int y = 0; y < image.height; ++y) {
    const auto* src = image.samples.data() + static_cast<std::ptrdiff_t>(y) * row_samples;
    if (image.bit_depth == 16) {
      std::copy(src, src + row_samples, row16.begin());
      png_write_row(png, reinterpret_cast<png_const_bytep>(row16.data()));
    } else {
      for (int i = 0; i < row_samples; ++i) row8[i] = static_cast<unsigned char>(std::min<int>(src[i], 255));
      png_write_row(png, row8.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageD load_color_image(const std::filesystem::path& path) {
  const PngImage png = read_png(path);
  const double scale = png.bit_depth == 16 ? 65535.0 : 255.0;
  ImageD out(png.width, png.height, 3);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * png.width + x) * png.channels;
      for (int c = 0; c < 3; ++c) {
        const int src_c = png.channels >= 3 ? c : 0;
        out.at(x, y, c) = png.samples[base + src_c] / scale;
      }
    }
  }
  return out;
}

void save_color_image(const std::filesystem::path& path, const ImageD& rgb) {
  PngImage png;
  png.width = rgb.width();
  png.height = rgb.height();
  png.channels = 3;
  png.bit_depth = 8;
  png.samples.resize(rgb.pixel_count() * 3);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const int ch = std::min(c, rgb.channels() - 1);
        const double v = std::clamp(rgb.at(x, y, ch), 0.0, 1.0);
        png.samples[(static_cast<std::size_t>(y) * rgb.width() + x) * 3 + c] =
            static_cast<std::uint16_t>(std::lround(v * 255.0));
      }
    }
  }
  write_png(path, png);
}

}  // namespace gsr
