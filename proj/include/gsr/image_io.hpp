#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gsr/types.hpp"

namespace gsr {

/// Raw PNG samples widened to 16 bits; `bit_depth` records the stored depth.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

PngImage read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const PngImage& image);

/// Loads an 8- or 16-bit PNG as RGB in [0,1]. Gray images are replicated.
ImageD load_color_image(const std::filesystem::path& path);

/// Writes an RGB image in [0,1] (values clamped) as 8-bit PNG.
void save_color_image(const std::filesystem::path& path, const ImageD& rgb);

}  // namespace gsr
