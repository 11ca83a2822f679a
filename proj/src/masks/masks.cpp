#include "gsr/masks.hpp"

#include <algorithm>
#include <numeric>

#include "gsr/image_io.hpp"

namespace gsr {
namespace {

void check_shape(const std::filesystem::path& path, const PngImage& png, const CameraIntrinsics& k) {
  if (png.width != k.width || png.height != k.height) {
    throw ShapeError("image " + path.string() + " does not match its view", k.width, k.height,
                     png.width, png.height);
  }
}

// Separable sliding max/min with a square window of half-width r.
MaskBitmap morph(const MaskBitmap& in, int r, bool dilation) {
  const int w = in.width();
  const int h = in.height();
  const bool outside = false;  // zero padding
  MaskBitmap tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool acc = !dilation;
      for (int dx = -r; dx <= r; ++dx) {
        const int xx = x + dx;
        const bool v = (xx >= 0 && xx < w) ? in.test(xx, y) : outside;
        if (dilation ? v : !v) {
          acc = dilation;
          break;
        }
      }
      tmp.set(x, y, acc);
    }
  }
  MaskBitmap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool acc = !dilation;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        const bool v = (yy >= 0 && yy < h) ? tmp.test(x, yy) : outside;
        if (dilation ? v : !v) {
          acc = dilation;
          break;
        }
      }
      out.set(x, y, acc);
    }
  }
  return out;
}

MaskBitmap mask_from_png(const PngImage& png) {
  MaskBitmap m(png.width, png.height);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      m.set(x, y, png.samples[(static_cast<std::size_t>(y) * png.width + x) * png.channels] != 0);
    }
  }
  return m;
}

SegmentLabelMap labels_from_png(const PngImage& png) {
  SegmentLabelMap m(png.width, png.height);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      m.set(x, y, png.samples[(static_cast<std::size_t>(y) * png.width + x) * png.channels]);
    }
  }
  return m;
}

}  // namespace

std::size_t MaskBitmap::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

MaskBitmap load_mask(const std::filesystem::path& path) { return mask_from_png(read_png(path)); }

MaskBitmap load_mask(const std::filesystem::path& path, const CameraIntrinsics& expected) {
  const PngImage png = read_png(path);
  check_shape(path, png, expected);
  return mask_from_png(png);
}

void save_mask(const std::filesystem::path& path, const MaskBitmap& mask) {
  PngImage png;
  png.width = mask.width();
  png.height = mask.height();
  png.channels = 1;
  png.bit_depth = 8;
  png.samples.resize(mask.bits().size());
  std::transform(mask.bits().begin(), mask.bits().end(), png.samples.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint16_t>(b ? 255 : 0); });
  write_png(path, png);
}

SegmentLabelMap load_segment_labels(const std::filesystem::path& path) {
  return labels_from_png(read_png(path));
}

SegmentLabelMap load_segment_labels(const std::filesystem::path& path, const CameraIntrinsics& expected) {
  const PngImage png = read_png(path);
  check_shape(path, png, expected);
  return labels_from_png(png);
}

void save_segment_labels(const std::filesystem::path& path, const SegmentLabelMap& labels) {
  PngImage png;
  png.width = labels.width();
  png.height = labels.height();
  png.channels = 1;
  png.bit_depth = 16;
  png.samples.resize(labels.labels().size());
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    const auto l = labels.labels()[i];
    if (l < 0 || l > 65535) throw Error("segment label out of 16-bit range");
    png.samples[i] = static_cast<std::uint16_t>(l);
  }
  write_png(path, png);
}

MaskBitmap dilate(const MaskBitmap& mask, int radius) {
  return radius <= 0 ? mask : morph(mask, radius, true);
}

MaskBitmap erode(const MaskBitmap& mask, int radius) {
  return radius <= 0 ? mask : morph(mask, radius, false);
}

MaskBitmap extract_boundary(const MaskBitmap& rbm, int band_radius) {
  if (band_radius < 1) throw Error("extract_boundary: band radius must be >= 1");
  const MaskBitmap d = dilate(rbm, band_radius);
  const MaskBitmap e = erode(rbm, band_radius);
  MaskBitmap mb(rbm.width(), rbm.height());
  for (int y = 0; y < rbm.height(); ++y) {
    for (int x = 0; x < rbm.width(); ++x) mb.set(x, y, d.test(x, y) != e.test(x, y));
  }
  return mb;
}

}  // namespace gsr
