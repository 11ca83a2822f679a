#include <cmath>

#include "gsr/splat.hpp"

namespace gsr {
namespace {

constexpr double kMinDenominator = 1e-6;

Vec3 read3(const ImageD& img, int x, int y) { return Vec3(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)); }

void add3(ImageD& img, int x, int y, const Vec3& v) {
  for (int c = 0; c < 3; ++c) img.at(x, y, c) += v[c];
}

}  // namespace

ImageD compute_depth_map(const RenderedBuffers& buffers, const ViewRecord& view, int* degenerate) {
  const auto& k = view.intrinsics;
  ImageD depth(k.width, k.height, 1, kInvalidDepth);
  int bad = 0;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (buffers.count.at(x, y) == 0) continue;
      const double den = read3(buffers.normal, x, y).dot(pixel_ray(k, x, y));
      if (std::abs(den) <= kMinDenominator) {
        ++bad;
        continue;
      }
      const double z = buffers.distance.at(x, y) / den;
      if (!(z > 0)) {
        ++bad;
        continue;
      }
      depth.at(x, y) = z;
    }
  }
  if (degenerate) *degenerate = bad;
  return depth;
}

void depth_map_backward(const RenderedBuffers& buffers, const ViewRecord& view, const ImageD& grad_depth,
                        PixelGradients& up) {
  const auto& k = view.intrinsics;
  if (up.distance.empty()) up.distance = ImageD(k.width, k.height, 1);
  if (up.normal.empty()) up.normal = ImageD(k.width, k.height, 3);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const double g = grad_depth.at(x, y);
      if (g == 0.0 || !is_valid_depth(buffers.depth.at(x, y))) continue;
      const Vec3 ray = pixel_ray(k, x, y);
      const double den = read3(buffers.normal, x, y).dot(ray);
      const double dist = buffers.distance.at(x, y);
      up.distance.at(x, y) += g / den;
      add3(up.normal, x, y, (-g * dist / (den * den)) * ray);
    }
  }
}

namespace {

bool neighbours_valid(const ImageD& depth, int x, int y) {
  return is_valid_depth(depth.at(x, y)) && is_valid_depth(depth.at(x - 1, y)) &&
         is_valid_depth(depth.at(x + 1, y)) && is_valid_depth(depth.at(x, y - 1)) &&
         is_valid_depth(depth.at(x, y + 1));
}

Vec3 backproject(const ImageD& depth, const CameraIntrinsics& k, int x, int y) {
  return depth.at(x, y) * pixel_ray(k, x, y);
}

}  // namespace

ImageD depth_to_normal(const ImageD& depth, const ViewRecord& view) {
  const auto& k = view.intrinsics;
  ImageD normals(k.width, k.height, 3);
  for (int y = 1; y + 1 < k.height; ++y) {
    for (int x = 1; x + 1 < k.width; ++x) {
      if (!neighbours_valid(depth, x, y)) continue;
      const Vec3 down_up = backproject(depth, k, x, y + 1) - backproject(depth, k, x, y - 1);
      const Vec3 right_left = backproject(depth, k, x + 1, y) - backproject(depth, k, x - 1, y);
      const Vec3 c = down_up.cross(right_left);
      const double len = c.norm();
      if (len == 0.0) continue;
      add3(normals, x, y, c / len);
    }
  }
  return normals;
}

ImageD depth_to_normal_backward(const ImageD& depth, const ViewRecord& view, const ImageD& grad_normal) {
  const auto& k = view.intrinsics;
  ImageD grad_depth(k.width, k.height, 1);
  for (int y = 1; y + 1 < k.height; ++y) {
    for (int x = 1; x + 1 < k.width; ++x) {
      const Vec3 g = read3(grad_normal, x, y);
      if (g.isZero() || !neighbours_valid(depth, x, y)) continue;
      const Vec3 a = backproject(depth, k, x, y + 1) - backproject(depth, k, x, y - 1);
      const Vec3 b = backproject(depth, k, x + 1, y) - backproject(depth, k, x - 1, y);
      const Vec3 c = a.cross(b);
      const double len = c.norm();
      if (len == 0.0) continue;
      const Vec3 n = c / len;
      const Vec3 g_c = (g - n * n.dot(g)) / len;
      const Vec3 g_a = b.cross(g_c);
      const Vec3 g_b = g_c.cross(a);
      grad_depth.at(x, y + 1) += g_a.dot(pixel_ray(k, x, y + 1));
      grad_depth.at(x, y - 1) -= g_a.dot(pixel_ray(k, x, y - 1));
      grad_depth.at(x + 1, y) += g_b.dot(pixel_ray(k, x + 1, y));
      grad_depth.at(x - 1, y) -= g_b.dot(pixel_ray(k, x - 1, y));
    }
  }
  return grad_depth;
}

}  // namespace gsr
