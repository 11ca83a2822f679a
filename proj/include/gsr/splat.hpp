#pragma once

#include <vector>

#include "gsr/gaussian.hpp"
#include "gsr/scene_io.hpp"
#include "gsr/types.hpp"

namespace gsr {

/// Blending constants shared by the tiled renderer and its references.
struct RasterSettings {
  int tile_size = 16;
  double near_plane = 0.01;
  double low_pass = 0.3;           // added to the 2D covariance diagonal
  double alpha_max = 0.99;
  double alpha_min = 1.0 / 255.0;  // contributions below are skipped
  double min_transmittance = 1e-4;
  double soft_count_sharpness = 100.0;
  int threads = 0;                 // 0 = OpenMP default
};

/// Minimal-scale axis of the primitive (world frame), oriented so that it
/// faces the camera: n . (mu - center) < 0. Ties pick the lower axis index.
Vec3 flatten_normal(const GaussianPrimitive& prim, const ViewRecord& view);

/// Screen-space footprint and shading attributes of one primitive.
struct ProjectedGaussian {
  bool visible = false;
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  Vec3 conic = Vec3::Zero();  // (a, b, c) of the inverse covariance
  double depth = 0.0;         // camera-frame z of the mean, the sort key
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  Vec3 color_raw = Vec3::Zero();  // before clamping at zero
  Vec3 normal_cam = Vec3::Zero();
  double plane_offset = 0.0;  // n_cam . mu_cam
  int min_axis = 0;
  double normal_sign = 1.0;
  // Inclusive pixel bounds covering every pixel where alpha >= alpha_min.
  int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

/// EWA projection: cov2d = J W Sigma W^T J^T + low_pass * I. Primitives at or
/// in front of the near plane come back with visible == false.
ProjectedGaussian project_gaussian(const GaussianPrimitive& prim, int sh_degree, const ViewRecord& view,
                                   const RasterSettings& settings = {});

struct RenderedBuffers {
  ImageD color;          // 3 channels
  ImageD normal;         // 3 channels, camera frame, alpha-blended (unnormalized)
  ImageD distance;       // blended plane offsets
  ImageD depth;          // ray-plane depth, kInvalidDepth where undefined
  ImageD transmittance;  // final T
  ImageD soft_count;     // differentiable surrogate of `count`
  Image<int> count;      // number of blended primitives
  int degenerate_depth_pixels = 0;
};

/// Intermediate state kept between the forward and backward pass.
struct RasterState {
  std::vector<ProjectedGaussian> projected;
  std::vector<int> order;                    // visible primitives sorted by (depth, index)
  std::vector<std::vector<int>> tile_lists;  // per tile, sorted
  int tiles_x = 0;
  int tiles_y = 0;
  Vec3 background = Vec3::Zero();
};

RenderedBuffers rasterize_forward(const GaussianCloud& cloud, const ViewRecord& view, const Vec3& background,
                                  const RasterSettings& settings = {}, RasterState* state = nullptr);

/// Ray-plane depth D / (N . K^-1 p) for pixels with count > 0. Pixels with a
/// near-zero denominator or a non-positive result get kInvalidDepth and are
/// tallied in `degenerate`.
ImageD compute_depth_map(const RenderedBuffers& buffers, const ViewRecord& view, int* degenerate = nullptr);

/// Normals from the depth map via the four axis neighbours, camera facing.
/// Invalid pixels are (0,0,0).
ImageD depth_to_normal(const ImageD& depth, const ViewRecord& view);

/// Upstream gradients per pixel; empty images mean zero.
struct PixelGradients {
  ImageD color;       // 3 channels
  ImageD normal;      // 3 channels
  ImageD distance;    // 1 channel
  ImageD soft_count;  // 1 channel
  bool soft_count_opacity_only = false;  // route the soft-count gradient to opacity alone
};

struct RasterGradients {
  CloudGradients params;
  std::vector<Vec2> mean2d;  // dL/d(mean2d) in pixels, for densification
};

/// Exact reverse-mode gradients of the blending (colour, normal, distance and
/// soft-count channels). The sort order and the alpha_min skip are treated as
/// constants.
RasterGradients rasterize_backward(const GaussianCloud& cloud, const ViewRecord& view,
                                   const RasterSettings& settings, const RasterState& state,
                                   const PixelGradients& upstream);

/// Chain dL/d(depth) back onto dL/d(distance) and dL/d(normal).
void depth_map_backward(const RenderedBuffers& buffers, const ViewRecord& view, const ImageD& grad_depth,
                        PixelGradients& upstream);

/// Chain dL/d(depth normal) back onto dL/d(depth).
ImageD depth_to_normal_backward(const ImageD& depth, const ViewRecord& view, const ImageD& grad_normal);

/// Camera ray direction K^-1 (x, y, 1) for pixel centre (x, y).
inline Vec3 pixel_ray(const CameraIntrinsics& k, double x, double y) {
  return Vec3((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
}

}  // namespace gsr
