#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsr/types.hpp"

namespace gsr {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
  }
};

/// A posed pinhole camera. `rotation` maps world to camera coordinates and
/// `center` is the camera position in world coordinates, so a world point X
/// has camera coordinates rotation * (X - center).
struct ViewRecord {
  int view_id = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();
  CameraIntrinsics intrinsics;
  std::string name;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  std::filesystem::path segment_path;
};

struct SparsePoint {
  std::int64_t point_id = 0;
  Vec3 xyz = Vec3::Zero();
  Vec3 color = Vec3::Constant(0.5);  // RGB in [0,1]
  double error = 0.0;
  std::vector<int> track;            // observing view ids
};

struct SceneBundle {
  std::vector<ViewRecord> views;
  std::vector<SparsePoint> points;

  /// Index of a view in `views`, or -1.
  int view_index(int view_id) const;
  const ViewRecord& view(int view_id) const;
  void rebuild_index();

 private:
  std::unordered_map<int, int> view_lookup_;
};

/// Parses cameras.txt, images.txt and points3D.txt from `dir`.
SceneBundle load_sparse_model(const std::filesystem::path& dir);

void write_sparse_model(const SceneBundle& scene, const std::filesystem::path& dir);

/// Loads a scene directory: sparse model under `sparse/` (or the root),
/// images under `images/`, coarse masks under `masks/` and fine segment
/// label maps under `segments/` (both PNG, named after the image stem).
SceneBundle load_scene(const std::filesystem::path& root);

Mat3 quaternion_to_rotation(double w, double x, double y, double z);
Vec4 rotation_to_quaternion(const Mat3& r);  // (w, x, y, z), w >= 0

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

Projection project_point(const Vec3& xyz, const ViewRecord& view);

struct PixelIndex {
  int x = 0;
  int y = 0;
};

/// Pixel containing a projection. Pixel centres sit at integer coordinates;
/// coordinates are rounded to nearest with ties toward negative infinity.
/// Returns nullopt when z <= 0 or the pixel is outside the image.
std::optional<PixelIndex> projection_pixel(const Projection& p, const CameraIntrinsics& k);

/// Point cloud helpers over PLY files with x/y/z vertex properties.
std::vector<Vec3> read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const std::vector<Vec3>& points);

}  // namespace gsr
