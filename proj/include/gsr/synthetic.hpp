#pragma once

// Procedural scenes with exact geometry, used by the acceptance suite and
// the `synth` subcommand.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gsr/masks.hpp"
#include "gsr/scene_io.hpp"

namespace gsr {

/// A textured triangle. `building` is 0 for the ground, otherwise the id of
/// the building it belongs to; `segment` is the fine segment label.
struct SceneTriangle {
  std::array<Vec3, 3> v;
  int building = 0;
  int segment = 0;
  Vec3 base_color = Vec3::Constant(0.5);
  double texture_frequency = 12.0;  // radians per world unit
};

struct RayHit {
  double t = 0.0;
  int triangle = -1;
};

/// Triangle soup with brute-force ray casting; fine for a few hundred triangles.
class SyntheticWorld {
 public:
  void add_triangle(const SceneTriangle& tri);
  /// Axis-aligned box standing on z = min.z(); the bottom face is omitted.
  void add_box(const Vec3& min, const Vec3& max, int building, const Vec3& color);
  /// Box walls up to `eave_height` with a gable roof whose ridge runs along x
  /// at `ridge_height`.
  void add_gable_house(const Vec3& min, const Vec3& max, double eave_height, double ridge_height, int building,
                       const Vec3& color);
  void add_ground(double half_size, double z = 0.0);

  RayHit cast(const Vec3& origin, const Vec3& dir) const;
  Vec3 shade(int triangle, const Vec3& point) const;
  Vec3 normal(int triangle) const;
  const std::vector<SceneTriangle>& triangles() const { return tris_; }

  /// Area-uniform samples on building triangles at roughly one point per
  /// spacing^2. Deterministic for a seed.
  std::vector<Vec3> sample_buildings(double spacing, std::uint64_t seed, std::vector<int>* triangle_ids = nullptr) const;

 private:
  std::vector<SceneTriangle> tris_;
  int next_segment_ = 1;
};

struct SyntheticSceneConfig {
  int views = 20;
  int width = 128;
  int height = 128;
  double focal = 120.0;
  double orbit_radius = 10.0;
  double elevation_deg = 50.0;
  Vec3 look_target = Vec3::Zero();
  int supersample = 2;
  double point_spacing = 0.12;  // sparse point density on buildings
  int ground_points = 150;
  double gt_spacing = 0.02;
  std::uint64_t seed = 7;
};

struct SyntheticScene {
  SceneBundle scene;
  std::vector<ImageD> images;
  std::vector<MaskBitmap> masks;  // exact building masks
  std::vector<SegmentLabelMap> segments;
  std::vector<ImageD> depth;    // camera z, kInvalidDepth off the buildings
  std::vector<ImageD> normals;  // camera-frame unit normals of building pixels
  std::vector<Vec3> gt_points;  // dense building surface samples
  std::vector<int> gt_building;
};

/// Renders `world` from `views` orbiting cameras and samples sparse points
/// with visibility tracks.
SyntheticScene render_synthetic_scene(const SyntheticWorld& world, const SyntheticSceneConfig& config);

/// Two textured boxes of different sizes on a ground plane.
SyntheticWorld two_box_world();
/// One house whose gable roof has a sharp ridge.
SyntheticWorld gable_house_world();

/// Writes the scene directory layout read by load_scene plus `gt.ply`.
void write_synthetic_scene(const std::filesystem::path& dir, const SyntheticScene& scene);

}  // namespace gsr
