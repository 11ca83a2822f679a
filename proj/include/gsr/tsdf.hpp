#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "gsr/scene_io.hpp"
#include "gsr/types.hpp"

namespace gsr {

/// Voxel (i, j, k) has its centre at origin + voxel_size * (i, j, k).
struct TsdfVolume {
  Vec3 origin = Vec3::Zero();
  double voxel_size = 1.0;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<double> tsdf;    // in [-1, 1]
  std::vector<double> weight;  // 0 means never observed

  TsdfVolume() = default;
  TsdfVolume(const Vec3& origin, double voxel_size, std::array<int, 3> dims);

  /// Volume covering `box` with the given voxel size.
  static TsdfVolume covering(const Aabb& box, double voxel_size);

  std::size_t voxel_count() const { return tsdf.size(); }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 voxel_center(int i, int j, int k) const { return origin + voxel_size * Vec3(i, j, k); }
};

/// Projective TSDF update: for each voxel in front of the camera whose pixel
/// holds a valid depth d, sdf = d - z_cam; voxels with sdf <= -truncation are
/// left untouched, the rest receive clamp(sdf / truncation, -1, 1) as a
/// weight-1 running average. Requires truncation >= 2 * voxel_size.
void tsdf_integrate(TsdfVolume& volume, const ImageD& depth, const ViewRecord& view, double truncation);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> vertex_group;  // provenance tag per vertex, -1 if unknown

  bool empty() const { return triangles.empty(); }
  double area() const;
};

/// Marching cubes at iso-level 0 over cells whose eight corners all carry
/// weight. Vertices are shared along cell edges. Triangles wind
/// counter-clockwise when seen from the positive (free-space) side, so
/// their normals point out of the surface. Zero-area triangles are kept so
/// that the edge structure stays closed.
TriangleMesh extract_mesh(const TsdfVolume& volume, std::string* warning = nullptr);

void save_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh load_mesh_ply(const std::filesystem::path& path);
void save_mesh_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Raw little-endian float32 grids (`<stem>.tsdf.raw`, `<stem>.weight.raw`)
/// plus a JSON header `<stem>.json` describing origin, voxel size and dims.
void save_volume_raw(const std::filesystem::path& stem, const TsdfVolume& volume);

}  // namespace gsr
