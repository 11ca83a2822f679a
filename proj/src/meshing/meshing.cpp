#include "gsr/meshing.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace gsr {

std::vector<ImageD> render_depth_set(const GaussianCloud& cloud, std::span<const ViewRecord> views,
                                     std::span<const MaskBitmap> masks, const RasterSettings& settings) {
  if (views.size() != masks.size()) throw Error("render_depth_set: one mask per view required");
  std::vector<ImageD> out;
  out.reserve(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    RenderedBuffers buf = rasterize_forward(cloud, views[v], Vec3::Zero(), settings);
    ImageD depth = std::move(buf.depth);
    const MaskBitmap& m = masks[v];
    for (int y = 0; y < depth.height(); ++y) {
      for (int x = 0; x < depth.width(); ++x) {
        if (!m.test(x, y)) depth.at(x, y) = kInvalidDepth;
      }
    }
    out.push_back(std::move(depth));
  }
  return out;
}

ImageD fuse_overlapping_depths(std::span<const ImageD> depths) {
  if (depths.empty()) throw Error("fuse_overlapping_depths: no depth maps");
  const int w = depths[0].width();
  const int h = depths[0].height();
  for (const auto& d : depths) {
    if (d.width() != w || d.height() != h) throw ShapeError("fused depth map", w, h, d.width(), d.height());
  }
  ImageD fused(w, h, 1, kInvalidDepth);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (const auto& d : depths) {
        if (is_valid_depth(d.at(x, y))) {
          sum += d.at(x, y);
          ++n;
        }
      }
      if (n > 0) fused.at(x, y) = sum / n;
    }
  }
  return fused;
}

double resolve_voxel_size(const MeshingConfig& config, std::span<const GroupSurface> groups) {
  if (config.voxel_size > 0) return config.voxel_size;
  double diag = std::numeric_limits<double>::infinity();
  for (const auto& g : groups) diag = std::min(diag, g.aabb.diagonal());
  if (!std::isfinite(diag) || diag <= 0) throw Error("cannot derive a voxel size from empty groups");
  return diag / config.voxels_per_diagonal;
}

namespace {

double resolve_truncation(const MeshingConfig& config, double voxel) {
  return config.truncation > 0 ? config.truncation : 4.0 * voxel;
}

}  // namespace

TriangleMesh mesh_group(const GroupSurface& group, const SceneBundle& scene, const MeshingConfig& config,
                        TsdfVolume* volume_out) {
  const double voxel = resolve_voxel_size(config, std::span<const GroupSurface>(&group, 1));
  const double trunc = resolve_truncation(config, voxel);
  TsdfVolume volume = TsdfVolume::covering(group.aabb, voxel);
  for (std::size_t i = 0; i < group.view_indices.size(); ++i) {
    tsdf_integrate(volume, group.depths[i], scene.views[group.view_indices[i]], trunc);
  }
  TriangleMesh mesh = extract_mesh(volume);
  std::fill(mesh.vertex_group.begin(), mesh.vertex_group.end(), group.group_id);
  if (volume_out) *volume_out = std::move(volume);
  return mesh;
}

TriangleMesh concatenate_meshes(std::span<const TriangleMesh> meshes, std::span<const int> group_ids) {
  TriangleMesh out;
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    const int offset = static_cast<int>(out.vertices.size());
    const int tag = m < group_ids.size() ? group_ids[m] : -1;
    out.vertices.insert(out.vertices.end(), meshes[m].vertices.begin(), meshes[m].vertices.end());
    out.vertex_group.insert(out.vertex_group.end(), meshes[m].vertices.size(), tag);
    for (const auto& t : meshes[m].triangles) out.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  }
  return out;
}

TriangleMesh merge_group_meshes(std::span<const GroupSurface> groups, const SceneBundle& scene,
                                const MeshingConfig& config, std::vector<std::string>* warnings) {
  if (groups.empty()) throw Error("merge_group_meshes: no groups");
  const double voxel = resolve_voxel_size(config, groups);

  if (config.mode == MergeMode::Concatenate) {
    MeshingConfig per_group = config;
    per_group.voxel_size = voxel;
    std::vector<TriangleMesh> meshes;
    std::vector<int> ids;
    for (const auto& g : groups) {
      meshes.push_back(mesh_group(g, scene, per_group));
      ids.push_back(g.group_id);
    }
    return concatenate_meshes(meshes, ids);
  }

  Aabb bounds = groups[0].aabb;
  for (const auto& g : groups) {
    bounds.min = bounds.min.cwiseMin(g.aabb.min);
    bounds.max = bounds.max.cwiseMax(g.aabb.max);
  }
  TsdfVolume volume = TsdfVolume::covering(bounds, voxel);
  const double trunc = resolve_truncation(config, voxel);

  std::map<int, std::vector<const ImageD*>> per_view;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.view_indices.size(); ++i) per_view[g.view_indices[i]].push_back(&g.depths[i]);
  }
  for (const auto& [view_index, maps] : per_view) {
    std::vector<ImageD> copies;
    copies.reserve(maps.size());
    for (const ImageD* m : maps) copies.push_back(*m);
    tsdf_integrate(volume, fuse_overlapping_depths(copies), scene.views[view_index], trunc);
  }
  std::string warning;
  TriangleMesh mesh = extract_mesh(volume, &warning);
  if (!warning.empty() && warnings) warnings->push_back(warning);

  // Tag vertices with the group whose box contains them.
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    for (const auto& g : groups) {
      if (g.aabb.contains(mesh.vertices[v])) {
        mesh.vertex_group[v] = g.group_id;
        break;
      }
    }
  }
  return mesh;
}

}  // namespace gsr
