#pragma once

#include <span>
#include <string>
#include <vector>

#include "gsr/masks.hpp"
#include "gsr/splat.hpp"
#include "gsr/tsdf.hpp"

namespace gsr {

/// Ray-plane depth of `cloud` in every view, with pixels outside the view's
/// building mask set to kInvalidDepth.
std::vector<ImageD> render_depth_set(const GaussianCloud& cloud, std::span<const ViewRecord> views,
                                     std::span<const MaskBitmap> masks, const RasterSettings& settings = {});

/// Per-pixel mean of the valid depths; kInvalidDepth where none is valid.
ImageD fuse_overlapping_depths(std::span<const ImageD> depths);

enum class MergeMode {
  GlobalVolume,  // fuse every group's depth into one TSDF and extract once
  Concatenate,   // append per-group meshes, tagged with their group id
};

struct MeshingConfig {
  double voxel_size = 0.0;   // <= 0: smallest group diagonal / voxels_per_diagonal
  double truncation = 0.0;   // <= 0: 4 * voxel_size
  int voxels_per_diagonal = 256;
  MergeMode mode = MergeMode::GlobalVolume;
};

/// Depth maps rendered from one trained group.
struct GroupSurface {
  int group_id = 0;
  Aabb aabb;
  std::vector<int> view_indices;  // into scene.views
  std::vector<ImageD> depths;     // aligned with view_indices
};

double resolve_voxel_size(const MeshingConfig& config, std::span<const GroupSurface> groups);

/// TSDF reconstruction of a single group.
TriangleMesh mesh_group(const GroupSurface& group, const SceneBundle& scene, const MeshingConfig& config,
                        TsdfVolume* volume_out = nullptr);

/// Merges groups into one mesh. Global mode mean-fuses the depth maps that
/// different groups rendered for the same view, integrates them into one
/// volume spanning every group and extracts once. Concatenate mode meshes
/// each group separately and appends the results.
TriangleMesh merge_group_meshes(std::span<const GroupSurface> groups, const SceneBundle& scene,
                                const MeshingConfig& config, std::vector<std::string>* warnings = nullptr);

/// Appends meshes, tagging vertices with the given group ids.
TriangleMesh concatenate_meshes(std::span<const TriangleMesh> meshes, std::span<const int> group_ids);

}  // namespace gsr
