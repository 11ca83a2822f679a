#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gsr/masks.hpp"
#include "gsr/scene_io.hpp"
#include "gsr/types.hpp"

namespace gsr {

inline constexpr int kNoise = -1;

/// DBSCAN over 3D points. A point is core when at least `min_pts` points
/// (itself included) lie within distance `eps`. Clusters are discovered by
/// scanning points in index order; a border point takes the label of the
/// first cluster that reaches it. Returns per-point labels, kNoise for noise.
std::vector<int> dbscan_cluster(std::span<const Vec3> points, double eps, int min_pts);

struct BuildingGroup {
  int group_id = 0;
  std::vector<std::int64_t> point_ids;  // ascending
  std::vector<int> view_ids;            // ascending
  Aabb aabb;
  std::vector<std::string> warnings;
};

struct GroupingConfig {
  double eps = 15.0;
  int min_pts = 10;
  int min_group_votes = 5;
  double aabb_margin = 0.1;  // fraction of the extent per axis
};

/// Views in which at least `min_group_votes` group points project in front
/// of the camera, inside the image and inside the refined building mask.
/// Adds an empty-view warning to the group when nothing qualifies.
std::vector<int> assign_views(BuildingGroup& group, const SceneBundle& scene,
                              const std::vector<RefinedMask>& refined, int min_group_votes);

/// Clusters reliable points into groups; noise points join the nearest
/// cluster centroid within 2*eps or are dropped. Throws when DBSCAN finds no
/// cluster at all.
std::vector<BuildingGroup> build_groups(const SceneBundle& scene, const ReliablePointSet& reliable,
                                        const std::vector<RefinedMask>& refined, const GroupingConfig& config);

class GroupingError : public Error {
 public:
  using Error::Error;
};

/// Refined masks for training one group: the fine segments hit by at least
/// `min_hits` of the group's own points, with their boundary band. Views
/// outside the group get empty masks. Aligned with scene.views.
std::vector<RefinedMask> group_refined_masks(const BuildingGroup& group, const SceneBundle& scene,
                                             const std::vector<SegmentLabelMap>& segments,
                                             const MaskPipelineConfig& config);

void save_group_manifest(const std::filesystem::path& path, const std::vector<BuildingGroup>& groups);
std::vector<BuildingGroup> load_group_manifest(const std::filesystem::path& path);

}  // namespace gsr
